use super::{Dag, Pdag};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// On-disk graph form:
/// `{"nodes": [...], "directed": [[i, j], ...], "undirected": [[i, j], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub directed: Vec<[usize; 2]>,
    #[serde(default)]
    pub undirected: Vec<[usize; 2]>,
}

impl From<&Dag> for GraphJson {
    fn from(d: &Dag) -> Self {
        Self {
            nodes: d.names().to_vec(),
            directed: d.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            undirected: Vec::new(),
        }
    }
}

impl From<&Pdag> for GraphJson {
    fn from(p: &Pdag) -> Self {
        Self {
            nodes: p.names().to_vec(),
            directed: p.directed_edges().into_iter().map(|(a, b)| [a, b]).collect(),
            undirected: p.undirected_edges().into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }
}

impl GraphJson {
    pub fn to_pdag(&self) -> Result<Pdag> {
        let d: Vec<_> = self.directed.iter().map(|&[a, b]| (a, b)).collect();
        let u: Vec<_> = self.undirected.iter().map(|&[a, b]| (a, b)).collect();
        Pdag::from_edges(self.nodes.clone(), &d, &u)
    }

    pub fn to_dag(&self) -> Result<Dag> {
        if !self.undirected.is_empty() {
            return Err(Error::InvalidGraph("a DAG cannot contain undirected edges".into()));
        }
        let d: Vec<_> = self.directed.iter().map(|&[a, b]| (a, b)).collect();
        Dag::new(self.nodes.clone(), &d)
    }
}

impl Dag {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphJson::from(self)).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<GraphJson>(s)?.to_dag()
    }

    /// Adjacency-matrix CSV: header of node labels, one row per parent, 0/1 entries.
    pub fn write_adjacency_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, ",{}", self.names().join(","))?;
        for (name, row) in self.names().iter().zip(self.adjacency_matrix()) {
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }
}

impl Pdag {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphJson::from(self)).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<GraphJson>(s)?.to_pdag()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::default_names;

    #[test]
    fn json_schema_round_trip() {
        let p = Pdag::from_edges(default_names(3), &[(0, 1)], &[(1, 2)]).unwrap();
        let s = p.to_json();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["directed"], serde_json::json!([[0, 1]]));
        assert_eq!(v["undirected"], serde_json::json!([[1, 2]]));
        assert_eq!(Pdag::from_json(&s).unwrap(), p);
        assert!(Dag::from_json(&s).is_err());
    }

    #[test]
    fn adjacency_csv_rows_are_parents() {
        let d = Dag::new(vec!["a".into(), "b".into()], &[(0, 1)]).unwrap();
        let mut buf = Vec::new();
        d.write_adjacency_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), ",a,b\na,0,1\nb,0,0\n");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Dag::from_json(r#"{"nodes":["a"],"weights":[]}"#).is_err());
    }
}
