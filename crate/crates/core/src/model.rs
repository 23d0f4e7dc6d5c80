//! Binary classifiers over discretized features.

use crate::data::DiscretizedDataset;
use crate::error::{Error, Result};
use crate::rng;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

/// A fitted black-box classifier returning labels in `{0, 1}`.
pub trait Classifier: Send + Sync {
    /// Feature labels, in the column order `predict_row` expects.
    fn feature_names(&self) -> &[String];

    fn predict_row(&self, codes: &[u32]) -> u8;

    fn predict(&self, features: &DiscretizedDataset) -> Result<Vec<u8>> {
        if features.labels() != self.feature_names() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {:?}, got {:?}",
                self.feature_names(),
                features.labels()
            )));
        }
        let p = features.n_cols();
        let cols: Vec<&[u32]> = (0..p).map(|j| features.codes(j)).collect();
        let mut row = vec![0u32; p];
        Ok((0..features.n_rows())
            .map(|i| {
                for (r, c) in row.iter_mut().zip(&cols) {
                    *r = c[i];
                }
                self.predict_row(&row)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means `ceil(sqrt(p))`.
    #[serde(default)]
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 6,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::Config("max_features must be positive".into()));
        }
        Ok(())
    }

    fn features_per_split(&self, p: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: u8,
    },
    /// Rows with `code <= threshold` go left.
    Split {
        feature: usize,
        threshold: u32,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, codes: &[u32]) -> u8 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { label } => return label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if codes[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

impl Classifier for Forest {
    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Majority vote, ties going to 1.
    fn predict_row(&self, codes: &[u32]) -> u8 {
        let ones = self.trees.iter().filter(|t| t.predict_row(codes) == 1).count();
        u8::from(2 * ones >= self.trees.len())
    }
}

impl Forest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(s)?;
        f.config.validate()?;
        Ok(f)
    }
}

/// Fits a random forest of Gini CART trees on the integer codes.
pub fn fit_forest(features: &DiscretizedDataset, labels: &[u8], config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    let n = features.n_rows();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Config(format!("labels must be 0 or 1, found {bad}")));
    }
    if n < 2 {
        return Err(Error::InsufficientSamples("classifier needs at least 2 rows".into()));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::SingleClassInput);
    }
    let p = features.n_cols();
    let cols: Vec<&[u32]> = (0..p).map(|j| features.codes(j)).collect();
    let mtry = config.features_per_split(p);
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut g = rng::seeded(rng::child_seed(config.seed, t as u64));
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| g.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                cols: &cols,
                labels,
                mtry,
                max_depth: config.max_depth,
                nodes: Vec::new(),
                rng: g,
            };
            b.grow(rows, 0);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(Forest {
        config: config.clone(),
        feature_names: features.labels().to_vec(),
        trees,
    })
}

struct Builder<'a> {
    cols: &'a [&'a [u32]],
    labels: &'a [u8],
    mtry: usize,
    max_depth: usize,
    nodes: Vec<Node>,
    rng: rng::Rng,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let ones = rows.iter().filter(|&&i| self.labels[i] == 1).count();
        let leaf = Node::Leaf {
            label: u8::from(2 * ones >= rows.len()),
        };
        self.nodes.push(leaf.clone());
        if depth >= self.max_depth || ones == 0 || ones == rows.len() {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, ones) else {
            return id;
        };
        let col = self.cols[feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| col[i] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Lowest weighted Gini over the sampled features; ties keep the first
    /// feature in sampled order and the lowest threshold.
    fn best_split(&mut self, rows: &[usize], ones: usize) -> Option<(usize, u32)> {
        let p = self.cols.len();
        let mut feats: Vec<usize> = sample(&mut self.rng, p, self.mtry).into_vec();
        feats.sort_unstable();
        let n = rows.len() as f64;
        let parent = gini(ones as f64, n);
        let mut best: Option<(f64, usize, u32)> = None;
        for f in feats {
            let col = self.cols[f];
            let top = rows.iter().map(|&i| col[i]).max().unwrap_or(0) as usize;
            let mut tot = vec![0usize; top + 1];
            let mut pos = vec![0usize; top + 1];
            for &i in rows {
                let c = col[i] as usize;
                tot[c] += 1;
                pos[c] += usize::from(self.labels[i]);
            }
            let (mut nl, mut ol) = (0usize, 0usize);
            for c in 0..top {
                nl += tot[c];
                ol += pos[c];
                if tot[c] == 0 || nl == 0 || nl == rows.len() {
                    continue;
                }
                let nr = rows.len() - nl;
                let or = ones - ol;
                let w = (nl as f64 * gini(ol as f64, nl as f64) + nr as f64 * gini(or as f64, nr as f64)) / n;
                if w < parent - 1e-12 && best.is_none_or(|(bw, _, _)| w < bw - 1e-12) {
                    best = Some((w, f, c as u32));
                }
            }
        }
        best.map(|(_, f, c)| (f, c))
    }
}

fn gini(ones: f64, n: f64) -> f64 {
    let q = ones / n;
    2.0 * q * (1.0 - q)
}

/// Predictions supplied by an external model.
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<u8>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() != 1 {
            return Err(Error::Parse {
                row: i,
                column: 2,
                message: "labels CSV must have a single column".into(),
            });
        }
        match rec[0].trim() {
            "0" => out.push(0),
            "1" => out.push(1),
            // A non-label first line is a header.
            _ if i == 0 => {}
            other => {
                return Err(Error::Parse {
                    row: i,
                    column: 1,
                    message: format!("label `{other}` is not 0 or 1"),
                })
            }
        }
    }
    Ok(out)
}

pub fn load_labels_csv(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    read_labels_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn table(seed: u64, n: usize) -> (DiscretizedDataset, Vec<u8>) {
        let mut g = rng::seeded(seed);
        let a: Vec<u32> = (0..n).map(|_| g.random_range(0..10)).collect();
        let b: Vec<u32> = (0..n).map(|_| g.random_range(0..10)).collect();
        let c: Vec<u32> = (0..n).map(|_| g.random_range(0..10)).collect();
        let y = a.iter().zip(&b).map(|(&u, &v)| u8::from(u + v >= 9)).collect();
        let d = DiscretizedDataset::from_codes(vec!["a".into(), "b".into(), "c".into()], vec![a, b, c]).unwrap();
        (d, y)
    }

    fn accuracy(p: &[u8], y: &[u8]) -> f64 {
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_table_is_learned() {
        let (d, y) = table(1, 3000);
        let f = fit_forest(&d, &y, &ForestConfig::default()).unwrap();
        let pred = f.predict(&d).unwrap();
        assert_eq!(pred.len(), 3000);
        assert!(accuracy(&pred, &y) >= 0.95, "{}", accuracy(&pred, &y));
        assert!(f.trees.iter().all(|t| t.depth() <= 6));
    }

    #[test]
    fn single_class_rejected() {
        let (d, _) = table(2, 50);
        assert_eq!(fit_forest(&d, &[0; 50], &ForestConfig::default()), Err(Error::SingleClassInput));
    }

    #[test]
    fn deterministic_per_seed() {
        let (d, y) = table(3, 500);
        let (probe, _) = table(4, 200);
        let cfg = ForestConfig {
            seed: 17,
            ..ForestConfig::default()
        };
        let a = fit_forest(&d, &y, &cfg).unwrap();
        let b = fit_forest(&d, &y, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict(&probe).unwrap(), b.predict(&probe).unwrap());
    }

    #[test]
    fn one_tree_vote_is_the_tree() {
        let (d, y) = table(5, 300);
        let cfg = ForestConfig {
            n_trees: 1,
            ..ForestConfig::default()
        };
        let f = fit_forest(&d, &y, &cfg).unwrap();
        for i in 0..d.n_rows() {
            let row = [d.codes(0)[i], d.codes(1)[i], d.codes(2)[i]];
            assert_eq!(f.predict_row(&row), f.trees[0].predict_row(&row));
        }
    }

    #[test]
    fn tie_votes_go_to_one() {
        let leaf = |label| Tree {
            nodes: vec![Node::Leaf { label }],
        };
        let f = Forest {
            config: ForestConfig::default(),
            feature_names: vec!["a".into()],
            trees: vec![leaf(0), leaf(1)],
        };
        assert_eq!(f.predict_row(&[0]), 1);
    }

    #[test]
    fn schema_mismatch() {
        let (d, y) = table(6, 100);
        let f = fit_forest(&d.select(&[0, 1]), &y, &ForestConfig::default()).unwrap();
        assert!(matches!(f.predict(&d), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn json_dump_round_trip() {
        let (d, y) = table(7, 200);
        let cfg = ForestConfig {
            n_trees: 3,
            ..ForestConfig::default()
        };
        let f = fit_forest(&d, &y, &cfg).unwrap();
        assert_eq!(Forest::from_json(&f.to_json()).unwrap(), f);
    }

    #[test]
    fn labels_csv() {
        assert_eq!(read_labels_csv("pred\n1\n0\n1\n".as_bytes()).unwrap(), vec![1, 0, 1]);
        assert_eq!(read_labels_csv("0\n1\n".as_bytes()).unwrap(), vec![0, 1]);
        assert!(read_labels_csv("pred\n2\n".as_bytes()).is_err());
        assert!(read_labels_csv("1,0\n".as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn training_accuracy_beats_majority(seed in 0u64..1000) {
            let (d, y) = table(seed, 400);
            let f = fit_forest(&d, &y, &ForestConfig { n_trees: 15, seed, ..ForestConfig::default() }).unwrap();
            let ones = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
            prop_assert!(accuracy(&f.predict(&d).unwrap(), &y) >= ones.max(1.0 - ones));
        }

        #[test]
        fn row_order_irrelevant_without_bootstrap(seed in 0u64..1000, shift in 1usize..399) {
            let (d, y) = table(seed, 400);
            let perm: Vec<usize> = (0..400).map(|i| (i + shift) % 400).collect();
            let codes: Vec<Vec<u32>> = (0..3).map(|j| perm.iter().map(|&i| d.codes(j)[i]).collect()).collect();
            let d2 = DiscretizedDataset::from_codes(d.labels().to_vec(), codes).unwrap();
            let y2: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
            let cfg = ForestConfig { n_trees: 5, bootstrap: false, seed, ..ForestConfig::default() };
            prop_assert_eq!(fit_forest(&d, &y, &cfg).unwrap(), fit_forest(&d2, &y2, &cfg).unwrap());
        }
    }
}
