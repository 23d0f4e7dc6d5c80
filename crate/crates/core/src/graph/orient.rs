use super::{BackgroundKnowledge, Pdag, SepsetTable};
use crate::error::{Error, Result};

/// A v-structure orientation that contradicted an edge already directed the
/// other way. The earlier orientation is kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientationConflict {
    /// `(x, z, y)` with `z` the collider candidate.
    pub triple: (usize, usize, usize),
    /// Orientation the triple asked for.
    pub requested: (usize, usize),
    /// Orientation left in place.
    pub kept: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct VStructureOrientation {
    pub pdag: Pdag,
    pub conflicts: Vec<OrientationConflict>,
}

/// Orients every unshielded triple `x - z - y` whose midpoint is missing from
/// `sepset(x, y)` as `x -> z <- y`.
///
/// Edges that are already directed are never overwritten: a triple asking for
/// the opposite direction is recorded as a conflict and skipped. Triples are
/// visited in index order, so the result is deterministic.
pub fn orient_v_structures(skeleton: &Pdag, sepsets: &SepsetTable) -> VStructureOrientation {
    let n = skeleton.n_nodes();
    let mut pdag = skeleton.clone();
    let mut conflicts = Vec::new();
    for z in 0..n {
        let nbrs = skeleton.neighbors(z);
        for (i, &x) in nbrs.iter().enumerate() {
            for &y in &nbrs[i + 1..] {
                if skeleton.adjacent(x, y) {
                    continue;
                }
                if sepsets.get(x, y).is_some_and(|s| s.contains(&z)) {
                    continue;
                }
                for end in [x, y] {
                    if pdag.is_undirected(end, z) {
                        pdag.orient(end, z);
                    } else if pdag.is_directed(z, end) {
                        log::warn!("v-structure {x}->{z}<-{y} conflicts with {z}->{end}; keeping the earlier orientation");
                        conflicts.push(OrientationConflict {
                            triple: (x, z, y),
                            requested: (end, z),
                            kept: (z, end),
                        });
                    }
                }
            }
        }
    }
    VStructureOrientation { pdag, conflicts }
}

/// Orients undirected edges according to background knowledge.
///
/// Fails when a directed edge already violates a constraint, a required edge
/// has no adjacency to carry it, or both directions of an edge are excluded.
pub(crate) fn apply_background_knowledge(pdag: &mut Pdag, bk: &BackgroundKnowledge) -> Result<()> {
    let n = pdag.n_nodes();
    bk.validate(n)?;
    for &(a, b) in &bk.required_edges {
        if !pdag.adjacent(a, b) {
            return Err(Error::ConstraintConflict(format!(
                "required edge ({a}, {b}) is absent from the skeleton"
            )));
        }
        if pdag.is_directed(b, a) {
            return Err(Error::ConstraintConflict(format!(
                "required edge ({a}, {b}) is oriented the other way"
            )));
        }
        pdag.orient(a, b);
    }
    for (a, b) in pdag.directed_edges() {
        if !bk.allows(a, b) {
            return Err(Error::ConstraintConflict(format!("edge ({a}, {b}) violates constraints")));
        }
    }
    for (a, b) in pdag.undirected_edges() {
        match (bk.allows(a, b), bk.allows(b, a)) {
            (true, true) => {}
            (true, false) => pdag.orient(a, b),
            (false, true) => pdag.orient(b, a),
            (false, false) => {
                return Err(Error::ConstraintConflict(format!(
                    "both orientations of edge ({a}, {b}) are excluded"
                )))
            }
        }
    }
    Ok(())
}

/// Applies background knowledge, then Meek's rules R1-R4 to a fixed point.
pub fn apply_meek_rules(pdag: &Pdag, bk: &BackgroundKnowledge) -> Result<Pdag> {
    let mut g = pdag.clone();
    apply_background_knowledge(&mut g, bk)?;
    let n = g.n_nodes();
    loop {
        let mut changed = false;
        for (a, b) in g.undirected_edges() {
            for (from, to) in [(a, b), (b, a)] {
                if g.is_undirected(from, to) && meek_orients(&g, from, to) {
                    g.orient(from, to);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    debug_assert_eq!(g.n_nodes(), n);
    Ok(g)
}

/// Whether one of R1-R4 forces the undirected edge `a - b` into `a -> b`.
fn meek_orients(g: &Pdag, a: usize, b: usize) -> bool {
    let n = g.n_nodes();
    // R1: c -> a - b, c and b non-adjacent.
    if (0..n).any(|c| c != b && g.is_directed(c, a) && !g.adjacent(c, b)) {
        return true;
    }
    // R2: a -> c -> b.
    if (0..n).any(|c| g.is_directed(a, c) && g.is_directed(c, b)) {
        return true;
    }
    // R3: a - c -> b and a - d -> b with c, d non-adjacent.
    let und: Vec<usize> = g
        .undirected_neighbors(a)
        .into_iter()
        .filter(|&c| c != b && g.is_directed(c, b))
        .collect();
    for (i, &c) in und.iter().enumerate() {
        if und[i + 1..].iter().any(|&d| !g.adjacent(c, d)) {
            return true;
        }
    }
    // R4: a - d, d -> c -> b, with a adjacent to c and d, b non-adjacent.
    for d in g.undirected_neighbors(a) {
        if d == b || g.adjacent(d, b) {
            continue;
        }
        if (0..n).any(|c| c != a && g.is_directed(d, c) && g.is_directed(c, b) && g.adjacent(a, c)) {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::default_names;

    fn und(n: usize, edges: &[(usize, usize)]) -> Pdag {
        Pdag::from_edges(default_names(n), &[], edges).unwrap()
    }

    #[test]
    fn collider_is_oriented_when_midpoint_not_in_sepset() {
        // X=0 - Z=1 - Y=2
        let mut sep = SepsetTable::new();
        sep.insert(0, 2, []);
        let out = orient_v_structures(&und(3, &[(0, 1), (1, 2)]), &sep);
        assert!(out.pdag.is_directed(0, 1));
        assert!(out.pdag.is_directed(2, 1));
        assert!(out.conflicts.is_empty());
    }

    #[test]
    fn no_orientation_when_midpoint_separates() {
        let mut sep = SepsetTable::new();
        sep.insert(0, 2, [1]);
        let out = orient_v_structures(&und(3, &[(0, 1), (1, 2)]), &sep);
        assert_eq!(out.pdag.undirected_edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn double_collider_sharing_midpoint() {
        // A=0, B=1, C=2, D=3 all pointing at Z=4; A-B and C-D adjacent.
        // Unshielded pairs through Z: (A,C),(A,D),(B,C),(B,D) -> every edge into Z.
        let skel = und(5, &[(0, 4), (1, 4), (2, 4), (3, 4), (0, 1), (2, 3)]);
        let mut sep = SepsetTable::new();
        for (a, b) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            sep.insert(a, b, []);
        }
        let out = orient_v_structures(&skel, &sep);
        for s in 0..4 {
            assert!(out.pdag.is_directed(s, 4), "edge {s}->Z");
        }
        assert!(out.pdag.is_undirected(0, 1));
        assert!(out.pdag.is_undirected(2, 3));
    }

    #[test]
    fn conflicting_v_structures_keep_first() {
        // chain 0 - 1 - 2 - 3 with empty sepsets everywhere: triple (0,1,2) orients 2->1,
        // triple (1,2,3) then asks for 1->2 and is recorded as a conflict.
        let mut sep = SepsetTable::new();
        sep.insert(0, 2, []);
        sep.insert(1, 3, []);
        sep.insert(0, 3, []);
        let out = orient_v_structures(&und(4, &[(0, 1), (1, 2), (2, 3)]), &sep);
        assert!(out.pdag.is_directed(2, 1));
        assert!(out.pdag.is_directed(3, 2));
        assert_eq!(out.conflicts.len(), 1);
        assert_eq!(out.conflicts[0].kept, (2, 1));
    }

    #[test]
    fn meek_r1() {
        // X=0 -> Z=1 - Y=2, X and Y non-adjacent.
        let p = Pdag::from_edges(default_names(3), &[(0, 1)], &[(1, 2)]).unwrap();
        let out = apply_meek_rules(&p, &BackgroundKnowledge::new()).unwrap();
        assert!(out.is_directed(1, 2));
    }

    #[test]
    fn meek_r2() {
        // 0 -> 1 -> 2 and 0 - 2 => 0 -> 2
        let p = Pdag::from_edges(default_names(3), &[(0, 1), (1, 2)], &[(0, 2)]).unwrap();
        let out = apply_meek_rules(&p, &BackgroundKnowledge::new()).unwrap();
        assert!(out.is_directed(0, 2));
    }

    #[test]
    fn meek_r3() {
        // a=0 undirected to c=1, d=2, b=3; c -> b <- d, c and d non-adjacent => a -> b
        let p = Pdag::from_edges(default_names(4), &[(1, 3), (2, 3)], &[(0, 1), (0, 2), (0, 3)])
            .unwrap();
        let out = apply_meek_rules(&p, &BackgroundKnowledge::new()).unwrap();
        assert!(out.is_directed(0, 3));
        assert!(out.is_undirected(0, 1));
    }

    #[test]
    fn meek_r4() {
        // a=0 - d=1, d -> c=2 -> b=3, a - c, a - b, d and b non-adjacent => a -> b
        let p = Pdag::from_edges(default_names(4), &[(1, 2), (2, 3)], &[(0, 1), (0, 2), (0, 3)])
            .unwrap();
        let out = apply_meek_rules(&p, &BackgroundKnowledge::new()).unwrap();
        assert!(out.is_directed(0, 3));
    }

    #[test]
    fn fully_directed_is_a_fixed_point() {
        let p = Pdag::from_edges(default_names(3), &[(0, 1), (2, 1)], &[]).unwrap();
        assert_eq!(apply_meek_rules(&p, &BackgroundKnowledge::new()).unwrap(), p);
    }

    #[test]
    fn sink_orients_incident_edges_inward() {
        // Y=0 - X=1 with Y a sink
        let p = und(2, &[(0, 1)]);
        let out = apply_meek_rules(&p, &BackgroundKnowledge::new().with_sink(0)).unwrap();
        assert!(out.is_directed(1, 0));
    }

    #[test]
    fn unsatisfiable_knowledge_is_reported() {
        let p = Pdag::from_edges(default_names(2), &[(0, 1)], &[]).unwrap();
        let bk = BackgroundKnowledge::new().with_sink(0);
        assert!(matches!(apply_meek_rules(&p, &bk), Err(Error::ConstraintConflict(_))));
        let bk = BackgroundKnowledge::new().require(0, 1);
        assert!(matches!(apply_meek_rules(&und(3, &[(1, 2)]), &bk), Err(Error::ConstraintConflict(_))));
    }
}
