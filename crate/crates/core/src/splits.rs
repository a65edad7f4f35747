//! r-splits: decomposing a tuple into far-apart groups, each located relative
//! to its leader through the leader's large-radius neighbourhood type.

use crate::db::{Database, Elem, Explorer};
use crate::error::{Error, Result};
use crate::neighbourhood::{ball_bound, extract_neighbourhood, NbType, TypeChecker, TypeRegistry, TypeSet};

/// Radius of the anchor neighbourhood around a group leader. Every member of
/// the group, and every shortest path of length at most 2r+1 between two
/// members, lies inside it.
pub fn anchor_radius(r: usize, k: usize) -> usize {
    (3 * r * k).max((2 * r + 1) * k.saturating_sub(1) + r + 1)
}

/// Partition of coordinates into groups: i and j are linked when
/// dist(b_i, b_j) ≤ 2r+1. Groups are ordered by their least coordinate.
pub fn group_coordinates(db: &Database, tuple: &[Elem], r: usize, ex: &mut Explorer) -> Vec<Vec<usize>> {
    let k = tuple.len();
    let mut uf: Vec<usize> = (0..k).collect();
    fn find(uf: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while uf[r] != r {
            r = uf[r];
        }
        uf[x] = r;
        r
    }
    for i in 0..k.saturating_sub(1) {
        ex.ball(db, &[tuple[i]], 2 * r + 1);
        for j in i + 1..k {
            if ex.in_ball(tuple[j]) {
                let (a, b) = (find(&mut uf, i), find(&mut uf, j));
                if a != b {
                    uf[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_group: Vec<Option<usize>> = vec![None; k];
    for i in 0..k {
        let root = find(&mut uf, i);
        match root_group[root] {
            Some(g) => groups[g].push(i),
            None => {
                root_group[root] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// One group of a split: coordinates (leader first), the anchor type of the
/// leader and the 1-based positions of the members in its representative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub coords: Vec<usize>,
    pub anchor: NbType,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RSplit {
    pub r: usize,
    pub k: usize,
    pub groups: Vec<Binding>,
}

impl RSplit {
    pub fn leaders(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.coords[0]).collect()
    }

    /// Every binding's member tuple, read in its representative, forms a
    /// single group at radius r.
    pub fn is_r_good(&self) -> bool {
        let mut ex = Explorer::default();
        self.groups.iter().all(|b| {
            let rep = b.anchor.representative();
            let members: Vec<Elem> = b.positions.iter().map(|&p| (p - 1) as Elem).collect();
            b.positions[0] == 1 && group_coordinates(rep, &members, self.r, &mut ex).len() == 1
        })
    }
}

/// The split of `tuple` at radius `r`, with anchors interned in `reg`.
pub fn unique_split_of(db: &Database, tuple: &[Elem], r: usize, reg: &TypeRegistry) -> Result<RSplit> {
    let k = tuple.len();
    let mut ex = Explorer::default();
    let radius = anchor_radius(r, k);
    let mut groups = Vec::new();
    for coords in group_coordinates(db, tuple, r, &mut ex) {
        let leader = tuple[coords[0]];
        let nb = extract_neighbourhood(db, &[leader], radius)?;
        let anchor = reg.intern(&nb);
        let emb = anchor.embedding_into_representative(&nb)?;
        let positions = coords
            .iter()
            .map(|&c| {
                let local = nb.fragment.local_of(tuple[c]).expect("member inside anchor ball");
                emb[local as usize] as usize + 1
            })
            .collect();
        groups.push(Binding {
            coords,
            anchor,
            positions,
        });
    }
    Ok(RSplit { r, k, groups })
}

/// The tuple found from leaders `a` and split `split`, if any.
pub fn found_from(db: &Database, a: &[Elem], split: &RSplit, reg: &TypeRegistry) -> Result<Option<Vec<Elem>>> {
    if a.len() != split.groups.len() {
        return Ok(None);
    }
    let radius = anchor_radius(split.r, split.k);
    let mut out: Vec<Option<Elem>> = vec![None; split.k];
    for (&ai, b) in a.iter().zip(&split.groups) {
        if ai as usize >= db.n() {
            return Err(Error::IndexOutOfRange {
                what: "element",
                value: ai as u64 + 1,
                bound: db.n() as u64,
            });
        }
        let nb = extract_neighbourhood(db, &[ai], radius)?;
        if reg.intern(&nb) != b.anchor {
            return Ok(None);
        }
        let emb = b.anchor.embedding_into_representative(&nb)?;
        let mut inv = vec![0 as Elem; emb.len()];
        for (local, &img) in emb.iter().enumerate() {
            inv[img as usize] = nb.fragment.original[local];
        }
        for (&c, &p) in b.coords.iter().zip(&b.positions) {
            out[c] = Some(inv[p - 1]);
        }
    }
    let tuple: Vec<Elem> = match out.into_iter().collect() {
        Some(t) => t,
        None => return Err(Error::Invalid("split does not cover every coordinate".into())),
    };
    let mut ex = Explorer::default();
    let groups = group_coordinates(db, &tuple, split.r, &mut ex);
    let expected: Vec<&Vec<usize>> = split.groups.iter().map(|b| &b.coords).collect();
    if groups.iter().collect::<Vec<_>>() != expected {
        return Ok(None);
    }
    Ok(Some(tuple))
}

/// Generates, for a tuple of leaders, every tuple whose r-type lies in a type
/// set and whose split has exactly those leaders. Non-leader coordinates are
/// searched in the leader's ball of the radius they have in the type's
/// representative; each candidate is confirmed by its type.
#[derive(Debug)]
pub struct FoundTuples<'a> {
    set: &'a TypeSet,
    by_components: Vec<Vec<usize>>,
    checker: TypeChecker<'a>,
    ex: Explorer,
    cands: Vec<Vec<Elem>>,
    tuple: Vec<Elem>,
    idx: Vec<usize>,
    /// Candidate tuples whose type was examined.
    pub candidates: u64,
}

impl<'a> FoundTuples<'a> {
    pub fn new(set: &'a TypeSet) -> Self {
        let k = set.arity();
        let mut by_components = vec![Vec::new(); k + 1];
        for (i, t) in set.types().iter().enumerate() {
            by_components[t.components()].push(i);
        }
        FoundTuples {
            set,
            by_components,
            checker: set.checker(),
            ex: Explorer::default(),
            cands: vec![Vec::new(); k],
            tuple: vec![0; k],
            idx: vec![0; k],
            candidates: 0,
        }
    }

    pub fn oracle_calls(&self) -> u64 {
        self.ex.oracle_calls + self.checker.oracle_calls()
    }

    /// Calls `f` on each found tuple; stops early when `f` returns false.
    pub fn for_each(&mut self, db: &Database, leaders: &[Elem], mut f: impl FnMut(&[Elem]) -> bool) {
        let c = leaders.len();
        if c == 0 || c >= self.by_components.len() {
            return;
        }
        let set = self.set;
        let k = set.arity();
        for ti in 0..self.by_components[c].len() {
            let tidx = self.by_components[c][ti];
            let shape = set.types()[tidx].shape();
            for j in 0..k {
                let g = shape.group_of[j];
                self.cands[j].clear();
                if shape.groups[g][0] == j {
                    self.cands[j].push(leaders[g]);
                } else {
                    let ball = self.ex.ball(db, &[leaders[g]], shape.offset[j]);
                    self.cands[j].extend_from_slice(ball);
                }
            }
            self.idx.iter_mut().for_each(|x| *x = 0);
            'odometer: loop {
                for j in 0..k {
                    self.tuple[j] = self.cands[j][self.idx[j]];
                }
                self.candidates += 1;
                if self.checker.matches(db, &self.tuple) == Some(tidx) && !f(&self.tuple) {
                    return;
                }
                let mut j = k;
                loop {
                    if j == 0 {
                        break 'odometer;
                    }
                    j -= 1;
                    self.idx[j] += 1;
                    if self.idx[j] < self.cands[j].len() {
                        break;
                    }
                    self.idx[j] = 0;
                }
            }
        }
    }

    pub fn any(&mut self, db: &Database, leaders: &[Elem]) -> bool {
        let mut found = false;
        self.for_each(db, leaders, |_| {
            found = true;
            false
        });
        found
    }

    pub fn count(&mut self, db: &Database, leaders: &[Elem]) -> usize {
        let mut n = 0;
        self.for_each(db, leaders, |_| {
            n += 1;
            true
        });
        n
    }

    pub fn collect(&mut self, db: &Database, leaders: &[Elem]) -> Vec<Vec<Elem>> {
        let mut out = Vec::new();
        self.for_each(db, leaders, |t| {
            out.push(t.to_vec());
            true
        });
        out
    }
}

pub fn candidate_found_tuples(db: &Database, leaders: &[Elem], set: &TypeSet) -> Vec<Vec<Elem>> {
    FoundTuples::new(set).collect(db, leaders)
}

/// Maximum Gaifman degree: each tuple contributes at most arity − 1 neighbours.
pub fn gaifman_degree(d: usize, max_arity: usize) -> usize {
    d * max_arity.saturating_sub(1)
}

/// A priori upper bound, per component count c (index c), on the number of
/// tuples found from one leader tuple.
pub fn found_bounds(set: &TypeSet, d: usize, max_arity: usize) -> Vec<u64> {
    let delta = gaifman_degree(d, max_arity);
    let mut out = vec![0u64; set.arity() + 1];
    for t in set.types() {
        let shape = t.shape();
        let mut prod: u64 = 1;
        for j in 0..t.arity() {
            if shape.groups[shape.group_of[j]][0] != j {
                prod = prod.saturating_mul(ball_bound(delta, shape.offset[j]));
            }
        }
        let c = t.components();
        out[c] = out[c].saturating_add(prod);
    }
    out
}

/// The effective split multiplicity: the largest per-leader bound, at least 1.
pub fn s_eff(set: &TypeSet, d: usize, max_arity: usize) -> u64 {
    found_bounds(set, d, max_arity).into_iter().max().unwrap_or(0).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::{figure1, graph};

    #[test]
    fn grouping_uses_distance_2r_plus_1() {
        let edges: Vec<(u32, u32)> = (0..19).map(|i| (i, i + 1)).collect();
        let db = graph(20, 2, &edges);
        let mut ex = Explorer::default();
        assert_eq!(group_coordinates(&db, &[0, 3], 1, &mut ex), vec![vec![0, 1]]);
        assert_eq!(group_coordinates(&db, &[0, 4], 1, &mut ex), vec![vec![0], vec![1]]);
        assert_eq!(
            group_coordinates(&db, &[10, 0, 13, 3], 1, &mut ex),
            vec![vec![0, 2], vec![1, 3]]
        );
    }

    #[test]
    fn split_round_trip_on_gadgets() {
        let reg = TypeRegistry::new();
        let db = figure1::planted(1, 2);
        let b = figure1::centre_pair(0).to_vec();
        let s = unique_split_of(&db, &b, 1, &reg).unwrap();
        assert_eq!(s.groups.len(), 1);
        assert!(s.is_r_good());
        assert_eq!(found_from(&db, &[b[0]], &s, &reg).unwrap(), Some(b.clone()));
        let cross = vec![figure1::centre_pair(0)[0], figure1::centre_pair(1)[0]];
        let s2 = unique_split_of(&db, &cross, 1, &reg).unwrap();
        assert_eq!(s2.groups.len(), 2);
        assert_eq!(found_from(&db, &cross, &s2, &reg).unwrap(), Some(cross.clone()));
        assert_eq!(found_from(&db, &[cross[0]], &s2, &reg).unwrap(), None);
        // Same-copy leaders violate separation.
        let same = vec![figure1::centre_pair(1)[0], figure1::centre_pair(1)[0]];
        assert_eq!(found_from(&db, &same, &s2, &reg).unwrap(), None);
    }

    #[test]
    fn candidates_for_tau1() {
        let reg = TypeRegistry::new();
        let set = TypeSet::new(2, 2, [figure1::tau1(&reg)]).unwrap();
        let db = figure1::planted(2, 1);
        let mut ft = FoundTuples::new(&set);
        for copy in 0..3 {
            let [c1, c2] = figure1::centre_pair(copy);
            let found = ft.collect(&db, &[c1]);
            if copy < 2 {
                assert_eq!(found, vec![vec![c1, c2]]);
            } else {
                assert!(found.is_empty());
            }
        }
        assert_eq!(s_eff(&set, 3, 2), 4);
    }
}
