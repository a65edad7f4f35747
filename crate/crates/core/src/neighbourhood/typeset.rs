use std::collections::{HashMap, HashSet};

use rustc_hash::FxHashMap;

use super::canon::canonical_form;
use super::types::{NbType, TypeRegistry};
use crate::db::{Database, Elem, Explorer, RelId};
use crate::error::{Error, Result};

fn mix(h: u64, x: u64) -> u64 {
    let z = (h ^ x).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z ^ (z >> 29)
}

/// Cheap isomorphism invariant: ball size, sorted inner degrees, centre
/// degrees and the equality pattern of the centres.
fn quick_key(size: usize, inner_deg: &mut [u32], centre_deg: &[u32], centre_eq: &[u32]) -> u64 {
    let mut h = mix(0x1234, size as u64);
    for &c in centre_deg {
        h = mix(h, c as u64);
    }
    for &e in centre_eq {
        h = mix(h, 0x100 | e as u64);
    }
    inner_deg.sort_unstable();
    for &g in inner_deg.iter() {
        h = mix(h, 0x10000 | g as u64);
    }
    h
}

fn centre_pattern(centres: &[Elem]) -> Vec<u32> {
    centres
        .iter()
        .map(|c| centres.iter().position(|x| x == c).unwrap() as u32)
        .collect()
}

/// Memo entries kept per checker before it is flushed.
const MEMO_CAP: usize = 1 << 16;
const NO_MATCH: u32 = u32::MAX;

/// A set of r-types of k-tuples with a fast membership test on database tuples.
#[derive(Debug, Clone)]
pub struct TypeSet {
    radius: usize,
    arity: usize,
    types: Vec<NbType>,
    by_code: HashMap<Vec<u32>, usize>,
    quick: HashSet<u64>,
    /// Per coordinate, bit g set iff some member's centre has degree g.
    degree_mask: Vec<u64>,
}

impl TypeSet {
    pub fn new(radius: usize, arity: usize, types: impl IntoIterator<Item = NbType>) -> Result<Self> {
        let mut set = TypeSet {
            radius,
            arity,
            types: Vec::new(),
            by_code: HashMap::new(),
            quick: HashSet::new(),
            degree_mask: vec![0; arity],
        };
        for t in types {
            set.insert(t)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, t: NbType) -> Result<bool> {
        if t.radius() != self.radius || t.arity() != self.arity {
            return Err(Error::Invalid(format!(
                "type of radius {} and arity {} in a set of radius {} and arity {}",
                t.radius(),
                t.arity(),
                self.radius,
                self.arity
            )));
        }
        if self.by_code.contains_key(t.code()) {
            return Ok(false);
        }
        let rep = t.representative();
        let mut inner: Vec<u32> = (0..rep.n() as Elem).map(|e| rep.degree(e) as u32).collect();
        let cdeg: Vec<u32> = t.centres().iter().map(|&c| rep.degree(c) as u32).collect();
        for (j, &g) in cdeg.iter().enumerate() {
            self.degree_mask[j] |= if g < 63 { 1u64 << g } else { 1u64 << 63 };
        }
        let key = quick_key(rep.n(), &mut inner, &cdeg, &centre_pattern(t.centres()));
        self.quick.insert(key);
        self.by_code.insert(t.code().to_vec(), self.types.len());
        self.types.push(t);
        Ok(true)
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn types(&self) -> &[NbType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn contains(&self, t: &NbType) -> bool {
        t.radius() == self.radius && self.by_code.contains_key(t.code())
    }

    pub fn index_of(&self, t: &NbType) -> Option<usize> {
        if t.radius() != self.radius {
            return None;
        }
        self.by_code.get(t.code()).copied()
    }

    /// Degree of a centre is visible inside any ball of radius at least 1.
    fn degree_allowed(&self, coord: usize, degree: usize) -> bool {
        if self.radius == 0 {
            return true;
        }
        let bit = if degree < 63 { 1u64 << degree } else { 1u64 << 63 };
        self.degree_mask[coord] & bit != 0
    }

    pub fn checker(&self) -> TypeChecker<'_> {
        TypeChecker {
            set: self,
            enc: BallEncoder::default(),
            memo: FxHashMap::default(),
            canonicalisations: 0,
        }
    }
}

/// Breadth-first encoding of a ball around a tuple. Equal encodings imply
/// isomorphic neighbourhoods with the same centre positions.
#[derive(Debug, Default)]
pub(crate) struct BallEncoder {
    ex: Explorer,
    ball: Vec<Elem>,
    inner: Vec<u32>,
    enc: Vec<u32>,
}

impl BallEncoder {
    fn pos(&self, x: Elem) -> u32 {
        self.ball.iter().position(|&y| y == x).unwrap() as u32
    }

    pub(crate) fn oracle_calls(&self) -> u64 {
        self.ex.oracle_calls
    }

    pub(crate) fn encode(&mut self, db: &Database, tuple: &[Elem], r: usize) -> &[u32] {
        let ball = self.ex.ball(db, tuple, r);
        self.ball.clear();
        self.ball.extend_from_slice(ball);
        let size = self.ball.len();
        self.enc.clear();
        self.enc.push(size as u32);
        for &a in tuple {
            let p = self.pos(a);
            self.enc.push(p);
        }
        self.inner.clear();
        for i in 0..size {
            let e = self.ball[i];
            let mark = self.enc.len();
            self.enc.push(0);
            let mut g = 0u32;
            for &(rel, t) in db.incident(e) {
                let tup = db.tuple(rel as RelId, t as usize);
                if !tup.iter().all(|&x| self.ex.in_ball(x)) {
                    continue;
                }
                g += 1;
                self.enc.push(rel);
                for &x in tup {
                    let p = self.pos(x);
                    self.enc.push(p);
                }
            }
            self.enc[mark] = g;
            self.inner.push(g);
        }
        &self.enc
    }

    /// Canonical form of the ball last encoded.
    fn canonical(&self, db: &Database, tuple: &[Elem]) -> Vec<u32> {
        let mut sorted = self.ball.clone();
        sorted.sort_unstable();
        let frag = db.induced(&sorted);
        let centres: Vec<Elem> = tuple.iter().map(|&a| frag.local_of(a).unwrap()).collect();
        canonical_form(&frag.db, &centres).code
    }
}

/// Per-caller scratch state for membership tests against a [`TypeSet`].
///
/// Results are memoised by the breadth-first encoding of the ball. Two balls
/// with equal encodings are isomorphic, and the memo is flushed when it grows
/// past a fixed size, so memory stays bounded independently of the database.
#[derive(Debug)]
pub struct TypeChecker<'a> {
    set: &'a TypeSet,
    enc: BallEncoder,
    memo: FxHashMap<Vec<u32>, u32>,
    /// Number of tests that needed a full canonical form.
    pub canonicalisations: u64,
}

impl<'a> TypeChecker<'a> {
    pub fn set(&self) -> &'a TypeSet {
        self.set
    }

    pub fn oracle_calls(&self) -> u64 {
        self.enc.oracle_calls()
    }

    /// Index of the type of `tuple` within the set, if it belongs to it.
    pub fn matches(&mut self, db: &Database, tuple: &[Elem]) -> Option<usize> {
        if self.set.types.is_empty() {
            return None;
        }
        debug_assert_eq!(tuple.len(), self.set.arity);
        for (j, &a) in tuple.iter().enumerate() {
            if !self.set.degree_allowed(j, db.degree(a)) {
                return None;
            }
        }
        let key = self.enc.encode(db, tuple, self.set.radius);
        if let Some(&hit) = self.memo.get(key) {
            return (hit != NO_MATCH).then_some(hit as usize);
        }
        let result = self.classify(db, tuple);
        if self.memo.len() >= MEMO_CAP {
            self.memo.clear();
        }
        self.memo
            .insert(self.enc.enc.clone(), result.map_or(NO_MATCH, |i| i as u32));
        result
    }

    fn classify(&mut self, db: &Database, tuple: &[Elem]) -> Option<usize> {
        let e = &mut self.enc;
        let cdeg: Vec<u32> = tuple.iter().map(|&a| e.inner[e.pos(a) as usize]).collect();
        let size = e.ball.len();
        let mut inner = e.inner.clone();
        let key = quick_key(size, &mut inner, &cdeg, &centre_pattern(tuple));
        if !self.set.quick.contains(&key) {
            return None;
        }
        self.canonicalisations += 1;
        let code = self.enc.canonical(db, tuple);
        self.set.by_code.get(&code).copied()
    }

    pub fn contains(&mut self, db: &Database, tuple: &[Elem]) -> bool {
        self.matches(db, tuple).is_some()
    }
}

/// Classifies tuples into registry types, memoising by ball encoding.
#[derive(Debug)]
pub struct Classifier<'r> {
    reg: &'r TypeRegistry,
    enc: BallEncoder,
    memo: FxHashMap<Vec<u32>, NbType>,
}

impl<'r> Classifier<'r> {
    pub fn new(reg: &'r TypeRegistry) -> Self {
        Classifier {
            reg,
            enc: BallEncoder::default(),
            memo: FxHashMap::default(),
        }
    }

    pub fn type_of(&mut self, db: &Database, tuple: &[Elem], r: usize) -> NbType {
        let key = self.enc.encode(db, tuple, r);
        if let Some(t) = self.memo.get(key) {
            return t.clone();
        }
        let t = self.reg.type_of(db, tuple, r).expect("tuple elements are in range");
        if self.memo.len() >= MEMO_CAP {
            self.memo.clear();
        }
        self.memo.insert(self.enc.enc.clone(), t.clone());
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::db::Schema;
    use std::sync::Arc;

    #[test]
    fn agrees_with_registry() {
        let edges = vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (7, 8)];
        let db = Database::new(
            Arc::new(Schema::graph()),
            10,
            3,
            edges.into_iter().map(|(a, b)| (0, vec![a, b])),
        )
        .unwrap();
        let reg = TypeRegistry::new();
        let t_cycle = reg.type_of(&db, &[0, 1], 1).unwrap();
        let t_end = reg.type_of(&db, &[4], 1).unwrap();
        let set = TypeSet::new(1, 2, [t_cycle.clone()]).unwrap();
        assert!(TypeSet::new(1, 2, [t_end]).is_err());
        let mut ch = set.checker();
        let mut cl = Classifier::new(&reg);
        for _ in 0..2 {
            for a in 0..10u32 {
                for b in 0..10u32 {
                    let truth = reg.type_of(&db, &[a, b], 1).unwrap() == t_cycle;
                    assert_eq!(ch.contains(&db, &[a, b]), truth, "({a},{b})");
                    assert_eq!(cl.type_of(&db, &[a, b], 1), reg.type_of(&db, &[a, b], 1).unwrap());
                }
            }
        }
    }
}
