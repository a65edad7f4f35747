//! Bounded-degree relational databases with the adjacency-list oracle.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{parse_err, Error, Result};

/// Domain element, 0-based internally. Text formats and the CLI are 1-based.
pub type Elem = u32;
pub type RelId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
    /// Binary relation stored as unordered pairs (undirected edges).
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Schema {
    relations: Vec<Relation>,
}

impl Schema {
    pub fn new(relations: Vec<Relation>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &relations {
            if r.arity == 0 {
                return Err(Error::Invalid(format!("relation {} has arity 0", r.name)));
            }
            if r.symmetric && r.arity != 2 {
                return Err(Error::Invalid(format!("symmetric relation {} must be binary", r.name)));
            }
            if !seen.insert(r.name.clone()) {
                return Err(Error::Invalid(format!("duplicate relation {}", r.name)));
            }
        }
        Ok(Schema { relations })
    }

    /// One undirected edge relation `E`.
    pub fn graph() -> Self {
        Schema {
            relations: vec![Relation {
                name: "E".into(),
                arity: 2,
                symmetric: true,
            }],
        }
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn lookup(&self, name: &str) -> Option<RelId> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn max_arity(&self) -> usize {
        self.relations.iter().map(|r| r.arity).max().unwrap_or(0)
    }

    /// Size of the signature: number of symbols plus the sum of arities.
    pub fn size(&self) -> usize {
        self.relations.iter().map(|r| 1 + r.arity).sum()
    }

    /// Lines `relation <name> <arity> [symmetric]`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rels = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks[0] != "relation" || !(3..=4).contains(&toks.len()) {
                return Err(parse_err(i + 1, "expected `relation <name> <arity> [symmetric]`"));
            }
            let arity: usize = toks[2]
                .parse()
                .map_err(|_| parse_err(i + 1, format!("bad arity `{}`", toks[2])))?;
            let symmetric = match toks.get(3) {
                None => false,
                Some(&"symmetric") => true,
                Some(t) => return Err(parse_err(i + 1, format!("unexpected `{t}`"))),
            };
            rels.push(Relation {
                name: toks[1].to_string(),
                arity,
                symmetric,
            });
        }
        Schema::new(rels).map_err(|e| match e {
            Error::Invalid(msg) => parse_err(0, msg),
            e => e,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.relations {
            let _ = write!(s, "relation {} {}", r.name, r.arity);
            if r.symmetric {
                s.push_str(" symmetric");
            }
            s.push('\n');
        }
        s
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(p) => line[..p].trim(),
        None => line.trim(),
    }
}

/// Immutable σ-database on domain `0..n` with every element of degree at most `d`.
///
/// Tuples are kept per relation, flattened and sorted lexicographically. The
/// incidence index lists, for every element, the `(relation, tuple)` pairs it
/// occurs in, so the j-th entry of a relation is the j-th tuple of that
/// relation containing the element.
#[derive(Debug, Clone)]
pub struct Database {
    schema: Arc<Schema>,
    n: usize,
    d: usize,
    tuples: Vec<Vec<Elem>>,
    inc_start: Vec<u32>,
    inc: Vec<(u32, u32)>,
}

impl Database {
    pub fn new(
        schema: Arc<Schema>,
        n: usize,
        d: usize,
        input: impl IntoIterator<Item = (RelId, Vec<Elem>)>,
    ) -> Result<Self> {
        let nrel = schema.relations().len();
        let mut per_rel: Vec<Vec<Vec<Elem>>> = vec![Vec::new(); nrel];
        for (rel, mut t) in input {
            let r = schema
                .relations()
                .get(rel)
                .ok_or_else(|| Error::UnknownRelation(format!("#{rel}")))?;
            if t.len() != r.arity {
                return Err(Error::ArityMismatch {
                    relation: r.name.clone(),
                    expected: r.arity,
                    found: t.len(),
                });
            }
            if let Some(&bad) = t.iter().find(|&&e| e as usize >= n) {
                return Err(Error::ElementOutOfRange {
                    element: bad as u64 + 1,
                    n,
                });
            }
            if r.symmetric {
                if t[0] == t[1] {
                    return Err(Error::Invalid(format!(
                        "self-loop on {} in symmetric relation {}",
                        t[0] + 1,
                        r.name
                    )));
                }
                t.sort_unstable();
            }
            per_rel[rel].push(t);
        }
        Self::assemble(schema, n, d, per_rel)
    }

    fn assemble(schema: Arc<Schema>, n: usize, d: usize, mut per_rel: Vec<Vec<Vec<Elem>>>) -> Result<Self> {
        let mut deg = vec![0u32; n];
        let mut tuples = Vec::with_capacity(per_rel.len());
        for list in per_rel.iter_mut() {
            list.sort_unstable();
            list.dedup();
            let mut flat = Vec::with_capacity(list.iter().map(|t| t.len()).sum());
            for t in list.iter() {
                for (p, &e) in t.iter().enumerate() {
                    if !t[..p].contains(&e) {
                        deg[e as usize] += 1;
                    }
                }
                flat.extend_from_slice(t);
            }
            tuples.push(flat);
        }
        if let Some((e, &g)) = deg.iter().enumerate().find(|(_, &g)| g as usize > d) {
            return Err(Error::DegreeExceeded {
                element: e + 1,
                degree: g as usize,
                bound: d,
            });
        }
        let mut inc_start = vec![0u32; n + 1];
        for (e, &g) in deg.iter().enumerate() {
            inc_start[e + 1] = inc_start[e] + g;
        }
        let mut fill = inc_start.clone();
        let mut inc = vec![(0u32, 0u32); inc_start[n] as usize];
        for (rel, flat) in tuples.iter().enumerate() {
            let ar = schema.relations()[rel].arity;
            for (ti, t) in flat.chunks_exact(ar).enumerate() {
                for (p, &e) in t.iter().enumerate() {
                    if !t[..p].contains(&e) {
                        inc[fill[e as usize] as usize] = (rel as u32, ti as u32);
                        fill[e as usize] += 1;
                    }
                }
            }
        }
        Ok(Database {
            schema,
            n,
            d,
            tuples,
            inc_start,
            inc,
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree_bound(&self) -> usize {
        self.d
    }

    pub fn arity(&self, rel: RelId) -> usize {
        self.schema.relations()[rel].arity
    }

    pub fn tuple_count(&self, rel: RelId) -> usize {
        self.tuples[rel].len() / self.arity(rel)
    }

    pub fn total_tuples(&self) -> usize {
        (0..self.tuples.len()).map(|r| self.tuple_count(r)).sum()
    }

    pub fn tuple(&self, rel: RelId, idx: usize) -> &[Elem] {
        let ar = self.arity(rel);
        &self.tuples[rel][idx * ar..(idx + 1) * ar]
    }

    pub fn tuples(&self, rel: RelId) -> std::slice::ChunksExact<'_, Elem> {
        self.tuples[rel].chunks_exact(self.arity(rel))
    }

    pub fn degree(&self, e: Elem) -> usize {
        (self.inc_start[e as usize + 1] - self.inc_start[e as usize]) as usize
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n as Elem).map(|e| self.degree(e)).max().unwrap_or(0)
    }

    /// `(relation, tuple index)` pairs containing `e`, ordered by relation then tuple.
    pub fn incident(&self, e: Elem) -> &[(u32, u32)] {
        &self.inc[self.inc_start[e as usize] as usize..self.inc_start[e as usize + 1] as usize]
    }

    /// The j-th (1-based) tuple of `rel` containing `i`, in lexicographic order.
    pub fn oracle_query(&self, rel: RelId, i: Elem, j: usize) -> Result<Option<&[Elem]>> {
        if rel >= self.tuples.len() {
            return Err(Error::IndexOutOfRange {
                what: "relation",
                value: rel as u64,
                bound: self.tuples.len() as u64,
            });
        }
        if i as usize >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "element",
                value: i as u64 + 1,
                bound: self.n as u64,
            });
        }
        if j == 0 || j > self.d {
            return Err(Error::IndexOutOfRange {
                what: "tuple rank",
                value: j as u64,
                bound: self.d as u64,
            });
        }
        let hit = self.incident(i).iter().filter(|&&(r, _)| r as usize == rel).nth(j - 1);
        Ok(hit.map(|&(r, t)| self.tuple(r as RelId, t as usize)))
    }

    pub fn contains_tuple(&self, rel: RelId, t: &[Elem]) -> bool {
        let ar = self.arity(rel);
        let mut key: [Elem; 8] = [0; 8];
        let key: &[Elem] = if self.schema.relations()[rel].symmetric && t[0] > t[1] {
            key[0] = t[1];
            key[1] = t[0];
            &key[..2]
        } else {
            t
        };
        let flat = &self.tuples[rel];
        let count = flat.len() / ar;
        let (mut lo, mut hi) = (0usize, count);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match flat[mid * ar..(mid + 1) * ar].cmp(key) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Gaifman neighbours of `e`, possibly with repetitions.
    pub fn neighbours(&self, e: Elem) -> impl Iterator<Item = Elem> + '_ {
        self.incident(e).iter().flat_map(move |&(r, t)| {
            self.tuple(r as RelId, t as usize)
                .iter()
                .copied()
                .filter(move |&x| x != e)
        })
    }

    /// Sorted elements at Gaifman distance at most `r` from some centre.
    pub fn gaifman_ball(&self, centres: &[Elem], r: usize) -> Vec<Elem> {
        let mut ex = Explorer::default();
        let mut ball = ex.ball(self, centres, r).to_vec();
        ball.sort_unstable();
        ball
    }

    pub fn distance(&self, a: Elem, b: Elem, limit: usize) -> Option<usize> {
        let mut ex = Explorer::default();
        ex.distance(self, a, b, limit)
    }

    /// Induced substructure on a set of elements; the fragment keeps the
    /// original names so that `original[local] = global`.
    pub fn induced(&self, elems: &[Elem]) -> Fragment {
        let mut original = elems.to_vec();
        original.sort_unstable();
        original.dedup();
        let local = |g: Elem| original.binary_search(&g).ok().map(|p| p as Elem);
        let mut seen: HashSet<(u32, u32)> = HashSet::new();
        let mut per_rel: Vec<Vec<Vec<Elem>>> = vec![Vec::new(); self.tuples.len()];
        for &g in &original {
            for &(r, t) in self.incident(g) {
                if !seen.insert((r, t)) {
                    continue;
                }
                let tup = self.tuple(r as RelId, t as usize);
                let mapped: Option<Vec<Elem>> = tup.iter().map(|&x| local(x)).collect();
                if let Some(m) = mapped {
                    per_rel[r as usize].push(m);
                }
            }
        }
        let db = Database::assemble(self.schema.clone(), original.len(), self.d, per_rel)
            .expect("induced substructure keeps degree bound");
        Fragment { db, original }
    }

    /// Disjoint union; the elements of `other` are shifted by `self.n()`.
    pub fn disjoint_union(&self, other: &Database) -> Result<Database> {
        if self.schema != other.schema {
            return Err(Error::SchemaMismatch("disjoint union".into()));
        }
        let shift = self.n as Elem;
        let mut per_rel: Vec<Vec<Vec<Elem>>> = Vec::with_capacity(self.tuples.len());
        for rel in 0..self.tuples.len() {
            let mut list: Vec<Vec<Elem>> = self.tuples(rel).map(|t| t.to_vec()).collect();
            list.extend(other.tuples(rel).map(|t| t.iter().map(|&x| x + shift).collect()));
            per_rel.push(list);
        }
        Database::assemble(self.schema.clone(), self.n + other.n, self.d.max(other.d), per_rel)
    }

    /// All tuples as `(relation, tuple)` pairs.
    pub fn all_tuples(&self) -> Vec<(RelId, Vec<Elem>)> {
        (0..self.tuples.len())
            .flat_map(|r| self.tuples(r).map(move |t| (r, t.to_vec())))
            .collect()
    }

    /// Same tuples with a new degree bound.
    pub fn with_degree_bound(&self, d: usize) -> Result<Database> {
        Database::new(self.schema.clone(), self.n, d, self.all_tuples())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("domain {}\n", self.n);
        for (rel, r) in self.schema.relations().iter().enumerate() {
            for t in self.tuples(rel) {
                s.push_str(&r.name);
                for &e in t {
                    let _ = write!(s, " {}", e + 1);
                }
                s.push('\n');
            }
        }
        s
    }

    /// Parses `domain <n>` followed by lines `<rel> e1 .. ear` with 1-based elements.
    pub fn parse(schema: Arc<Schema>, text: &str, d: usize) -> Result<Database> {
        let mut n: Option<usize> = None;
        let mut input = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let head = toks.next().unwrap_or_default();
            if head == "domain" {
                if n.is_some() {
                    return Err(parse_err(i + 1, "repeated `domain` line"));
                }
                let v = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(i + 1, "expected `domain <n>`"))?;
                n = Some(v);
                continue;
            }
            let size = n.ok_or_else(|| parse_err(i + 1, "tuple before `domain` line"))?;
            let rel = schema
                .lookup(head)
                .ok_or_else(|| Error::UnknownRelation(head.to_string()))?;
            let mut t = Vec::new();
            for tok in toks {
                let v: u64 = tok
                    .parse()
                    .map_err(|_| parse_err(i + 1, format!("bad element `{tok}`")))?;
                if v == 0 || v > size as u64 {
                    return Err(Error::ElementOutOfRange { element: v, n: size });
                }
                t.push((v - 1) as Elem);
            }
            let ar = schema.relations()[rel].arity;
            if t.len() != ar {
                return Err(Error::ArityMismatch {
                    relation: head.to_string(),
                    expected: ar,
                    found: t.len(),
                });
            }
            input.push((rel, t));
        }
        let n = n.ok_or_else(|| parse_err(0, "missing `domain` line"))?;
        Database::new(schema, n, d, input)
    }
}

/// Parses a schema text and a database text together.
pub fn load_database(schema_text: &str, db_text: &str, d: usize) -> Result<Database> {
    let schema = Arc::new(Schema::parse(schema_text)?);
    Database::parse(schema, db_text, d)
}

/// Induced substructure together with the global names of its elements.
#[derive(Debug, Clone)]
pub struct Fragment {
    pub db: Database,
    pub original: Vec<Elem>,
}

impl Fragment {
    pub fn local_of(&self, g: Elem) -> Option<Elem> {
        self.original.binary_search(&g).ok().map(|p| p as Elem)
    }
}

/// Reusable breadth-first search scratch space for the hot paths.
#[derive(Debug, Default, Clone)]
pub struct Explorer {
    ball: Vec<Elem>,
    dist: Vec<u32>,
    index: HashSet<Elem>,
    /// Oracle accesses performed so far (one per incidence entry plus one
    /// terminating lookup per relation and expanded element).
    pub oracle_calls: u64,
}

const LINEAR_LIMIT: usize = 48;

impl Explorer {
    /// Membership in the last computed ball.
    pub fn in_ball(&self, e: Elem) -> bool {
        self.seen(e)
    }

    fn seen(&self, e: Elem) -> bool {
        if self.ball.len() <= LINEAR_LIMIT {
            self.ball.contains(&e)
        } else {
            self.index.contains(&e)
        }
    }

    fn push(&mut self, e: Elem, dist: u32) {
        self.ball.push(e);
        self.dist.push(dist);
        if self.ball.len() == LINEAR_LIMIT + 1 {
            self.index.clear();
            self.index.extend(self.ball.iter().copied());
        } else if self.ball.len() > LINEAR_LIMIT {
            self.index.insert(e);
        }
    }

    /// Ball in BFS order (unsorted); distinct centres come first.
    pub fn ball(&mut self, db: &Database, centres: &[Elem], r: usize) -> &[Elem] {
        self.ball.clear();
        self.dist.clear();
        for &c in centres {
            if !self.seen(c) {
                self.push(c, 0);
            }
        }
        let nrel = db.schema().relations().len() as u64;
        let mut head = 0;
        while head < self.ball.len() {
            let (e, de) = (self.ball[head], self.dist[head]);
            head += 1;
            if de as usize >= r {
                continue;
            }
            let inc = db.incident(e);
            self.oracle_calls += inc.len() as u64 + nrel;
            for &(rel, t) in inc {
                for &x in db.tuple(rel as RelId, t as usize) {
                    if !self.seen(x) {
                        self.push(x, de + 1);
                    }
                }
            }
        }
        &self.ball
    }

    /// Distances matching the last computed ball.
    pub fn distances(&self) -> &[u32] {
        &self.dist
    }

    pub fn distance(&mut self, db: &Database, a: Elem, b: Elem, limit: usize) -> Option<usize> {
        self.ball(db, &[a], limit);
        self.ball.iter().position(|&x| x == b).map(|p| self.dist[p] as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Database {
        let edges = (0..n as Elem - 1).map(|i| (0, vec![i, i + 1]));
        Database::new(Arc::new(Schema::graph()), n, 2, edges).unwrap()
    }

    #[test]
    fn parse_and_oracle() {
        let s = Arc::new(Schema::parse("relation R 3\nrelation E 2 symmetric # edges\n").unwrap());
        let text = "domain 4\nR 1 2 3\nR 1 3 2\nE 2 1\nE 4 3\n";
        let db = Database::parse(s.clone(), text, 3).unwrap();
        assert_eq!(db.n(), 4);
        assert_eq!(db.oracle_query(0, 0, 1).unwrap(), Some(&[0, 1, 2][..]));
        assert_eq!(db.oracle_query(0, 0, 2).unwrap(), Some(&[0, 2, 1][..]));
        assert_eq!(db.oracle_query(0, 0, 3).unwrap(), None);
        assert_eq!(db.oracle_query(1, 0, 1).unwrap(), Some(&[0, 1][..]));
        assert_eq!(db.oracle_query(1, 3, 1).unwrap(), Some(&[2, 3][..]));
        assert!(matches!(db.oracle_query(0, 0, 4), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(db.oracle_query(0, 9, 1), Err(Error::IndexOutOfRange { .. })));
        let again = Database::parse(s, &db.to_text(), 3).unwrap();
        assert_eq!(again.all_tuples(), db.all_tuples());
    }

    #[test]
    fn rejects_bad_input() {
        let s = Arc::new(Schema::graph());
        assert!(matches!(
            Database::parse(s.clone(), "domain 3\nE 1 4\n", 2),
            Err(Error::ElementOutOfRange { .. })
        ));
        assert!(matches!(
            Database::parse(s.clone(), "domain 3\nE 1 2 3\n", 2),
            Err(Error::ArityMismatch { .. })
        ));
        assert!(matches!(
            Database::parse(s.clone(), "domain 4\nE 1 2\nE 1 3\nE 1 4\n", 2),
            Err(Error::DegreeExceeded {
                element: 1,
                degree: 3,
                ..
            })
        ));
        assert!(matches!(
            Database::parse(s, "domain 4\nF 1 2\n", 2),
            Err(Error::UnknownRelation(_))
        ));
        assert!(Schema::parse("relation E 0\n").is_err());
    }

    #[test]
    fn balls_and_distances() {
        let db = path(10);
        assert_eq!(db.gaifman_ball(&[4], 0), vec![4]);
        assert_eq!(db.gaifman_ball(&[4], 2), vec![2, 3, 4, 5, 6]);
        assert_eq!(db.gaifman_ball(&[0, 9], 1), vec![0, 1, 8, 9]);
        assert_eq!(db.distance(0, 7, 10), Some(7));
        assert_eq!(db.distance(0, 7, 6), None);
        let f = db.induced(&[3, 4, 5, 8]);
        assert_eq!(f.db.n(), 4);
        assert_eq!(f.db.total_tuples(), 2);
        assert_eq!(f.local_of(8), Some(3));
    }

    #[test]
    fn explorer_switches_to_index() {
        let db = path(200);
        let mut ex = Explorer::default();
        let b = ex.ball(&db, &[100], 60).len();
        assert_eq!(b, 121);
        assert!(ex.oracle_calls > 0);
    }
}
