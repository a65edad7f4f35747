//! Synthetic databases: the running-example gadgets, planted families and
//! random bounded-degree instances.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::db::{Database, Elem, RelId, Schema};

/// Disjoint union of `parts`, each given as `(copies, gadget)`, in order.
pub fn disjoint_copies(parts: &[(usize, &Database)]) -> Database {
    let schema = parts
        .first()
        .map(|(_, g)| g.schema().clone())
        .unwrap_or_else(|| Arc::new(Schema::graph()));
    let d = parts.iter().map(|(_, g)| g.degree_bound()).max().unwrap_or(0);
    let mut tuples: Vec<(RelId, Vec<Elem>)> = Vec::new();
    let mut shift: Elem = 0;
    for &(copies, g) in parts {
        let base = g.all_tuples();
        for _ in 0..copies {
            for (rel, t) in &base {
                tuples.push((*rel, t.iter().map(|&x| x + shift).collect()));
            }
            shift += g.n() as Elem;
        }
    }
    Database::new(schema, shift as usize, d, tuples).expect("union of valid gadgets")
}

pub fn graph(n: usize, d: usize, edges: &[(Elem, Elem)]) -> Database {
    Database::new(
        Arc::new(Schema::graph()),
        n,
        d,
        edges.iter().map(|&(a, b)| (0, vec![a, b])),
    )
    .expect("valid graph")
}

/// The four 8-vertex gadgets of the running example and the query built on them.
pub mod figure1 {
    use super::*;
    use crate::neighbourhood::{NbType, TypeRegistry};
    use crate::query::{Clause, HanfSentence, QueryNF, Sign, SphereAtom};

    /// Vertices 0..8 stand for c1, n2, n3, c2, n5, n6, n7, n8.
    pub const C1: Elem = 0;
    pub const C2: Elem = 3;
    pub const D: usize = 3;
    pub const R: usize = 2;

    const BASE: [(Elem, Elem); 7] = [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5), (2, 6), (2, 7)];

    pub fn n1() -> Database {
        graph(8, D, &BASE)
    }

    pub fn n2() -> Database {
        let mut e = BASE.to_vec();
        e.push((4, 5));
        graph(8, D, &e)
    }

    pub fn n3() -> Database {
        let mut e = BASE.to_vec();
        e.push((4, 5));
        e.push((6, 7));
        graph(8, D, &e)
    }

    /// Same graph as `n1`; only `C1` is a centre.
    pub fn n4() -> Database {
        n1()
    }

    pub fn tau1(reg: &TypeRegistry) -> NbType {
        reg.type_of(&n1(), &[C1, C2], R).unwrap()
    }

    pub fn tau2(reg: &TypeRegistry) -> NbType {
        reg.type_of(&n2(), &[C1, C2], R).unwrap()
    }

    pub fn tau3(reg: &TypeRegistry) -> NbType {
        reg.type_of(&n3(), &[C1, C2], R).unwrap()
    }

    pub fn tau4(reg: &TypeRegistry) -> NbType {
        reg.type_of(&n4(), &[C1], R).unwrap()
    }

    /// sph_τ1(x,y) ∨ (sph_τ2(x,y) ∧ ¬∃≥1 z sph_τ4(z)).
    pub fn example_query(reg: &TypeRegistry) -> QueryNF {
        let clauses = vec![
            Clause {
                sphere: SphereAtom { ty: tau1(reg) },
                sentences: vec![],
            },
            Clause {
                sphere: SphereAtom { ty: tau2(reg) },
                sentences: vec![HanfSentence {
                    sign: Sign::Negated,
                    threshold: 1,
                    ty: tau4(reg),
                }],
            },
        ];
        QueryNF::new(2, R, D, Arc::new(Schema::graph()), clauses).unwrap()
    }

    /// The local query sph_τ1(x,y).
    pub fn tau1_query(reg: &TypeRegistry) -> QueryNF {
        let clauses = vec![Clause {
            sphere: SphereAtom { ty: tau1(reg) },
            sentences: vec![],
        }];
        QueryNF::new(2, R, D, Arc::new(Schema::graph()), clauses).unwrap()
    }

    /// `l` copies of N1 followed by `m` copies of N2; `planted(1, m)` is G_{1,m}.
    pub fn planted(l: usize, m: usize) -> Database {
        disjoint_copies(&[(l, &n1()), (m, &n2())])
    }

    /// Centre pair of the i-th gadget copy.
    pub fn centre_pair(copy: usize) -> [Elem; 2] {
        let base = 8 * copy as Elem;
        [base + C1, base + C2]
    }
}

/// Random graph with maximum degree `d`: `attempts` random edge proposals,
/// each kept if it respects the degree bound.
pub fn random_graph<R: Rng>(n: usize, d: usize, attempts: usize, rng: &mut R) -> Database {
    let mut deg = vec![0usize; n];
    let mut edges: Vec<(Elem, Elem)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    if n >= 2 {
        for _ in 0..attempts {
            let a = rng.gen_range(0..n) as Elem;
            let b = rng.gen_range(0..n) as Elem;
            if a == b || deg[a as usize] >= d || deg[b as usize] >= d {
                continue;
            }
            if seen.insert((a.min(b), a.max(b))) {
                deg[a as usize] += 1;
                deg[b as usize] += 1;
                edges.push((a, b));
            }
        }
    }
    graph(n, d, &edges)
}

/// Random database over an arbitrary schema with degree at most `d`.
pub fn random_database<R: Rng>(schema: Arc<Schema>, n: usize, d: usize, attempts: usize, rng: &mut R) -> Database {
    let mut deg = vec![0usize; n];
    let mut tuples: Vec<(RelId, Vec<Elem>)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let nrel = schema.relations().len();
    if n > 0 && nrel > 0 {
        for _ in 0..attempts {
            let rel = rng.gen_range(0..nrel);
            let r = &schema.relations()[rel];
            let mut t: Vec<Elem> = (0..r.arity).map(|_| rng.gen_range(0..n) as Elem).collect();
            if r.symmetric {
                if t[0] == t[1] {
                    continue;
                }
                t.sort_unstable();
            }
            let mut distinct = t.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.iter().any(|&e| deg[e as usize] >= d) {
                continue;
            }
            if seen.insert((rel, t.clone())) {
                for &e in &distinct {
                    deg[e as usize] += 1;
                }
                tuples.push((rel, t));
            }
        }
    }
    Database::new(schema, n, d, tuples).expect("degree respected by construction")
}

/// Applies a permutation of the domain: element `x` becomes `perm[x]`.
pub fn relabel(db: &Database, perm: &[Elem]) -> Database {
    let tuples = db
        .all_tuples()
        .into_iter()
        .map(|(rel, t)| (rel, t.iter().map(|&x| perm[x as usize]).collect()));
    Database::new(db.schema().clone(), db.n(), db.degree_bound(), tuples).unwrap()
}

pub fn random_permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<Elem> {
    let mut p: Vec<Elem> = (0..n as Elem).collect();
    p.shuffle(rng);
    p
}

/// Graph made of small components: `k2` single edges, `triangles`, `paths3`
/// (paths on three vertices) and `isolated` vertices, in this order.
pub fn small_components(k2: usize, triangles: usize, paths3: usize, isolated: usize) -> Database {
    let mut edges = Vec::new();
    let mut next: Elem = 0;
    for _ in 0..k2 {
        edges.push((next, next + 1));
        next += 2;
    }
    for _ in 0..triangles {
        edges.extend([(next, next + 1), (next + 1, next + 2), (next, next + 2)]);
        next += 3;
    }
    for _ in 0..paths3 {
        edges.extend([(next, next + 1), (next + 1, next + 2)]);
        next += 3;
    }
    next += isolated as Elem;
    graph(next as usize, 3, &edges)
}

/// A quarter of the vertices in single edges, a quarter in triangles, a
/// quarter in 3-vertex paths and the rest isolated, randomly relabelled.
#[derive(Debug, Clone)]
pub struct K2Family {
    pub db: Database,
    /// Endpoints of the single edges, paired up: (0,1), (2,3), ...
    pub endpoints: Vec<Elem>,
    pub isolated: Elem,
}

pub fn k2_family(n: usize, seed: u64) -> K2Family {
    use rand::SeedableRng;
    let k2 = n / 8;
    let tri = n / 12;
    let p3 = n / 12;
    let used = 2 * k2 + 3 * tri + 3 * p3;
    assert!(k2 >= 2 && used < n, "family needs n >= 24");
    let base = small_components(k2, tri, p3, n - used);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let perm = random_permutation(n, &mut rng);
    K2Family {
        db: relabel(&base, &perm),
        endpoints: (0..2 * k2).map(|x| perm[x]).collect(),
        isolated: perm[n - 1],
    }
}

impl K2Family {
    /// Ordered pairs of distinct single-edge endpoints.
    pub fn answers(&self) -> Vec<Vec<Elem>> {
        let mut out = Vec::new();
        for &a in &self.endpoints {
            for &b in &self.endpoints {
                if a != b {
                    out.push(vec![a, b]);
                }
            }
        }
        out.sort();
        out
    }

    /// Pairs of single-edge endpoints at radius 2: the same-edge type and
    /// the far-apart type. With `sentence`, each clause also requires an
    /// isolated vertex to exist.
    pub fn pair_query(&self, reg: &crate::neighbourhood::TypeRegistry, sentence: bool) -> crate::query::QueryNF {
        use crate::query::{Clause, HanfSentence, QueryNF, Sign, SphereAtom};
        let e = &self.endpoints;
        let same = reg.type_of(&self.db, &[e[0], e[1]], 2).unwrap();
        let far = reg.type_of(&self.db, &[e[0], e[2]], 2).unwrap();
        let sentences = if sentence {
            vec![HanfSentence {
                sign: Sign::Positive,
                threshold: 1,
                ty: reg.type_of(&self.db, &[self.isolated], 2).unwrap(),
            }]
        } else {
            vec![]
        };
        let clauses = [same, far]
            .into_iter()
            .map(|ty| Clause {
                sphere: SphereAtom { ty },
                sentences: sentences.clone(),
            })
            .collect();
        QueryNF::new(2, 2, 3, self.db.schema().clone(), clauses).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbourhood::TypeRegistry;
    use rand::SeedableRng;

    #[test]
    fn gadgets_are_distinct_types() {
        let reg = TypeRegistry::new();
        let t = [figure1::tau1(&reg), figure1::tau2(&reg), figure1::tau3(&reg)];
        assert_ne!(t[0], t[1]);
        assert_ne!(t[1], t[2]);
        assert_ne!(t[0], t[2]);
        for ty in &t {
            assert_eq!(ty.size(), 8);
            assert_eq!(ty.components(), 1);
        }
        assert_eq!(figure1::tau4(&reg).arity(), 1);
        let g = figure1::planted(1, 3);
        assert_eq!(g.n(), 32);
        assert_eq!(g.total_tuples(), 7 + 3 * 8);
    }

    #[test]
    fn k2_family_answers() {
        let reg = TypeRegistry::new();
        let f = k2_family(200, 1);
        assert_eq!(f.db.n(), 200);
        let q = f.pair_query(&reg, false);
        let exact = crate::exact::answer_set(&f.db, &q, 1 << 20).unwrap();
        assert_eq!(exact, f.answers());
        assert_eq!(q.conn(), 2);
        assert!(!f.pair_query(&reg, true).is_local());
    }

    #[test]
    fn random_generators_respect_degree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = random_graph(200, 3, 500, &mut rng);
        assert!(g.max_degree() <= 3);
        let s = Arc::new(Schema::parse("relation R 3\nrelation E 2 symmetric\nrelation U 1\n").unwrap());
        let db = random_database(s, 100, 4, 400, &mut rng);
        assert!(db.max_degree() <= 4);
        let p = random_permutation(200, &mut rng);
        assert_eq!(relabel(&g, &p).total_tuples(), g.total_tuples());
    }
}
