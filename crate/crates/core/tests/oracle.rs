//! Values frozen against a separate brute-force implementation of balls and
//! centred isomorphism that shares no code with the library.

use std::collections::{BTreeSet, VecDeque};

use approxenum::exact::{answer_set, count_type, eval_query};
use approxenum::neighbourhood::{TypeRegistry, TypeSet};
use approxenum::params::{one_sided_repetitions, two_sided_repetitions, LemmaConstants};
use approxenum::splits::{s_eff, unique_split_of};
use approxenum::workloads::{disjoint_copies, figure1};
use approxenum::Database;

struct G {
    adj: Vec<BTreeSet<usize>>,
}

impl G {
    fn of(db: &Database) -> G {
        let mut adj = vec![BTreeSet::new(); db.n()];
        for t in db.tuples(0) {
            let (a, b) = (t[0] as usize, t[1] as usize);
            adj[a].insert(b);
            adj[b].insert(a);
        }
        G { adj }
    }

    fn ball(&self, centres: &[usize], r: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.adj.len()];
        let mut q = VecDeque::new();
        for &c in centres {
            dist[c] = 0;
            q.push_back(c);
        }
        while let Some(v) = q.pop_front() {
            if dist[v] == r {
                continue;
            }
            for &w in &self.adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        (0..self.adj.len()).filter(|&v| dist[v] != usize::MAX).collect()
    }
}

/// Centred isomorphism of the two induced balls, by backtracking.
fn same_type(g: &G, a: &[usize], h: &G, b: &[usize], r: usize) -> bool {
    let (ba, bb) = (g.ball(a, r), h.ball(b, r));
    if ba.len() != bb.len() {
        return false;
    }
    let induced_deg = |gr: &G, ball: &[usize], v: usize| gr.adj[v].iter().filter(|w| ball.contains(w)).count();
    let mut map: Vec<(usize, usize)> = Vec::new();
    for (&x, &y) in a.iter().zip(b) {
        if let Some(&(_, y0)) = map.iter().find(|p| p.0 == x) {
            if y0 != y {
                return false;
            }
        } else if map.iter().any(|p| p.1 == y) {
            return false;
        } else {
            map.push((x, y));
        }
    }
    fn consistent(g: &G, h: &G, map: &[(usize, usize)]) -> bool {
        let (x, y) = *map.last().unwrap();
        map.iter().all(|&(u, v)| g.adj[x].contains(&u) == h.adj[y].contains(&v))
    }
    for i in 1..=map.len() {
        if !consistent(g, h, &map[..i]) {
            return false;
        }
    }
    fn extend(
        g: &G,
        h: &G,
        ba: &[usize],
        bb: &[usize],
        map: &mut Vec<(usize, usize)>,
        deg: &dyn Fn(&G, &[usize], usize) -> usize,
    ) -> bool {
        let Some(&x) = ba.iter().find(|x| !map.iter().any(|p| p.0 == **x)) else {
            return true;
        };
        for &y in bb {
            if map.iter().any(|p| p.1 == y) || deg(g, ba, x) != deg(h, bb, y) {
                continue;
            }
            map.push((x, y));
            if consistent(g, h, map) && extend(g, h, ba, bb, map, deg) {
                return true;
            }
            map.pop();
        }
        false
    }
    extend(g, h, &ba, &bb, &mut map, &induced_deg)
}

const C1: usize = figure1::C1 as usize;
const C2: usize = figure1::C2 as usize;

#[test]
fn first_edge_and_unit_ball_of_c1() {
    let db = figure1::n1();
    let first = db.oracle_query(0, figure1::C1, 1).unwrap().unwrap();
    let mut at_c1: Vec<Vec<u32>> = db
        .tuples(0)
        .filter(|t| t.contains(&figure1::C1))
        .map(|t| {
            let mut v = t.to_vec();
            if v[0] != figure1::C1 {
                v.reverse();
            }
            v
        })
        .collect();
    at_c1.sort();
    assert_eq!(first, &at_c1[0][..]);
    assert_eq!(first, &[0, 1]);
    let g = G::of(&db);
    assert_eq!(g.ball(&[C1], 1), vec![0, 1, 2, 3]);
    assert_eq!(db.gaifman_ball(&[figure1::C1], 1), vec![0, 1, 2, 3]);
}

#[test]
fn centres_are_not_swappable() {
    let g = G::of(&figure1::n1());
    assert!(same_type(&g, &[C1, C2], &g, &[C1, C2], 2));
    assert!(!same_type(&g, &[C1, C2], &g, &[C2, C1], 2));
    let reg = TypeRegistry::new();
    let db = figure1::n1();
    assert_ne!(
        reg.type_of(&db, &[figure1::C1, figure1::C2], 2).unwrap(),
        reg.type_of(&db, &[figure1::C2, figure1::C1], 2).unwrap()
    );
}

#[test]
fn tau1_pairs_in_one_copy() {
    let db = figure1::n1();
    let g = G::of(&db);
    let brute: Vec<Vec<u32>> = (0..8)
        .flat_map(|a| (0..8).map(move |b| (a, b)))
        .filter(|&(a, b)| same_type(&g, &[a, b], &g, &[C1, C2], 2))
        .map(|(a, b)| vec![a as u32, b as u32])
        .collect();
    assert_eq!(brute, vec![vec![0, 3]]);
    let reg = TypeRegistry::new();
    assert_eq!(answer_set(&db, &figure1::tau1_query(&reg), 1 << 20).unwrap(), brute);
}

#[test]
fn tau4_centre_counts() {
    let reg = TypeRegistry::new();
    let tau4 = figure1::tau4(&reg);
    let n1 = G::of(&figure1::n1());
    for (db, expected) in [
        (figure1::n4(), 1),
        (figure1::n2(), 0),
        (figure1::n3(), 0),
        (figure1::planted(1, 1), 1),
        (figure1::planted(3, 5), 3),
    ] {
        let g = G::of(&db);
        let brute = (0..db.n()).filter(|&v| same_type(&g, &[v], &n1, &[C1], 2)).count();
        assert_eq!(brute, expected);
        assert_eq!(count_type(&db, &tau4), expected);
    }
}

#[test]
fn running_example_on_g11() {
    let reg = TypeRegistry::new();
    let q = figure1::example_query(&reg);
    let db = figure1::planted(1, 1);
    let g = G::of(&db);
    let (n1, n2) = (G::of(&figure1::n1()), G::of(&figure1::n2()));
    let tau4_free = !(0..db.n()).any(|v| same_type(&g, &[v], &n1, &[C1], 2));
    let mut brute = Vec::new();
    for a in 0..db.n() {
        for b in 0..db.n() {
            let t1 = same_type(&g, &[a, b], &n1, &[C1, C2], 2);
            let t2 = same_type(&g, &[a, b], &n2, &[C1, C2], 2);
            if t1 || (t2 && tau4_free) {
                brute.push(vec![a as u32, b as u32]);
            }
        }
    }
    assert_eq!(brute, vec![vec![0, 3]]);
    assert_eq!(answer_set(&db, &q, 1 << 20).unwrap(), brute);

    let only_tau2 = figure1::planted(0, 2);
    assert!(eval_query(&only_tau2, &[8, 11], &q));
    assert_eq!(
        answer_set(&only_tau2, &q, 1 << 20).unwrap(),
        vec![vec![0, 3], vec![8, 11]]
    );
}

#[test]
fn cross_copy_pair_is_two_components() {
    let db = disjoint_copies(&[(2, &figure1::n1())]);
    let g = G::of(&db);
    // c2 is a leaf: its 2-ball is {c2, c1, n2, n3}.
    assert_eq!(g.ball(&[8 + C2], 2).len(), 4);
    let ball = g.ball(&[C1, 8 + C2], 2);
    assert_eq!(ball.len(), 12);
    let reg = TypeRegistry::new();
    let t = reg.type_of(&db, &[figure1::C1, 8 + figure1::C2], 2).unwrap();
    assert_eq!(t.size(), 12);
    assert_eq!(t.components(), 2);
    assert!(!eval_query(
        &db,
        &[figure1::C1, 8 + figure1::C2],
        &figure1::tau1_query(&reg)
    ));

    let split = unique_split_of(&db, &[figure1::C1, 8 + figure1::C2], 2, &reg).unwrap();
    assert_eq!(split.groups.len(), 2);
    let split = unique_split_of(&db, &[figure1::C1, figure1::C2], 2, &reg).unwrap();
    assert_eq!(split.groups.len(), 1);
    assert_eq!(split.groups[0].coords, vec![0, 1]);
}

#[test]
fn effective_split_multiplicity() {
    // Found tuples from c1 under τ1 lie in its radius-1 ball: 1 + d elements.
    let reg = TypeRegistry::new();
    let g = G::of(&figure1::n1());
    let d = 3;
    assert_eq!(g.ball(&[C1], 1).len(), 1 + d);
    let set = TypeSet::new(2, 2, [figure1::tau1(&reg)]).unwrap();
    assert_eq!(s_eff(&set, d, 2), 4);
    let both = TypeSet::new(2, 2, [figure1::tau1(&reg), figure1::tau2(&reg)]).unwrap();
    assert_eq!(s_eff(&both, d, 2), 8);
}

#[test]
fn enumeration_constants() {
    for (mu, delta) in [(0.1, 2.0 / 3.0), (0.05, 0.8), (0.5, 5.0 / 6.0), (0.01, 0.5)] {
        let base: f64 = 1.0 - mu * (1.0 - mu);
        let q = (base * base).min((1.0 - delta) * (1.0 - delta) / 9.0);
        let mut alpha = 1u64;
        while base.powi(alpha as i32) > q {
            alpha += 1;
        }
        let mut batch = 1u64;
        while (batch as f64) * mu * mu < 1.0 - 1e-12 {
            batch += 1;
        }
        let c = LemmaConstants::new(mu, delta).unwrap();
        assert_eq!((c.alpha, c.batch), (alpha, batch), "mu={mu} delta={delta}");
        assert!((c.q - q).abs() < 1e-15);
    }
    let c = LemmaConstants::new(0.1, 2.0 / 3.0).unwrap();
    assert_eq!((c.alpha, c.batch), (47, 100));
}

#[test]
fn amplification_counts() {
    let target = (5.0f64 / 6.0).sqrt();
    let mut one = 1u32;
    while (1.0f64 / 3.0).powi(one as i32) > 1.0 - target {
        one += 1;
    }
    assert_eq!(one, 3);
    assert_eq!(one_sided_repetitions(target), one);

    let majority_wrong = |r: u64| -> f64 {
        let mut p = 0.0;
        for j in (r / 2 + 1)..=r {
            let mut binom = 1.0;
            for i in 0..j {
                binom = binom * (r - i) as f64 / (i + 1) as f64;
            }
            p += binom * (1.0f64 / 3.0).powi(j as i32) * (2.0f64 / 3.0).powi((r - j) as i32);
        }
        p
    };
    let mut two = 1u64;
    while majority_wrong(two) > 1.0 - target {
        two += 2;
    }
    assert_eq!(two_sided_repetitions(target) as u64, two);
    assert_eq!(two, 17);
}
