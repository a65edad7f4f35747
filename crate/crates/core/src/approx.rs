//! Approximate membership, neighbourhood distributions and answer counting.

use std::collections::HashMap;

use rand::Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::db::{Database, Elem};
use crate::enumerate::IndexSpace;
use crate::error::Result;
use crate::neighbourhood::{Classifier, NbType, TypeChecker, TypeRegistry};
use crate::params::hoeffding_sample_size;
use crate::query::QueryNF;
use crate::splits::{found_bounds, FoundTuples};
use crate::testers::{clause_rng, compute_type_set, TesterPlan, TypeSetOptions, TypeSetT};

#[derive(Debug, Clone)]
pub struct MembershipIndex {
    pub type_set: TypeSetT,
    pub k: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl MembershipIndex {
    /// Constant-time answering: the tuple's type must lie in T.
    pub fn answer(&self, db: &Database, tuple: &[Elem]) -> bool {
        tuple.len() == self.k && self.answerer().contains(db, tuple)
    }

    /// Reusable checker for many membership calls.
    pub fn answerer(&self) -> TypeChecker<'_> {
        self.type_set.set.checker()
    }
}

pub fn membership_preprocess(
    db: &Database,
    q: &QueryNF,
    eps: f64,
    plan: &TesterPlan,
    seed: u64,
    opts: TypeSetOptions,
) -> Result<MembershipIndex> {
    Ok(MembershipIndex {
        type_set: compute_type_set(db, q, eps, plan, seed, opts)?,
        k: q.k,
        epsilon: eps,
        seed,
    })
}

/// Frequencies of k-centre r-types.
#[derive(Debug, Clone, Default)]
pub struct DistributionVector {
    pub entries: HashMap<NbType, f64>,
    pub samples: u64,
}

impl DistributionVector {
    pub fn get(&self, t: &NbType) -> f64 {
        self.entries.get(t).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn l1_distance(&self, other: &DistributionVector) -> f64 {
        let mut d = 0.0;
        for (t, &v) in &self.entries {
            d += (v - other.get(t)).abs();
        }
        for (t, &v) in &other.entries {
            if !self.entries.contains_key(t) {
                d += v;
            }
        }
        d
    }
}

fn from_counts(counts: HashMap<NbType, u64>, s: u64) -> DistributionVector {
    DistributionVector {
        entries: counts.into_iter().map(|(t, c)| (t, c as f64 / s as f64)).collect(),
        samples: s,
    }
}

/// Empirical type distribution of `s` uniform k-tuples.
pub fn estimate_frequencies<R: Rng>(
    db: &Database,
    r: usize,
    k: usize,
    s: u64,
    reg: &TypeRegistry,
    rng: &mut R,
) -> DistributionVector {
    let mut counts: HashMap<NbType, u64> = HashMap::new();
    let n = db.n();
    if n == 0 || s == 0 {
        return DistributionVector::default();
    }
    let mut cl = Classifier::new(reg);
    let mut t = vec![0 as Elem; k];
    for _ in 0..s {
        for x in t.iter_mut() {
            *x = rng.gen_range(0..n) as Elem;
        }
        *counts.entry(cl.type_of(db, &t, r)).or_default() += 1;
    }
    from_counts(counts, s)
}

/// The exact distribution over all n^k tuples.
pub fn census(db: &Database, r: usize, k: usize, reg: &TypeRegistry) -> Result<DistributionVector> {
    let space = IndexSpace::product(db.n(), k)?;
    let mut counts: HashMap<NbType, u64> = HashMap::new();
    let mut cl = Classifier::new(reg);
    let mut t = Vec::new();
    for i in 0..space.size() {
        space.decode(i, &mut t);
        *counts.entry(cl.type_of(db, &t, r)).or_default() += 1;
    }
    Ok(from_counts(counts, space.size()))
}

#[derive(Debug, Clone)]
pub struct ComponentEstimate {
    pub components: usize,
    pub samples: u64,
    pub mean: f64,
    /// n^i · mean.
    pub scaled: f64,
}

#[derive(Debug, Clone)]
pub struct CountEstimate {
    pub estimate: f64,
    /// λ·c·n^c.
    pub half_width: f64,
    pub conn: usize,
    pub parts: Vec<ComponentEstimate>,
    pub type_set: TypeSetT,
}

/// Estimates |φ(D)|: for each component count i, the mean number of tuples
/// found from a uniform leader tuple in D^i, scaled by n^i.
pub fn approx_count(
    db: &Database,
    q: &QueryNF,
    eps: f64,
    lambda: f64,
    plan: &TesterPlan,
    seed: u64,
    opts: TypeSetOptions,
) -> Result<CountEstimate> {
    let t = compute_type_set(db, q, eps, plan, seed, opts)?;
    let c = q.conn();
    let n = db.n();
    let nf = n as f64;
    let half_width = lambda * c as f64 * nf.powi(c as i32);
    let bounds = found_bounds(&t.set, db.degree_bound(), db.schema().max_arity());
    let mut parts = Vec::new();
    let mut estimate = 0.0;
    let mut ft = FoundTuples::new(&t.set);
    let mut leaders = vec![0 as Elem; c];
    for i in 1..=c {
        let range = bounds.get(i).copied().unwrap_or(0);
        if range == 0 || n == 0 {
            parts.push(ComponentEstimate {
                components: i,
                samples: 0,
                mean: 0.0,
                scaled: 0.0,
            });
            continue;
        }
        let s = hoeffding_sample_size(range as f64, lambda, c);
        let mut rng = clause_rng(seed, 1000 + i as u64);
        let mut total = 0u64;
        for _ in 0..s {
            for x in leaders[..i].iter_mut() {
                *x = rng.gen_range(0..n) as Elem;
            }
            total += ft.count(db, &leaders[..i]) as u64;
        }
        let mean = total as f64 / s as f64;
        let scaled = mean * nf.powi(i as i32);
        estimate += scaled;
        parts.push(ComponentEstimate {
            components: i,
            samples: s,
            mean,
            scaled,
        });
    }
    Ok(CountEstimate {
        estimate,
        half_width,
        conn: c,
        parts,
        type_set: t,
    })
}

/// One-sided binomial test of "success probability ≥ p": passes unless the
/// observed count is significantly low, i.e. P[Bin(trials, p) ≤ successes]
/// falls below `alpha`.
pub fn binomial_test_passes(successes: u64, trials: u64, p: f64, alpha: f64) -> bool {
    if trials == 0 {
        return true;
    }
    Binomial::new(p, trials).unwrap().cdf(successes) >= alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testers::ExactTester;
    use crate::workloads::{disjoint_copies, figure1, graph};
    use rand::SeedableRng;
    use std::sync::Arc;

    #[test]
    fn membership_on_exact_branch() {
        let reg = TypeRegistry::new();
        let q = figure1::example_query(&reg);
        let db = figure1::n1();
        let idx = membership_preprocess(&db, &q, 0.1, &TesterPlan::default(), 0, Default::default()).unwrap();
        assert!(idx.answer(&db, &[figure1::C1, figure1::C2]));
        assert!(!idx.answer(&db, &[figure1::C2, figure1::C1]));
        let n3 = figure1::n3();
        let idx3 = membership_preprocess(&n3, &q, 0.1, &TesterPlan::default(), 0, Default::default()).unwrap();
        assert!(!idx3.answer(&n3, &[figure1::C1, figure1::C2]));
    }

    #[test]
    fn census_and_sampling() {
        let reg = TypeRegistry::new();
        let db = disjoint_copies(&[(5, &figure1::n1())]);
        let dv = census(&db, 2, 1, &reg).unwrap();
        assert_eq!(dv.entries.len(), 3);
        assert!((dv.total() - 1.0).abs() < 1e-12);
        assert!((dv.get(&figure1::tau4(&reg)) - 0.125).abs() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let v = estimate_frequencies(&db, 2, 1, 5000, &reg, &mut rng);
        assert!((v.total() - 1.0).abs() < 1e-9);
        assert!(v.l1_distance(&dv) < 0.1);
        let iso = graph(50, 3, &[]);
        let v = estimate_frequencies(&iso, 1, 1, 10, &reg, &mut rng);
        assert_eq!(v.entries.len(), 1);
    }

    #[test]
    fn counting_sums_found_tuples() {
        let reg = TypeRegistry::new();
        let q = figure1::tau1_query(&reg);
        let db = figure1::planted(3, 1);
        let plan = TesterPlan::uniform(Arc::new(ExactTester), 1);
        let est = approx_count(&db, &q, 0.1, 0.05, &plan, 4, Default::default()).unwrap();
        assert_eq!(est.conn, 1);
        assert!((est.estimate - 3.0).abs() <= est.half_width);
        let none = figure1::planted(0, 3);
        let est = approx_count(&none, &q, 0.1, 0.05, &plan, 4, Default::default()).unwrap();
        assert_eq!(est.estimate, 0.0);
    }

    #[test]
    fn binomial_test() {
        assert!(binomial_test_passes(200, 300, 2.0 / 3.0, 0.01));
        assert!(binomial_test_passes(185, 300, 2.0 / 3.0, 0.01));
        assert!(!binomial_test_passes(150, 300, 2.0 / 3.0, 0.01));
        assert!(binomial_test_passes(0, 0, 2.0 / 3.0, 0.01));
    }
}
