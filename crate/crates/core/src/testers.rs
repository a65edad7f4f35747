//! Clause testers, confidence amplification and computation of the relevant
//! type set.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::db::{Database, Elem};
use crate::error::{Error, Result};
use crate::exact::Evaluator;
use crate::neighbourhood::{NbType, TypeRegistry, TypeSet};
use crate::params::{example22_alpha, frequency_sample_size, one_sided_repetitions, two_sided_repetitions};
use crate::query::{QueryNF, Sign};
use crate::workloads::figure1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorModel {
    /// Never wrong.
    Exact,
    /// Members are always accepted.
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TesterVerdict {
    pub accept: bool,
    pub samples_used: u64,
    pub seed: u64,
    pub repetitions: u32,
    pub model: ErrorModel,
    /// The small-input branch evaluated the clause exactly.
    pub full_check: bool,
}

/// A tester for the sentence `∃x̄ sph_τ(x̄) ∧ ψ` of one query clause.
pub trait ClauseTester: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn error_model(&self) -> ErrorModel;

    fn run(&self, db: &Database, q: &QueryNF, clause: usize, eps: f64, rng: &mut dyn RngCore) -> Result<TesterVerdict>;
}

fn verdict(accept: bool, samples: u64, model: ErrorModel, full_check: bool) -> TesterVerdict {
    TesterVerdict {
        accept,
        samples_used: samples,
        seed: 0,
        repetitions: 1,
        model,
        full_check,
    }
}

/// Reference tester: evaluates the clause sentence exactly.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExactTester;

impl ClauseTester for ExactTester {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn error_model(&self) -> ErrorModel {
        ErrorModel::Exact
    }

    fn run(&self, db: &Database, q: &QueryNF, clause: usize, _: f64, _: &mut dyn RngCore) -> Result<TesterVerdict> {
        let ok = Evaluator::new(db, q).clause_holds(clause);
        Ok(verdict(ok, 0, ErrorModel::Exact, true))
    }
}

/// Estimates sentence counts from uniformly sampled elements. Sphere
/// existence is accepted outright once a copy of the sphere type could be
/// inserted within the edit budget.
#[derive(Debug, Default, Clone, Copy)]
pub struct SamplingTester {
    /// Skip the exact small-input branch.
    pub force: bool,
}

impl SamplingTester {
    pub fn forced() -> Self {
        SamplingTester { force: true }
    }
}

impl ClauseTester for SamplingTester {
    fn name(&self) -> &'static str {
        "sampling"
    }

    fn error_model(&self) -> ErrorModel {
        ErrorModel::TwoSided
    }

    fn run(&self, db: &Database, q: &QueryNF, clause: usize, eps: f64, rng: &mut dyn RngCore) -> Result<TesterVerdict> {
        let n = db.n();
        let d = q.d.max(1);
        let cl = &q.clauses[clause];
        let budget = eps * d as f64 * n as f64;
        let insert_cost = cl.sphere.ty.insertion_cost(d) as f64;
        if !self.force && budget < insert_cost {
            let ok = Evaluator::new(db, q).clause_holds(clause);
            return Ok(verdict(ok, 0, ErrorModel::TwoSided, true));
        }
        if cl.sentences.is_empty() || n == 0 {
            return Ok(verdict(true, 0, ErrorModel::TwoSided, false));
        }
        let mut types: Vec<NbType> = Vec::new();
        for h in &cl.sentences {
            if !types.contains(&h.ty) {
                types.push(h.ty.clone());
            }
        }
        let lambda = (eps * d as f64 / 6.0).min(0.25);
        let s = frequency_sample_size(types.len() + 1, lambda);
        let sets: Vec<TypeSet> = types
            .iter()
            .map(|t| TypeSet::new(t.radius(), 1, [t.clone()]).unwrap())
            .collect();
        let mut checkers: Vec<_> = sets.iter().map(|s| s.checker()).collect();
        let mut hits = vec![0u64; types.len()];
        for _ in 0..s {
            let e = rng.gen_range(0..n) as Elem;
            for (i, ch) in checkers.iter_mut().enumerate() {
                if ch.contains(db, &[e]) {
                    hits[i] += 1;
                }
            }
        }
        let accept = cl.sentences.iter().all(|h| {
            let i = types.iter().position(|t| *t == h.ty).unwrap();
            let estimate = hits[i] as f64 / s as f64 * n as f64;
            let m = h.threshold as f64;
            match h.sign {
                Sign::Negated => estimate <= m / 2.0,
                Sign::Positive => estimate >= m / 2.0 || m * h.ty.insertion_cost(d) as f64 <= budget,
            }
        });
        Ok(verdict(accept, s, ErrorModel::TwoSided, false))
    }
}

/// The degree-profile tester for graphs: rejects iff a sampled vertex has
/// a forbidden 2-type. As a clause plugin it handles clauses whose sentences
/// all read ¬∃≥1.
#[derive(Debug, Default, Clone, Copy)]
pub struct Example22Tester {
    pub force: bool,
}

impl Example22Tester {
    pub fn forced() -> Self {
        Example22Tester { force: true }
    }

    fn check_schema(db: &Database) -> Result<()> {
        let rels = db.schema().relations();
        if rels.len() != 1 || rels[0].arity != 2 || !rels[0].symmetric {
            return Err(Error::SchemaMismatch(
                "expected a single binary symmetric relation".into(),
            ));
        }
        Ok(())
    }

    /// Tests "no element has a type in `forbidden`".
    pub fn test_forbidden(
        &self,
        db: &Database,
        d: usize,
        forbidden: &[NbType],
        eps: f64,
        rng: &mut dyn RngCore,
    ) -> Result<TesterVerdict> {
        Self::check_schema(db)?;
        let n = db.n();
        let sets: Vec<TypeSet> = forbidden
            .iter()
            .map(|t| TypeSet::new(t.radius(), 1, [t.clone()]).unwrap())
            .collect();
        let mut checkers: Vec<_> = sets.iter().map(|s| s.checker()).collect();
        let mut bad = |e: Elem| checkers.iter_mut().any(|c| c.contains(db, &[e]));
        let cutoff = 24.0 * (d as f64).powi(3) / eps;
        if !self.force && (n as f64) < cutoff {
            let ok = !(0..n as Elem).any(&mut bad);
            return Ok(verdict(ok, n as u64, ErrorModel::OneSided, true));
        }
        if n == 0 {
            return Ok(verdict(true, 0, ErrorModel::OneSided, false));
        }
        let alpha = example22_alpha(eps, d);
        let mut reject = false;
        for _ in 0..alpha {
            let e = rng.gen_range(0..n) as Elem;
            if bad(e) {
                reject = true;
                break;
            }
        }
        Ok(verdict(!reject, alpha, ErrorModel::OneSided, false))
    }
}

impl ClauseTester for Example22Tester {
    fn name(&self) -> &'static str {
        "example22"
    }

    fn error_model(&self) -> ErrorModel {
        ErrorModel::OneSided
    }

    fn run(&self, db: &Database, q: &QueryNF, clause: usize, eps: f64, rng: &mut dyn RngCore) -> Result<TesterVerdict> {
        Self::check_schema(db)?;
        let cl = &q.clauses[clause];
        let mut forbidden = Vec::new();
        for h in &cl.sentences {
            if h.sign != Sign::Negated || h.threshold != 1 {
                return Err(Error::Invalid(format!(
                    "the degree-profile tester handles only negated threshold-1 sentences (clause {})",
                    clause + 1
                )));
            }
            forbidden.push(h.ty.clone());
        }
        let v = self.test_forbidden(db, q.d, &forbidden, eps, rng)?;
        if v.full_check && v.accept {
            let ok = crate::exact::realises(db, &cl.sphere.ty);
            return Ok(TesterVerdict { accept: ok, ..v });
        }
        Ok(v)
    }
}

/// The stand-alone graph tester for "no vertex has the running example's
/// τ4 type".
pub fn example_tester(db: &Database, eps: f64, seed: u64, force: bool) -> Result<TesterVerdict> {
    Example22Tester::check_schema(db)?;
    let reg = TypeRegistry::new();
    let t4 = figure1::tau4(&reg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = Example22Tester { force }.test_forbidden(db, db.degree_bound(), &[t4], eps, &mut rng)?;
    Ok(TesterVerdict { seed, ..v })
}

/// Repeats a base tester: any rejection rejects for one-sided testers,
/// majority vote for two-sided ones.
#[derive(Debug, Clone)]
pub struct Amplified {
    pub base: Arc<dyn ClauseTester>,
    pub target: f64,
}

impl Amplified {
    pub fn new(base: Arc<dyn ClauseTester>, target: f64) -> Self {
        Amplified { base, target }
    }

    pub fn repetitions(&self) -> u32 {
        match self.base.error_model() {
            ErrorModel::Exact => 1,
            ErrorModel::OneSided => one_sided_repetitions(self.target),
            ErrorModel::TwoSided => two_sided_repetitions(self.target),
        }
    }
}

impl ClauseTester for Amplified {
    fn name(&self) -> &'static str {
        self.base.name()
    }

    fn error_model(&self) -> ErrorModel {
        self.base.error_model()
    }

    fn run(&self, db: &Database, q: &QueryNF, clause: usize, eps: f64, rng: &mut dyn RngCore) -> Result<TesterVerdict> {
        let reps = self.repetitions();
        let mut accepts = 0u32;
        let mut samples = 0u64;
        let mut full = false;
        for i in 0..reps {
            let v = self.base.run(db, q, clause, eps, rng)?;
            samples += v.samples_used;
            accepts += v.accept as u32;
            full |= v.full_check;
            // Exact answers do not improve with repetition.
            if v.full_check {
                return Ok(TesterVerdict {
                    repetitions: i + 1,
                    samples_used: samples,
                    ..v
                });
            }
            if self.error_model() == ErrorModel::OneSided && !v.accept {
                break;
            }
        }
        let accept = match self.error_model() {
            ErrorModel::TwoSided => 2 * accepts > reps,
            _ => accepts == reps,
        };
        Ok(TesterVerdict {
            accept,
            samples_used: samples,
            seed: 0,
            repetitions: reps,
            model: self.error_model(),
            full_check: full,
        })
    }
}

/// One tester per clause.
#[derive(Debug, Clone, Default)]
pub struct TesterPlan {
    pub per_clause: Vec<Option<Arc<dyn ClauseTester>>>,
}

impl TesterPlan {
    pub fn uniform(tester: Arc<dyn ClauseTester>, clauses: usize) -> Self {
        TesterPlan {
            per_clause: vec![Some(tester); clauses],
        }
    }

    pub fn exact(clauses: usize) -> Self {
        Self::uniform(Arc::new(ExactTester), clauses)
    }

    pub fn sampling(clauses: usize) -> Self {
        Self::uniform(Arc::new(SamplingTester::default()), clauses)
    }
}

#[derive(Debug, Clone)]
pub struct ClauseRecord {
    pub clause: usize,
    pub tester: &'static str,
    pub verdict: TesterVerdict,
}

/// The relevant type set together with how it was obtained.
#[derive(Debug, Clone)]
pub struct TypeSetT {
    pub set: TypeSet,
    /// Evaluated exactly on the small-input branch.
    pub exact: bool,
    pub provenance: Vec<ClauseRecord>,
    pub seed: u64,
}

impl TypeSetT {
    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TypeSetOptions {
    /// Run the testers even where the exact branch would apply.
    pub force_testers: bool,
}

/// Per-clause random stream derived from a session seed.
pub fn clause_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The set T of clause sphere types whose clause is accepted. Small inputs
/// (n < 8k/ε) are evaluated exactly.
pub fn compute_type_set(
    db: &Database,
    q: &QueryNF,
    eps: f64,
    plan: &TesterPlan,
    seed: u64,
    opts: TypeSetOptions,
) -> Result<TypeSetT> {
    let m = q.clauses.len();
    let mut set = TypeSet::new(q.radius, q.k, [])?;
    let mut provenance = Vec::with_capacity(m);
    let exact = !opts.force_testers && (db.n() as f64) < 8.0 * q.k as f64 / eps;
    if exact {
        let mut ev = Evaluator::new(db, q);
        for i in 0..m {
            let ok = ev.clause_holds(i);
            if ok {
                set.insert(q.clauses[i].sphere.ty.clone())?;
            }
            provenance.push(ClauseRecord {
                clause: i,
                tester: "exact",
                verdict: TesterVerdict {
                    seed,
                    ..verdict(ok, 0, ErrorModel::Exact, true)
                },
            });
        }
        return Ok(TypeSetT {
            set,
            exact,
            provenance,
            seed,
        });
    }
    let target = (5.0f64 / 6.0).powf(1.0 / m.max(1) as f64);
    for i in 0..m {
        let base = plan
            .per_clause
            .get(i)
            .cloned()
            .flatten()
            .ok_or(Error::MissingTester(i + 1))?;
        let amp = Amplified::new(base, target);
        let mut rng = clause_rng(seed, i as u64);
        let v = amp.run(db, q, i, eps, &mut rng)?;
        if v.accept {
            set.insert(q.clauses[i].sphere.ty.clone())?;
        }
        provenance.push(ClauseRecord {
            clause: i,
            tester: amp.name(),
            verdict: TesterVerdict { seed, ..v },
        });
    }
    Ok(TypeSetT {
        set,
        exact,
        provenance,
        seed,
    })
}

/// Checks that a plan covers every clause.
pub fn require_plan(q: &QueryNF, plan: &TesterPlan) -> Result<()> {
    for i in 0..q.clauses.len() {
        if plan.per_clause.get(i).map_or(true, |t| t.is_none()) {
            return Err(Error::MissingTester(i + 1));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::{disjoint_copies, graph};

    #[test]
    fn exact_branch_on_single_copy() {
        let reg = TypeRegistry::new();
        let q = figure1::example_query(&reg);
        let t = compute_type_set(&figure1::n1(), &q, 0.1, &TesterPlan::default(), 1, Default::default()).unwrap();
        assert!(t.exact);
        assert_eq!(t.set.types(), &[figure1::tau1(&reg)]);
        let none = QueryNF::new(2, 2, 3, q.schema.clone(), vec![]).unwrap();
        let t = compute_type_set(
            &figure1::n1(),
            &none,
            0.1,
            &TesterPlan::default(),
            1,
            Default::default(),
        )
        .unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn missing_tester() {
        let reg = TypeRegistry::new();
        let q = figure1::example_query(&reg);
        let big = figure1::planted(0, 40);
        let plan = TesterPlan {
            per_clause: vec![Some(Arc::new(ExactTester)), None],
        };
        assert!(matches!(
            compute_type_set(&big, &q, 0.5, &plan, 1, Default::default()),
            Err(Error::MissingTester(2))
        ));
        assert!(require_plan(&q, &plan).is_err());
    }

    #[test]
    fn example_tester_branches() {
        let small = figure1::planted(1, 0);
        let v = example_tester(&small, 0.5, 3, false).unwrap();
        assert!(v.full_check && !v.accept);
        let clean = figure1::planted(0, 2);
        assert!(example_tester(&clean, 0.5, 3, false).unwrap().accept);
        for seed in 0..20 {
            assert!(example_tester(&clean, 0.5, seed, true).unwrap().accept);
        }
        let s = crate::db::Schema::parse("relation R 2\n").unwrap();
        let directed = Database::new(Arc::new(s), 3, 2, [(0, vec![0, 1])]).unwrap();
        assert!(matches!(
            example_tester(&directed, 0.5, 0, false),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn sampling_tester_small_input_is_exact() {
        let reg = TypeRegistry::new();
        let q = figure1::example_query(&reg);
        let g = figure1::planted(1, 1);
        let mut rng = clause_rng(0, 0);
        for i in 0..2 {
            let v = SamplingTester::default().run(&g, &q, i, 0.01, &mut rng).unwrap();
            assert!(v.full_check);
            assert_eq!(v.accept, crate::exact::clause_holds(&g, &q, i));
        }
    }

    #[test]
    fn sampling_tester_accepts_sentence_free_clause() {
        let reg = TypeRegistry::new();
        let q = figure1::tau1_query(&reg);
        let g = graph(2000, 3, &[]);
        let mut rng = clause_rng(0, 0);
        let v = SamplingTester::default().run(&g, &q, 0, 0.1, &mut rng).unwrap();
        assert!(v.accept && !v.full_check);
    }

    #[test]
    fn amplification_of_exact_tester() {
        let reg = TypeRegistry::new();
        let q = figure1::example_query(&reg);
        let g = disjoint_copies(&[(30, &figure1::n2())]);
        let amp = Amplified::new(Arc::new(ExactTester), 0.99);
        assert_eq!(amp.repetitions(), 1);
        let mut rng = clause_rng(5, 1);
        assert!(amp.run(&g, &q, 1, 0.1, &mut rng).unwrap().accept);
        let one = Amplified::new(Arc::new(Example22Tester::default()), 2.0 / 3.0);
        assert_eq!(one.repetitions(), 1);
    }
}
