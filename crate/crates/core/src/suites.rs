//! Statistical acceptance suites, one per criterion, with adjustable trial
//! counts. Shared by the acceptance test and the `selftest` command.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approx::{approx_count, binomial_test_passes, census, estimate_frequencies};
use crate::db::{Database, Elem, Schema};
use crate::enumerate::{enumerate, EnumConfig, EnumSummary, Mode};
use crate::error::Result;
use crate::exact::{answer_set, closeness_check_many, count_type, Evaluator};
use crate::neighbourhood::{ball_bound, NbType, TypeRegistry, TypeSet};
use crate::params::frequency_sample_size;
use crate::query::{Clause, QueryNF, SphereAtom};
use crate::splits::{found_from, group_coordinates, unique_split_of, FoundTuples};
use crate::testers::{example_tester, Example22Tester, TesterPlan};
use crate::workloads::{disjoint_copies, figure1, k2_family, random_database, random_graph, small_components};

/// Significance of the one-sided binomial tests.
pub const SIGNIFICANCE: f64 = 0.01;
/// Relative spread allowed in the maximum delay across database sizes.
pub const DELAY_SPREAD: f64 = 0.05;
/// Allowed factor between measured and analytic maximum delay.
pub const DELAY_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    /// Fraction of the full trial counts; 0 runs nothing.
    pub scale: f64,
    /// Test hook: enumerate without the dedup record.
    pub fault_no_dedup: bool,
    /// Fail criteria that exceed their time budget.
    pub enforce_time: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            scale: 1.0,
            fault_no_dedup: false,
            enforce_time: true,
        }
    }
}

impl SuiteConfig {
    pub fn trials(&self, full: u64) -> u64 {
        if self.scale <= 0.0 {
            0
        } else {
            ((full as f64 * self.scale).round() as u64).max(1)
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    /// Nothing was run.
    pub vacuous: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {}: {} [{:.1}s of {}s]{}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs(),
            if self.vacuous { " (warning: no trials run)" } else { "" }
        )
    }
}

/// Duplicate bookkeeping across enumeration runs.
#[derive(Debug, Default, Clone)]
pub struct DupStats {
    pub runs: u64,
    pub outputs: u64,
    pub runs_with_duplicates: u64,
}

impl DupStats {
    /// Records one run's outputs; true if they were duplicate-free.
    pub fn record(&mut self, outputs: &[Vec<Elem>]) -> bool {
        self.runs += 1;
        self.outputs += outputs.len() as u64;
        let distinct: HashSet<&Vec<Elem>> = outputs.iter().collect();
        let clean = distinct.len() == outputs.len();
        if !clean {
            self.runs_with_duplicates += 1;
        }
        clean
    }

    /// As `record`, for tuples packed by `pack`; sorts `keys`.
    pub fn record_packed(&mut self, keys: &mut [u64]) -> bool {
        self.runs += 1;
        self.outputs += keys.len() as u64;
        keys.sort_unstable();
        let clean = keys.windows(2).all(|w| w[0] != w[1]);
        if !clean {
            self.runs_with_duplicates += 1;
        }
        clean
    }
}

/// Tuple as a base-n number.
fn pack(t: &[Elem], n: usize) -> u64 {
    t.iter().fold(0, |a, &x| a * n as u64 + x as u64)
}

fn packed_truth<'a>(answers: impl IntoIterator<Item = &'a Vec<Elem>>, n: usize) -> Vec<u64> {
    let mut v: Vec<u64> = answers.into_iter().map(|t| pack(t, n)).collect();
    v.sort_unstable();
    v
}

fn run_packed(mode: Mode, db: &Database, q: &QueryNF, cfg: &EnumConfig, plan: &TesterPlan) -> Result<Vec<u64>> {
    let n = db.n();
    let mut out = Vec::new();
    enumerate(mode, db, q, cfg, plan, &mut |t| out.push(pack(t, n)))?;
    Ok(out)
}

fn run_collect(
    mode: Mode,
    db: &Database,
    q: &QueryNF,
    cfg: &EnumConfig,
    plan: &TesterPlan,
) -> Result<(Vec<Vec<Elem>>, EnumSummary)> {
    let mut out = Vec::new();
    let s = enumerate(mode, db, q, cfg, plan, &mut |t| out.push(t.to_vec()))?;
    Ok((out, s))
}

fn stat(successes: u64, trials: u64, p: f64) -> (bool, String) {
    let ok = binomial_test_passes(successes, trials, p, SIGNIFICANCE);
    (ok, format!("{successes}/{trials}"))
}

struct Timer {
    start: Instant,
    limit: Duration,
}

fn report(
    id: u8,
    title: &'static str,
    t: Timer,
    cfg: &SuiteConfig,
    ok: bool,
    vacuous: bool,
    detail: String,
) -> CriterionReport {
    let elapsed = t.start.elapsed();
    let in_time = !cfg.enforce_time || elapsed <= t.limit;
    CriterionReport {
        id,
        title,
        passed: (ok && in_time) || vacuous,
        vacuous,
        detail: if in_time {
            detail
        } else {
            format!("{detail}; over time budget")
        },
        elapsed,
        limit: t.limit,
    }
}

fn timer(secs: u64) -> Timer {
    Timer {
        start: Instant::now(),
        limit: Duration::from_secs(secs),
    }
}

/// Output cap for runs that could loop without the dedup record.
fn cap_for(expected: usize) -> Option<u64> {
    Some(2 * expected as u64 + 100)
}

/// Local query whose clauses are the types of a few random tuples.
fn random_local_query<R: Rng>(db: &Database, k: usize, r: usize, reg: &TypeRegistry, rng: &mut R) -> QueryNF {
    let clauses = (0..3)
        .map(|_| {
            let t: Vec<Elem> = (0..k).map(|_| rng.gen_range(0..db.n()) as Elem).collect();
            Clause {
                sphere: SphereAtom {
                    ty: reg.type_of(db, &t, r).unwrap(),
                },
                sentences: vec![],
            }
        })
        .collect();
    QueryNF::new(k, r, db.degree_bound(), db.schema().clone(), clauses).unwrap()
}

/// 1: every tuple emitted by the local enumerator is an answer.
pub fn criterion1(cfg: &SuiteConfig, dups: &mut DupStats) -> CriterionReport {
    let t = timer(120);
    let runs = cfg.trials(10_000);
    if runs == 0 {
        return report(1, "local soundness", t, cfg, true, true, "0 runs".into());
    }
    let instances = 20u64.min(runs);
    let per = runs.div_ceil(instances);
    let mixed = Arc::new(Schema::parse("relation R 3\nrelation E 2 symmetric\nrelation U 1\n").unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut bad = 0u64;
    let mut emitted = 0u64;
    let mut done = 0u64;
    let mut compared = 0u64;
    for i in 0..instances {
        let n = rng.gen_range(50..=2000);
        let d = rng.gen_range(2..=4);
        let db = if i % 2 == 0 {
            random_graph(n, d, n * d / 2, &mut rng)
        } else {
            random_database(mixed.clone(), n, d, n * d / 3, &mut rng)
        };
        let reg = TypeRegistry::new();
        let k = 1 + (i as usize / 2) % 2;
        let r = 1 + (i as usize / 4) % 2;
        let q = random_local_query(&db, k, r, &reg, &mut rng);
        let clause_types: Vec<NbType> = q.clauses.iter().map(|c| c.sphere.ty.clone()).collect();
        let mut oracle: HashMap<Vec<Elem>, bool> = HashMap::new();
        let exact: Option<HashSet<Vec<Elem>>> =
            (n.pow(k as u32) <= 10_000).then(|| answer_set(&db, &q, 1 << 20).unwrap().into_iter().collect());
        for s in 0..per.min(runs - done) {
            // The expansion variant is much costlier per run; a sparse share suffices.
            let mode = if i % 3 == 2 && s % 10 == 0 {
                Mode::LocalStrengthened
            } else {
                Mode::Local
            };
            let ecfg = EnumConfig {
                gamma: [0.2, 0.3, 0.5][(s % 3) as usize],
                seed: s * 7919 + i,
                max_outputs: Some(100),
                fault_no_dedup: cfg.fault_no_dedup,
                ..Default::default()
            };
            let (out, _) = run_collect(mode, &db, &q, &ecfg, &TesterPlan::default()).unwrap();
            dups.record(&out);
            emitted += out.len() as u64;
            for b in &out {
                let ok = *oracle
                    .entry(b.clone())
                    .or_insert_with(|| clause_types.contains(&reg.type_of(&db, b, r).unwrap()));
                if !ok {
                    bad += 1;
                }
                if let Some(e) = &exact {
                    compared += 1;
                    if !e.contains(b) {
                        bad += 1;
                    }
                }
            }
            done += 1;
        }
    }
    let detail = format!("{done} runs, {emitted} tuples emitted, {bad} outside the answer set ({compared} also checked against full answer sets)");
    report(1, "local soundness", t, cfg, bad == 0, false, detail)
}

/// 2: the local enumerator returns all answers with probability ≥ 2/3 when
/// |φ(D)| ≥ γn².
pub fn criterion2(cfg: &SuiteConfig, dups: &mut DupStats) -> CriterionReport {
    let t = timer(300);
    let trials = cfg.trials(300);
    if trials == 0 {
        return report(2, "local completeness", t, cfg, true, true, "0 trials".into());
    }
    let gamma = 0.05;
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [500usize, 2000] {
        let fam = k2_family(n, n as u64);
        let reg = TypeRegistry::new();
        let q = fam.pair_query(&reg, false);
        let truth = packed_truth(&fam.answers(), n);
        let dense = truth.len() as f64 >= gamma * (n * n) as f64;
        let mut hits = 0;
        for s in 0..trials {
            let ecfg = EnumConfig {
                gamma,
                seed: 1000 + s,
                max_outputs: cap_for(truth.len()),
                fault_no_dedup: cfg.fault_no_dedup,
                ..Default::default()
            };
            let mut out = run_packed(Mode::Local, &fam.db, &q, &ecfg, &TesterPlan::default()).unwrap();
            let clean = dups.record_packed(&mut out);
            if clean && out == truth {
                hits += 1;
            }
        }
        let (pass, frac) = stat(hits, trials, 2.0 / 3.0);
        ok &= pass && dense;
        parts.push(format!("n={n} |answers|={} S=answers in {frac}", truth.len()));
    }
    report(2, "local completeness", t, cfg, ok, false, parts.join("; "))
}

/// 3: expansion modes reach every answer when |φ(D)| ≥ γn with c = 1.
pub fn criterion3(cfg: &SuiteConfig, dups: &mut DupStats) -> CriterionReport {
    let t = timer(300);
    let trials = cfg.trials(300);
    if trials == 0 {
        return report(3, "strengthened threshold", t, cfg, true, true, "0 trials".into());
    }
    let gamma = 0.05;
    let reg = TypeRegistry::new();
    let mut ok = true;
    let mut parts = Vec::new();
    let local_db = figure1::planted(2000, 2000);
    let general_db = figure1::planted(0, 4000);
    let workloads = [
        (Mode::LocalStrengthened, figure1::tau1_query(&reg), &local_db),
        (Mode::GeneralStrengthened, figure1::example_query(&reg), &general_db),
    ];
    for (mode, q, db) in workloads {
        let truth = packed_truth(&answer_set_by_gadget(db, &q), db.n());
        let n = db.n() as f64;
        let meets = truth.len() as f64 >= gamma * n;
        let misses_square = (truth.len() as f64) < gamma * n * n;
        let plan = TesterPlan::sampling(q.clauses.len());
        let mut hits = 0;
        for s in 0..trials {
            let ecfg = EnumConfig {
                gamma,
                epsilon: 0.1,
                seed: 5000 + s,
                max_outputs: cap_for(truth.len()),
                fault_no_dedup: cfg.fault_no_dedup,
                ..Default::default()
            };
            let mut out = run_packed(mode, db, &q, &ecfg, &plan).unwrap();
            let clean = dups.record_packed(&mut out);
            if clean && out == truth {
                hits += 1;
            }
        }
        let (pass, frac) = stat(hits, trials, 2.0 / 3.0);
        ok &= pass && meets && misses_square;
        parts.push(format!(
            "{} n={} |answers|={} (≥γn: {meets}, <γn²: {misses_square}) complete in {frac}",
            mode.name(),
            db.n(),
            truth.len()
        ));
    }
    report(3, "strengthened threshold", t, cfg, ok, false, parts.join("; "))
}

/// Answers on gadget unions: every centre pair of every copy, kept if its
/// type is a clause type whose sentences hold.
fn answer_set_by_gadget(db: &Database, q: &QueryNF) -> HashSet<Vec<Elem>> {
    let reg = TypeRegistry::new();
    let mut ev = Evaluator::new(db, q);
    let active: Vec<NbType> = (0..q.clauses.len())
        .filter(|&i| ev.sentences_hold(i))
        .map(|i| q.clauses[i].sphere.ty.clone())
        .collect();
    (0..db.n() / 8)
        .map(|c| figure1::centre_pair(c).to_vec())
        .filter(|p| active.contains(&reg.type_of(db, p, q.radius).unwrap()))
        .collect()
}

/// 4: no run emits a tuple twice, including two-component expansions.
pub fn criterion4(cfg: &SuiteConfig, dups: &mut DupStats) -> CriterionReport {
    let t = timer(120);
    let trials = cfg.trials(100);
    let fam = k2_family(400, 4);
    let reg = TypeRegistry::new();
    let local = fam.pair_query(&reg, false);
    let general = fam.pair_query(&reg, true);
    let cap = cap_for(fam.answers().len());
    for s in 0..trials {
        let ecfg = EnumConfig {
            gamma: 0.05,
            epsilon: 0.1,
            seed: 9000 + s,
            max_outputs: cap,
            fault_no_dedup: cfg.fault_no_dedup,
            ..Default::default()
        };
        let plan = TesterPlan::sampling(2);
        for (mode, q) in [
            (Mode::LocalStrengthened, &local),
            (Mode::GeneralStrengthened, &general),
            (Mode::Hanf, &general),
        ] {
            let mut out = run_packed(mode, &fam.db, q, &ecfg, &plan).unwrap();
            dups.record_packed(&mut out);
        }
    }
    let detail = format!(
        "{} runs, {} tuples, {} runs with a repeated tuple",
        dups.runs, dups.outputs, dups.runs_with_duplicates
    );
    let vacuous = dups.runs == 0;
    report(
        4,
        "no duplicates",
        t,
        cfg,
        dups.runs_with_duplicates == 0,
        vacuous,
        detail,
    )
}

/// Maximum per-output work for one mode across database sizes.
#[derive(Debug, Clone)]
pub struct DelaySweep {
    pub mode: Mode,
    pub rows: Vec<(usize, EnumSummary)>,
}

impl DelaySweep {
    pub fn spread(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.1.delay.max).max().unwrap_or(0) as f64;
        let min = self.rows.iter().map(|r| r.1.delay.max).min().unwrap_or(0) as f64;
        if min == 0.0 {
            f64::INFINITY
        } else {
            (max - min) / min
        }
    }

    /// Measured maximum over the analytic bound, extreme values.
    pub fn bound_ratios(&self) -> (f64, f64) {
        let ratios: Vec<f64> = self
            .rows
            .iter()
            .map(|(_, s)| s.delay.max as f64 / s.delay_bound().unwrap_or(1) as f64)
            .collect();
        (
            ratios.iter().cloned().fold(f64::INFINITY, f64::min),
            ratios.iter().cloned().fold(0.0, f64::max),
        )
    }
}

/// Runs the single-edge workload at each size, capping outputs.
pub fn delay_sweep(mode: Mode, sizes: &[usize], outputs: u64, seed: u64) -> Result<DelaySweep> {
    delay_sweep_on(mode, sizes, outputs, seed, false)
}

/// With `empty`, the query runs on triangles and 3-paths only, so nothing is
/// emitted and only the end message is timed.
pub fn delay_sweep_on(mode: Mode, sizes: &[usize], outputs: u64, seed: u64, empty: bool) -> Result<DelaySweep> {
    let mut rows = Vec::new();
    for &n in sizes {
        let fam = k2_family(n, 77);
        let reg = TypeRegistry::new();
        let q = fam.pair_query(&reg, !mode.needs_local());
        let db = if empty {
            let tri = n / 6;
            small_components(0, tri, tri, n - 6 * tri)
        } else {
            fam.db
        };
        let cfg = EnumConfig {
            gamma: 0.05,
            epsilon: 0.1,
            seed,
            max_outputs: Some(outputs),
            ..Default::default()
        };
        let s = enumerate(mode, &db, &q, &cfg, &TesterPlan::sampling(q.clauses.len()), &mut |_| {})?;
        rows.push((n, s));
    }
    Ok(DelaySweep { mode, rows })
}

/// 5: maximum work per output is flat in n and near the analytic bound.
pub fn criterion5(cfg: &SuiteConfig) -> CriterionReport {
    let t = timer(600);
    // The maximum is an extreme value over many rounds, so the output count
    // is not scaled down.
    let outputs = if cfg.scale > 0.0 { 5000 } else { 0 };
    if outputs == 0 {
        return report(5, "constant delay", t, cfg, true, true, "0 outputs".into());
    }
    let sizes = [1_000, 10_000, 100_000];
    let mut ok = true;
    let mut parts = Vec::new();
    for mode in [Mode::Local, Mode::General] {
        let sweep = delay_sweep(mode, &sizes, outputs, 11).unwrap();
        let spread = sweep.spread();
        let (lo, hi) = sweep.bound_ratios();
        let cutoffs = sweep
            .rows
            .iter()
            .all(|(_, s)| mode == Mode::Local || !s.exact_preprocessing);
        let full = sweep.rows.iter().all(|(_, s)| s.outputs == outputs);
        ok &= spread < DELAY_SPREAD && lo >= 1.0 / DELAY_FACTOR && hi <= DELAY_FACTOR && cutoffs && full;
        let maxes: Vec<String> = sweep
            .rows
            .iter()
            .map(|(n, s)| format!("n={n}:{}", s.delay.max))
            .collect();
        parts.push(format!(
            "{} max ops/output {} bound {} spread {:.2}% ratio {:.2}..{:.2}",
            mode.name(),
            maxes.join(","),
            sweep.rows[0].1.delay_bound().unwrap_or(0),
            spread * 100.0,
            lo,
            hi
        ));
    }
    report(5, "constant delay", t, cfg, ok, false, parts.join("; "))
}

/// Lower bound on the edits needed to remove every τ4 centre: one edit
/// changes the 2-type only of vertices within distance 2 of its endpoints.
pub fn tau4_edit_lower_bound(db: &Database, reg: &TypeRegistry) -> (usize, usize) {
    let centres = count_type(db, &figure1::tau4(reg));
    let per_edit = 2 * ball_bound(db.degree_bound(), 2) as usize;
    (centres, centres.div_ceil(per_edit))
}

/// 6: the degree-profile tester accepts members and rejects far inputs.
pub fn criterion6(cfg: &SuiteConfig) -> CriterionReport {
    let t = timer(120);
    let trials = cfg.trials(200);
    if trials == 0 {
        return report(6, "graph property tester", t, cfg, true, true, "0 trials".into());
    }
    let eps = 0.002;
    let reg = TypeRegistry::new();
    let copies = 41_000;
    let members = [
        ("N2 copies", disjoint_copies(&[(copies, &figure1::n2())])),
        ("N3 copies", disjoint_copies(&[(copies, &figure1::n3())])),
        (
            "mixed N2/N3",
            disjoint_copies(&[(copies / 2, &figure1::n2()), (copies / 2, &figure1::n3())]),
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, db) in &members {
        let member = count_type(db, &figure1::tau4(&reg)) == 0;
        let accepts = (0..trials)
            .filter(|&s| example_tester(db, eps, s, false).unwrap().accept)
            .count() as u64;
        ok &= member && accepts == trials;
        parts.push(format!("{name} accepted {accepts}/{trials}"));
    }
    let far = disjoint_copies(&[(copies, &figure1::n4())]);
    let n = far.n();
    let sampled = n as f64 >= 24.0 * 27.0 / eps;
    let (centres, edits) = tau4_edit_lower_bound(&far, &reg);
    let budget = eps * 3.0 * n as f64;
    let certified = edits as f64 > budget;
    let rejects = (0..trials)
        .filter(|&s| !example_tester(&far, eps, s, false).unwrap().accept)
        .count() as u64;
    let (pass, frac) = stat(rejects, trials, 2.0 / 3.0);
    ok &= certified && sampled && pass && rejects * 3 >= 2 * trials;
    parts.push(format!(
        "N4 copies n={n}: {centres} τ4 centres need ≥{edits} edits > εdn={budget:.0}, rejected {frac}"
    ));
    report(6, "graph property tester", t, cfg, ok, false, parts.join("; "))
}

/// 7: sampled type frequencies are λ-close in L1 to the census.
pub fn criterion7(cfg: &SuiteConfig) -> CriterionReport {
    let t = timer(180);
    let trials = cfg.trials(300);
    if trials == 0 {
        return report(7, "frequency estimation", t, cfg, true, true, "0 trials".into());
    }
    let lambda = 0.1;
    let mut ok = true;
    let mut parts = Vec::new();
    let mixed = Arc::new(Schema::parse("relation R 3\nrelation E 2 symmetric\nrelation U 1\n").unwrap());
    let families: [(&str, Database, usize, usize); 3] = [
        ("N1 copies", disjoint_copies(&[(500, &figure1::n1())]), 2, 1),
        ("single-edge family", k2_family(3000, 7).db, 1, 1),
        (
            "unary facts",
            random_database(mixed, 2000, 3, 2500, &mut ChaCha8Rng::seed_from_u64(7)),
            0,
            1,
        ),
    ];
    for (name, db, r, k) in &families {
        let reg = TypeRegistry::new();
        let dv = census(db, *r, *k, &reg).unwrap();
        let c = dv.entries.len();
        let s = frequency_sample_size(c, lambda);
        let mut hits = 0;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = estimate_frequencies(db, *r, *k, s, &reg, &mut rng);
            if v.l1_distance(&dv) <= lambda {
                hits += 1;
            }
        }
        let (pass, frac) = stat(hits, trials, 0.9);
        ok &= pass;
        parts.push(format!("{name} (r={r}, k={k}, c={c}, s={s}) within λ in {frac}"));
    }
    report(7, "frequency estimation", t, cfg, ok, false, parts.join("; "))
}

/// Splits check on one instance: the found tuples of all leader tuples
/// partition the tuples whose type lies in `types`.
fn splits_instance(db: &Database, k: usize, r: usize, keep: impl Fn(usize) -> bool) -> (bool, usize) {
    let reg = TypeRegistry::new();
    let n = db.n();
    let total = n.pow(k as u32);
    let mut all = Vec::with_capacity(total);
    let mut t = vec![0 as Elem; k];
    for idx in 0..total as u64 {
        crate::exact::decode_tuple(idx, n, k, &mut t);
        all.push((t.clone(), reg.type_of(db, &t, r).unwrap()));
    }
    let mut distinct: Vec<NbType> = Vec::new();
    for (_, ty) in &all {
        if !distinct.contains(ty) {
            distinct.push(ty.clone());
        }
    }
    let chosen: Vec<NbType> = distinct
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, t)| t.clone())
        .collect();
    let expected: HashSet<Vec<Elem>> = all
        .iter()
        .filter(|(_, ty)| chosen.contains(ty))
        .map(|(b, _)| b.clone())
        .collect();
    let set = TypeSet::new(r, k, chosen).unwrap();
    let mut ft = FoundTuples::new(&set);
    let mut seen: HashMap<Vec<Elem>, u32> = HashMap::new();
    let mut leaders = Vec::new();
    for len in 1..=k {
        for idx in 0..n.pow(len as u32) as u64 {
            leaders.resize(len, 0);
            crate::exact::decode_tuple(idx, n, len, &mut leaders);
            ft.for_each(db, &leaders, |b| {
                *seen.entry(b.to_vec()).or_default() += 1;
                true
            });
        }
    }
    let exact = seen.len() == expected.len() && seen.iter().all(|(b, &m)| m == 1 && expected.contains(b));
    // Round trip through the explicit split on a sample of answers.
    let mut ex = crate::db::Explorer::default();
    let mut round_trip = true;
    for b in expected.iter().take(300) {
        let split = unique_split_of(db, b, r, &reg).unwrap();
        let groups = group_coordinates(db, b, r, &mut ex);
        let leaders: Vec<Elem> = groups.iter().map(|g| b[g[0]]).collect();
        round_trip &= found_from(db, &leaders, &split, &reg).unwrap().as_ref() == Some(b);
    }
    (exact && round_trip, expected.len())
}

/// 8: found tuples over all leader tuples are exactly the tuples with a type
/// in T, each found once.
pub fn criterion8(cfg: &SuiteConfig) -> CriterionReport {
    let t = timer(120);
    let instances = cfg.trials(16);
    if instances == 0 {
        return report(8, "split equivalence", t, cfg, true, true, "0 instances".into());
    }
    let mixed = Arc::new(Schema::parse("relation R 3\nrelation E 2 symmetric\nrelation U 1\n").unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(0x58);
    let mut ok = true;
    let mut checked = 0;
    let mut tuples = 0;
    for i in 0..instances {
        let (k, n) = [(1, 40), (2, 40), (2, 30), (3, 16)][(i % 4) as usize];
        let r = (i / 4 % 2) as usize;
        let db = if i % 3 == 0 {
            random_database(mixed.clone(), n, 3, n, &mut rng)
        } else {
            random_graph(n, 3, n, &mut rng)
        };
        let all = i % 2 == 0;
        let mask: u64 = rng.gen();
        let (pass, count) = splits_instance(&db, k, r, |j| all || mask >> (j % 64) & 1 == 1);
        ok &= pass;
        checked += 1;
        tuples += count;
    }
    let detail = format!("{checked} databases with n ≤ 40, {tuples} tuples with a type in T, all found exactly once");
    report(
        8,
        "split equivalence",
        t,
        cfg,
        ok,
        false,
        if ok { detail } else { format!("mismatch; {detail}") },
    )
}

/// 9: general-mode outputs are answers or ε-close to answers.
pub fn criterion9(cfg: &SuiteConfig) -> CriterionReport {
    let t = timer(600);
    let trials = cfg.trials(300);
    if trials == 0 {
        return report(
            9,
            "general soundness with closeness",
            t,
            cfg,
            true,
            true,
            "0 trials".into(),
        );
    }
    let reg = TypeRegistry::new();
    let q = figure1::example_query(&reg);
    let cases = [
        (figure1::planted(1, 1), 0usize),
        (figure1::planted(1, 1), 1),
        (figure1::planted(2, 1), 1),
        (figure1::planted(2, 1), 2),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (db, budget) in &cases {
        let n = db.n();
        let eps = (*budget as f64).max(0.5) / (3.0 * n as f64);
        let all: Vec<Vec<Elem>> = (0..(n * n) as u64)
            .map(|i| {
                let mut t = vec![0; 2];
                crate::exact::decode_tuple(i, n, 2, &mut t);
                t
            })
            .collect();
        let close = closeness_check_many(db, &all, &q, eps, 1 << 24).unwrap();
        let accepted: HashSet<Vec<Elem>> = all
            .iter()
            .zip(&close)
            .filter(|(_, &c)| c)
            .map(|(t, _)| t.clone())
            .collect();
        let answers = answer_set(db, &q, 1 << 20).unwrap().len();
        let runs: [(Mode, TesterPlan, bool); 3] = [
            (Mode::General, TesterPlan::sampling(2), false),
            (Mode::GeneralStrengthened, TesterPlan::sampling(2), false),
            (
                Mode::Hanf,
                TesterPlan::uniform(Arc::new(Example22Tester::forced()), 2),
                true,
            ),
        ];
        for (mode, plan, force) in runs {
            let mut hits = 0;
            for s in 0..trials {
                let ecfg = EnumConfig {
                    gamma: 0.01,
                    epsilon: eps,
                    seed: 300 + s,
                    force_testers: force,
                    ..Default::default()
                };
                let (out, _) = run_collect(mode, db, &q, &ecfg, &plan).unwrap();
                if out.iter().all(|b| accepted.contains(b)) {
                    hits += 1;
                }
            }
            let (pass, frac) = stat(hits, trials, 2.0 / 3.0);
            ok &= pass;
            parts.push(format!(
                "n={n} budget={budget} {}{}: |φ|={answers} |φ∪close|={} sound in {frac}",
                mode.name(),
                if force { " (sampled tester)" } else { "" },
                accepted.len()
            ));
        }
    }
    report(
        9,
        "general soundness with closeness",
        t,
        cfg,
        ok,
        false,
        parts.join("; "),
    )
}

/// 10: the count estimate lands in [true − λcn^c, trueClose + λcn^c].
pub fn criterion10(cfg: &SuiteConfig) -> CriterionReport {
    let t = timer(300);
    let trials = cfg.trials(300);
    if trials == 0 {
        return report(10, "approximate counting", t, cfg, true, true, "0 trials".into());
    }
    let reg = TypeRegistry::new();
    let fam = k2_family(200, 10);
    struct Case {
        name: &'static str,
        db: Database,
        q: QueryNF,
        eps: f64,
        lambda: f64,
        truth: usize,
        close: usize,
    }
    let mut cases = vec![
        Case {
            name: "τ1 on N1/N2 copies",
            db: figure1::planted(200, 200),
            q: figure1::tau1_query(&reg),
            eps: 0.1,
            lambda: 0.02,
            truth: 200,
            close: 200,
        },
        Case {
            name: "edge-endpoint pairs (c=2)",
            q: fam.pair_query(&reg, false),
            truth: fam.answers().len(),
            close: fam.answers().len(),
            db: fam.db.clone(),
            eps: 0.1,
            lambda: 0.05,
        },
    ];
    for (db, budget) in [(figure1::planted(1, 1), 1usize), (figure1::planted(2, 1), 1)] {
        let q = figure1::example_query(&reg);
        let n = db.n();
        let eps = budget as f64 / (3.0 * n as f64);
        let all: Vec<Vec<Elem>> = (0..(n * n) as u64)
            .map(|i| {
                let mut t = vec![0; 2];
                crate::exact::decode_tuple(i, n, 2, &mut t);
                t
            })
            .collect();
        let close = closeness_check_many(&db, &all, &q, eps, 1 << 24).unwrap();
        let truth = answer_set(&db, &q, 1 << 20).unwrap().len();
        cases.push(Case {
            name: "running example on G_{l,1}",
            close: close.iter().filter(|&&c| c).count(),
            truth,
            db,
            q,
            eps,
            lambda: 0.1,
        });
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &cases {
        let plan = TesterPlan::sampling(c.q.clauses.len());
        let mut hits = 0;
        let mut width = 0.0;
        for s in 0..trials {
            let est = approx_count(&c.db, &c.q, c.eps, c.lambda, &plan, 40 + s, Default::default()).unwrap();
            width = est.half_width;
            if est.estimate >= c.truth as f64 - est.half_width && est.estimate <= c.close as f64 + est.half_width {
                hits += 1;
            }
        }
        let (pass, frac) = stat(hits, trials, 2.0 / 3.0);
        ok &= pass;
        parts.push(format!(
            "{} n={}: true={} close={} ±{width:.1} in {frac}",
            c.name,
            c.db.n(),
            c.truth,
            c.close
        ));
    }
    report(10, "approximate counting", t, cfg, ok, false, parts.join("; "))
}

/// Runs criteria 1 to 10 in order.
pub fn run_all(cfg: &SuiteConfig, progress: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    run_selected(cfg, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10], progress)
}

/// Runs the listed criteria in order. Criterion 4 also counts the runs of
/// any of 1–3 selected before it.
pub fn run_selected(cfg: &SuiteConfig, ids: &[u8], mut progress: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    let mut dups = DupStats::default();
    let mut out = Vec::new();
    for &id in ids {
        let r = match id {
            1 => criterion1(cfg, &mut dups),
            2 => criterion2(cfg, &mut dups),
            3 => criterion3(cfg, &mut dups),
            4 => criterion4(cfg, &mut dups),
            5 => criterion5(cfg),
            6 => criterion6(cfg),
            7 => criterion7(cfg),
            8 => criterion8(cfg),
            9 => criterion9(cfg),
            10 => criterion10(cfg),
            _ => continue,
        };
        progress(&r);
        out.push(r);
    }
    out
}
