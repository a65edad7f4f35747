//! Randomised enumeration with constant delay: the partitioned-set
//! enumerator and the query enumeration modes built on it.

use std::collections::VecDeque;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

use crate::db::{Database, Elem};
use crate::error::{Error, Result};
use crate::exact::answer_set;
use crate::neighbourhood::TypeSet;
use crate::params::LemmaConstants;
use crate::query::QueryNF;
use crate::splits::{s_eff, FoundTuples};
use crate::testers::{compute_type_set, require_plan, TesterPlan, TypeSetOptions};

/// Candidate index space: `D^lo ∪ ... ∪ D^hi`, block by block, each block in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSpace {
    n: u64,
    lo: usize,
    /// Start of each block; the last entry is the total size.
    offsets: Vec<u64>,
}

impl IndexSpace {
    fn blocks(n: usize, lo: usize, hi: usize) -> Result<Self> {
        let mut offsets = vec![0u64];
        let mut acc = 0u64;
        for len in lo..=hi {
            let block = (0..len).try_fold(1u64, |a, _| a.checked_mul(n as u64));
            acc = block
                .and_then(|b| acc.checked_add(b))
                .ok_or_else(|| Error::Invalid(format!("index space of {n}^{len} tuples overflows")))?;
            offsets.push(acc);
        }
        Ok(IndexSpace {
            n: n as u64,
            lo,
            offsets,
        })
    }

    /// `D^k`.
    pub fn product(n: usize, k: usize) -> Result<Self> {
        Self::blocks(n, k, k)
    }

    /// `D^1 ∪ ... ∪ D^c`.
    pub fn union(n: usize, c: usize) -> Result<Self> {
        Self::blocks(n, 1, c)
    }

    pub fn size(&self) -> u64 {
        *self.offsets.last().unwrap()
    }

    pub fn decode(&self, index: u64, out: &mut Vec<Elem>) {
        debug_assert!(index < self.size());
        let b = self.offsets.partition_point(|&o| o <= index) - 1;
        let len = self.lo + b;
        let mut rest = index - self.offsets[b];
        out.clear();
        out.resize(len, 0);
        for j in (0..len).rev() {
            out[j] = (rest % self.n) as Elem;
            rest /= self.n;
        }
    }

    pub fn encode(&self, tuple: &[Elem]) -> Option<u64> {
        let b = tuple.len().checked_sub(self.lo)?;
        if b + 1 >= self.offsets.len() {
            return None;
        }
        let mut idx = 0u64;
        for &x in tuple {
            if x as u64 >= self.n {
                return None;
            }
            idx = idx * self.n + x as u64;
        }
        Some(self.offsets[b] + idx)
    }
}

/// Largest space tracked by a flat bit array; larger ones use a hash set.
const BITSET_LIMIT: u64 = 1 << 26;

/// Record of indices already examined. The flat variant is allocated zeroed,
/// which the allocator serves lazily.
#[derive(Debug)]
pub struct DedupRecord {
    bits: Vec<u64>,
    sparse: FxHashSet<u64>,
    flat: bool,
    disabled: bool,
}

impl DedupRecord {
    pub fn new(size: u64) -> Self {
        let flat = size <= BITSET_LIMIT;
        DedupRecord {
            bits: if flat {
                vec![0; size.div_ceil(64) as usize]
            } else {
                Vec::new()
            },
            sparse: FxHashSet::default(),
            flat,
            disabled: false,
        }
    }

    /// Test hook: forget everything, so indices can be examined again.
    pub fn disable(&mut self) {
        self.disabled = true;
    }

    /// Marks an index; false if it was already marked.
    pub fn insert(&mut self, i: u64) -> bool {
        if self.disabled {
            return true;
        }
        if self.flat {
            let (w, b) = ((i / 64) as usize, i % 64);
            let fresh = self.bits[w] >> b & 1 == 0;
            self.bits[w] |= 1 << b;
            fresh
        } else {
            self.sparse.insert(i)
        }
    }

    pub fn bytes(&self) -> usize {
        self.bits.capacity() * 8 + self.sparse.capacity() * 16
    }
}

const HIST_BUCKETS: usize = 512;

/// Per-output work in elementary operations, kept in constant space.
#[derive(Clone)]
pub struct DelayProfile {
    pub outputs: u64,
    pub max: u64,
    pub total: u64,
    /// Work after the last output until the end of enumeration is known.
    pub end: u64,
    hist: [u64; HIST_BUCKETS],
}

impl Default for DelayProfile {
    fn default() -> Self {
        DelayProfile {
            outputs: 0,
            max: 0,
            total: 0,
            end: 0,
            hist: [0; HIST_BUCKETS],
        }
    }
}

impl fmt::Debug for DelayProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelayProfile")
            .field("outputs", &self.outputs)
            .field("max", &self.max)
            .field("mean", &self.mean())
            .field("p99", &self.percentile(0.99))
            .field("end", &self.end)
            .finish()
    }
}

/// Log-linear buckets: exact below 8, then 8 buckets per power of two.
fn bucket(v: u64) -> usize {
    if v < 8 {
        return v as usize;
    }
    let e = 63 - v.leading_zeros() as usize;
    let sub = ((v >> (e - 3)) & 7) as usize;
    8 * (e - 2) + sub
}

fn bucket_upper(b: usize) -> u64 {
    if b < 8 {
        return b as u64;
    }
    let e = b / 8 + 2;
    let sub = (b % 8) as u64;
    ((8 + sub + 1) << (e - 3)) - 1
}

impl DelayProfile {
    pub fn record(&mut self, ops: u64) {
        self.outputs += 1;
        self.total += ops;
        self.max = self.max.max(ops);
        self.hist[bucket(ops)] += 1;
    }

    pub fn record_end(&mut self, ops: u64) {
        self.end = ops;
        self.max = self.max.max(ops);
    }

    pub fn mean(&self) -> f64 {
        if self.outputs == 0 {
            0.0
        } else {
            self.total as f64 / self.outputs as f64
        }
    }

    /// Upper end of the bucket holding the given quantile of output delays.
    pub fn percentile(&self, p: f64) -> u64 {
        if self.outputs == 0 {
            return 0;
        }
        let want = (p * self.outputs as f64).ceil().max(1.0) as u64;
        let mut seen = 0;
        for (b, &c) in self.hist.iter().enumerate() {
            seen += c;
            if seen >= want {
                return bucket_upper(b).min(self.max);
            }
        }
        self.max
    }
}

/// Enumerator for a subset `V1` of an index space, given a membership test.
/// Each step examines α random indices and the next `batch` indices of a
/// sequential scan, queues the members not seen before, and emits one.
#[derive(Debug)]
pub struct Partitioned {
    space: IndexSpace,
    consts: LemmaConstants<f64>,
    rng: ChaCha8Rng,
    dedup: DedupRecord,
    queue: VecDeque<u64>,
    cursor: u64,
    buf: Vec<Elem>,
    /// Operations since the last emission.
    pub ops: u64,
    pub samples: u64,
    pub checks: u64,
    pub peak_queue: usize,
}

impl Partitioned {
    pub fn new(space: IndexSpace, consts: LemmaConstants<f64>, seed: u64) -> Self {
        let dedup = DedupRecord::new(space.size());
        Partitioned {
            space,
            consts,
            rng: ChaCha8Rng::seed_from_u64(seed),
            dedup,
            queue: VecDeque::new(),
            cursor: 0,
            buf: Vec::new(),
            ops: 0,
            samples: 0,
            checks: 0,
            peak_queue: 0,
        }
    }

    pub fn disable_dedup(&mut self) {
        self.dedup.disable();
    }

    pub fn space(&self) -> &IndexSpace {
        &self.space
    }

    fn consider(&mut self, idx: u64, member: &mut dyn FnMut(&[Elem]) -> bool) {
        self.ops += 1;
        if !self.dedup.insert(idx) {
            return;
        }
        self.ops += 1;
        self.checks += 1;
        self.space.decode(idx, &mut self.buf);
        if member(&self.buf) {
            self.ops += 1;
            self.queue.push_back(idx);
        }
    }

    /// One round; `None` once the queue runs dry.
    pub fn step(&mut self, member: &mut dyn FnMut(&[Elem]) -> bool) -> Option<u64> {
        let size = self.space.size();
        if size == 0 {
            return None;
        }
        for _ in 0..self.consts.alpha {
            let idx = self.rng.gen_range(0..size);
            self.samples += 1;
            self.consider(idx, member);
        }
        for _ in 0..self.consts.batch {
            if self.cursor >= size {
                break;
            }
            let idx = self.cursor;
            self.cursor += 1;
            self.consider(idx, member);
        }
        self.peak_queue = self.peak_queue.max(self.queue.len());
        let out = self.queue.pop_front()?;
        self.ops += 1;
        Some(out)
    }

    pub fn decode(&mut self, idx: u64) -> &[Elem] {
        self.space.decode(idx, &mut self.buf);
        &self.buf
    }

    /// Bytes held by the dedup record and queue.
    pub fn aux_bytes(&self) -> usize {
        self.dedup.bytes() + self.queue.capacity() * 8
    }
}

/// Runs the enumerator to exhaustion, emitting decoded members.
pub fn partitioned_enumerate(
    space: IndexSpace,
    member: &mut dyn FnMut(&[Elem]) -> bool,
    mu: f64,
    delta: f64,
    seed: u64,
    emit: &mut dyn FnMut(&[Elem]) -> bool,
) -> Result<(LemmaConstants<f64>, DelayProfile)> {
    let consts = LemmaConstants::new(mu, delta)?;
    let mut e = Partitioned::new(space, consts, seed);
    let mut delay = DelayProfile::default();
    loop {
        match e.step(member) {
            Some(idx) => {
                delay.record(e.ops);
                e.ops = 0;
                if !emit(e.decode(idx)) {
                    break;
                }
            }
            None => {
                delay.record_end(e.ops);
                break;
            }
        }
    }
    Ok((consts, delay))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Local,
    LocalStrengthened,
    General,
    GeneralStrengthened,
    Hanf,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Local => "local",
            Mode::LocalStrengthened => "local-strengthened",
            Mode::General => "general",
            Mode::GeneralStrengthened => "general-strengthened",
            Mode::Hanf => "hanf",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        [
            Mode::Exact,
            Mode::Local,
            Mode::LocalStrengthened,
            Mode::General,
            Mode::GeneralStrengthened,
            Mode::Hanf,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }

    pub fn needs_local(self) -> bool {
        matches!(self, Mode::Local | Mode::LocalStrengthened)
    }
}

#[derive(Debug, Clone)]
pub struct EnumConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub max_outputs: Option<u64>,
    pub s_eff_override: Option<u64>,
    pub force_testers: bool,
    /// Test hook: turns off the dedup record.
    pub fault_no_dedup: bool,
    /// Largest `n^k` the exact mode will scan.
    pub exact_budget: u128,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig {
            gamma: 0.05,
            epsilon: 0.1,
            seed: 0,
            max_outputs: None,
            s_eff_override: None,
            force_testers: false,
            fault_no_dedup: false,
            exact_budget: 1 << 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnumSummary {
    pub mode: Mode,
    pub seed: u64,
    pub gamma: f64,
    pub epsilon: f64,
    pub outputs: u64,
    pub truncated: bool,
    pub constants: Option<LemmaConstants<f64>>,
    pub conn: usize,
    pub s_eff: Option<u64>,
    /// Size of T (or of the sphere type set for local modes).
    pub type_set_size: usize,
    /// T came from the exact small-input branch.
    pub exact_preprocessing: bool,
    pub samples: u64,
    pub checks: u64,
    pub delay: DelayProfile,
    pub peak_aux_bytes: usize,
    pub preprocessing: Duration,
    pub enumeration: Duration,
}

impl EnumSummary {
    fn new(mode: Mode, cfg: &EnumConfig) -> Self {
        EnumSummary {
            mode,
            seed: cfg.seed,
            gamma: cfg.gamma,
            epsilon: cfg.epsilon,
            outputs: 0,
            truncated: false,
            constants: None,
            conn: 1,
            s_eff: None,
            type_set_size: 0,
            exact_preprocessing: false,
            samples: 0,
            checks: 0,
            delay: DelayProfile::default(),
            peak_aux_bytes: 0,
            preprocessing: Duration::ZERO,
            enumeration: Duration::ZERO,
        }
    }

    /// Analytic per-output bound from α and batch.
    pub fn delay_bound(&self) -> Option<u64> {
        self.constants.map(|c| c.delay_bound())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "mode={} seed={} gamma={} epsilon={}\n",
            self.mode.name(),
            self.seed,
            self.gamma,
            self.epsilon
        );
        if let Some(c) = &self.constants {
            s += &format!(
                "mu={} delta={} q={} alpha={} batch={} delay_bound={}\n",
                c.mu,
                c.delta,
                c.q,
                c.alpha,
                c.batch,
                c.delay_bound()
            );
        }
        s += &format!(
            "conn={} s_eff={} type_set={} exact_preprocessing={}\n",
            self.conn,
            self.s_eff.map_or("-".to_string(), |v| v.to_string()),
            self.type_set_size,
            self.exact_preprocessing
        );
        s += &format!(
            "outputs={} truncated={} samples={} checks={} max_delay_ops={} p99_delay_ops={} end_delay_ops={}\n",
            self.outputs,
            self.truncated,
            self.samples,
            self.checks,
            self.delay.max,
            self.delay.percentile(0.99),
            self.delay.end
        );
        s += &format!(
            "preprocessing_ms={:.3} enumeration_ms={:.3}\n",
            self.preprocessing.as_secs_f64() * 1e3,
            self.enumeration.as_secs_f64() * 1e3
        );
        s
    }
}

/// Output sink honouring the output cap.
struct Sink<'e> {
    emit: &'e mut dyn FnMut(&[Elem]),
    cap: Option<u64>,
}

impl Sink<'_> {
    /// Emits and reports whether more outputs are wanted.
    fn push(&mut self, summary: &mut EnumSummary, t: &[Elem]) -> bool {
        (self.emit)(t);
        summary.outputs += 1;
        if self.cap.is_some_and(|c| summary.outputs >= c) {
            summary.truncated = true;
            return false;
        }
        true
    }
}

fn run_plain(
    db: &Database,
    set: &TypeSet,
    k: usize,
    mu: f64,
    delta: f64,
    cfg: &EnumConfig,
    summary: &mut EnumSummary,
    sink: &mut Sink<'_>,
) -> Result<()> {
    let consts = LemmaConstants::new(mu, delta)?;
    summary.constants = Some(consts);
    let start = Instant::now();
    if cfg.max_outputs == Some(0) {
        summary.truncated = true;
        return Ok(());
    }
    let mut e = Partitioned::new(IndexSpace::product(db.n(), k)?, consts, cfg.seed);
    if cfg.fault_no_dedup {
        e.disable_dedup();
    }
    let mut checker = set.checker();
    let mut member = |t: &[Elem]| checker.contains(db, t);
    loop {
        match e.step(&mut member) {
            Some(idx) => {
                summary.delay.record(e.ops);
                e.ops = 0;
                summary.peak_aux_bytes = summary.peak_aux_bytes.max(e.aux_bytes());
                let t = e.decode(idx);
                if !sink.push(summary, t) {
                    break;
                }
            }
            None => {
                summary.delay.record_end(e.ops);
                break;
            }
        }
    }
    summary.samples = e.samples;
    summary.checks = e.checks;
    summary.enumeration = start.elapsed();
    Ok(())
}

/// Enumerates leader tuples of `V = D^1 ∪ ... ∪ D^c` with at least one
/// found tuple, and emits the found tuples of each.
fn run_expanding(
    db: &Database,
    set: &TypeSet,
    c: usize,
    gamma: f64,
    cfg: &EnumConfig,
    summary: &mut EnumSummary,
    sink: &mut Sink<'_>,
) -> Result<()> {
    let k = set.arity();
    let max_arity = db.schema().max_arity();
    let s = cfg
        .s_eff_override
        .unwrap_or_else(|| s_eff(set, db.degree_bound(), max_arity));
    summary.s_eff = Some(s);
    summary.conn = c;
    let mu = gamma / (c as f64 * s as f64);
    let consts = LemmaConstants::new(mu, 0.8)?;
    summary.constants = Some(consts);
    let start = Instant::now();
    if cfg.max_outputs == Some(0) {
        summary.truncated = true;
        return Ok(());
    }
    let mut e = Partitioned::new(IndexSpace::union(db.n(), c)?, consts, cfg.seed);
    if cfg.fault_no_dedup {
        e.disable_dedup();
    }
    let mut probe = FoundTuples::new(set);
    let mut expand = FoundTuples::new(set);
    let mut member = |a: &[Elem]| probe.any(db, a);
    let mut pending: VecDeque<Elem> = VecDeque::new();
    let mut leaders: Vec<Elem> = Vec::with_capacity(c);
    let mut out: Vec<Elem> = vec![0; k];
    let mut ops = 0u64;
    'outer: loop {
        if pending.is_empty() {
            let Some(idx) = e.step(&mut member) else {
                summary.delay.record_end(ops + e.ops);
                break;
            };
            ops += e.ops;
            e.ops = 0;
            leaders.clear();
            leaders.extend_from_slice(e.decode(idx));
            expand.for_each(db, &leaders, |b| {
                ops += 1;
                pending.extend(b.iter().copied());
                true
            });
            summary.peak_aux_bytes = summary.peak_aux_bytes.max(e.aux_bytes() + pending.capacity() * 4);
        }
        while pending.len() >= k {
            for x in out.iter_mut() {
                *x = pending.pop_front().unwrap();
            }
            ops += 1;
            summary.delay.record(ops);
            ops = 0;
            if !sink.push(summary, &out) {
                break 'outer;
            }
        }
    }
    summary.samples = e.samples;
    summary.checks = e.checks;
    summary.enumeration = start.elapsed();
    Ok(())
}

fn local_check(q: &QueryNF) -> Result<()> {
    if q.is_local() {
        Ok(())
    } else {
        Err(Error::NotLocal)
    }
}

/// Samples D^k with μ = γ and δ = 2/3, testing membership in the clause
/// sphere types.
pub fn enumerate_local(
    db: &Database,
    q: &QueryNF,
    cfg: &EnumConfig,
    emit: &mut dyn FnMut(&[Elem]),
) -> Result<EnumSummary> {
    local_check(q)?;
    let mut summary = EnumSummary::new(Mode::Local, cfg);
    let set = q.sphere_types();
    summary.type_set_size = set.len();
    summary.exact_preprocessing = true;
    let mut sink = Sink {
        emit,
        cap: cfg.max_outputs,
    };
    run_plain(db, &set, q.k, cfg.gamma, 2.0 / 3.0, cfg, &mut summary, &mut sink)?;
    Ok(summary)
}

/// Samples leader tuples with μ = γ/(c·s_eff), δ = 4/5, expanding each into
/// its found tuples.
pub fn enumerate_local_strengthened(
    db: &Database,
    q: &QueryNF,
    cfg: &EnumConfig,
    emit: &mut dyn FnMut(&[Elem]),
) -> Result<EnumSummary> {
    local_check(q)?;
    let mut summary = EnumSummary::new(Mode::LocalStrengthened, cfg);
    let set = q.sphere_types();
    summary.type_set_size = set.len();
    summary.exact_preprocessing = true;
    let mut sink = Sink {
        emit,
        cap: cfg.max_outputs,
    };
    run_expanding(db, &set, q.conn(), cfg.gamma, cfg, &mut summary, &mut sink)?;
    Ok(summary)
}

/// Computes T with the testers, then samples D^k with μ = γ, δ = 5/6.
pub fn enumerate_general(
    db: &Database,
    q: &QueryNF,
    cfg: &EnumConfig,
    plan: &TesterPlan,
    emit: &mut dyn FnMut(&[Elem]),
) -> Result<EnumSummary> {
    let mut summary = EnumSummary::new(Mode::General, cfg);
    let start = Instant::now();
    let t = compute_type_set(
        db,
        q,
        cfg.epsilon,
        plan,
        cfg.seed,
        TypeSetOptions {
            force_testers: cfg.force_testers,
        },
    )?;
    summary.preprocessing = start.elapsed();
    summary.type_set_size = t.len();
    summary.exact_preprocessing = t.exact;
    let mut sink = Sink {
        emit,
        cap: cfg.max_outputs,
    };
    run_plain(db, &t.set, q.k, cfg.gamma, 5.0 / 6.0, cfg, &mut summary, &mut sink)?;
    Ok(summary)
}

fn general_expanding(
    mode: Mode,
    db: &Database,
    q: &QueryNF,
    cfg: &EnumConfig,
    plan: &TesterPlan,
    emit: &mut dyn FnMut(&[Elem]),
) -> Result<EnumSummary> {
    let mut summary = EnumSummary::new(mode, cfg);
    let start = Instant::now();
    let t = compute_type_set(
        db,
        q,
        cfg.epsilon,
        plan,
        cfg.seed,
        TypeSetOptions {
            force_testers: cfg.force_testers,
        },
    )?;
    summary.preprocessing = start.elapsed();
    summary.type_set_size = t.len();
    summary.exact_preprocessing = t.exact;
    let mut sink = Sink {
        emit,
        cap: cfg.max_outputs,
    };
    run_expanding(db, &t.set, q.conn(), cfg.gamma, cfg, &mut summary, &mut sink)?;
    Ok(summary)
}

/// Computes T with the testers, then enumerates leader tuples with
/// threshold γn^c.
pub fn enumerate_general_strengthened(
    db: &Database,
    q: &QueryNF,
    cfg: &EnumConfig,
    plan: &TesterPlan,
    emit: &mut dyn FnMut(&[Elem]),
) -> Result<EnumSummary> {
    general_expanding(Mode::GeneralStrengthened, db, q, cfg, plan, emit)
}

/// As [`enumerate_general_strengthened`], with a tester plugin required for
/// every clause.
pub fn enumerate_hanf_testable(
    db: &Database,
    q: &QueryNF,
    cfg: &EnumConfig,
    plan: &TesterPlan,
    emit: &mut dyn FnMut(&[Elem]),
) -> Result<EnumSummary> {
    require_plan(q, plan)?;
    general_expanding(Mode::Hanf, db, q, cfg, plan, emit)
}

/// Exact answers in lexicographic order.
pub fn enumerate_exact(
    db: &Database,
    q: &QueryNF,
    cfg: &EnumConfig,
    emit: &mut dyn FnMut(&[Elem]),
) -> Result<EnumSummary> {
    let mut summary = EnumSummary::new(Mode::Exact, cfg);
    let start = Instant::now();
    let answers = answer_set(db, q, cfg.exact_budget)?;
    summary.preprocessing = start.elapsed();
    summary.exact_preprocessing = true;
    let mut sink = Sink {
        emit,
        cap: cfg.max_outputs,
    };
    if cfg.max_outputs == Some(0) {
        summary.truncated = !answers.is_empty();
        return Ok(summary);
    }
    for a in &answers {
        summary.delay.record(1);
        if !sink.push(&mut summary, a) {
            summary.truncated = summary.outputs < answers.len() as u64;
            break;
        }
    }
    Ok(summary)
}

/// Dispatches on the mode.
pub fn enumerate(
    mode: Mode,
    db: &Database,
    q: &QueryNF,
    cfg: &EnumConfig,
    plan: &TesterPlan,
    emit: &mut dyn FnMut(&[Elem]),
) -> Result<EnumSummary> {
    match mode {
        Mode::Exact => enumerate_exact(db, q, cfg, emit),
        Mode::Local => enumerate_local(db, q, cfg, emit),
        Mode::LocalStrengthened => enumerate_local_strengthened(db, q, cfg, emit),
        Mode::General => enumerate_general(db, q, cfg, plan, emit),
        Mode::GeneralStrengthened => enumerate_general_strengthened(db, q, cfg, plan, emit),
        Mode::Hanf => enumerate_hanf_testable(db, q, cfg, plan, emit),
    }
}
