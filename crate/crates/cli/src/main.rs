use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use approxenum::approx::{approx_count, membership_preprocess};
use approxenum::enumerate::{enumerate, EnumConfig, Mode};
use approxenum::exact::eval_query;
use approxenum::neighbourhood::TypeRegistry;
use approxenum::query::{parse_query, QueryNF};
use approxenum::splits::{anchor_radius, unique_split_of};
use approxenum::suites::{delay_sweep_on, run_selected, SuiteConfig};
use approxenum::testers::{
    compute_type_set, example_tester, ClauseTester, ExactTester, Example22Tester, SamplingTester, TesterPlan,
    TypeSetOptions,
};
use approxenum::{Database, Elem, Error, Schema};

#[derive(Parser)]
#[command(
    name = "approxenum",
    version,
    about = "Approximate enumeration, membership and counting for first-order queries on bounded-degree databases"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream answers, one tuple per line, then `-- end --`.
    Enumerate(EnumerateArgs),
    /// Exact answers by brute force.
    ExactEnumerate(ExactArgs),
    /// Approximate membership of one tuple.
    Member(MemberArgs),
    /// Approximate answer count.
    Count(CountArgs),
    /// Run the clause testers and print the relevant type set.
    Test(TestArgs),
    /// Print the split of a tuple.
    Split(SplitArgs),
    /// Per-output work across database sizes on a synthetic family.
    BenchDelay(BenchArgs),
    /// Run the acceptance suites at reduced trial counts.
    Selftest(SelftestArgs),
}

#[derive(Args, Clone)]
struct Inputs {
    /// Schema file; defaults to one symmetric binary relation `E`.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Degree bound for the database; defaults to the query's.
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TesterKind {
    Exact,
    Sampling,
    Example22,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Local,
    LocalStrengthened,
    General,
    GeneralStrengthened,
    Hanf,
}

impl ModeArg {
    fn mode(self) -> Mode {
        match self {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Local => Mode::Local,
            ModeArg::LocalStrengthened => Mode::LocalStrengthened,
            ModeArg::General => Mode::General,
            ModeArg::GeneralStrengthened => Mode::GeneralStrengthened,
            ModeArg::Hanf => Mode::Hanf,
        }
    }
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum, default_value = "local")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// A number, or `auto` to draw one from system entropy.
    #[arg(long)]
    seed: String,
    #[arg(long, value_enum, default_value = "sampling")]
    tester: TesterKind,
    /// Run testers even on inputs small enough for exact evaluation.
    #[arg(long)]
    force_testers: bool,
    #[arg(long)]
    max_outputs: Option<u64>,
    /// Replace the computed split multiplicity.
    #[arg(long)]
    s_eff: Option<u64>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Largest number of candidate tuples to scan.
    #[arg(long, default_value_t = 1 << 32)]
    budget: u128,
    #[arg(long)]
    max_outputs: Option<u64>,
}

#[derive(Args)]
struct MemberArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Comma-separated 1-based elements.
    #[arg(long)]
    tuple: String,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Required unless --exact.
    #[arg(long, required_unless_present = "exact")]
    seed: Option<String>,
    #[arg(long, value_enum, default_value = "sampling")]
    tester: TesterKind,
    #[arg(long)]
    force_testers: bool,
    /// Evaluate the query directly instead.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct CountArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long)]
    seed: String,
    #[arg(long, value_enum, default_value = "sampling")]
    tester: TesterKind,
    #[arg(long)]
    force_testers: bool,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    db: PathBuf,
    /// Without a query, the example22 tester checks for τ4 centres.
    #[arg(long)]
    query: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long)]
    seed: String,
    #[arg(long, value_enum, default_value = "sampling")]
    tester: TesterKind,
    #[arg(long)]
    force_testers: bool,
    /// Degree bound when no query supplies one.
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    tuple: String,
    #[arg(long)]
    r: usize,
    /// Degree bound; defaults to the largest degree present.
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Workload {
    /// Pairs of single-edge endpoints.
    Pairs,
    /// The same query on triangles and 3-paths: no answers.
    Empty,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated database sizes, each at least 24.
    #[arg(long, default_value = "1000,10000,100000")]
    sizes: String,
    #[arg(long, value_enum, default_value = "local")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "pairs")]
    workload: Workload,
    /// Outputs per size.
    #[arg(long, default_value_t = 5000)]
    outputs: u64,
    #[arg(long)]
    seed: String,
}

#[derive(Args)]
struct SelftestArgs {
    /// Fraction of the full trial counts; 0 runs nothing.
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
    /// Negative control: enumerate without the dedup record.
    #[arg(long)]
    fault_no_dedup: bool,
    /// Ignore the per-criterion time budgets.
    #[arg(long)]
    no_time_limit: bool,
    /// Comma-separated criterion numbers; all by default.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=10))]
    only: Vec<u8>,
}

/// Failure with its exit status.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotLocal => 3,
            Error::BudgetExceeded { .. } => 1,
            _ => 2,
        };
        Fail(code, e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Fail {
    Fail(2, msg.into())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_schema(path: &Option<PathBuf>) -> Result<Arc<Schema>, Fail> {
    Ok(Arc::new(match path {
        Some(p) => Schema::parse(&read(p)?)?,
        None => Schema::graph(),
    }))
}

fn load_db(schema: Arc<Schema>, path: &Path, degree: Option<usize>) -> Result<Database, Fail> {
    let text = read(path)?;
    match degree {
        Some(d) => Ok(Database::parse(schema, &text, d)?),
        None => {
            let db = Database::parse(schema, &text, usize::MAX)?;
            let d = db.max_degree();
            Ok(db.with_degree_bound(d)?)
        }
    }
}

struct Loaded {
    db: Database,
    query: QueryNF,
}

fn load(inputs: &Inputs, reg: &TypeRegistry) -> Result<Loaded, Fail> {
    let schema = load_schema(&inputs.schema)?;
    let query = parse_query(&read(&inputs.query)?, schema.clone(), reg)?;
    let db = load_db(schema, &inputs.db, Some(inputs.degree.unwrap_or(query.d)))?;
    Ok(Loaded { db, query })
}

fn seed(arg: &str) -> Result<u64, Fail> {
    if arg == "auto" {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        return Ok(s);
    }
    arg.parse()
        .map_err(|_| usage(format!("invalid seed `{arg}`: expected a number or `auto`")))
}

fn check_unit(name: &str, v: f64) -> Result<(), Fail> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--{name} must lie in (0,1), got {v}")))
    }
}

fn tester(kind: TesterKind, force: bool) -> Arc<dyn ClauseTester> {
    match kind {
        TesterKind::Exact => Arc::new(ExactTester),
        TesterKind::Sampling => Arc::new(SamplingTester { force }),
        TesterKind::Example22 => Arc::new(Example22Tester { force }),
    }
}

fn parse_tuple(text: &str, n: usize) -> Result<Vec<Elem>, Fail> {
    text.split(',')
        .map(|t| {
            let v: usize = t.trim().parse().map_err(|_| usage(format!("invalid element `{t}`")))?;
            if v == 0 || v > n {
                return Err(usage(format!("element {v} outside 1..={n}")));
            }
            Ok((v - 1) as Elem)
        })
        .collect()
}

fn write_tuple(out: &mut impl Write, t: &[Elem]) -> io::Result<()> {
    let mut first = true;
    for &x in t {
        if !first {
            out.write_all(b" ")?;
        }
        write!(out, "{}", x as u64 + 1)?;
        first = false;
    }
    out.write_all(b"\n")
}

fn run_enumeration(mode: Mode, loaded: &Loaded, cfg: &EnumConfig, plan: &TesterPlan) -> Result<(), Fail> {
    if mode.needs_local() && !loaded.query.is_local() {
        return Err(Fail(
            3,
            format!("mode {} needs a query without Hanf sentences", mode.name()),
        ));
    }
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut io_err = None;
    let summary = enumerate(mode, &loaded.db, &loaded.query, cfg, plan, &mut |t| {
        if io_err.is_none() {
            if let Err(e) = write_tuple(&mut out, t) {
                io_err = Some(e);
            }
        }
    })?;
    let marker: &[u8] = if summary.truncated {
        b"-- truncated --\n"
    } else {
        b"-- end --\n"
    };
    let res = match io_err {
        Some(e) => Err(e),
        None => out.write_all(marker).and_then(|_| out.flush()),
    };
    res.map_err(|e| Fail(1, format!("writing output: {e}")))?;
    eprint!("{}", summary.to_text());
    Ok(())
}

fn cmd_enumerate(a: EnumerateArgs) -> Result<(), Fail> {
    check_unit("gamma", a.gamma)?;
    check_unit("epsilon", a.epsilon)?;
    let reg = TypeRegistry::new();
    let loaded = load(&a.inputs, &reg)?;
    let cfg = EnumConfig {
        gamma: a.gamma,
        epsilon: a.epsilon,
        seed: seed(&a.seed)?,
        max_outputs: a.max_outputs,
        s_eff_override: a.s_eff,
        force_testers: a.force_testers,
        ..Default::default()
    };
    let plan = TesterPlan::uniform(tester(a.tester, a.force_testers), loaded.query.clauses.len());
    run_enumeration(a.mode.mode(), &loaded, &cfg, &plan)
}

fn cmd_exact(a: ExactArgs) -> Result<(), Fail> {
    let reg = TypeRegistry::new();
    let loaded = load(&a.inputs, &reg)?;
    let cfg = EnumConfig {
        max_outputs: a.max_outputs,
        exact_budget: a.budget,
        ..Default::default()
    };
    run_enumeration(Mode::Exact, &loaded, &cfg, &TesterPlan::default())
}

fn cmd_member(a: MemberArgs) -> Result<(), Fail> {
    check_unit("epsilon", a.epsilon)?;
    let reg = TypeRegistry::new();
    let loaded = load(&a.inputs, &reg)?;
    let t = parse_tuple(&a.tuple, loaded.db.n())?;
    if t.len() != loaded.query.k {
        return Err(Error::CentreCountMismatch {
            expected: loaded.query.k,
            found: t.len(),
        }
        .into());
    }
    if a.exact {
        println!("{}", eval_query(&loaded.db, &t, &loaded.query));
        return Ok(());
    }
    let plan = TesterPlan::uniform(tester(a.tester, a.force_testers), loaded.query.clauses.len());
    let opts = TypeSetOptions {
        force_testers: a.force_testers,
    };
    let s = seed(a.seed.as_deref().unwrap_or_default())?;
    let idx = membership_preprocess(&loaded.db, &loaded.query, a.epsilon, &plan, s, opts)?;
    println!("{}", idx.answer(&loaded.db, &t));
    Ok(())
}

fn cmd_count(a: CountArgs) -> Result<(), Fail> {
    check_unit("epsilon", a.epsilon)?;
    check_unit("lambda", a.lambda)?;
    let reg = TypeRegistry::new();
    let loaded = load(&a.inputs, &reg)?;
    let plan = TesterPlan::uniform(tester(a.tester, a.force_testers), loaded.query.clauses.len());
    let opts = TypeSetOptions {
        force_testers: a.force_testers,
    };
    let est = approx_count(
        &loaded.db,
        &loaded.query,
        a.epsilon,
        a.lambda,
        &plan,
        seed(&a.seed)?,
        opts,
    )?;
    println!("estimate {}", est.estimate);
    println!("half_width {}", est.half_width);
    for p in &est.parts {
        eprintln!(
            "components={} samples={} mean={} scaled={}",
            p.components, p.samples, p.mean, p.scaled
        );
    }
    eprintln!(
        "type_set={} exact_preprocessing={} confidence=5/6*9/10",
        est.type_set.len(),
        est.type_set.exact
    );
    Ok(())
}

fn cmd_test(a: TestArgs) -> Result<(), Fail> {
    check_unit("epsilon", a.epsilon)?;
    let s = seed(&a.seed)?;
    let schema = load_schema(&a.schema)?;
    let reg = TypeRegistry::new();
    let Some(qpath) = &a.query else {
        if !matches!(a.tester, TesterKind::Example22) {
            return Err(usage("--query is required unless --tester example22"));
        }
        let db = load_db(schema, &a.db, a.degree)?;
        let v = example_tester(&db, a.epsilon, s, a.force_testers)?;
        println!("{}", if v.accept { "accept" } else { "reject" });
        eprintln!("samples={} full_check={} seed={}", v.samples_used, v.full_check, v.seed);
        return Ok(());
    };
    let q = parse_query(&read(qpath)?, schema.clone(), &reg)?;
    let db = load_db(schema, &a.db, Some(a.degree.unwrap_or(q.d)))?;
    let plan = TesterPlan::uniform(tester(a.tester, a.force_testers), q.clauses.len());
    let opts = TypeSetOptions {
        force_testers: a.force_testers,
    };
    let t = compute_type_set(&db, &q, a.epsilon, &plan, s, opts)?;
    for rec in &t.provenance {
        println!(
            "clause {} {} tester={} repetitions={} samples={} full_check={}",
            rec.clause + 1,
            if rec.verdict.accept { "accept" } else { "reject" },
            rec.tester,
            rec.verdict.repetitions,
            rec.verdict.samples_used,
            rec.verdict.full_check
        );
    }
    println!("T size {} exact={}", t.len(), t.exact);
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<(), Fail> {
    let schema = load_schema(&a.schema)?;
    let db = load_db(schema, &a.db, a.degree)?;
    let t = parse_tuple(&a.tuple, db.n())?;
    let reg = TypeRegistry::new();
    let split = unique_split_of(&db, &t, a.r, &reg)?;
    println!("r={} k={} anchor_radius={}", a.r, t.len(), anchor_radius(a.r, t.len()));
    for b in &split.groups {
        let coords: Vec<String> = b.coords.iter().map(|c| (c + 1).to_string()).collect();
        let positions: Vec<String> = b.positions.iter().map(|p| p.to_string()).collect();
        println!(
            "group coords={} leader={} anchor_size={} positions={}",
            coords.join(","),
            t[b.coords[0]] as u64 + 1,
            b.anchor.size(),
            positions.join(",")
        );
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), Fail> {
    let sizes: Vec<usize> = a
        .sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("invalid size list `{}`", a.sizes)))?;
    if sizes.is_empty() || sizes.iter().any(|&n| n < 24) {
        return Err(usage("sizes must be at least 24"));
    }
    let s = seed(&a.seed)?;
    let sweep = delay_sweep_on(
        a.mode.mode(),
        &sizes,
        a.outputs,
        s,
        matches!(a.workload, Workload::Empty),
    )?;
    println!("n\tmax_ops\tp99_ops\tmean_ops\tend_ops\toutputs\tbound\tenum_ms");
    for (n, s) in &sweep.rows {
        println!(
            "{n}\t{}\t{}\t{:.1}\t{}\t{}\t{}\t{:.3}",
            s.delay.max,
            s.delay.percentile(0.99),
            s.delay.mean(),
            s.delay.end,
            s.outputs,
            s.delay_bound().unwrap_or(0),
            s.enumeration.as_secs_f64() * 1e3
        );
    }
    eprintln!("spread {:.4}", sweep.spread());
    Ok(())
}

fn cmd_selftest(a: SelftestArgs) -> Result<(), Fail> {
    if a.scale <= 0.0 {
        eprintln!("warning: scale 0 runs no trials; every criterion passes vacuously");
    }
    let cfg = SuiteConfig {
        scale: a.scale.max(0.0),
        fault_no_dedup: a.fault_no_dedup,
        enforce_time: !a.no_time_limit,
    };
    let ids: Vec<u8> = if a.only.is_empty() { (1..=10).collect() } else { a.only };
    let reports = run_selected(&cfg, &ids, |r| println!("{}", r.line()));
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Fail(1, format!("{failed} criteria failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::ExactEnumerate(a) => cmd_exact(a),
        Command::Member(a) => cmd_member(a),
        Command::Count(a) => cmd_count(a),
        Command::Test(a) => cmd_test(a),
        Command::Split(a) => cmd_split(a),
        Command::BenchDelay(a) => cmd_bench(a),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
