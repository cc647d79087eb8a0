use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use precsched::baselines::{coffman_graham, graham_default};
use precsched::exact::{self, ExactError};
use precsched::instance::{
    gap_instance, layered_dag, parse_instance, parse_schedule, random_dag, validate_schedule,
    write_instance, write_schedule, FormatError,
};
use precsched::lpcore::{LpError, Q};
use precsched::relax::{self, RelaxError};
use precsched::rounding::{self, Mode, RoundingParams, RoundingStats};
use precsched::{Instance, PartialSchedule};
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_SEMANTIC: u8 = 1;
const EXIT_FORMAT: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "precsched",
    version,
    about = "Unit-job precedence scheduling on identical machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Solve an instance and print its makespan and stats.
    Solve(SolveArgs),
    /// Check a schedule against an instance.
    Verify {
        instance: PathBuf,
        schedule: PathBuf,
    },
    /// Run several algorithms over a directory of instances.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum GenerateKind {
    /// k blocks of m+1 jobs, each block preceding the next.
    Gap {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Random DAG along a seeded permutation.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Layers of equal width with random edges between consecutive layers.
    Layered {
        #[arg(long)]
        layers: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Algo {
    Exact,
    Graham,
    Cg,
    Lp,
    Round,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Exact => "exact",
            Algo::Graham => "graham",
            Algo::Cg => "cg",
            Algo::Lp => "lp",
            Algo::Round => "round",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Practical,
    Theoretical,
}

#[derive(Args, Clone)]
struct RoundArgs {
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Lift level used for the horizon search and every re-solve.
    #[arg(long, default_value_t = 1)]
    level: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Practical)]
    mode: ModeArg,
    #[arg(long)]
    k: Option<usize>,
    /// Density bound as `p/q`.
    #[arg(long, value_parser = parse_ratio)]
    delta: Option<Q>,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 2)]
    base_threshold: usize,
    /// Condition to integrality in the base case before the exact search.
    #[arg(long)]
    conditioning_base_case: bool,
    /// Node budget of the exact search.
    #[arg(long, default_value_t = exact::DEFAULT_BUDGET)]
    budget: usize,
}

impl RoundArgs {
    fn params(&self) -> Result<RoundingParams> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            bail!("--epsilon must be positive");
        }
        let mut p = RoundingParams::practical(self.epsilon);
        p.mode = match self.mode {
            ModeArg::Practical => Mode::Practical,
            ModeArg::Theoretical => Mode::Theoretical,
        };
        if let Some(k) = self.k {
            if k == 0 {
                bail!("--k must be at least 1");
            }
            p.k = k;
        }
        if let Some(d) = &self.delta {
            if *d <= Q::from_integer(0.into()) {
                bail!("--delta must be positive");
            }
            p.delta = d.clone();
        }
        p.c1 = self.c1;
        p.level = self.level;
        p.base_case_threshold = self.base_threshold;
        p.conditioning_base_case = self.conditioning_base_case;
        p.exact_budget = self.budget;
        Ok(p)
    }
}

fn parse_ratio(s: &str) -> Result<Q, String> {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: i64 = n
        .trim()
        .parse()
        .map_err(|_| format!("bad numerator in `{s}`"))?;
    let d: i64 = d
        .trim()
        .parse()
        .map_err(|_| format!("bad denominator in `{s}`"))?;
    if d == 0 {
        return Err("zero denominator".into());
    }
    Ok(Q::new(n.into(), d.into()))
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum)]
    algo: Algo,
    /// Where to write the schedule.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    round: RoundArgs,
}

#[derive(Args)]
struct BenchArgs {
    corpus: PathBuf,
    /// Comma-separated algorithms.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "exact,graham,cg,lp,round"
    )]
    algos: Vec<Algo>,
    /// JSON report path; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    round: RoundArgs,
}

/// Error carrying the process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn fail(code: u8, err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code,
        err: err.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { kind } => generate(kind),
        Command::Solve(args) => solve(&args),
        Command::Verify { instance, schedule } => verify(&instance, &schedule),
        Command::Bench(args) => bench(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(|e| fail(EXIT_SEMANTIC, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(kind: GenerateKind) -> Result<(), Failure> {
    let (inst, comments, output) = match kind {
        GenerateKind::Gap { m, k, output } => {
            if m == 0 || k == 0 {
                return Err(fail(EXIT_FORMAT, anyhow!("--m and --k must be at least 1")));
            }
            (gap_instance(m, k), vec![format!("gap m={m} k={k}")], output)
        }
        GenerateKind::Random {
            n,
            m,
            p,
            seed,
            output,
        } => {
            check_generator(m, p)?;
            let c = vec![format!("random n={n} m={m} p={p}"), format!("seed {seed}")];
            (random_dag(n, m, p, seed), c, output)
        }
        GenerateKind::Layered {
            layers,
            width,
            m,
            p,
            seed,
            output,
        } => {
            check_generator(m, p)?;
            let c = vec![
                format!("layered layers={layers} width={width} m={m} p={p}"),
                format!("seed {seed}"),
            ];
            (layered_dag(layers, width, m, p, seed), c, output)
        }
    };
    write_or_print(output.as_deref(), &write_instance(&inst, &comments))
}

fn check_generator(m: usize, p: f64) -> Result<(), Failure> {
    if m == 0 {
        return Err(fail(EXIT_FORMAT, anyhow!("--m must be at least 1")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(fail(EXIT_FORMAT, anyhow!("--p must lie in [0, 1]")));
    }
    Ok(())
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| fail(EXIT_FORMAT, e))?;
    parse_instance(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(|e| fail(EXIT_FORMAT, e))
}

/// Result of one algorithm on one instance.
#[derive(Default)]
struct RunResult {
    schedule: Option<PartialSchedule>,
    makespan: Option<usize>,
    lp_t: Option<usize>,
    discarded: Option<usize>,
    stats: Option<RoundingStats>,
}

fn run_algo(inst: &Instance, algo: Algo, round: &RoundArgs) -> Result<RunResult, Failure> {
    match algo {
        Algo::Exact => match exact::optimal_makespan(inst, round.budget) {
            Ok((t, s)) => Ok(RunResult {
                makespan: Some(t),
                schedule: Some(s),
                discarded: Some(0),
                ..RunResult::default()
            }),
            Err(e @ (ExactError::BudgetExhausted { .. } | ExactError::TooManyJobs { .. })) => {
                Err(fail(EXIT_RESOURCE, e))
            }
        },
        Algo::Graham | Algo::Cg => {
            let s = if algo == Algo::Graham {
                graham_default(inst)
            } else {
                coffman_graham(inst)
            };
            Ok(RunResult {
                makespan: Some(s.makespan()),
                schedule: Some(s),
                discarded: Some(0),
                ..RunResult::default()
            })
        }
        Algo::Lp => match relax::lp_horizon(inst) {
            Ok(t) => Ok(RunResult {
                lp_t: Some(t),
                ..RunResult::default()
            }),
            Err(e @ RelaxError::Lp(LpError::TooLarge { .. })) => Err(fail(EXIT_RESOURCE, e)),
            Err(e) => Err(fail(EXIT_SEMANTIC, e)),
        },
        Algo::Round => {
            let params = round.params().map_err(|e| fail(EXIT_FORMAT, e))?;
            match rounding::round_full(inst, &params) {
                Ok(out) => Ok(RunResult {
                    makespan: Some(out.stats.makespan),
                    discarded: Some(out.stats.total_discards()),
                    schedule: Some(out.schedule),
                    stats: Some(out.stats),
                    ..RunResult::default()
                }),
                Err(e) if e.is_resource() => Err(fail(EXIT_RESOURCE, e)),
                Err(e) => Err(fail(EXIT_SEMANTIC, e)),
            }
        }
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    algo: &'static str,
    makespan: Option<usize>,
    #[serde(rename = "lp_T")]
    lp_t: Option<usize>,
    discarded: Option<usize>,
    wall_ms: u128,
    stats: Option<&'a RoundingStats>,
}

fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let inst = load_instance(&args.instance)?;
    let start = Instant::now();
    let res = run_algo(&inst, args.algo, &args.round)?;
    let wall_ms = start.elapsed().as_millis();
    if let Some(s) = &res.schedule {
        let verdict = validate_schedule(&inst, s);
        if !verdict.is_ok() || !s.is_complete() {
            return Err(fail(
                EXIT_SEMANTIC,
                anyhow!("{} produced an invalid schedule", args.algo.name()),
            ));
        }
    }
    if let Some(t) = res.makespan {
        println!("makespan: {t}");
    }
    if let Some(t) = res.lp_t {
        println!("lp_T: {t}");
    }
    let report = SolveReport {
        algo: args.algo.name(),
        makespan: res.makespan,
        lp_t: res.lp_t,
        discarded: res.discarded,
        wall_ms,
        stats: res.stats.as_ref(),
    };
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serializes")
    );
    if let Some(path) = &args.output {
        let Some(s) = &res.schedule else {
            return Err(fail(
                EXIT_SEMANTIC,
                anyhow!("{} does not produce a schedule", args.algo.name()),
            ));
        };
        fs::write(path, write_schedule(s))
            .with_context(|| format!("writing {}", path.display()))
            .map_err(|e| fail(EXIT_SEMANTIC, e))?;
    }
    Ok(())
}

fn verify(instance: &Path, schedule: &Path) -> Result<(), Failure> {
    let inst = load_instance(instance)?;
    let text = fs::read_to_string(schedule)
        .with_context(|| format!("reading {}", schedule.display()))
        .map_err(|e| fail(EXIT_FORMAT, e))?;
    let sched = parse_schedule(&text, inst.n())
        .with_context(|| format!("parsing {}", schedule.display()))
        .map_err(|e: anyhow::Error| fail(EXIT_FORMAT, e))?;
    let verdict = validate_schedule(&inst, &sched);
    let missing: Vec<usize> = (0..inst.n()).filter(|&j| sched.slot(j).is_none()).collect();
    for v in &verdict.violations {
        println!("violation: {v}");
    }
    for j in &missing {
        println!("violation: job {j} is not scheduled");
    }
    if verdict.is_ok() && missing.is_empty() {
        println!("valid: makespan {}", sched.makespan());
        Ok(())
    } else {
        Err(fail(
            EXIT_SEMANTIC,
            anyhow!("{} violation(s)", verdict.violations.len() + missing.len()),
        ))
    }
}

#[derive(Serialize, Clone)]
struct BenchRow {
    instance: String,
    algo: &'static str,
    makespan: Option<usize>,
    opt: Option<usize>,
    /// `makespan / opt`, or `opt / lp_T` for the LP.
    ratio: Option<f64>,
    discarded: Option<usize>,
    #[serde(rename = "lp_T")]
    lp_t: Option<usize>,
    conditionings: Option<usize>,
    wall_ms: u128,
    seed: Option<u64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Aggregate {
    algo: &'static str,
    rows: usize,
    failures: usize,
    max_ratio: Option<f64>,
    mean_ratio: Option<f64>,
}

#[derive(Serialize)]
struct BenchReport {
    rows: Vec<BenchRow>,
    aggregate: Vec<Aggregate>,
}

fn seed_of(text: &str) -> Option<u64> {
    text.lines()
        .filter_map(|l| l.strip_prefix('#'))
        .find_map(|l| l.trim().strip_prefix("seed ")?.trim().parse().ok())
}

fn bench(args: &BenchArgs) -> Result<(), Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(&args.corpus)
        .with_context(|| format!("reading {}", args.corpus.display()))
        .map_err(|e| fail(EXIT_FORMAT, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    args.round.params().map_err(|e| fail(EXIT_FORMAT, e))?;

    let mut algos = args.algos.clone();
    algos.dedup();
    let rows: Vec<BenchRow> = files
        .par_iter()
        .flat_map(|path| bench_instance(path, &algos, &args.round))
        .collect();
    let mut rows = rows;
    rows.sort_by(|a, b| (&a.instance, a.algo).cmp(&(&b.instance, b.algo)));

    let aggregate: Vec<Aggregate> = algos
        .iter()
        .map(|&a| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.algo == a.name()).collect();
            let ratios: Vec<f64> = mine.iter().filter_map(|r| r.ratio).collect();
            Aggregate {
                algo: a.name(),
                rows: mine.len(),
                failures: mine.iter().filter(|r| r.error.is_some()).count(),
                max_ratio: ratios.iter().copied().reduce(f64::max),
                mean_ratio: (!ratios.is_empty())
                    .then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            }
        })
        .collect();

    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    eprintln!(
        "{:<8} {:>6} {:>8} {:>10} {:>10}",
        "algo", "rows", "failed", "max_ratio", "mean_ratio"
    );
    for a in &aggregate {
        eprintln!(
            "{:<8} {:>6} {:>8} {:>10} {:>10}",
            a.algo,
            a.rows,
            a.failures,
            fmt(a.max_ratio),
            fmt(a.mean_ratio)
        );
    }
    let report = BenchReport { rows, aggregate };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_or_print(args.output.as_deref(), &json)
}

fn bench_instance(path: &Path, algos: &[Algo], round: &RoundArgs) -> Vec<BenchRow> {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let blank = |algo: Algo, error: Option<String>| BenchRow {
        instance: name.clone(),
        algo: algo.name(),
        makespan: None,
        opt: None,
        ratio: None,
        discarded: None,
        lp_t: None,
        conditionings: None,
        wall_ms: 0,
        seed: None,
        error,
    };
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            return algos
                .iter()
                .map(|&a| blank(a, Some(e.to_string())))
                .collect()
        }
    };
    let inst = match parse_instance(&text) {
        Ok(i) => i,
        Err(e) => {
            let e: FormatError = e;
            return algos
                .iter()
                .map(|&a| blank(a, Some(e.to_string())))
                .collect();
        }
    };
    let seed = seed_of(&text);
    let opt = exact::optimal_makespan(&inst, round.budget)
        .ok()
        .map(|(t, _)| t);
    algos
        .iter()
        .map(|&algo| {
            let start = Instant::now();
            let res = run_algo(&inst, algo, round);
            let wall_ms = start.elapsed().as_millis();
            let mut row = blank(algo, None);
            row.seed = seed;
            row.opt = opt;
            row.wall_ms = wall_ms;
            match res {
                Ok(r) => {
                    row.makespan = r.makespan;
                    row.discarded = r.discarded;
                    row.lp_t = r.lp_t;
                    row.conditionings = r.stats.as_ref().map(|s| s.conditionings);
                    row.ratio = match (algo, opt) {
                        (Algo::Lp, Some(o)) => {
                            r.lp_t.filter(|&t| t > 0).map(|t| o as f64 / t as f64)
                        }
                        (_, Some(o)) if o > 0 => r.makespan.map(|t| t as f64 / o as f64),
                        _ => None,
                    };
                }
                Err(f) => row.error = Some(format!("{:#}", f.err)),
            }
            row
        })
        .collect()
}
