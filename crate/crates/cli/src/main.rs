//! `eqplant` command-line driver.
//!
//! Exit codes: 0 on success, 1 on domain errors (unsatisfiable target,
//! failed verification, no gadget found), 2 on I/O or format errors.
//! Result files contain no timing data; wall-clock time goes to stderr.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use eqplant::analysis::{self, Restriction};
use eqplant::bench::{self, BenchJob, Solver, SolverConfig};
use eqplant::gadget::{self, Gadget, Parity};
use eqplant::ising::{self, GadgetBook, IsingInstance};
use eqplant::pt::{self, PtParams};
use eqplant::xorsat::{self, XorsatSystem};

const MAX_ATTEMPTS: usize = 100_000;

#[derive(Parser)]
#[command(name = "eqplant", version, about = "Equation-planted Ising benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a regular k-XORSAT system as JSON.
    Generate(GenerateArgs),
    /// Compile a XORSAT system into an Ising instance.
    Compile(CompileArgs),
    /// Solve an Ising instance with parallel tempering.
    Solve(SolveArgs),
    /// Benchmark planted unique-solution 3R3X instances across sizes.
    Bench(BenchArgs),
    /// Tally which ground states repeated solver runs reach.
    Sample(SampleArgs),
    /// Search for a gadget encoding a k-variable parity constraint.
    GadgetSearch(GadgetSearchArgs),
    /// Check an Ising instance (text) or gadget (JSON).
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    r: usize,
    /// Redraw the structure until the coefficient matrix has this nullity.
    #[arg(long)]
    nullity: Option<usize>,
    /// Plant a random assignment; otherwise the right-hand side is random
    /// and redrawn until the system is consistent.
    #[arg(long)]
    plant: bool,
    /// With a random right-hand side, keep the first draw even if inconsistent.
    #[arg(long, conflicts_with_all = ["plant", "nullity"])]
    allow_unsat: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Extra gadget files (JSON) overriding the built-in 3-XOR gadgets.
    #[arg(long)]
    gadget: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value = "pt")]
    solver: Solver,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = pt::DEFAULT_SWEEPS_MAX)]
    sweeps_max: u64,
    /// Inverse temperatures, one per line, ascending; `#` starts a comment.
    #[arg(long)]
    betas_file: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// `auto` (the instance's certified ground energy) or an integer.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    target: String,
    /// Snapshot the coldest replica's best minimum every N sweeps.
    #[arg(long)]
    snapshot_interval: Option<u64>,
    /// Write the minima snapshots as CSV: sweep, energy, and Hamming
    /// distance to the best configuration over logical and over all spins.
    #[arg(long)]
    minima_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated problem sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// XORSAT system (JSON); it is compiled with the built-in gadgets.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Sampling table (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full report with chi-squared test and pairwise distances (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GadgetSearchArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    aux: usize,
    #[arg(long, default_value_t = 2)]
    max_mag: i64,
    /// even (+1) or odd (-1) product of the clause spins.
    #[arg(long, default_value = "even", value_parser = parse_parity)]
    parity: Parity,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

fn parse_parity(s: &str) -> Result<Parity, String> {
    match s {
        "even" | "+1" => Ok(Parity::Even),
        "odd" | "-1" => Ok(Parity::Odd),
        other => Err(format!("unknown parity {other:?} (expected even, odd, +1 or -1)")),
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn domain(e: impl Display) -> Self {
        Self { code: 1, error: anyhow!("{e}") }
    }

    fn format(e: impl Display) -> Self {
        Self { code: 2, error: anyhow!("{e}") }
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::format(format!("{}: {e}", path.display())))
}

fn write(path: Option<&Path>, body: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| Failure::format(format!("{}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load_system(path: &Path) -> Result<XorsatSystem, Failure> {
    XorsatSystem::from_json(&read(path)?).map_err(|e| Failure::format(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<IsingInstance, Failure> {
    IsingInstance::from_text(&read(path)?).map_err(|e| Failure::format(format!("{}: {e}", path.display())))
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig, Failure> {
    let mut config = SolverConfig::new(args.solver);
    config.sweeps_max = args.sweeps_max;
    if let Some(path) = &args.betas_file {
        config.betas =
            pt::parse_betas(&read(path)?).map_err(|e| Failure::format(format!("{}: {e}", path.display())))?;
    }
    Ok(config)
}

fn generate(a: GenerateArgs) -> CmdResult {
    let system = match (a.plant, a.nullity) {
        (true, Some(d)) => xorsat::generate_with_nullity(a.n, a.k, a.r, d, a.seed, MAX_ATTEMPTS).map(|g| g.system),
        (true, None) => xorsat::generate_regular(a.n, a.k, a.r, a.seed).map(|s| xorsat::plant_random(&s, a.seed)),
        (false, _) if a.allow_unsat => xorsat::generate_regular(a.n, a.k, a.r, a.seed),
        (false, d) => xorsat::generate_satisfiable(a.n, a.k, a.r, d, a.seed, MAX_ATTEMPTS).map(|g| g.system),
    }
    .map_err(Failure::domain)?;
    let summary = xorsat::analyze(&system);
    eprintln!("rank {} nullity {} satisfiable {}", summary.rank, summary.nullity, summary.satisfiable);
    write(a.out.as_deref(), &system.to_json())
}

fn compile(a: CompileArgs) -> CmdResult {
    let system = load_system(&a.input)?;
    let mut book = GadgetBook::builtin();
    for path in &a.gadget {
        let g = Gadget::from_json(&read(path)?).map_err(|e| Failure::format(format!("{}: {e}", path.display())))?;
        book.insert(g).map_err(Failure::domain)?;
    }
    let instance = ising::compile(&system, &book).map_err(Failure::domain)?;
    write(a.out.as_deref(), &instance.to_text())
}

fn solve(a: SolveArgs) -> CmdResult {
    let instance = load_instance(&a.input)?;
    let target = match a.target.as_str() {
        "auto" => Some(
            instance
                .ground_energy()
                .ok_or_else(|| Failure::domain("instance has no certified ground energy; pass --target <int>"))?,
        ),
        t => Some(t.parse::<i64>().map_err(|_| Failure::format(format!("invalid --target {t:?}")))?),
    };
    let config = solver_config(&a.solver)?;
    let mut params: PtParams = config.params(a.solver.seed);
    if let Some(interval) = a.snapshot_interval {
        params.record_minima = true;
        params.snapshot_interval = interval;
    } else if a.minima_out.is_some() {
        params.record_minima = true;
    }
    let result = pt::run(&instance, params, target).map_err(Failure::domain)?;
    eprintln!(
        "found {} best_energy {} sweeps {} wall {:.3}s",
        result.found, result.best_energy, result.sweeps, result.wall_seconds
    );
    if let Some(path) = &a.minima_out {
        let mut csv = String::from("sweep,energy,hamming_logical,hamming_all\n");
        for snap in &result.minima_log {
            let distance = |r| analysis::hamming(&snap.config, &result.best_config, r).map_err(Failure::domain);
            let logical = distance(Restriction::Logical(instance.n_logical()))?;
            let all = distance(Restriction::All)?;
            csv.push_str(&format!("{},{},{},{}\n", snap.sweep, snap.energy, logical.count, all.count));
        }
        write(Some(path), &csv)?;
    }
    write(a.out.as_deref(), &json(&result))
}

fn run_bench(a: BenchArgs) -> CmdResult {
    let job = BenchJob {
        sizes: a.sizes,
        instances_per_size: a.instances,
        runs_per_instance: a.runs,
        seed: a.solver.seed,
        config: solver_config(&a.solver)?,
    };
    let outcome = bench::run_bench(&job).map_err(Failure::domain)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::format(format!("{}: {e}", a.out_dir.display())))?;
    write(Some(&a.out_dir.join("runs.csv")), &outcome.runs_csv())?;
    write(Some(&a.out_dir.join("scaling.csv")), &outcome.scaling_csv())?;
    if let Some(fit) = &outcome.fit {
        write(Some(&a.out_dir.join("fit.json")), &json(fit))?;
        eprintln!("alpha {:.4} +/- {:.4}", fit.alpha, fit.stderr_alpha);
    }
    eprintln!(
        "{} runs, {} unsolved, wall {:.1}s",
        outcome.records.len(),
        outcome.unsolved(),
        outcome.total_wall_seconds()
    );
    Ok(())
}

fn sample(a: SampleArgs) -> CmdResult {
    let system = load_system(&a.input)?;
    let instance = ising::compile(&system, &GadgetBook::builtin()).map_err(Failure::domain)?;
    let config = solver_config(&a.solver)?;
    let outcome = bench::sample(&system, &instance, a.runs, &config, a.solver.seed).map_err(Failure::domain)?;
    eprintln!(
        "chi2 {:.3} dof {} p {:.3e} misses {}",
        outcome.report.chi2_stat, outcome.report.dof, outcome.report.p_value, outcome.misses
    );
    if let Some(path) = &a.report {
        write(Some(path), &json(&outcome))?;
    }
    write(a.out.as_deref(), &analysis::sampling_csv(&outcome.report))
}

fn gadget_search(a: GadgetSearchArgs) -> CmdResult {
    match gadget::search(a.k, a.aux, a.max_mag, a.parity).map_err(Failure::domain)? {
        Some(g) => {
            eprintln!("ground energy {}", g.ground_energy());
            write(a.out.as_deref(), &g.to_json())
        }
        None => {
            Err(Failure::domain(format!("no gadget with {} auxiliary spins and magnitude <= {}", a.aux, a.max_mag)))
        }
    }
}

fn verify(a: VerifyArgs) -> CmdResult {
    let text = read(&a.input)?;
    if text.trim_start().starts_with('{') {
        let g = Gadget::from_json(&text).map_err(|e| Failure::format(format!("{}: {e}", a.input.display())))?;
        let report = gadget::verify(&g).map_err(Failure::domain)?;
        println!(
            "ground_energy {} ground_states {} gap {}",
            report.ground_energy,
            report.ground_configs.len(),
            report.gap
        );
        return if report.pass { Ok(()) } else { Err(Failure::domain("gadget does not encode its parity constraint")) };
    }
    let instance =
        IsingInstance::from_text(&text).map_err(|e| Failure::format(format!("{}: {e}", a.input.display())))?;
    let s = ising::structure_report(&instance);
    println!(
        "n_spins {} max_degree {} h [{}, {}] J [{}, {}] ground_energy {}",
        s.n_spins,
        s.max_degree,
        s.field_range.0,
        s.field_range.1,
        s.coupling_range.0,
        s.coupling_range.1,
        s.ground_energy.map_or("?".to_string(), |e| e.to_string())
    );
    if instance.n_spins() <= ising::BRUTE_FORCE_CAP {
        let gs = ising::brute_force_ground_states(&instance, ising::BRUTE_FORCE_CAP).map_err(Failure::domain)?;
        println!("brute_force_minimum {} ground_states {}", gs.energy_min, gs.configs.len());
        if let Some(e) = s.ground_energy.filter(|&e| e != gs.energy_min) {
            return Err(Failure::domain(format!(
                "declared ground energy {e} differs from the minimum {}",
                gs.energy_min
            )));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Compile(a) => compile(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => run_bench(a),
        Command::Sample(a) => sample(a),
        Command::GadgetSearch(a) => gadget_search(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
