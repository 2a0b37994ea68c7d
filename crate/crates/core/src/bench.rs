//! Batch benchmarking and ground-state sampling.
//!
//! A [`BenchJob`] expands deterministically into `(size, instance, run)`
//! tasks. Instance seeds are `derive(master, "inst", [n, index])` and run
//! seeds `derive(master, "run", [instance_seed, run])`, where `derive` is
//! [`crate::seed::derive`]. Tasks may finish in any order; results are always
//! returned in task order.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, Quartiles, Restriction, SamplingReport, ScalingFit, ScalingRow};
use crate::gf2::{enumerate_solutions, Gf2Error, Gf2Vector};
use crate::ising::{compile, lift, GadgetBook, IsingError, IsingInstance, SpinConfig};
use crate::pt::{self, PtError, PtParams};
use crate::seed;
use crate::xorsat::{generate_with_nullity, XorsatError, XorsatSystem};

/// Attempts allowed when drawing a unique-solution instance.
pub const NULLITY_ATTEMPTS: usize = 100_000;
/// Largest ground-state degeneracy [`sample`] will enumerate.
pub const MAX_SAMPLED_STATES: u64 = 1 << 16;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid job: {0}")]
    InvalidJob(String),
    #[error("instance has no known ground energy")]
    UnknownGroundEnergy,
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error(transparent)]
    Xorsat(#[from] XorsatError),
    #[error(transparent)]
    Ising(#[from] IsingError),
    #[error(transparent)]
    Pt(#[from] PtError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Plain parallel tempering.
    Pt,
    /// Parallel tempering with Houdayer cluster moves.
    Pth,
}

impl Solver {
    pub fn houdayer(self) -> bool {
        self == Solver::Pth
    }

    pub fn name(self) -> &'static str {
        match self {
            Solver::Pt => "pt",
            Solver::Pth => "pth",
        }
    }
}

impl std::str::FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pt" => Ok(Solver::Pt),
            "pth" => Ok(Solver::Pth),
            other => Err(format!("unknown solver {other:?} (expected pt or pth)")),
        }
    }
}

/// Solver settings shared by every run of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub solver: Solver,
    pub betas: Vec<f64>,
    pub sweeps_max: u64,
}

impl SolverConfig {
    pub fn new(solver: Solver) -> Self {
        Self { solver, betas: pt::default_betas(), sweeps_max: pt::DEFAULT_SWEEPS_MAX }
    }

    pub fn params(&self, seed: u64) -> PtParams {
        PtParams {
            betas: self.betas.clone(),
            sweeps_max: self.sweeps_max,
            seed,
            houdayer: self.solver.houdayer(),
            ..PtParams::new(seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchJob {
    pub sizes: Vec<usize>,
    pub instances_per_size: usize,
    pub runs_per_instance: usize,
    pub seed: u64,
    pub config: SolverConfig,
}

/// One `(size, instance, run)` unit of a [`BenchJob`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchTask {
    pub n: usize,
    pub instance: usize,
    pub instance_seed: u64,
    pub run: usize,
    pub run_seed: u64,
}

pub fn instance_seed(master: u64, n: usize, index: usize) -> u64 {
    seed::derive(master, "inst", &[n as u64, index as u64])
}

pub fn run_seed(master: u64, instance_seed: u64, run: usize) -> u64 {
    seed::derive(master, "run", &[instance_seed, run as u64])
}

impl BenchJob {
    pub fn new(sizes: Vec<usize>, solver: Solver, seed: u64) -> Self {
        Self { sizes, instances_per_size: 100, runs_per_instance: 1, seed, config: SolverConfig::new(solver) }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.sizes.is_empty() {
            return Err(BenchError::InvalidJob("no sizes given".into()));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n == 0) {
            return Err(BenchError::InvalidJob(format!("size {n} is not positive")));
        }
        if self.instances_per_size == 0 || self.runs_per_instance == 0 {
            return Err(BenchError::InvalidJob("instance and run counts must be at least 1".into()));
        }
        self.config.params(self.seed).validate()?;
        Ok(())
    }

    pub fn tasks(&self) -> Vec<BenchTask> {
        let mut tasks = Vec::new();
        for &n in &self.sizes {
            for instance in 0..self.instances_per_size {
                let instance_seed = instance_seed(self.seed, n, instance);
                for run in 0..self.runs_per_instance {
                    tasks.push(BenchTask {
                        n,
                        instance,
                        instance_seed,
                        run,
                        run_seed: run_seed(self.seed, instance_seed, run),
                    });
                }
            }
        }
        tasks
    }
}

/// The unique-solution 3R3X benchmark instance for a seed.
pub fn planted_instance(n: usize, instance_seed: u64) -> Result<(XorsatSystem, IsingInstance), BenchError> {
    let system = generate_with_nullity(n, 3, 3, 0, instance_seed, NULLITY_ATTEMPTS)?.system;
    let instance = compile(&system, &GadgetBook::builtin())?;
    Ok((system, instance))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub n: usize,
    pub instance: usize,
    pub instance_seed: u64,
    pub run: usize,
    pub run_seed: u64,
    pub found: bool,
    pub sweeps: u64,
    /// Spin updates until the ground state, or the full budget if not found.
    pub spin_updates: u64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchOutcome {
    pub records: Vec<RunRecord>,
    pub rows: Vec<ScalingRow>,
    /// Present when at least three sizes were benchmarked.
    pub fit: Option<ScalingFit>,
}

impl BenchOutcome {
    pub fn total_wall_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.wall_seconds).sum()
    }

    pub fn unsolved(&self) -> usize {
        self.records.iter().filter(|r| !r.found).count()
    }

    /// CSV of every run, in task order.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("n,instance,instance_seed,run,run_seed,found,sweeps,spin_updates\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.n, r.instance, r.instance_seed, r.run, r.run_seed, r.found, r.sweeps, r.spin_updates
            ));
        }
        out
    }

    pub fn scaling_csv(&self) -> String {
        analysis::scaling_csv(&self.rows, self.fit.as_ref())
    }
}

/// Runs every task of `job`. An instance's cost is the lower median of its
/// runs' spin-update counts; each size row summarizes its instances' costs.
pub fn run_bench(job: &BenchJob) -> Result<BenchOutcome, BenchError> {
    job.validate()?;
    let mut instances = Vec::new();
    for &n in &job.sizes {
        for index in 0..job.instances_per_size {
            instances.push(planted_instance(n, instance_seed(job.seed, n, index))?.1);
        }
    }
    let tasks = job.tasks();
    let records = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let instance = &instances[i / job.runs_per_instance];
            let target = instance.ground_energy().ok_or(BenchError::UnknownGroundEnergy)?;
            let result = pt::run(instance, job.config.params(task.run_seed), Some(target))?;
            Ok(RunRecord {
                n: task.n,
                instance: task.instance,
                instance_seed: task.instance_seed,
                run: task.run,
                run_seed: task.run_seed,
                found: result.found,
                sweeps: result.sweeps,
                spin_updates: result.spin_updates_to_solution,
                wall_seconds: result.wall_seconds,
            })
        })
        .collect::<Result<Vec<_>, BenchError>>()?;

    let mut rows = Vec::new();
    for (size_index, &n) in job.sizes.iter().enumerate() {
        let per_size = job.instances_per_size * job.runs_per_instance;
        let size_records = &records[size_index * per_size..(size_index + 1) * per_size];
        let costs = size_records
            .chunks(job.runs_per_instance)
            .map(|runs| {
                let c: Vec<f64> = runs.iter().map(|r| r.spin_updates as f64).collect();
                analysis::runtime_summary(&c).map(|q| q.median)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(ScalingRow { n, summary: analysis::runtime_summary(&costs)? });
    }
    let fit = if rows.len() >= 3 {
        Some(analysis::fit_exponent(&rows.iter().map(|r| (r.n as f64, r.summary.median)).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(BenchOutcome { records, rows, fit })
}

/// Per-size summary for callers that only need the quartiles.
pub fn summaries(outcome: &BenchOutcome) -> Vec<(usize, Quartiles)> {
    outcome.rows.iter().map(|r| (r.n, r.summary)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutcome {
    pub report: SamplingReport,
    /// Runs that hit the sweep budget without reaching the ground energy.
    pub misses: u64,
    /// Ground states over all spins, in canonical order.
    pub ground_states: Vec<SpinConfig>,
    /// Like `report.pairwise_hamming`, normalized over all spins.
    pub pairwise_hamming_all: Vec<Vec<f64>>,
}

/// Solves `system` `runs` times and tallies which ground state each run
/// reached, keyed by canonical solution index. Run `r` uses seed
/// `derive(master, "run", [system.seed(), r])`.
pub fn sample(
    system: &XorsatSystem,
    instance: &IsingInstance,
    runs: usize,
    config: &SolverConfig,
    master: u64,
) -> Result<SampleOutcome, BenchError> {
    let target = instance.ground_energy().ok_or(BenchError::UnknownGroundEnergy)?;
    let solutions = system.solution_set();
    let count = solutions.solution_count().unwrap_or(u64::MAX);
    if count == 0 || count > MAX_SAMPLED_STATES {
        return Err(BenchError::InvalidJob(format!("cannot tally {count} ground states")));
    }
    let book = GadgetBook::builtin();
    let ground_states = enumerate_solutions(&solutions, MAX_SAMPLED_STATES)?
        .iter()
        .map(|x| lift(system, &book, &x.to_bits()))
        .collect::<Result<Vec<_>, _>>()?;
    let n = system.n_vars();
    let hits = (0..runs)
        .into_par_iter()
        .map(|r| {
            let result = pt::run(instance, config.params(run_seed(master, system.seed(), r)), Some(target))?;
            if !result.found {
                return Ok(None);
            }
            let bits = Gf2Vector::from_bits(&result.best_config.to_bits(n))?;
            Ok(solutions.index_of(&bits))
        })
        .collect::<Result<Vec<Option<u64>>, BenchError>>()?;
    let mut tallies = vec![0u64; ground_states.len()];
    let mut misses = 0;
    for hit in hits {
        match hit {
            Some(i) => tallies[i as usize] += 1,
            None => misses += 1,
        }
    }
    let report = analysis::sampling_report(&tallies, &ground_states, Restriction::Logical(n))?;
    let pairwise_hamming_all = analysis::sampling_report(&tallies, &ground_states, Restriction::All)?.pairwise_hamming;
    Ok(SampleOutcome { report, misses, ground_states, pairwise_hamming_all })
}
