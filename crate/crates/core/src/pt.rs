//! Parallel tempering with Metropolis sweeps, replica exchange and optional
//! Houdayer cluster moves.
//!
//! One sweep of a run is, in order:
//!
//! 1. a Metropolis sweep of every replica (spins visited in index order),
//! 2. one exchange attempt per adjacent temperature pair, using pairs
//!    `(0,1), (2,3), ...` on odd sweeps and `(1,2), (3,4), ...` on even
//!    sweeps, independently within each replica set,
//! 3. with Houdayer moves enabled, one cluster move per temperature
//!    between the two replica sets.
//!
//! Configurations move between temperature slots; random streams stay with
//! the slots. Slot `s = set * n_t + t` draws from
//! `stream(seed, "pt-replica", [s])`, exchanges from `stream(seed, "pt-swap")`
//! and cluster moves at temperature `t` from `stream(seed, "pt-houdayer", [t])`.
//! Sweeping slots concurrently between exchange phases would therefore
//! reproduce the serial result exactly.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ising::{IsingInstance, SpinConfig};
use crate::seed::{self, StreamRng};

pub const DEFAULT_N_T: usize = 37;
pub const DEFAULT_BETA_MIN: f64 = 0.0166667;
pub const DEFAULT_BETA_MAX: f64 = 3.33333;
pub const DEFAULT_SWEEPS_MAX: u64 = 1_000_000;
pub const DEFAULT_SNAPSHOT_INTERVAL: u64 = 100;

#[derive(Debug, Error)]
pub enum PtError {
    #[error("invalid temperature grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Geometric grid of `n_t` inverse temperatures from `beta_min` to
/// `beta_max`, both endpoints included exactly.
pub fn beta_grid(n_t: usize, beta_min: f64, beta_max: f64) -> Result<Vec<f64>, PtError> {
    if n_t < 2 {
        return Err(PtError::InvalidGrid(format!("need at least 2 temperatures, got {n_t}")));
    }
    if !(beta_min > 0.0 && beta_min < beta_max && beta_max.is_finite()) {
        return Err(PtError::InvalidGrid(format!("need 0 < beta_min < beta_max, got {beta_min}, {beta_max}")));
    }
    let ratio = beta_max / beta_min;
    let last = (n_t - 1) as f64;
    let mut grid: Vec<f64> = (0..n_t).map(|t| beta_min * ratio.powf(t as f64 / last)).collect();
    grid[0] = beta_min;
    grid[n_t - 1] = beta_max;
    Ok(grid)
}

/// The 37-point default grid on `(0.0166667, 3.33333)`.
pub fn default_betas() -> Vec<f64> {
    beta_grid(DEFAULT_N_T, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX).expect("default grid is valid")
}

/// Coldest inverse temperature with `beta_max * |J_max| = 10`.
pub fn beta_max_for(j_max: i64) -> f64 {
    10.0 / j_max.abs() as f64
}

/// Parses an explicit grid: whitespace-separated numbers, `#` starts a comment.
pub fn parse_betas(text: &str) -> Result<Vec<f64>, PtError> {
    let mut betas = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for tok in content.split_whitespace() {
            let b = tok
                .parse::<f64>()
                .map_err(|_| PtError::Parse { line: no + 1, message: format!("bad number {tok:?}") })?;
            betas.push(b);
        }
    }
    validate_betas(&betas)?;
    Ok(betas)
}

fn validate_betas(betas: &[f64]) -> Result<(), PtError> {
    if betas.is_empty() {
        return Err(PtError::InvalidGrid("empty grid".into()));
    }
    if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(PtError::InvalidGrid("inverse temperatures must be finite and positive".into()));
    }
    if betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PtError::InvalidGrid("inverse temperatures must be strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtParams {
    /// Strictly increasing, all positive; the last entry is the coldest.
    pub betas: Vec<f64>,
    pub sweeps_max: u64,
    pub seed: u64,
    pub houdayer: bool,
    pub record_minima: bool,
    pub snapshot_interval: u64,
}

impl PtParams {
    /// Default grid and budget, plain PT, no minima recording.
    pub fn new(seed: u64) -> Self {
        Self {
            betas: default_betas(),
            sweeps_max: DEFAULT_SWEEPS_MAX,
            seed,
            houdayer: false,
            record_minima: false,
            snapshot_interval: DEFAULT_SNAPSHOT_INTERVAL,
        }
    }

    pub fn validate(&self) -> Result<(), PtError> {
        validate_betas(&self.betas)?;
        if self.sweeps_max == 0 {
            return Err(PtError::InvalidParams("sweeps_max must be at least 1".into()));
        }
        if self.record_minima && self.snapshot_interval == 0 {
            return Err(PtError::InvalidParams("snapshot_interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// A spin configuration with its cached energy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replica {
    spins: Vec<i8>,
    energy: i64,
}

impl Replica {
    pub fn new(instance: &IsingInstance, config: SpinConfig) -> Self {
        assert_eq!(config.len(), instance.n_spins(), "configuration length");
        let spins = config.into_inner();
        let energy = instance.energy_of(&spins);
        Self { spins, energy }
    }

    pub fn random(instance: &IsingInstance, rng: &mut StreamRng) -> Self {
        let spins: Vec<i8> = (0..instance.n_spins()).map(|_| if rng.gen::<bool>() { -1 } else { 1 }).collect();
        let energy = instance.energy_of(&spins);
        Self { spins, energy }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn energy(&self) -> i64 {
        self.energy
    }

    pub fn config(&self) -> SpinConfig {
        SpinConfig::new(self.spins.clone()).expect("replica spins are +-1")
    }
}

/// `exp(-beta * dE)` for every positive even `dE` up to the instance maximum.
#[derive(Debug, Clone)]
struct AcceptTable {
    probs: Vec<f64>,
}

impl AcceptTable {
    fn new(beta: f64, max_delta: i64) -> Self {
        Self { probs: (0..=max_delta.max(0)).map(|d| (-beta * d as f64).exp()).collect() }
    }
}

fn sweep_with(instance: &IsingInstance, replica: &mut Replica, table: &AcceptTable, rng: &mut StreamRng) -> usize {
    let adjacency = instance.adjacency();
    let fields = instance.fields();
    let mut accepted = 0;
    for (i, &h) in fields.iter().enumerate() {
        let s = replica.spins[i] as i64;
        let delta = -2 * s * (h + adjacency.coupling_field(i, &replica.spins));
        if delta <= 0 || rng.gen::<f64>() < table.probs[delta as usize] {
            replica.spins[i] = -replica.spins[i];
            replica.energy += delta;
            accepted += 1;
        }
    }
    accepted
}

/// One Metropolis sweep over all spins in index order. A flip changing the
/// energy by `dE` is accepted with probability `min(1, exp(-beta dE))`.
/// Returns the number of accepted flips.
pub fn metropolis_sweep(instance: &IsingInstance, replica: &mut Replica, beta: f64, rng: &mut StreamRng) -> usize {
    sweep_with(instance, replica, &AcceptTable::new(beta, instance.max_flip_delta()), rng)
}

/// Exchange probability `min(1, exp((beta_i - beta_j)(E_i - E_j)))`.
pub fn swap_probability(beta_i: f64, beta_j: f64, e_i: i64, e_j: i64) -> f64 {
    ((beta_i - beta_j) * (e_i - e_j) as f64).exp().min(1.0)
}

/// Reusable buffers for cluster moves.
#[derive(Debug, Clone)]
struct ClusterScratch {
    in_cluster: Vec<bool>,
    members: Vec<usize>,
    stack: Vec<usize>,
    candidates: Vec<usize>,
}

impl ClusterScratch {
    fn new(n: usize) -> Self {
        Self { in_cluster: vec![false; n], members: Vec::new(), stack: Vec::new(), candidates: Vec::new() }
    }
}

/// Energy change of flipping the marked cluster in `spins`.
fn cluster_delta(instance: &IsingInstance, spins: &[i8], scratch: &ClusterScratch) -> i64 {
    let adjacency = instance.adjacency();
    let fields = instance.fields();
    let mut delta = 0;
    for &i in &scratch.members {
        let s = spins[i] as i64;
        let mut boundary = 0;
        for (j, w) in adjacency.neighbors(i) {
            if !scratch.in_cluster[j] {
                boundary += w * spins[j] as i64;
            }
        }
        delta -= 2 * s * (fields[i] + boundary);
    }
    delta
}

fn houdayer_with(
    instance: &IsingInstance,
    a: &mut Replica,
    b: &mut Replica,
    rng: &mut StreamRng,
    scratch: &mut ClusterScratch,
) -> Option<usize> {
    scratch.candidates.clear();
    scratch.candidates.extend((0..a.spins.len()).filter(|&i| a.spins[i] != b.spins[i]));
    if scratch.candidates.is_empty() {
        return None;
    }
    let root = scratch.candidates[rng.gen_range(0..scratch.candidates.len())];

    scratch.members.clear();
    scratch.stack.clear();
    scratch.stack.push(root);
    scratch.in_cluster[root] = true;
    while let Some(i) = scratch.stack.pop() {
        scratch.members.push(i);
        for (j, _) in instance.adjacency().neighbors(i) {
            if !scratch.in_cluster[j] && a.spins[j] != b.spins[j] {
                scratch.in_cluster[j] = true;
                scratch.stack.push(j);
            }
        }
    }

    let delta_a = cluster_delta(instance, &a.spins, scratch);
    let delta_b = cluster_delta(instance, &b.spins, scratch);
    debug_assert_eq!(delta_a + delta_b, 0, "cluster move must conserve E_A + E_B");
    for &i in &scratch.members {
        a.spins[i] = -a.spins[i];
        b.spins[i] = -b.spins[i];
        scratch.in_cluster[i] = false;
    }
    a.energy += delta_a;
    b.energy += delta_b;
    Some(scratch.members.len())
}

/// Houdayer move between two replicas at the same temperature: a site with
/// overlap `q_i = -1` is chosen uniformly, its connected cluster of
/// `q = -1` sites is grown through the instance couplings and flipped in
/// both replicas. `E_A + E_B` is conserved exactly. Returns the cluster
/// size, or `None` (no-op) when the replicas agree everywhere.
pub fn houdayer_move(instance: &IsingInstance, a: &mut Replica, b: &mut Replica, rng: &mut StreamRng) -> Option<usize> {
    let mut scratch = ClusterScratch::new(instance.n_spins());
    houdayer_with(instance, a, b, rng, &mut scratch)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimumSnapshot {
    pub sweep: u64,
    pub energy: i64,
    pub config: SpinConfig,
}

/// Outcome of one solver run.
///
/// `wall_seconds` is informational and excluded from serialization so that
/// result files are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub found: bool,
    /// Sweeps performed.
    pub sweeps: u64,
    pub sweeps_to_solution: Option<u64>,
    /// `sweeps * n_spins * replicas`; the cost to solution when found.
    pub spin_updates_to_solution: u64,
    #[serde(skip)]
    pub wall_seconds: f64,
    pub best_energy: i64,
    pub best_config: SpinConfig,
    /// Exchange acceptance fraction for each adjacent pair `(t, t+1)`.
    pub swap_rates: Vec<f64>,
    pub minima_log: Vec<MinimumSnapshot>,
}

/// Running parallel tempering state; [`run`] drives it to completion.
pub struct Tempering<'a> {
    instance: &'a IsingInstance,
    params: PtParams,
    tables: Vec<AcceptTable>,
    replicas: Vec<Replica>,
    slot_rngs: Vec<StreamRng>,
    swap_rng: StreamRng,
    cluster_rngs: Vec<StreamRng>,
    scratch: ClusterScratch,
    swap_attempts: Vec<u64>,
    swap_accepts: Vec<u64>,
    sweep: u64,
    best: Replica,
    cold_best: Replica,
    minima_log: Vec<MinimumSnapshot>,
    found_at: Option<u64>,
}

impl<'a> Tempering<'a> {
    pub fn new(instance: &'a IsingInstance, params: PtParams) -> Result<Self, PtError> {
        params.validate()?;
        let n_t = params.betas.len();
        let sets = if params.houdayer { 2 } else { 1 };
        let max_delta = instance.max_flip_delta();
        let tables = params.betas.iter().map(|&b| AcceptTable::new(b, max_delta)).collect();
        let mut slot_rngs: Vec<StreamRng> =
            (0..sets * n_t).map(|s| seed::stream(params.seed, "pt-replica", &[s as u64])).collect();
        let replicas: Vec<Replica> = slot_rngs.iter_mut().map(|rng| Replica::random(instance, rng)).collect();
        let best = replicas.iter().min_by_key(|r| r.energy).expect("at least one replica").clone();
        let cold_best = replicas[n_t - 1].clone();
        Ok(Self {
            instance,
            tables,
            swap_rng: seed::stream(params.seed, "pt-swap", &[]),
            cluster_rngs: (0..n_t).map(|t| seed::stream(params.seed, "pt-houdayer", &[t as u64])).collect(),
            scratch: ClusterScratch::new(instance.n_spins()),
            swap_attempts: vec![0; n_t.saturating_sub(1)],
            swap_accepts: vec![0; n_t.saturating_sub(1)],
            sweep: 0,
            best,
            cold_best,
            minima_log: Vec::new(),
            found_at: None,
            replicas,
            slot_rngs,
            params,
        })
    }

    pub fn n_temperatures(&self) -> usize {
        self.params.betas.len()
    }

    /// Replicas by slot `set * n_t + t`.
    pub fn replicas(&self) -> &[Replica] {
        &self.replicas
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweep
    }

    pub fn best(&self) -> &Replica {
        &self.best
    }

    fn note(&mut self, slot: usize, target: Option<i64>) -> bool {
        let r = &self.replicas[slot];
        if r.energy < self.best.energy {
            self.best = r.clone();
        }
        if target.is_some_and(|t| r.energy <= t) {
            self.best = r.clone();
            self.found_at = Some(self.sweep);
            return true;
        }
        false
    }

    /// Performs one full sweep. Returns `true` as soon as a replica reaches
    /// `target`; the remaining phases of that sweep are skipped.
    pub fn step(&mut self, target: Option<i64>) -> bool {
        let n_t = self.n_temperatures();
        let sets = self.replicas.len() / n_t;
        self.sweep += 1;

        for slot in 0..self.replicas.len() {
            let t = slot % n_t;
            sweep_with(self.instance, &mut self.replicas[slot], &self.tables[t], &mut self.slot_rngs[slot]);
            if self.note(slot, target) {
                return true;
            }
        }

        let first = ((self.sweep - 1) % 2) as usize;
        for set in 0..sets {
            for t in (first..n_t.saturating_sub(1)).step_by(2) {
                let (lo, hi) = (set * n_t + t, set * n_t + t + 1);
                let p = swap_probability(
                    self.params.betas[t],
                    self.params.betas[t + 1],
                    self.replicas[lo].energy,
                    self.replicas[hi].energy,
                );
                self.swap_attempts[t] += 1;
                if p >= 1.0 || self.swap_rng.gen::<f64>() < p {
                    self.replicas.swap(lo, hi);
                    self.swap_accepts[t] += 1;
                }
            }
        }

        if sets == 2 {
            for t in 0..n_t {
                let (first_set, second_set) = self.replicas.split_at_mut(n_t);
                houdayer_with(
                    self.instance,
                    &mut first_set[t],
                    &mut second_set[t],
                    &mut self.cluster_rngs[t],
                    &mut self.scratch,
                );
                if self.note(t, target) || self.note(n_t + t, target) {
                    return true;
                }
            }
        }

        for set in 0..sets {
            let cold = &self.replicas[set * n_t + n_t - 1];
            if cold.energy < self.cold_best.energy {
                self.cold_best = cold.clone();
            }
        }
        if self.params.record_minima && self.sweep.is_multiple_of(self.params.snapshot_interval) {
            self.minima_log.push(MinimumSnapshot {
                sweep: self.sweep,
                energy: self.cold_best.energy,
                config: self.cold_best.config(),
            });
        }
        false
    }

    pub fn into_result(self, wall_seconds: f64) -> RunResult {
        let swap_rates = self
            .swap_attempts
            .iter()
            .zip(&self.swap_accepts)
            .map(|(&n, &a)| if n == 0 { 0.0 } else { a as f64 / n as f64 })
            .collect();
        RunResult {
            found: self.found_at.is_some(),
            sweeps: self.sweep,
            sweeps_to_solution: self.found_at,
            spin_updates_to_solution: self.sweep * self.instance.n_spins() as u64 * self.replicas.len() as u64,
            wall_seconds,
            best_energy: self.best.energy,
            best_config: self.best.config(),
            swap_rates,
            minima_log: self.minima_log,
        }
    }
}

/// Runs until some replica reaches `target` (when given) or `sweeps_max`
/// sweeps have been performed. Deterministic given `params.seed`.
pub fn run(instance: &IsingInstance, params: PtParams, target: Option<i64>) -> Result<RunResult, PtError> {
    let start = Instant::now();
    let sweeps_max = params.sweeps_max;
    let mut state = Tempering::new(instance, params)?;
    while state.sweeps_done() < sweeps_max {
        if state.step(target) {
            break;
        }
    }
    Ok(state.into_result(start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{compile, GadgetBook};
    use crate::xorsat::{generate_with_nullity, XorsatSystem};

    fn planted(n: usize, seed: u64) -> (XorsatSystem, IsingInstance) {
        let system = generate_with_nullity(n, 3, 3, 0, seed, 10_000).unwrap().system;
        let instance = compile(&system, &GadgetBook::builtin()).unwrap();
        (system, instance)
    }

    #[test]
    fn grid_endpoints_and_ratio() {
        let g = beta_grid(2, 0.5, 2.0).unwrap();
        assert_eq!(g, vec![0.5, 2.0]);
        let d = default_betas();
        assert_eq!(d.len(), 37);
        assert_eq!(d[0], 0.0166667);
        assert_eq!(d[36], 3.33333);
        let r0 = d[1] / d[0];
        for w in d.windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-12);
        }
        assert!((beta_max_for(3) - 10.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(beta_grid(1, 0.1, 1.0).is_err());
        assert!(beta_grid(5, 0.0, 1.0).is_err());
        assert!(beta_grid(5, 2.0, 1.0).is_err());
    }

    #[test]
    fn explicit_grid_file() {
        assert_eq!(parse_betas("# grid\n0.1 0.2\n0.4 # cold\n").unwrap(), vec![0.1, 0.2, 0.4]);
        assert!(matches!(parse_betas("0.1\nx\n"), Err(PtError::Parse { line: 2, .. })));
        assert!(parse_betas("0.2 0.1").is_err());
    }

    #[test]
    fn swap_probability_cases() {
        assert_eq!(swap_probability(1.0, 2.0, -5, -5), 1.0);
        assert_eq!(swap_probability(1.0, 2.0, -12, -10), 1.0);
        let p = swap_probability(1.0, 2.0, -10, -12);
        assert!((p - (-2.0f64).exp()).abs() < 1e-15);
        assert!((p - 0.1353352832366127).abs() < 1e-15);
    }

    #[test]
    fn infinite_beta_never_climbs() {
        let (_, inst) = planted(8, 1);
        let mut rng = seed::rng(5);
        let mut r = Replica::random(&inst, &mut seed::rng(6));
        for _ in 0..10_000 / inst.n_spins() + 1 {
            let before = r.energy();
            metropolis_sweep(&inst, &mut r, 1e6, &mut rng);
            assert!(r.energy() <= before);
        }
    }

    #[test]
    fn zero_beta_accepts_everything() {
        let (_, inst) = planted(8, 2);
        let mut r = Replica::random(&inst, &mut seed::rng(1));
        let before = r.spins().to_vec();
        let accepted = metropolis_sweep(&inst, &mut r, 0.0, &mut seed::rng(2));
        assert_eq!(accepted, inst.n_spins());
        assert!(r.spins().iter().zip(&before).all(|(a, b)| a == &-b));
        assert_eq!(r.energy(), inst.energy_of(r.spins()));
    }

    #[test]
    fn identical_replicas_are_left_alone() {
        let (_, inst) = planted(6, 3);
        let a0 = Replica::random(&inst, &mut seed::rng(1));
        let (mut a, mut b) = (a0.clone(), a0.clone());
        assert_eq!(houdayer_move(&inst, &mut a, &mut b, &mut seed::rng(0)), None);
        assert_eq!(a, a0);
        assert_eq!(b, a0);
    }

    #[test]
    fn opposite_replicas_flip_entirely() {
        let (_, inst) = planted(6, 4);
        let a0 = Replica::random(&inst, &mut seed::rng(1));
        let flipped: Vec<i8> = a0.spins().iter().map(|s| -s).collect();
        let b0 = Replica::new(&inst, SpinConfig::new(flipped).unwrap());
        let (mut a, mut b) = (a0.clone(), b0.clone());
        let size = houdayer_move(&inst, &mut a, &mut b, &mut seed::rng(0)).unwrap();
        assert_eq!(size, inst.n_spins());
        assert_eq!(a.spins(), b0.spins());
        assert_eq!(b.spins(), a0.spins());
        assert_eq!(a.energy() + b.energy(), a0.energy() + b0.energy());
    }

    #[test]
    fn rejects_invalid_params() {
        let (_, inst) = planted(4, 1);
        let mut p = PtParams::new(0);
        p.betas = vec![1.0, 0.5];
        assert!(run(&inst, p, None).is_err());
        let mut p = PtParams::new(0);
        p.sweeps_max = 0;
        assert!(run(&inst, p, None).is_err());
    }

    #[test]
    fn small_planted_instance_is_solved() {
        let (system, inst) = planted(4, 9);
        assert_eq!(inst.ground_energy(), Some(-16));
        let mut p = PtParams::new(3);
        p.sweeps_max = 10_000;
        let res = run(&inst, p, inst.ground_energy()).unwrap();
        assert!(res.found);
        assert_eq!(res.best_energy, -16);
        assert_eq!(inst.energy(&res.best_config).unwrap(), -16);
        assert!(system.is_solution(&res.best_config.to_bits(4)));
        let sweeps = res.sweeps_to_solution.unwrap();
        assert_eq!(res.spin_updates_to_solution, sweeps * 8 * 37);
    }

    #[test]
    fn runs_are_reproducible() {
        let (_, inst) = planted(12, 5);
        for houdayer in [false, true] {
            let mut p = PtParams::new(77);
            p.sweeps_max = 300;
            p.houdayer = houdayer;
            p.record_minima = true;
            p.snapshot_interval = 50;
            let a = run(&inst, p.clone(), None).unwrap();
            let b = run(&inst, p, None).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            assert_eq!(a.minima_log.len(), 6);
            assert!(a.swap_rates.iter().all(|r| (0.0..=1.0).contains(r)));
        }
    }
}
