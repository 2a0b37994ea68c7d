//! Random `r`-regular `k`-XORSAT systems.
//!
//! Structure generation for `k == r` follows the shuffle construction: `k`
//! independent random permutations of the variable list are laid side by
//! side and clause `i` takes the `i`-th entry of each. When any clause would
//! repeat a variable, all permutations are redrawn. For `k != r` the same
//! restart rule is applied to a configuration model: each variable is listed
//! `r` times, the list is shuffled and cut into consecutive `k`-tuples.
//!
//! Random streams (see [`crate::seed`]): structure uses
//! `stream(seed, "xorsat-structure")`, the random right-hand side uses
//! `stream(seed, "xorsat-rhs")` and random planting uses
//! `stream(seed, "xorsat-plant")`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::{row_reduce, solve_affine, Gf2Matrix, Gf2SolutionSet, Gf2Vector};
use crate::seed;

/// Restart cap for repeat-free structure generation.
pub const MAX_RESTARTS: usize = 10_000;

pub const FORMAT_TAG: &str = "xorsat-v1";

#[derive(Debug, Error)]
pub enum XorsatError {
    #[error("n*r = {n}*{r} is not divisible by k = {k}")]
    NotDivisible { n: usize, k: usize, r: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("no repeat-free structure found after {0} restarts")]
    RestartCapExceeded(usize),
    #[error("no system with nullity {target} found in {attempts} attempts")]
    AttemptsExhausted { target: usize, attempts: usize },
    #[error("assignment has length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid clause {index}: {reason}")]
    InvalidClause { index: usize, reason: String },
    #[error("variable {var} appears in {count} clauses, expected {r}")]
    NotRegular { var: usize, count: usize, r: usize },
    #[error("malformed instance file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One parity constraint: XOR of `vars` equals `rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    /// Sorted, distinct variable indices.
    pub vars: Vec<usize>,
    #[serde(rename = "b")]
    pub rhs: u8,
}

impl Clause {
    pub fn new(mut vars: Vec<usize>, rhs: bool) -> Self {
        vars.sort_unstable();
        Self { vars, rhs: rhs as u8 }
    }

    pub fn rhs(&self) -> bool {
        self.rhs == 1
    }

    /// Parity of `assignment` over this clause's variables.
    pub fn parity(&self, assignment: &[u8]) -> bool {
        self.vars.iter().fold(false, |acc, &v| acc ^ (assignment[v] == 1))
    }

    pub fn is_satisfied(&self, assignment: &[u8]) -> bool {
        self.parity(assignment) == self.rhs()
    }
}

/// A linear system mod 2 whose clauses all have `k` variables.
///
/// `r` is the common occurrence count of every variable, or 0 for a
/// system that is not regular (only produced by [`XorsatSystem::from_clauses`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XorsatSystem {
    n_vars: usize,
    k: usize,
    r: usize,
    clauses: Vec<Clause>,
    seed: u64,
    planted: Option<Vec<u8>>,
}

impl XorsatSystem {
    /// Validates and builds a system. `r > 0` demands exact regularity.
    pub fn new(n_vars: usize, k: usize, r: usize, clauses: Vec<Clause>, seed: u64) -> Result<Self, XorsatError> {
        for (index, c) in clauses.iter().enumerate() {
            let bad = |reason: String| XorsatError::InvalidClause { index, reason };
            if c.vars.len() != k {
                return Err(bad(format!("has {} variables, expected {k}", c.vars.len())));
            }
            if c.rhs > 1 {
                return Err(bad(format!("right-hand side {} is not a bit", c.rhs)));
            }
            if let Some(&v) = c.vars.iter().find(|&&v| v >= n_vars) {
                return Err(bad(format!("variable {v} out of range for n = {n_vars}")));
            }
            if c.vars.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("variables must be sorted and distinct".into()));
            }
        }
        if r > 0 {
            let mut counts = vec![0usize; n_vars];
            for c in &clauses {
                for &v in &c.vars {
                    counts[v] += 1;
                }
            }
            if let Some((var, &count)) = counts.iter().enumerate().find(|(_, &c)| c != r) {
                return Err(XorsatError::NotRegular { var, count, r });
            }
        }
        Ok(Self { n_vars, k, r, clauses, seed, planted: None })
    }

    /// Builds a possibly irregular system; `r` is inferred (0 if irregular).
    pub fn from_clauses(n_vars: usize, clauses: Vec<Clause>) -> Result<Self, XorsatError> {
        let k = clauses.first().map_or(0, |c| c.vars.len());
        let mut counts = vec![0usize; n_vars];
        for c in &clauses {
            for &v in &c.vars {
                if let Some(slot) = counts.get_mut(v) {
                    *slot += 1;
                }
            }
        }
        let r = match counts.first() {
            Some(&c0) if c0 > 0 && counts.iter().all(|&c| c == c0) => c0,
            _ => 0,
        };
        Self::new(n_vars, k, r, clauses, 0)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn planted(&self) -> Option<&[u8]> {
        self.planted.as_deref()
    }

    /// Coefficient matrix, one row per clause.
    pub fn matrix(&self) -> Gf2Matrix {
        let mut a = Gf2Matrix::zeros(self.clauses.len(), self.n_vars);
        for (i, c) in self.clauses.iter().enumerate() {
            for &v in &c.vars {
                a.set(i, v, true);
            }
        }
        a
    }

    pub fn rhs_vector(&self) -> Gf2Vector {
        let mut b = Gf2Vector::zeros(self.clauses.len());
        for (i, c) in self.clauses.iter().enumerate() {
            b.set(i, c.rhs());
        }
        b
    }

    pub fn nullity(&self) -> usize {
        self.n_vars - row_reduce(&self.matrix()).rank
    }

    pub fn solution_set(&self) -> Gf2SolutionSet {
        solve_affine(&self.matrix(), &self.rhs_vector()).expect("rhs length equals clause count")
    }

    pub fn is_solution(&self, assignment: &[u8]) -> bool {
        assignment.len() == self.n_vars && self.clauses.iter().all(|c| c.is_satisfied(assignment))
    }

    fn check_len(&self, assignment: &[u8]) -> Result<(), XorsatError> {
        if assignment.len() != self.n_vars {
            return Err(XorsatError::LengthMismatch { expected: self.n_vars, actual: assignment.len() });
        }
        Ok(())
    }

    fn with_rhs(&self, rhs: impl Iterator<Item = bool>) -> Self {
        let clauses =
            self.clauses.iter().zip(rhs).map(|(c, b)| Clause { vars: c.vars.clone(), rhs: b as u8 }).collect();
        Self { clauses, planted: None, ..self.clone() }
    }
}

/// Generates the clause structure and a uniformly random right-hand side.
pub fn generate_regular(n: usize, k: usize, r: usize, seed: u64) -> Result<XorsatSystem, XorsatError> {
    if n == 0 || k == 0 || r == 0 {
        return Err(XorsatError::InvalidParameters("n, k and r must be positive".into()));
    }
    if k > n {
        return Err(XorsatError::InvalidParameters(format!("k = {k} exceeds n = {n}")));
    }
    if !(n * r).is_multiple_of(k) {
        return Err(XorsatError::NotDivisible { n, k, r });
    }
    let mut rng = seed::stream(seed, "xorsat-structure", &[]);
    let var_lists = if k == r { shuffle_columns(n, k, &mut rng)? } else { configuration_model(n, k, r, &mut rng)? };
    let mut rhs_rng = seed::stream(seed, "xorsat-rhs", &[]);
    let clauses = var_lists.into_iter().map(|vars| Clause::new(vars, rhs_rng.gen::<bool>())).collect();
    XorsatSystem::new(n, k, r, clauses, seed)
}

fn has_repeat(vars: &[usize]) -> bool {
    let mut sorted = vars.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[0] == w[1])
}

fn shuffle_columns(n: usize, k: usize, rng: &mut seed::StreamRng) -> Result<Vec<Vec<usize>>, XorsatError> {
    let mut perms: Vec<Vec<usize>> = vec![(0..n).collect(); k];
    for _ in 0..MAX_RESTARTS {
        for p in perms.iter_mut() {
            p.shuffle(rng);
        }
        let clauses: Vec<Vec<usize>> = (0..n).map(|i| perms.iter().map(|p| p[i]).collect()).collect();
        if !clauses.iter().any(|c| has_repeat(c)) {
            return Ok(clauses);
        }
    }
    Err(XorsatError::RestartCapExceeded(MAX_RESTARTS))
}

fn configuration_model(
    n: usize,
    k: usize,
    r: usize,
    rng: &mut seed::StreamRng,
) -> Result<Vec<Vec<usize>>, XorsatError> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, r)).collect();
    for _ in 0..MAX_RESTARTS {
        stubs.shuffle(rng);
        if !stubs.chunks(k).any(has_repeat) {
            return Ok(stubs.chunks(k).map(<[usize]>::to_vec).collect());
        }
    }
    Err(XorsatError::RestartCapExceeded(MAX_RESTARTS))
}

/// Sets every right-hand side to the parity of `assignment`, which makes
/// the system satisfiable with `assignment` as a recorded solution.
pub fn plant(system: &XorsatSystem, assignment: &[u8]) -> Result<XorsatSystem, XorsatError> {
    system.check_len(assignment)?;
    if let Some(pos) = assignment.iter().position(|&b| b > 1) {
        return Err(XorsatError::InvalidParameters(format!("assignment entry {pos} is not a bit")));
    }
    let mut planted = system.with_rhs(system.clauses.iter().map(|c| c.parity(assignment)));
    planted.planted = Some(assignment.to_vec());
    Ok(planted)
}

/// Plants a uniformly random assignment drawn from `stream(seed, "xorsat-plant")`.
pub fn plant_random(system: &XorsatSystem, seed: u64) -> XorsatSystem {
    let mut rng = seed::stream(seed, "xorsat-plant", &[]);
    let assignment: Vec<u8> = (0..system.n_vars).map(|_| rng.gen::<bool>() as u8).collect();
    plant(system, &assignment).expect("assignment length matches")
}

/// A generated system together with the number of structures drawn.
#[derive(Debug, Clone)]
pub struct Generated {
    pub system: XorsatSystem,
    pub attempts: usize,
}

/// Draws structures until the coefficient matrix has nullity `d_target`,
/// then plants a random assignment, giving exactly `2^d_target` solutions.
///
/// Attempt `t` (0-based) uses structure seed `derive(seed, "attempt", [t])`,
/// which is the seed recorded in the returned system; the planted
/// assignment comes from `plant_random` with that same seed.
pub fn generate_with_nullity(
    n: usize,
    k: usize,
    r: usize,
    d_target: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<Generated, XorsatError> {
    if max_attempts == 0 {
        return Err(XorsatError::InvalidParameters("max_attempts must be at least 1".into()));
    }
    for attempt in 0..max_attempts {
        let s = seed::derive(seed, "attempt", &[attempt as u64]);
        let system = generate_regular(n, k, r, s)?;
        if system.nullity() == d_target {
            return Ok(Generated { system: plant_random(&system, s), attempts: attempt + 1 });
        }
    }
    Err(XorsatError::AttemptsExhausted { target: d_target, attempts: max_attempts })
}

/// Rejection sampling on the random right-hand side: keeps drawing
/// (structure, b) pairs until the system is consistent and, if requested,
/// has the given nullity. Seeds follow [`generate_with_nullity`].
pub fn generate_satisfiable(
    n: usize,
    k: usize,
    r: usize,
    d_target: Option<usize>,
    seed: u64,
    max_attempts: usize,
) -> Result<Generated, XorsatError> {
    if max_attempts == 0 {
        return Err(XorsatError::InvalidParameters("max_attempts must be at least 1".into()));
    }
    for attempt in 0..max_attempts {
        let s = seed::derive(seed, "attempt", &[attempt as u64]);
        let system = generate_regular(n, k, r, s)?;
        let sol = system.solution_set();
        if sol.consistent && d_target.is_none_or(|d| d == sol.nullity) {
            return Ok(Generated { system, attempts: attempt + 1 });
        }
    }
    Err(XorsatError::AttemptsExhausted { target: d_target.unwrap_or(0), attempts: max_attempts })
}

/// `F_2 = -sum_i (-1)^{b_i} prod_{j in clause i} s_j` with `s_j = (-1)^{x_j}`,
/// i.e. (violated clauses) - (satisfied clauses).
pub fn cost(system: &XorsatSystem, assignment: &[u8]) -> Result<i64, XorsatError> {
    system.check_len(assignment)?;
    Ok(system.clauses.iter().map(|c| if c.is_satisfied(assignment) { -1 } else { 1 }).sum())
}

/// Optimum of the cost function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GroundCost {
    /// Certified minimum (satisfiable systems: `-m`).
    Exact(i64),
    /// Certified lower bound only; at least one clause is violated.
    AtLeast(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemAnalysis {
    pub rank: usize,
    pub nullity: usize,
    pub satisfiable: bool,
    /// `2^nullity` when satisfiable (`None` if that overflows), else 0.
    pub n_ground_states: Option<u64>,
    pub ground_cost: GroundCost,
}

pub fn analyze(system: &XorsatSystem) -> SystemAnalysis {
    let sol = system.solution_set();
    let m = system.n_clauses() as i64;
    SystemAnalysis {
        rank: sol.rank,
        nullity: sol.nullity,
        satisfiable: sol.consistent,
        n_ground_states: sol.solution_count(),
        ground_cost: if sol.consistent { GroundCost::Exact(-m) } else { GroundCost::AtLeast(-m + 2) },
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    n: usize,
    k: usize,
    r: usize,
    seed: u64,
    clauses: Vec<Clause>,
    nullity: usize,
    planted: Option<Vec<u8>>,
}

impl XorsatSystem {
    /// Canonical single-line JSON instance file (newline terminated).
    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            format: FORMAT_TAG.to_string(),
            n: self.n_vars,
            k: self.k,
            r: self.r,
            seed: self.seed,
            clauses: self.clauses.clone(),
            nullity: self.nullity(),
            planted: self.planted.clone(),
        };
        let mut s = serde_json::to_string(&file).expect("instance serializes");
        s.push('\n');
        s
    }

    /// Parses and validates an instance file. The stored nullity must match
    /// the recomputed one and a planted assignment must solve the system.
    pub fn from_json(text: &str) -> Result<Self, XorsatError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.format != FORMAT_TAG {
            return Err(XorsatError::Format(format!(
                "field \"format\": expected {FORMAT_TAG:?}, got {:?}",
                file.format
            )));
        }
        let mut system = Self::new(file.n, file.k, file.r, file.clauses, file.seed)?;
        let nullity = system.nullity();
        if nullity != file.nullity {
            return Err(XorsatError::Format(format!(
                "field \"nullity\": file says {}, system has {nullity}",
                file.nullity
            )));
        }
        if let Some(p) = file.planted {
            if !system.is_solution(&p) {
                return Err(XorsatError::Format("field \"planted\": assignment does not solve the system".into()));
            }
            system.planted = Some(p);
        }
        Ok(system)
    }
}
