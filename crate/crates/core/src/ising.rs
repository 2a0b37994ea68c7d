//! Two-body integer Ising instances compiled from XORSAT systems.
//!
//! Energy convention: `E(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i`.
//! Variable `x_i` of the source system is carried by spin `i` through
//! `s_i = (-1)^{x_i}`. Auxiliary spins follow the `n` logical spins, clause
//! by clause; with one auxiliary per clause, clause `i` owns spin `n + i`.
//!
//! Text format (one instance per file, ASCII, `\n` line endings):
//!
//! ```text
//! p ising <n_spins> <ground_energy | ?>
//! h <i> <value>          one line per nonzero field, ascending i
//! J <i> <j> <value>      one line per nonzero coupling, i < j, lexicographic
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::gadget::{self, Gadget, Parity};
use crate::xorsat::{analyze, XorsatSystem};

/// Default spin cap for [`brute_force_ground_states`].
pub const BRUTE_FORCE_CAP: usize = 26;

#[derive(Debug, Error)]
pub enum IsingError {
    #[error("configuration has length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("spin value {value} at position {position} is not +1 or -1")]
    NotASpin { position: usize, value: i8 },
    #[error("gadget for k = {k}, parity {parity:?} failed verification")]
    UnverifiedGadget { k: usize, parity: Parity },
    #[error("no gadget available for clauses of {k} variables with parity {parity:?}")]
    NoGadget { k: usize, parity: Parity },
    #[error("assignment does not solve the system")]
    NotASolution,
    #[error("{n_spins} spins exceeds the brute-force cap of {cap}")]
    CapExceeded { n_spins: usize, cap: usize },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Gadget(#[from] gadget::GadgetError),
}

/// A configuration of `+1`/`-1` spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self, IsingError> {
        if let Some((position, &value)) = spins.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
            return Err(IsingError::NotASpin { position, value });
        }
        Ok(Self(spins))
    }

    /// `s_i = (-1)^{x_i}`.
    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| if b == 1 { -1 } else { 1 }).collect())
    }

    /// Inverse of [`from_bits`](Self::from_bits) over the first `n` spins.
    pub fn to_bits(&self, n: usize) -> Vec<u8> {
        self.0[..n].iter().map(|&s| (s == -1) as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }
}

/// Where the spins of a compiled instance came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    /// Number of logical (variable-carrying) spins; they come first.
    pub n_logical: usize,
    /// Auxiliary spin range owned by each clause.
    pub clause_aux: Vec<Range<usize>>,
}

/// Compressed neighbor lists: `(neighbor, J)` per spin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<i64>,
}

impl Adjacency {
    fn build(n: usize, couplings: &BTreeMap<(usize, usize), i64>) -> Self {
        let mut lists: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
        for (&(i, j), &v) in couplings {
            lists[i].push((j, v));
            lists[j].push((i, v));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        for mut list in lists {
            list.sort_unstable();
            for (j, v) in list {
                neighbors.push(j);
                weights.push(v);
            }
            offsets.push(neighbors.len());
        }
        Self { offsets, neighbors, weights }
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.neighbors[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// `sum_j J_ij s_j` over the neighbors of `i`.
    #[inline]
    pub fn coupling_field(&self, i: usize, spins: &[i8]) -> i64 {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.neighbors[r.clone()].iter().zip(&self.weights[r]).map(|(&j, &w)| w * spins[j] as i64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsingInstance {
    n_spins: usize,
    fields: Vec<i64>,
    couplings: BTreeMap<(usize, usize), i64>,
    ground_energy: Option<i64>,
    provenance: Option<Provenance>,
    adjacency: Adjacency,
}

impl IsingInstance {
    /// Builds an instance. Couplings given twice (in either orientation) are
    /// summed; zero couplings are dropped.
    pub fn new(
        n_spins: usize,
        fields: Vec<i64>,
        couplings: impl IntoIterator<Item = (usize, usize, i64)>,
        ground_energy: Option<i64>,
    ) -> Result<Self, IsingError> {
        if fields.len() != n_spins {
            return Err(IsingError::Invalid(format!("{} fields for {n_spins} spins", fields.len())));
        }
        let mut map = BTreeMap::new();
        for (i, j, v) in couplings {
            if i == j || i >= n_spins || j >= n_spins {
                return Err(IsingError::Invalid(format!("coupling ({i}, {j}) invalid for {n_spins} spins")));
            }
            *map.entry((i.min(j), i.max(j))).or_insert(0) += v;
        }
        map.retain(|_, v| *v != 0);
        let adjacency = Adjacency::build(n_spins, &map);
        Ok(Self { n_spins, fields, couplings: map, ground_energy, provenance: None, adjacency })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn fields(&self) -> &[i64] {
        &self.fields
    }

    pub fn couplings(&self) -> &BTreeMap<(usize, usize), i64> {
        &self.couplings
    }

    pub fn coupling(&self, i: usize, j: usize) -> i64 {
        self.couplings.get(&(i.min(j), i.max(j))).copied().unwrap_or(0)
    }

    pub fn ground_energy(&self) -> Option<i64> {
        self.ground_energy
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    /// Number of logical spins: from provenance, else every spin.
    pub fn n_logical(&self) -> usize {
        self.provenance.as_ref().map_or(self.n_spins, |p| p.n_logical)
    }

    /// Largest `|J_ij|`, or 0 without couplings.
    pub fn max_abs_coupling(&self) -> i64 {
        self.couplings.values().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// Largest possible `|Delta E|` of a single spin flip.
    pub fn max_flip_delta(&self) -> i64 {
        (0..self.n_spins)
            .map(|i| 2 * (self.fields[i].abs() + self.adjacency.neighbors(i).map(|(_, w)| w.abs()).sum::<i64>()))
            .max()
            .unwrap_or(0)
    }

    pub fn energy(&self, config: &SpinConfig) -> Result<i64, IsingError> {
        if config.len() != self.n_spins {
            return Err(IsingError::LengthMismatch { expected: self.n_spins, actual: config.len() });
        }
        Ok(self.energy_of(config.spins()))
    }

    /// Energy of a raw spin slice of the right length.
    pub fn energy_of(&self, spins: &[i8]) -> i64 {
        debug_assert_eq!(spins.len(), self.n_spins);
        let field: i64 = self.fields.iter().zip(spins).map(|(h, &s)| h * s as i64).sum();
        let pair: i64 = self.couplings.iter().map(|(&(i, j), &v)| v * (spins[i] * spins[j]) as i64).sum();
        field + pair
    }

    /// Canonical text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.ground_energy {
            Some(e) => writeln!(out, "p ising {} {e}", self.n_spins),
            None => writeln!(out, "p ising {} ?", self.n_spins),
        }
        .expect("write to string");
        for (i, &h) in self.fields.iter().enumerate().filter(|(_, &h)| h != 0) {
            writeln!(out, "h {i} {h}").expect("write to string");
        }
        for (&(i, j), &v) in &self.couplings {
            writeln!(out, "J {i} {j} {v}").expect("write to string");
        }
        out
    }

    /// Parses the text form. Errors carry the 1-based line number.
    pub fn from_text(text: &str) -> Result<Self, IsingError> {
        let err = |line: usize, message: String| IsingError::Parse { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
        let tokens: Vec<&str> = header.split(' ').collect();
        if tokens.len() != 4 || tokens[0] != "p" || tokens[1] != "ising" {
            return Err(err(1, format!("expected \"p ising <n_spins> <ground_energy|?>\", got {header:?}")));
        }
        let n_spins: usize = tokens[2].parse().map_err(|_| err(1, format!("bad spin count {:?}", tokens[2])))?;
        let ground_energy = match tokens[3] {
            "?" => None,
            t => Some(t.parse::<i64>().map_err(|_| err(1, format!("bad ground energy {t:?}")))?),
        };

        let mut fields = vec![0i64; n_spins];
        let mut seen_fields = vec![false; n_spins];
        let mut couplings = BTreeMap::new();
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split(' ').collect();
            let int = |t: &str| t.parse::<i64>().map_err(|_| err(no, format!("bad integer {t:?}")));
            let index = |t: &str| match t.parse::<usize>() {
                Ok(i) if i < n_spins => Ok(i),
                _ => Err(err(no, format!("bad spin index {t:?} for {n_spins} spins"))),
            };
            match tokens.as_slice() {
                ["h", i, v] => {
                    let i = index(i)?;
                    if std::mem::replace(&mut seen_fields[i], true) {
                        return Err(err(no, format!("duplicate field for spin {i}")));
                    }
                    fields[i] = int(v)?;
                }
                ["J", i, j, v] => {
                    let (i, j) = (index(i)?, index(j)?);
                    if i >= j {
                        return Err(err(no, format!("coupling indices must satisfy i < j, got {i} {j}")));
                    }
                    if couplings.insert((i, j), int(v)?).is_some() {
                        return Err(err(no, format!("duplicate coupling {i} {j}")));
                    }
                }
                _ => return Err(err(no, format!("unrecognized line {line:?}"))),
            }
        }
        Self::new(n_spins, fields, couplings.into_iter().map(|((i, j), v)| (i, j, v)), ground_energy)
    }
}

/// Verified gadgets keyed by clause arity and parity.
#[derive(Debug, Clone, Default)]
pub struct GadgetBook {
    entries: BTreeMap<(usize, Parity), Gadget>,
}

impl GadgetBook {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The built-in 3-variable gadgets for both parities.
    pub fn builtin() -> Self {
        let mut book = Self::empty();
        for b in [false, true] {
            book.insert(gadget::builtin_3xor(b)).expect("built-in gadgets verify");
        }
        book
    }

    /// Adds a gadget after exhaustive verification, replacing any previous
    /// entry for the same arity and parity.
    pub fn insert(&mut self, g: Gadget) -> Result<(), IsingError> {
        if !gadget::verify(&g)?.pass {
            return Err(IsingError::UnverifiedGadget { k: g.k(), parity: g.parity() });
        }
        self.entries.insert((g.k(), g.parity()), g);
        Ok(())
    }

    pub fn get(&self, k: usize, parity: Parity) -> Result<&Gadget, IsingError> {
        self.entries.get(&(k, parity)).ok_or(IsingError::NoGadget { k, parity })
    }
}

/// Sums one gadget per clause into a two-body instance. The ground energy
/// is the sum of gadget ground energies when the system is satisfiable and
/// unknown otherwise.
pub fn compile(system: &XorsatSystem, book: &GadgetBook) -> Result<IsingInstance, IsingError> {
    let n = system.n_vars();
    let mut next_aux = n;
    let mut fields: Vec<i64> = vec![0; n];
    let mut couplings = Vec::new();
    let mut clause_aux = Vec::with_capacity(system.n_clauses());
    let mut gadget_ground = 0;
    for clause in system.clauses() {
        let g = book.get(clause.vars.len(), Parity::from_rhs(clause.rhs()))?;
        let aux = next_aux..next_aux + g.aux();
        next_aux = aux.end;
        fields.resize(next_aux, 0);
        let spin = |local: usize| {
            if local < g.k() {
                clause.vars[local]
            } else {
                aux.start + local - g.k()
            }
        };
        for (local, &h) in g.fields().iter().enumerate() {
            fields[spin(local)] += h;
        }
        couplings.extend(g.couplings().map(|(a, b, v)| (spin(a), spin(b), v)));
        gadget_ground += g.ground_energy();
        clause_aux.push(aux);
    }
    let ground = analyze(system).satisfiable.then_some(gadget_ground);
    let mut instance = IsingInstance::new(next_aux, fields, couplings, ground)?;
    instance.provenance = Some(Provenance { n_logical: n, clause_aux });
    Ok(instance)
}

/// Lifts a solution of `system` to a ground configuration of its compiled
/// instance: logical spins from `x`, each clause's auxiliaries set to the
/// first (by configuration index) minimizer of its gadget.
pub fn extend(system: &XorsatSystem, book: &GadgetBook, x: &[u8]) -> Result<SpinConfig, IsingError> {
    if !system.is_solution(x) {
        return Err(IsingError::NotASolution);
    }
    lift(system, book, x)
}

/// Same as [`extend`] without requiring `x` to be a solution.
pub fn lift(system: &XorsatSystem, book: &GadgetBook, x: &[u8]) -> Result<SpinConfig, IsingError> {
    let n = system.n_vars();
    if x.len() != n {
        return Err(IsingError::LengthMismatch { expected: n, actual: x.len() });
    }
    let mut spins = SpinConfig::from_bits(x).into_inner();
    for clause in system.clauses() {
        let g = book.get(clause.vars.len(), Parity::from_rhs(clause.rhs()))?;
        let mut local: Vec<i8> = clause.vars.iter().map(|&v| spins[v]).collect();
        local.resize(g.n_spins(), 1);
        let best = (0..1u64 << g.aux())
            .map(|c| {
                for a in 0..g.aux() {
                    local[g.k() + a] = if (c >> a) & 1 == 1 { -1 } else { 1 };
                }
                (g.energy(&local), c)
            })
            .min()
            .map(|(_, c)| c)
            .expect("at least one auxiliary setting");
        for a in 0..g.aux() {
            spins.push(if (best >> a) & 1 == 1 { -1 } else { 1 });
        }
    }
    Ok(SpinConfig(spins))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureReport {
    pub n_spins: usize,
    pub max_degree: usize,
    /// `(min, max)` over all fields.
    pub field_range: (i64, i64),
    /// `(min, max)` over nonzero couplings, `(0, 0)` if none.
    pub coupling_range: (i64, i64),
    pub ground_energy: Option<i64>,
}

pub fn structure_report(instance: &IsingInstance) -> StructureReport {
    let range = |it: &mut dyn Iterator<Item = i64>| {
        it.fold(None, |acc: Option<(i64, i64)>, v| Some(acc.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v)))))
            .unwrap_or((0, 0))
    };
    StructureReport {
        n_spins: instance.n_spins,
        max_degree: (0..instance.n_spins).map(|i| instance.adjacency.degree(i)).max().unwrap_or(0),
        field_range: range(&mut instance.fields.iter().copied()),
        coupling_range: range(&mut instance.couplings.values().copied()),
        ground_energy: instance.ground_energy,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundStates {
    pub energy_min: i64,
    /// Every minimizing configuration, sorted.
    pub configs: Vec<SpinConfig>,
}

/// Exhaustive minimum over all `2^n_spins` configurations, visited in Gray
/// code order with incremental energy updates.
pub fn brute_force_ground_states(instance: &IsingInstance, cap: usize) -> Result<GroundStates, IsingError> {
    let n = instance.n_spins;
    if n > cap || n >= 63 {
        return Err(IsingError::CapExceeded { n_spins: n, cap });
    }
    let mut spins = vec![1i8; n];
    let mut energy = instance.energy_of(&spins);
    let mut best = energy;
    let mut minimizers: Vec<Vec<i8>> = vec![spins.clone()];
    for step in 1..1u64 << n {
        let i = step.trailing_zeros() as usize;
        let local = instance.fields[i] + instance.adjacency.coupling_field(i, &spins);
        energy -= 2 * spins[i] as i64 * local;
        spins[i] = -spins[i];
        if energy < best {
            best = energy;
            minimizers.clear();
        }
        if energy == best {
            minimizers.push(spins.clone());
        }
    }
    let mut configs: Vec<SpinConfig> = minimizers.into_iter().map(SpinConfig).collect();
    configs.sort();
    Ok(GroundStates { energy_min: best, configs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xorsat::{generate_regular, plant, Clause};

    #[test]
    fn single_clause_is_the_bare_gadget() {
        let system = XorsatSystem::from_clauses(3, vec![Clause::new(vec![0, 1, 2], false)]).unwrap();
        let inst = compile(&system, &GadgetBook::builtin()).unwrap();
        let g = gadget::builtin_3xor(false);
        assert_eq!(inst.n_spins(), 4);
        assert_eq!(inst.fields(), g.fields());
        for (i, j, v) in g.couplings() {
            assert_eq!(inst.coupling(i, j), v);
        }
        assert_eq!(inst.couplings().len(), 6);
        let r = structure_report(&inst);
        assert_eq!(r.max_degree, 3);
        assert_eq!(r.n_spins, 4);
        assert_eq!(inst.ground_energy(), Some(-4));
    }

    #[test]
    fn auxiliary_choice_per_clause() {
        let system = XorsatSystem::from_clauses(3, vec![Clause::new(vec![0, 1, 2], false)]).unwrap();
        let book = GadgetBook::builtin();
        // oracle: try both auxiliary values directly
        let g = gadget::builtin_3xor(false);
        for (clause, expect) in [([1i8, 1, 1], -1i8), ([1, -1, -1], 1)] {
            let e = |a: i8| g.energy(&[clause[0], clause[1], clause[2], a]);
            assert_eq!(if e(-1) < e(1) { -1 } else { 1 }, expect);
            let bits: Vec<u8> = clause.iter().map(|&s| (s == -1) as u8).collect();
            let lifted = extend(&system, &book, &bits).unwrap();
            assert_eq!(lifted.spins()[3], expect);
        }
    }

    #[test]
    fn extend_rejects_non_solutions() {
        let system = plant(&generate_regular(8, 3, 3, 1).unwrap(), &[0; 8]).unwrap();
        let mut x = vec![0u8; 8];
        x[0] = 1;
        assert!(matches!(extend(&system, &GadgetBook::builtin(), &x), Err(IsingError::NotASolution)));
    }

    #[test]
    fn field_only_energy() {
        let inst = IsingInstance::new(3, vec![1, -2, 3], [], None).unwrap();
        let c = SpinConfig::new(vec![1, 1, -1]).unwrap();
        assert_eq!(inst.energy(&c).unwrap(), 1 - 2 - 3);
        assert!(matches!(inst.energy(&SpinConfig::new(vec![1]).unwrap()), Err(IsingError::LengthMismatch { .. })));
    }

    #[test]
    fn single_spin_brute_force() {
        let inst = IsingInstance::new(1, vec![1], [], None).unwrap();
        let gs = brute_force_ground_states(&inst, BRUTE_FORCE_CAP).unwrap();
        assert_eq!(gs.energy_min, -1);
        assert_eq!(gs.configs, vec![SpinConfig::new(vec![-1]).unwrap()]);
    }

    #[test]
    fn brute_force_cap() {
        let inst = IsingInstance::new(5, vec![0; 5], [], None).unwrap();
        assert!(matches!(brute_force_ground_states(&inst, 4), Err(IsingError::CapExceeded { .. })));
    }

    #[test]
    fn spin_config_validation() {
        assert!(matches!(SpinConfig::new(vec![1, 0]), Err(IsingError::NotASpin { position: 1, value: 0 })));
        assert_eq!(SpinConfig::from_bits(&[0, 1]).spins(), &[1, -1]);
    }

    #[test]
    fn text_format_is_canonical() {
        let inst = IsingInstance::new(3, vec![0, -1, 2], [(2, 0, 1), (0, 1, -3), (0, 2, 1)], Some(-7)).unwrap();
        let text = inst.to_text();
        assert_eq!(text, "p ising 3 -7\nh 1 -1\nh 2 2\nJ 0 1 -3\nJ 0 2 2\n");
        assert_eq!(IsingInstance::from_text(&text).unwrap(), inst);
        let unknown = IsingInstance::new(2, vec![0, 0], [], None).unwrap();
        assert_eq!(unknown.to_text(), "p ising 2 ?\n");
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let cases = [
            ("p ising 2 ?\nh 5 1\n", 2),
            ("p ising 2 0\nJ 1 0 1\n", 2),
            ("q ising 2 0\n", 1),
            ("p ising 2 0\nh 0 1\nh 0 2\n", 3),
            ("p ising 2 0\nx\n", 2),
        ];
        for (text, line) in cases {
            match IsingInstance::from_text(text) {
                Err(IsingError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }
}
