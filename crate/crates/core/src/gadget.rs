//! Two-body Ising gadgets for single parity constraints.
//!
//! A gadget acts on `k` clause spins followed by `aux` auxiliary spins.
//! Its energy is `sum_i h_i s_i + sum_{i<j} J_ij s_i s_j`. It encodes the
//! constraint `prod_{j<k} s_j = parity` when its ground states, restricted
//! to the clause spins, are exactly the `2^(k-1)` configurations of that
//! parity.
//!
//! Configurations are enumerated by index `c` with spin `i` equal to `-1`
//! iff bit `i` of `c` is set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest spin count accepted by [`search`].
pub const SEARCH_SPIN_CAP: usize = 20;
/// Largest spin count accepted by [`verify`].
pub const VERIFY_SPIN_CAP: usize = 24;

#[derive(Debug, Error)]
pub enum GadgetError {
    #[error("{spins} spins exceeds the enumeration cap of {cap}")]
    TooLarge { spins: usize, cap: usize },
    #[error("invalid gadget: {0}")]
    Invalid(String),
    #[error("search space of {magnitude}-bounded parameters overflows")]
    SearchSpaceTooLarge { magnitude: i64 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Target value of the clause-spin product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    /// Product `+1`, right-hand side `b = 0`.
    Even,
    /// Product `-1`, right-hand side `b = 1`.
    Odd,
}

impl Parity {
    pub fn from_rhs(b: bool) -> Self {
        if b {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Parity::Even),
            -1 => Some(Parity::Odd),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Index of pair `(i, j)`, `i < j`, in row-major upper-triangle order.
fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gadget {
    k: usize,
    aux: usize,
    fields: Vec<i64>,
    /// Upper triangle in `(0,1), (0,2), ..., (1,2), ...` order.
    couplings: Vec<i64>,
    parity: Parity,
    ground_energy: i64,
}

impl Gadget {
    /// Builds a gadget; the ground energy is computed by enumeration.
    pub fn new(
        k: usize,
        aux: usize,
        fields: Vec<i64>,
        couplings: Vec<i64>,
        parity: Parity,
    ) -> Result<Self, GadgetError> {
        let n = k + aux;
        if k == 0 {
            return Err(GadgetError::Invalid("a gadget needs at least one clause spin".into()));
        }
        if n > VERIFY_SPIN_CAP {
            return Err(GadgetError::TooLarge { spins: n, cap: VERIFY_SPIN_CAP });
        }
        if fields.len() != n {
            return Err(GadgetError::Invalid(format!("{} fields for {n} spins", fields.len())));
        }
        if couplings.len() != n * (n - 1) / 2 {
            return Err(GadgetError::Invalid(format!("{} couplings for {n} spins", couplings.len())));
        }
        let mut g = Self { k, aux, fields, couplings, parity, ground_energy: 0 };
        g.ground_energy = (0..1u64 << n).map(|c| g.energy_of_index(c)).min().expect("at least one configuration");
        Ok(g)
    }

    /// Builds from sparse couplings `(i, j, J)`; repeated pairs are summed.
    pub fn from_sparse(
        k: usize,
        aux: usize,
        fields: Vec<i64>,
        couplings: &[(usize, usize, i64)],
        parity: Parity,
    ) -> Result<Self, GadgetError> {
        let n = k + aux;
        let mut dense = vec![0; n * n.saturating_sub(1) / 2];
        for &(i, j, v) in couplings {
            let (a, b) = (i.min(j), i.max(j));
            if a == b || b >= n {
                return Err(GadgetError::Invalid(format!("coupling ({i}, {j}) invalid for {n} spins")));
            }
            dense[pair_index(a, b, n)] += v;
        }
        Self::new(k, aux, fields, dense, parity)
    }

    /// Fully connected 3+1 gadget with clause fields `h`, auxiliary field
    /// `h_aux`, clause-clause couplings `j` and clause-auxiliary couplings `j_aux`.
    pub fn symmetric_3xor(h: i64, h_aux: i64, j: i64, j_aux: i64, parity: Parity) -> Self {
        // pair order for 4 spins: 01 02 03 12 13 23
        Self::new(3, 1, vec![h, h, h, h_aux], vec![j, j, j_aux, j, j_aux, j_aux], parity)
            .expect("4-spin gadget is well formed")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn aux(&self) -> usize {
        self.aux
    }

    pub fn n_spins(&self) -> usize {
        self.k + self.aux
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn ground_energy(&self) -> i64 {
        self.ground_energy
    }

    pub fn fields(&self) -> &[i64] {
        &self.fields
    }

    pub fn coupling(&self, i: usize, j: usize) -> i64 {
        let (a, b) = (i.min(j), i.max(j));
        assert!(a != b, "no self coupling");
        self.couplings[pair_index(a, b, self.n_spins())]
    }

    /// Nonzero couplings as `(i, j, J)` with `i < j`, in pair order.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        pairs(self.n_spins()).zip(&self.couplings).filter(|(_, &v)| v != 0).map(|((i, j), &v)| (i, j, v))
    }

    pub fn max_magnitude(&self) -> i64 {
        self.fields.iter().chain(&self.couplings).map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn energy(&self, spins: &[i8]) -> i64 {
        assert_eq!(spins.len(), self.n_spins(), "configuration length");
        let field: i64 = self.fields.iter().zip(spins).map(|(h, &s)| h * s as i64).sum();
        let pair: i64 =
            pairs(self.n_spins()).zip(&self.couplings).map(|((i, j), &v)| v * (spins[i] * spins[j]) as i64).sum();
        field + pair
    }

    fn energy_of_index(&self, c: u64) -> i64 {
        energy_of_index(&self.fields, &self.couplings, self.n_spins(), c)
    }

    /// Negates the field on `spin` and every coupling incident on it. The
    /// spectrum is unchanged; the encoded parity flips iff `spin` is a
    /// clause spin.
    pub fn gauge_flip(&self, spin: usize) -> Gadget {
        let n = self.n_spins();
        assert!(spin < n, "spin {spin} out of range");
        let mut g = self.clone();
        g.fields[spin] = -g.fields[spin];
        for other in (0..n).filter(|&o| o != spin) {
            let idx = pair_index(spin.min(other), spin.max(other), n);
            g.couplings[idx] = -g.couplings[idx];
        }
        if spin < self.k {
            g.parity = g.parity.flipped();
        }
        g
    }
}

fn spin_of(c: u64, i: usize) -> i64 {
    if (c >> i) & 1 == 1 {
        -1
    } else {
        1
    }
}

/// Configuration `c` as a spin vector.
pub fn config_from_index(c: u64, n: usize) -> Vec<i8> {
    (0..n).map(|i| spin_of(c, i) as i8).collect()
}

fn energy_of_index(fields: &[i64], couplings: &[i64], n: usize, c: u64) -> i64 {
    let mut e = 0;
    for (i, h) in fields.iter().enumerate() {
        e += h * spin_of(c, i);
    }
    for ((i, j), &v) in pairs(n).zip(couplings) {
        if v != 0 {
            e += v * spin_of(c, i) * spin_of(c, j);
        }
    }
    e
}

/// Clause-spin parity of configuration index `c` (lowest `k` bits).
fn parity_of(c: u64, k: usize) -> Parity {
    let mask = (1u64 << k) - 1;
    if (c & mask).count_ones().is_multiple_of(2) {
        Parity::Even
    } else {
        Parity::Odd
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub ground_energy: i64,
    /// All minimizing configurations over every spin, by configuration index.
    pub ground_configs: Vec<Vec<i8>>,
    /// Distinct clause-spin restrictions of the ground configurations.
    pub clause_spin_manifold: Vec<Vec<i8>>,
    /// Lowest wrong-parity energy minus the ground energy.
    pub gap: i64,
    pub pass: bool,
}

/// Exhaustive check of the gadget invariants over all `2^(k+aux)` configurations.
pub fn verify(g: &Gadget) -> Result<VerificationReport, GadgetError> {
    let n = g.n_spins();
    if n > VERIFY_SPIN_CAP {
        return Err(GadgetError::TooLarge { spins: n, cap: VERIFY_SPIN_CAP });
    }
    let k = g.k;
    let energies: Vec<i64> = (0..1u64 << n).map(|c| g.energy_of_index(c)).collect();
    let ground = *energies.iter().min().expect("nonempty");
    let wrong_min = energies
        .iter()
        .enumerate()
        .filter(|&(c, _)| parity_of(c as u64, k) != g.parity)
        .map(|(_, &e)| e)
        .min()
        .expect("k >= 1 leaves wrong-parity configurations");

    let ground_idx: Vec<u64> = (0..energies.len() as u64).filter(|&c| energies[c as usize] == ground).collect();
    let mut projections: Vec<u64> = ground_idx.iter().map(|&c| c & ((1 << k) - 1)).collect();
    projections.sort_unstable();
    projections.dedup();

    let wanted = 1usize << (k - 1);
    let pass = ground == g.ground_energy
        && projections.len() == wanted
        && projections.iter().all(|&p| parity_of(p, k) == g.parity);

    Ok(VerificationReport {
        ground_energy: ground,
        ground_configs: ground_idx.iter().map(|&c| config_from_index(c, n)).collect(),
        clause_spin_manifold: projections.iter().map(|&p| config_from_index(p, k)).collect(),
        gap: wrong_min - ground,
        pass,
    })
}

/// Built-in 3-spin parity gadget with one auxiliary spin (spin 3).
///
/// For `b = 0` the parameters are `(h, h_aux, J, J_aux) = (-1, -2, 1, 2)`,
/// ground energy `-4`, ground manifold the four product-`+1` triples. For
/// `b = 1` clause spin 0 is gauge flipped, which keeps the spectrum and
/// moves the manifold to the product-`-1` triples.
pub fn builtin_3xor(b: bool) -> Gadget {
    let even = Gadget::symmetric_3xor(-1, -2, 1, 2, Parity::Even);
    if b {
        even.gauge_flip(0)
    } else {
        even
    }
}

/// Ordered value list `0, 1, -1, 2, -2, ..., m, -m`.
fn value_order(m: i64) -> Vec<i64> {
    std::iter::once(0).chain((1..=m).flat_map(|v| [v, -v])).collect()
}

/// Parameter layout for one scan: each scanned value is written into the
/// listed field and coupling slots.
struct Ansatz {
    groups: Vec<(Vec<usize>, Vec<usize>)>,
}

impl Ansatz {
    fn general(n: usize) -> Self {
        let fields = (0..n).map(|i| (vec![i], vec![]));
        let couplings = (0..n * (n - 1) / 2).map(|p| (vec![], vec![p]));
        Self { groups: fields.chain(couplings).collect() }
    }

    /// Clause fields, auxiliary fields, clause-clause, clause-auxiliary and
    /// auxiliary-auxiliary couplings each share one value.
    fn symmetric(k: usize, aux: usize) -> Self {
        let n = k + aux;
        let is_clause = |i: usize| i < k;
        let mut groups = vec![((0..k).collect(), vec![])];
        if aux > 0 {
            groups.push(((k..n).collect(), vec![]));
        }
        let mut classes: [Vec<usize>; 3] = Default::default();
        for (p, (i, j)) in pairs(n).enumerate() {
            let class = match (is_clause(i), is_clause(j)) {
                (true, true) => 0,
                (true, false) | (false, true) => 1,
                (false, false) => 2,
            };
            classes[class].push(p);
        }
        groups.extend(classes.into_iter().filter(|c| !c.is_empty()).map(|c| (vec![], c)));
        Self { groups }
    }

    /// Scans every assignment whose largest magnitude is exactly `level`, in
    /// lexicographic order over [`value_order`], and returns the first passing one.
    fn scan(&self, k: usize, aux: usize, level: i64, parity: Parity) -> Result<Option<Gadget>, GadgetError> {
        let n = k + aux;
        let values = value_order(level);
        let base = values.len() as u64;
        let total =
            base.checked_pow(self.groups.len() as u32).ok_or(GadgetError::SearchSpaceTooLarge { magnitude: level })?;
        let n_pairs = n * (n - 1) / 2;
        let build = |mut idx: u64| -> Option<(Vec<i64>, Vec<i64>)> {
            let mut fields = vec![0; n];
            let mut couplings = vec![0; n_pairs];
            let mut top = 0;
            for (fs, cs) in self.groups.iter().rev() {
                let v = values[(idx % base) as usize];
                idx /= base;
                top = top.max(v.abs());
                fs.iter().for_each(|&f| fields[f] = v);
                cs.iter().for_each(|&c| couplings[c] = v);
            }
            (top == level).then_some((fields, couplings))
        };
        let hit = (0..total)
            .into_par_iter()
            .find_first(|&idx| build(idx).is_some_and(|(f, c)| encodes(&f, &c, k, n, parity)));
        Ok(hit.map(|idx| {
            let (f, c) = build(idx).expect("hit was buildable");
            Gadget::new(k, aux, f, c, parity).expect("scan builds well-formed gadgets")
        }))
    }
}

/// Fast form of the [`verify`] pass condition.
fn encodes(fields: &[i64], couplings: &[i64], k: usize, n: usize, parity: Parity) -> bool {
    let mut ground = i64::MAX;
    let mut wrong_at_ground = false;
    let mut seen = vec![false; 1 << k];
    let mut distinct = 0;
    for c in 0..1u64 << n {
        let e = energy_of_index(fields, couplings, n, c);
        if e < ground {
            ground = e;
            wrong_at_ground = false;
            seen.iter_mut().for_each(|s| *s = false);
            distinct = 0;
        }
        if e == ground {
            if parity_of(c, k) != parity {
                wrong_at_ground = true;
            } else if !std::mem::replace(&mut seen[(c & ((1 << k) - 1)) as usize], true) {
                distinct += 1;
            }
        }
    }
    !wrong_at_ground && distinct == 1 << (k - 1)
}

/// Brute-force gadget search over integer parameters with magnitude at
/// most `max_magnitude`.
///
/// Magnitude levels are visited in increasing order. Within level `L` the
/// symmetric ansatz is scanned first, then the general fully connected
/// parameterization; each scan runs lexicographically over the parameter
/// vector (fields, then couplings in pair order) with values ordered
/// `0, 1, -1, 2, -2, ...`, keeping only vectors whose largest magnitude is
/// exactly `L`. The first passing gadget is returned, so the result has
/// the smallest achievable magnitude.
pub fn search(k: usize, aux: usize, max_magnitude: i64, parity: Parity) -> Result<Option<Gadget>, GadgetError> {
    let n = k + aux;
    if k == 0 {
        return Err(GadgetError::Invalid("a gadget needs at least one clause spin".into()));
    }
    if n > SEARCH_SPIN_CAP {
        return Err(GadgetError::TooLarge { spins: n, cap: SEARCH_SPIN_CAP });
    }
    if max_magnitude < 1 {
        return Err(GadgetError::Invalid("max_magnitude must be at least 1".into()));
    }
    let symmetric = Ansatz::symmetric(k, aux);
    let general = Ansatz::general(n);
    for level in 0..=max_magnitude {
        for ansatz in [&symmetric, &general] {
            if let Some(g) = ansatz.scan(k, aux, level, parity)? {
                return Ok(Some(g));
            }
        }
    }
    Ok(None)
}

#[derive(Serialize, Deserialize)]
struct GadgetFile {
    spins: usize,
    k: usize,
    parity: i64,
    ground_energy: i64,
    h: Vec<i64>,
    #[serde(rename = "J")]
    couplings: Vec<(usize, usize, i64)>,
}

impl Gadget {
    /// Gadget file: `{"spins","k","parity","ground_energy","h","J":[[i,j,v],...]}`.
    pub fn to_json(&self) -> String {
        let file = GadgetFile {
            spins: self.n_spins(),
            k: self.k,
            parity: self.parity.sign(),
            ground_energy: self.ground_energy,
            h: self.fields.clone(),
            couplings: self.couplings().collect(),
        };
        let mut s = serde_json::to_string(&file).expect("gadget serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, GadgetError> {
        let file: GadgetFile = serde_json::from_str(text)?;
        let parity = Parity::from_sign(file.parity)
            .ok_or_else(|| GadgetError::Invalid(format!("field \"parity\" must be 1 or -1, got {}", file.parity)))?;
        if file.k > file.spins {
            return Err(GadgetError::Invalid("field \"k\" exceeds \"spins\"".into()));
        }
        let g = Self::from_sparse(file.k, file.spins - file.k, file.h, &file.couplings, parity)?;
        if g.ground_energy != file.ground_energy {
            return Err(GadgetError::Invalid(format!(
                "field \"ground_energy\": file says {}, enumeration gives {}",
                file.ground_energy, g.ground_energy
            )));
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_even_certificate() {
        let g = builtin_3xor(false);
        assert_eq!(g.energy(&[1, 1, 1, -1]), -4);
        let r = verify(&g).unwrap();
        assert!(r.pass);
        assert_eq!(r.ground_energy, -4);
        assert_eq!(r.ground_configs.len(), 4);
        assert_eq!(r.gap, 2);
        let mut manifold = r.clause_spin_manifold.clone();
        manifold.sort();
        assert_eq!(manifold, vec![vec![-1, -1, 1], vec![-1, 1, -1], vec![1, -1, -1], vec![1, 1, 1]]);
    }

    #[test]
    fn wrong_parity_sits_two_above_ground() {
        let g = builtin_3xor(false);
        let best = [1, -1].iter().map(|&a| g.energy(&[1, 1, -1, a])).min().unwrap();
        assert_eq!(best, -2);
    }

    #[test]
    fn builtin_odd_certificate() {
        let g = builtin_3xor(true);
        assert_eq!(g.parity(), Parity::Odd);
        let r = verify(&g).unwrap();
        assert!(r.pass);
        assert_eq!(r.ground_energy, -4);
        assert!(r.clause_spin_manifold.iter().all(|s| s.iter().map(|&x| x as i64).product::<i64>() == -1));
    }

    #[test]
    fn alternative_parameters_share_the_manifold() {
        let a = verify(&builtin_3xor(false)).unwrap();
        let alt = Gadget::symmetric_3xor(-1, 2, 1, -2, Parity::Even);
        assert_eq!(alt, builtin_3xor(false).gauge_flip(3));
        let b = verify(&alt).unwrap();
        assert!(b.pass);
        assert_eq!(b.ground_energy, -4);
        assert_eq!(a.clause_spin_manifold, b.clause_spin_manifold);
    }

    #[test]
    fn flipped_aux_coupling_fails() {
        let bad = Gadget::symmetric_3xor(-1, -2, 1, -2, Parity::Even);
        assert!(!verify(&bad).unwrap().pass);
    }

    #[test]
    fn zero_gadget_fails() {
        let zero = Gadget::new(3, 1, vec![0; 4], vec![0; 6], Parity::Even).unwrap();
        let r = verify(&zero).unwrap();
        assert!(!r.pass);
        assert_eq!(r.ground_configs.len(), 16);
        assert_eq!(r.gap, 0);
    }

    #[test]
    fn search_finds_magnitude_two_3xor() {
        let g = search(3, 1, 2, Parity::Even).unwrap().unwrap();
        assert_eq!(g.ground_energy(), -4);
        assert_eq!(g.max_magnitude(), 2);
        assert_eq!(g, Gadget::symmetric_3xor(-1, 2, 1, -2, Parity::Even));
        assert_eq!(
            verify(&g).unwrap().clause_spin_manifold,
            verify(&builtin_3xor(false)).unwrap().clause_spin_manifold
        );
    }

    #[test]
    fn search_without_aux_fails_for_three_spins() {
        assert!(search(3, 0, 3, Parity::Even).unwrap().is_none());
        assert!(search(3, 0, 3, Parity::Odd).unwrap().is_none());
    }

    #[test]
    fn two_spin_parity_needs_no_aux() {
        for parity in [Parity::Even, Parity::Odd] {
            let g = search(2, 0, 1, parity).unwrap().unwrap();
            assert_eq!(g.fields(), &[0, 0]);
            assert_eq!(g.coupling(0, 1), -parity.sign());
            assert!(verify(&g).unwrap().pass);
        }
    }

    #[test]
    fn caps_enforced() {
        assert!(matches!(search(3, 18, 1, Parity::Even), Err(GadgetError::TooLarge { .. })));
        assert!(matches!(search(3, 1, 0, Parity::Even), Err(GadgetError::Invalid(_))));
    }

    #[test]
    fn json_roundtrip() {
        let g = builtin_3xor(true);
        let text = g.to_json();
        assert!(text.starts_with("{\"spins\":4,\"k\":3,\"parity\":-1,\"ground_energy\":-4,\"h\":"));
        assert_eq!(Gadget::from_json(&text).unwrap(), g);
    }
}
