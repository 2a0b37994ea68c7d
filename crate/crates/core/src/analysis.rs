//! Benchmark statistics.
//!
//! Quartiles use the lower order statistic: the `p`-quantile of `N` sorted
//! values is element `floor(p * (N - 1))`. Residual energy is normalized as
//! `(E - E_gs) / |E_gs|`. Hamming distances are normalized by the number of
//! compared spins.

use serde::Serialize;
use thiserror::Error;

use crate::ising::SpinConfig;
use crate::pt::MinimumSnapshot;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty input")]
    Empty,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("value {0} must be positive")]
    NonPositive(f64),
    #[error("all sizes are equal; slope is undefined")]
    Degenerate,
    #[error("need at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("ground energy is unknown")]
    UnknownGroundEnergy,
    #[error("ground energy must be nonzero for normalization")]
    ZeroGroundEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

fn lower_quantile(sorted: &[f64], p: f64) -> f64 {
    sorted[(p * (sorted.len() - 1) as f64).floor() as usize]
}

pub fn runtime_summary(costs: &[f64]) -> Result<Quartiles, AnalysisError> {
    if costs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut sorted = costs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Quartiles {
        median: lower_quantile(&sorted, 0.5),
        q25: lower_quantile(&sorted, 0.25),
        q75: lower_quantile(&sorted, 0.75),
    })
}

/// Least-squares fit of `ln(cost) = log_prefactor + alpha * n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub log_prefactor: f64,
    pub stderr_alpha: f64,
    pub points: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn predict(&self, n: f64) -> f64 {
        (self.log_prefactor + self.alpha * n).exp()
    }

    /// Largest absolute residual in log space.
    pub fn max_log_residual(&self) -> f64 {
        self.points.iter().map(|&(n, c)| (c.ln() - self.log_prefactor - self.alpha * n).abs()).fold(0.0, f64::max)
    }
}

pub fn fit_exponent(points: &[(f64, f64)]) -> Result<ScalingFit, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::TooFewPoints { needed: 3, got: points.len() });
    }
    if let Some(&(_, c)) = points.iter().find(|&&(_, c)| c <= 0.0 || c.is_nan()) {
        return Err(AnalysisError::NonPositive(c));
    }
    let m = points.len() as f64;
    let mean_n = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_n).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Degenerate);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_n) * (p.1.ln() - mean_y)).sum();
    let alpha = sxy / sxx;
    let log_prefactor = mean_y - alpha * mean_n;
    let ssr: f64 = points.iter().map(|p| (p.1.ln() - log_prefactor - alpha * p.0).powi(2)).sum();
    let stderr_alpha = (ssr / (m - 2.0) / sxx).sqrt();
    Ok(ScalingFit { alpha, log_prefactor, stderr_alpha, points: points.to_vec() })
}

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + G + 0.5;
    let series = COEF[1..].iter().enumerate().fold(COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized upper incomplete gamma `Q(a, x)`; series for
/// `x < a + 1`, continued fraction (modified Lentz) otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "Q(a, x) needs a > 0, x >= 0");
    if x == 0.0 {
        return 1.0;
    }
    let log_prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        let tiny = f64::MIN_POSITIVE / GAMMA_EPS;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Chi2Result {
    pub stat: f64,
    pub dof: usize,
    pub p: f64,
}

/// One-sided chi-squared test of `tallies` against the uniform distribution.
pub fn chi2_uniform_pvalue(tallies: &[u64]) -> Result<Chi2Result, AnalysisError> {
    let k = tallies.len();
    if k < 2 {
        return Err(AnalysisError::TooFewCategories(k));
    }
    let runs: u64 = tallies.iter().sum();
    if runs == 0 {
        return Err(AnalysisError::Empty);
    }
    let expected = runs as f64 / k as f64;
    let stat: f64 = tallies.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let dof = k - 1;
    Ok(Chi2Result { stat, dof, p: regularized_gamma_q(dof as f64 / 2.0, stat / 2.0) })
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and Uniform(0, 1).
pub fn ks_uniform_statistic(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n)).fold(0.0, f64::max)
}

/// Which spins a Hamming distance compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Restriction {
    All,
    /// The first `n` (logical) spins.
    Logical(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hamming {
    pub count: usize,
    pub normalized: f64,
}

pub fn hamming(a: &SpinConfig, b: &SpinConfig, restrict: Restriction) -> Result<Hamming, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    let len = match restrict {
        Restriction::All => a.len(),
        Restriction::Logical(n) if n <= a.len() => n,
        Restriction::Logical(n) => return Err(AnalysisError::LengthMismatch(n, a.len())),
    };
    if len == 0 {
        return Err(AnalysisError::Empty);
    }
    let count = a.spins()[..len].iter().zip(&b.spins()[..len]).filter(|(x, y)| x != y).count();
    Ok(Hamming { count, normalized: count as f64 / len as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub residual: f64,
    pub distance: f64,
}

/// Normalized residual energy and Hamming distance to `solution` for each snapshot.
pub fn minima_profile(
    log: &[MinimumSnapshot],
    solution: &SpinConfig,
    ground_energy: Option<i64>,
    restrict: Restriction,
) -> Result<Vec<ProfilePoint>, AnalysisError> {
    let e0 = ground_energy.ok_or(AnalysisError::UnknownGroundEnergy)?;
    if e0 == 0 {
        return Err(AnalysisError::ZeroGroundEnergy);
    }
    log.iter()
        .map(|snap| {
            Ok(ProfilePoint {
                residual: (snap.energy - e0) as f64 / e0.abs() as f64,
                distance: hamming(&snap.config, solution, restrict)?.normalized,
            })
        })
        .collect()
}

/// Ground-state sampling statistics for one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingReport {
    /// Hits per ground state, indexed canonically.
    pub tallies: Vec<u64>,
    pub runs: u64,
    pub chi2_stat: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Normalized Hamming distance between ground states `i` and `j`.
    pub pairwise_hamming: Vec<Vec<f64>>,
}

pub fn sampling_report(
    tallies: &[u64],
    ground_states: &[SpinConfig],
    restrict: Restriction,
) -> Result<SamplingReport, AnalysisError> {
    if tallies.len() != ground_states.len() {
        return Err(AnalysisError::LengthMismatch(tallies.len(), ground_states.len()));
    }
    let chi2 = chi2_uniform_pvalue(tallies)?;
    let pairwise_hamming = ground_states
        .iter()
        .map(|a| {
            ground_states.iter().map(|b| hamming(a, b, restrict).map(|h| h.normalized)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SamplingReport {
        tallies: tallies.to_vec(),
        runs: tallies.iter().sum(),
        chi2_stat: chi2.stat,
        dof: chi2.dof,
        p_value: chi2.p,
        pairwise_hamming,
    })
}

/// Mean of the off-diagonal entries of a distance matrix.
pub fn mean_pairwise(matrix: &[Vec<f64>]) -> Option<f64> {
    let k = matrix.len();
    if k < 2 {
        return None;
    }
    let total: f64 =
        (0..k).flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| matrix[i][j]).sum();
    Some(total / (k * (k - 1)) as f64)
}

/// One row of the scaling table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub summary: Quartiles,
}

/// CSV `n,median,q25,q75,fit`; the fit column is empty without a fit.
pub fn scaling_csv(rows: &[ScalingRow], fit: Option<&ScalingFit>) -> String {
    let mut out = String::from("n,median,q25,q75,fit\n");
    for r in rows {
        let fit_value = fit.map(|f| f.predict(r.n as f64).to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", r.n, r.summary.median, r.summary.q25, r.summary.q75, fit_value));
    }
    out
}

/// CSV `state_index,tally,fraction`.
pub fn sampling_csv(report: &SamplingReport) -> String {
    let mut out = String::from("state_index,tally,fraction\n");
    for (i, &t) in report.tallies.iter().enumerate() {
        let fraction = if report.runs == 0 { 0.0 } else { t as f64 / report.runs as f64 };
        out.push_str(&format!("{i},{t},{fraction}\n"));
    }
    out
}

/// CSV `residual,distance`.
pub fn profile_csv(points: &[ProfilePoint]) -> String {
    let mut out = String::from("residual,distance\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.residual, p.distance));
    }
    out
}
