//! When does reordering help? PCA intrinsic dimensionality, the intrinsic
//! dimensionality factor (IDF), success probability and the feature ordering
//! effectiveness (FOE) score.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Variance levels at which intrinsic dimensionality is measured by default.
pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.9975, 0.99, 0.95, 0.90];

/// Default sensitivity exponent `s`.
pub const DEFAULT_SENSITIVITY: f64 = 2.0;

/// Explained-variance ratios of the principal components, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSpectrum {
    explained: Vec<f64>,
    cumulative: Vec<f64>,
}

impl VarianceSpectrum {
    /// Builds a spectrum from nonnegative component variances (any order,
    /// any scale). Errors when they sum to zero.
    pub fn from_variances(variances: &[f64]) -> Result<Self> {
        let mut v: Vec<f64> = variances.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let total: f64 = v.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateMatrix);
        }
        v.sort_by(|a, b| b.total_cmp(a));
        let explained: Vec<f64> = v.iter().map(|x| x / total).collect();
        let mut cumulative = Vec::with_capacity(explained.len());
        let mut acc = 0.0;
        for e in &explained {
            acc += e;
            cumulative.push(acc);
        }
        Ok(Self { explained, cumulative })
    }

    pub fn explained(&self) -> &[f64] {
        &self.explained
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.explained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.explained.is_empty()
    }
}

/// How the component variances were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaRoute {
    /// `m x m` feature covariance.
    Covariance,
    /// `n x n` Gram matrix; used when features outnumber samples.
    Gram,
}

/// Explained-variance spectrum of a standardized matrix, padded with zeros to
/// length `m`. Picks the smaller of the covariance and Gram eigenproblems.
pub fn variance_spectrum(x: &DataMatrix) -> Result<VarianceSpectrum> {
    let route = if x.m() <= x.n() { PcaRoute::Covariance } else { PcaRoute::Gram };
    variance_spectrum_via(x, route)
}

/// [`variance_spectrum`] with an explicit eigenproblem; both routes share the
/// same nonzero spectrum.
pub fn variance_spectrum_via(x: &DataMatrix, route: PcaRoute) -> Result<VarianceSpectrum> {
    let (n, m) = (x.n(), x.m());
    if n < 2 {
        return Err(Error::InvalidShape { rows: n, cols: m });
    }
    let centered = center_columns(x);
    let scale = 1.0 / (n - 1) as f64;
    let gram = match route {
        PcaRoute::Covariance => centered.gram_columns(scale),
        PcaRoute::Gram => centered.gram_rows(scale),
    };
    let eig = symmetric_eigen(&gram);
    let mut vars: Vec<f64> = eig.values;
    // Round-off can leave tiny negative or spurious eigenvalues.
    let top = vars.iter().fold(0.0f64, |a, &b| a.max(b));
    for v in vars.iter_mut() {
        if *v < top * 1e-13 {
            *v = 0.0;
        }
    }
    vars.resize(m.max(vars.len()), 0.0);
    vars.sort_by(|a, b| b.total_cmp(a));
    vars.truncate(m);
    VarianceSpectrum::from_variances(&vars)
}

fn center_columns(x: &DataMatrix) -> crate::linalg::Matrix {
    let (n, m) = (x.n(), x.m());
    let mut out = x.values().clone();
    for j in 0..m {
        let mean = (0..n).map(|i| out[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            out[(i, j)] -= mean;
        }
    }
    out
}

/// Smallest `k` whose cumulative explained variance reaches `threshold`;
/// `m` when round-off keeps the total just below the threshold.
pub fn intrinsic_dimensionality(spectrum: &VarianceSpectrum, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    Ok(spectrum
        .cumulative
        .iter()
        .position(|&c| c >= threshold)
        .map(|i| i + 1)
        .unwrap_or(spectrum.len()))
}

/// `1 - intrinsic / total`.
pub fn success_probability(intrinsic: usize, total: usize) -> f64 {
    1.0 - intrinsic as f64 / total as f64
}

/// Trapezoidal area under the IDF / cumulative-variance curve traced by the
/// given thresholds. Zero when every threshold lands on the same IDF.
pub fn auc_idf_variance(spectrum: &VarianceSpectrum, thresholds: &[f64]) -> Result<f64> {
    if thresholds.len() < 2 {
        return Err(Error::InvalidConfig("AUC needs at least two thresholds".into()));
    }
    let m = spectrum.len() as f64;
    let mut points = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let id = intrinsic_dimensionality(spectrum, t)?;
        points.push((id as f64 / m, spectrum.cumulative[id - 1]));
    }
    Ok(trapezoid(&mut points))
}

/// Area under a polyline after sorting the points by `x` (then `y`).
pub fn trapezoid(points: &mut [(f64, f64)]) -> f64 {
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

/// Exact minimizer of `(psi / auc^s - 1)^2`, i.e. `auc^s`; 1 when `auc == 0`.
pub fn optimize_psi(auc: f64, s: f64) -> f64 {
    if auc == 0.0 {
        1.0
    } else {
        libm::pow(auc, s)
    }
}

/// FOE value; infinite when `auc * mean_idf == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Foe {
    Finite(f64),
    Infinite,
}

impl Foe {
    pub fn value(self) -> Option<f64> {
        match self {
            Foe::Finite(v) => Some(v),
            Foe::Infinite => None,
        }
    }

    /// Ranking order: larger finite scores first, infinite scores last.
    pub fn rank_cmp(&self, other: &Foe) -> core::cmp::Ordering {
        use core::cmp::Ordering::*;
        match (self, other) {
            (Foe::Finite(a), Foe::Finite(b)) => b.total_cmp(a),
            (Foe::Finite(_), Foe::Infinite) => Less,
            (Foe::Infinite, Foe::Finite(_)) => Greater,
            (Foe::Infinite, Foe::Infinite) => Equal,
        }
    }
}

/// `psi / (auc * mean_idf)^s`.
pub fn foe_score(psi: f64, auc: f64, mean_idf: f64, s: f64) -> Foe {
    let base = auc * mean_idf;
    if base == 0.0 {
        Foe::Infinite
    } else {
        Foe::Finite(psi / libm::pow(base, s))
    }
}

/// Mean cumulative variance at the per-threshold intrinsic dimensionalities,
/// divided by `mean_idf^s`.
pub fn complexity_score(
    spectrum: &VarianceSpectrum,
    thresholds: &[f64],
    mean_idf: f64,
    s: f64,
) -> Result<f64> {
    if thresholds.is_empty() {
        return Err(Error::InvalidConfig("no thresholds".into()));
    }
    let mut acc = 0.0;
    for &t in thresholds {
        let id = intrinsic_dimensionality(spectrum, t)?;
        acc += spectrum.cumulative[id - 1];
    }
    Ok(acc / thresholds.len() as f64 / libm::pow(mean_idf, s))
}

/// Reading used for the complexity score; carried into reports.
pub const COMPLEXITY_INTERPRETATION: &str = "A";

#[derive(Debug, Clone, PartialEq)]
pub struct FoeReport {
    pub thresholds: Vec<f64>,
    pub intrinsic_dims: Vec<usize>,
    pub idfs: Vec<f64>,
    pub mean_idf: f64,
    pub success_probs: Vec<f64>,
    pub auc: f64,
    pub psi_star: f64,
    pub sensitivity_s: f64,
    pub foe: Foe,
    pub complexity: f64,
    pub spectrum: VarianceSpectrum,
}

/// Full analysis of a standardized matrix.
pub fn analyze(x: &DataMatrix, thresholds: &[f64], s: f64) -> Result<FoeReport> {
    if !(s > 0.0) {
        return Err(Error::InvalidConfig("sensitivity s must be > 0".into()));
    }
    if thresholds.is_empty() {
        return Err(Error::InvalidConfig("no thresholds".into()));
    }
    let spectrum = variance_spectrum(x)?;
    analyze_spectrum(spectrum, thresholds, s)
}

/// [`analyze`] starting from an already computed spectrum.
pub fn analyze_spectrum(spectrum: VarianceSpectrum, thresholds: &[f64], s: f64) -> Result<FoeReport> {
    let m = spectrum.len();
    let mut intrinsic_dims = vec![0; thresholds.len()];
    for (d, &t) in intrinsic_dims.iter_mut().zip(thresholds) {
        *d = intrinsic_dimensionality(&spectrum, t)?;
    }
    let idfs: Vec<f64> = intrinsic_dims.iter().map(|&d| d as f64 / m as f64).collect();
    let mean_idf = idfs.iter().sum::<f64>() / idfs.len() as f64;
    let success_probs = intrinsic_dims.iter().map(|&d| success_probability(d, m)).collect();
    let auc = if thresholds.len() >= 2 { auc_idf_variance(&spectrum, thresholds)? } else { 0.0 };
    let psi_star = optimize_psi(auc, s);
    let foe = foe_score(psi_star, auc, mean_idf, s);
    let complexity = complexity_score(&spectrum, thresholds, mean_idf, s)?;
    Ok(FoeReport {
        thresholds: thresholds.to_vec(),
        intrinsic_dims,
        idfs,
        mean_idf,
        success_probs,
        auc,
        psi_star,
        sensitivity_s: s,
        foe,
        complexity,
        spectrum,
    })
}

/// Mean IDF below which reordering is recommended (success probability 0.5).
pub const RECOMMEND_BELOW_MEAN_IDF: f64 = 0.5;

pub fn ordering_recommended(report: &FoeReport) -> bool {
    report.mean_idf < RECOMMEND_BELOW_MEAN_IDF
}
