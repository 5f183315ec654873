//! Binned joint-detection probabilities and sampled coincidence counts.
//!
//! Bin rectangle probabilities are computed from the bivariate normal
//! marginal by composite Gauss-Legendre quadrature along the A axis with
//! exact conditional CDF differences along the B axis, not by sampling:
//! the exact-probability mode is the oracle against which sampling and
//! the downstream estimators are tested. Mass outside the detector
//! window is kept as an explicit overflow category, never renormalized
//! away.

use crate::biphoton::{GaussianState4, Q_PA, Q_PB, Q_XA, Q_XB};
use crate::quadrature::normal_cdf;
use crate::seeding::derive_seed;
use crate::{Error, Result};
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Measurement basis of a coincidence histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Position,
    Momentum,
}

impl Basis {
    /// Quadrature indices (arm A, arm B) measured in this basis.
    pub(crate) fn pair(&self) -> (usize, usize) {
        match self {
            Basis::Position => (Q_XA, Q_XB),
            Basis::Momentum => (Q_PA, Q_PB),
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Basis::Position => write!(f, "position"),
            Basis::Momentum => write!(f, "momentum"),
        }
    }
}

/// Detector geometry: `dimension` uniform bins per axis over
/// [-half_range, +half_range] in the basis variable's units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub dimension: usize,
    pub half_range: f64,
    pub basis: Basis,
    /// Phase setting this configuration is used at; metadata recorded in
    /// the histogram, the rotation itself is applied to the state.
    pub phi: f64,
}

impl DetectorConfig {
    pub fn new(dimension: usize, half_range: f64, basis: Basis, phi: f64) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidParameters(format!(
                "detector dimension must be >= 2, got {dimension}"
            )));
        }
        if !half_range.is_finite() || half_range <= 0.0 {
            return Err(Error::InvalidParameters(format!(
                "detector half range must be positive, got {half_range}"
            )));
        }
        Ok(Self {
            dimension,
            half_range,
            basis,
            phi,
        })
    }

    /// Default window: four standard deviations of arm A's basis
    /// variable, which captures all but ~1e-4 of the mass; the remainder
    /// is tracked as overflow.
    pub fn auto(state: &GaussianState4, dimension: usize, basis: Basis) -> Result<Self> {
        let (qa, _) = basis.pair();
        let hr = 4.0 * state.variance(qa).sqrt();
        Self::new(dimension, hr, basis, 0.0)
    }

    fn edges(&self) -> Vec<f64> {
        let d = self.dimension;
        let step = 2.0 * self.half_range / d as f64;
        (0..=d).map(|k| -self.half_range + k as f64 * step).collect()
    }
}

/// How a sweep entry's measurement frame follows the phase setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepFrame {
    /// Arm A's analysis quadrature counter-rotates with the phase and the
    /// detector window scales with the rotated quadrature's width. Every
    /// angle then sees the same correlation (the pair's position
    /// correlation and momentum anti-correlation have equal magnitude),
    /// so per-angle statistics are phase-invariant and the angles pool.
    CoRotating,
    /// Only arm B is rotated and the base window is reused verbatim at
    /// every angle. Information about the unrotated arm A variable is
    /// lost near phi = pi/2.
    FixedArmA,
}

/// Joint detection histogram of one phase setting.
///
/// `cells` is row-major over (A bin, B bin). Probability mode satisfies
/// sum(cells) + overflow = 1; count mode stores integer-valued counts
/// with sum(cells) + overflow = shots exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub meta: HistogramMeta,
    cells: Vec<f64>,
    overflow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramMeta {
    pub phi: f64,
    pub basis: Basis,
    pub dimension: usize,
    pub half_range: f64,
    /// None for exact probabilities, Some(shots) for sampled counts.
    pub shots: Option<u64>,
    pub seed: Option<u64>,
}

impl CoincidenceHistogram {
    pub fn dimension(&self) -> usize {
        self.meta.dimension
    }

    pub fn is_count_mode(&self) -> bool {
        self.meta.shots.is_some()
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.meta.dimension + j]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum::<f64>() + self.overflow
    }

    /// Transpose arms: cell (i, j) -> (j, i). Used for the B|A direction
    /// of conditional entropies.
    pub fn transposed(&self) -> CoincidenceHistogram {
        let d = self.meta.dimension;
        let mut cells = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                cells[j * d + i] = self.cells[i * d + j];
            }
        }
        CoincidenceHistogram {
            meta: self.meta.clone(),
            cells,
            overflow: self.overflow,
        }
    }

    /// CSV body with header `i,j,value`.
    pub fn to_csv(&self) -> String {
        let d = self.meta.dimension;
        let mut out = String::from("i,j,value\n");
        for i in 0..d {
            for j in 0..d {
                out.push_str(&format!("{},{},{}\n", i, j, self.cells[i * d + j]));
            }
        }
        out
    }

    /// Sidecar metadata for the CSV file.
    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::json!({
            "phi": self.meta.phi,
            "basis": self.meta.basis,
            "d": self.meta.dimension,
            "halfRange": self.meta.half_range,
            "shots": self.meta.shots,
            "seed": self.meta.seed,
            "overflow": self.overflow,
        })
    }

    /// Rebuild a histogram from CSV body and sidecar values.
    pub fn from_csv(csv: &str, sidecar: &serde_json::Value) -> Result<Self> {
        let meta = HistogramMeta {
            phi: sidecar["phi"].as_f64().unwrap_or(0.0),
            basis: serde_json::from_value(sidecar["basis"].clone())
                .map_err(|_| Error::Config("sidecar missing basis".into()))?,
            dimension: sidecar["d"]
                .as_u64()
                .ok_or_else(|| Error::Config("sidecar missing d".into()))?
                as usize,
            half_range: sidecar["halfRange"]
                .as_f64()
                .ok_or_else(|| Error::Config("sidecar missing halfRange".into()))?,
            shots: sidecar["shots"].as_u64(),
            seed: sidecar["seed"].as_u64(),
        };
        let d = meta.dimension;
        let mut cells = vec![0.0; d * d];
        for (lineno, line) in csv.lines().enumerate() {
            if lineno == 0 {
                if line.trim() != "i,j,value" {
                    return Err(Error::Config(format!(
                        "histogram csv header must be 'i,j,value', got '{line}'"
                    )));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |p: Option<&str>| -> Result<f64> {
                p.and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("bad csv line {}", lineno + 1)))
            };
            let i = parse(parts.next())? as usize;
            let j = parse(parts.next())? as usize;
            let v = parse(parts.next())?;
            if i >= d || j >= d {
                return Err(Error::Config(format!("cell index out of range on line {}", lineno + 1)));
            }
            cells[i * d + j] = v;
        }
        Ok(CoincidenceHistogram {
            meta,
            cells,
            overflow: sidecar["overflow"].as_f64().unwrap_or(0.0),
        })
    }

    pub(crate) fn from_parts(meta: HistogramMeta, cells: Vec<f64>, overflow: f64) -> Self {
        CoincidenceHistogram {
            meta,
            cells,
            overflow,
        }
    }
}

/// Exact bin probabilities of the joint (arm A variable, arm B variable)
/// marginal over the detector grid.
pub fn bin_joint_probabilities(
    state: &GaussianState4,
    config: &DetectorConfig,
) -> Result<CoincidenceHistogram> {
    let (qa, qb) = config.basis.pair();
    let pair = state.marginal_pair(qa, qb);
    bin_bivariate(pair, config)
}

/// Shared core: bin a 2x2-covariance zero-mean Gaussian over the grid.
fn bin_bivariate(pair: [[f64; 2]; 2], config: &DetectorConfig) -> Result<CoincidenceHistogram> {
    let (va, vb, cab) = (pair[0][0], pair[1][1], pair[0][1]);
    if va <= 0.0 || vb <= 0.0 {
        return Err(Error::DegenerateState("zero marginal variance".into()));
    }
    let sigma_a = va.sqrt();
    let cond_var = vb - cab * cab / va;
    if cond_var <= 0.0 {
        return Err(Error::DegenerateState(
            "perfectly correlated marginal".into(),
        ));
    }
    let sigma_c = cond_var.sqrt();
    if sigma_c < 1e-12 * config.half_range || sigma_a < 1e-12 * config.half_range {
        return Err(Error::DegenerateState(format!(
            "conditional width {sigma_c:.3e} below 1e-12 of half range {}",
            config.half_range
        )));
    }
    let slope = cab / va;
    let d = config.dimension;
    let hr = config.half_range;
    let edges = config.edges();

    // Beyond this many sigmas of arm A the row mass is below 1e-20 and is
    // accounted for by the erf-exact A-window total.
    let clip = 9.5 * sigma_a;
    let pdf_a = |x: f64| (-0.5 * (x / sigma_a).powi(2)).exp()
        / ((2.0 * std::f64::consts::PI).sqrt() * sigma_a);

    // The integrand varies on the marginal scale sigma_a and, through the
    // conditional CDF edges, on the scale sigma_c/|slope| along A. Panels
    // must resolve the finer of the two for the 1e-10 per-cell target.
    let feature = if slope.abs() > 0.0 {
        (2.0 * sigma_a).min(sigma_c / slope.abs())
    } else {
        2.0 * sigma_a
    };
    let max_panel = feature.max(2.0 * sigma_a / 256.0);

    let rows: Vec<(Vec<f64>, f64)> = (0..d)
        .into_par_iter()
        .map(|i| {
            let lo = edges[i].max(-clip);
            let hi = edges[i + 1].min(clip);
            let mut row = vec![0.0; d];
            let mut b_out = 0.0;
            if hi > lo {
                // Composite GL along A; per node, conditional CDF at all
                // B edges. The B-sum telescopes, so the in-window row
                // total is exact up to the outer quadrature.
                let panels = ((hi - lo) / max_panel).ceil().max(1.0) as usize;
                let step = (hi - lo) / panels as f64;
                let mut cdf = vec![0.0; d + 1];
                for p in 0..panels {
                    let half = 0.5 * step;
                    let mid = lo + p as f64 * step + half;
                    for &(xi, wi) in crate::quadrature::GL16.iter() {
                        let x = mid + half * xi;
                        let w = wi * half * pdf_a(x);
                        let mu = slope * x;
                        for (k, e) in edges.iter().enumerate() {
                            cdf[k] = normal_cdf((e - mu) / sigma_c);
                        }
                        for j in 0..d {
                            row[j] += w * (cdf[j + 1] - cdf[j]);
                        }
                        b_out += w * (1.0 - (cdf[d] - cdf[0]));
                    }
                }
            }
            (row, b_out)
        })
        .collect();

    let mut cells = vec![0.0; d * d];
    let mut overflow = 1.0 - (normal_cdf(hr / sigma_a) - normal_cdf(-hr / sigma_a));
    for (i, (row, b_out)) in rows.into_iter().enumerate() {
        cells[i * d..(i + 1) * d].copy_from_slice(&row);
        overflow += b_out;
    }

    Ok(CoincidenceHistogram::from_parts(
        HistogramMeta {
            phi: config.phi,
            basis: config.basis,
            dimension: d,
            half_range: hr,
            shots: None,
            seed: None,
        },
        cells,
        overflow.max(0.0),
    ))
}

/// Exact bin probabilities of an explicitly given 2x2 covariance; used by
/// oracle tests that need marginals not constructible from width
/// parameters.
pub fn bin_joint_probabilities_of_pair(
    pair: [[f64; 2]; 2],
    config: &DetectorConfig,
) -> Result<CoincidenceHistogram> {
    bin_bivariate(pair, config)
}

/// Draw multinomial counts with the given nonnegative weights using the
/// conditional-binomial decomposition; deterministic for a fixed rng
/// state. The weights need not be normalized.
pub(crate) fn multinomial_counts(
    weights: &[f64],
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> Vec<u64> {
    let mut remaining_weight: f64 = weights.iter().sum();
    let mut remaining = shots;
    let mut counts = vec![0u64; weights.len()];
    for (k, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == weights.len() - 1 {
            counts[k] = remaining;
            break;
        }
        let p = if remaining_weight > 0.0 {
            (w / remaining_weight).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = if p >= 1.0 {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            rand_distr::Binomial::new(remaining, p)
                .expect("valid binomial")
                .sample(rng)
        };
        counts[k] = draw;
        remaining -= draw;
        remaining_weight = (remaining_weight - w).max(0.0);
    }
    counts
}

/// Sample coincidence counts multinomially from the exact bin
/// probabilities (the overflow is one extra category).
pub fn sample_coincidences(
    state: &GaussianState4,
    config: &DetectorConfig,
    shots: u64,
    seed: u64,
) -> Result<CoincidenceHistogram> {
    let exact = bin_joint_probabilities(state, config)?;
    sample_from_probabilities(&exact, shots, seed)
}

/// Multinomial counts from an existing probability-mode histogram.
pub fn sample_from_probabilities(
    exact: &CoincidenceHistogram,
    shots: u64,
    seed: u64,
) -> Result<CoincidenceHistogram> {
    if exact.is_count_mode() {
        return Err(Error::InvalidParameters(
            "sampling requires a probability-mode histogram".into(),
        ));
    }
    let d = exact.dimension();
    let mut weights = Vec::with_capacity(d * d + 1);
    weights.extend_from_slice(exact.cells());
    weights.push(exact.overflow());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = multinomial_counts(&weights, shots, &mut rng);
    let cells: Vec<f64> = counts[..d * d].iter().map(|&c| c as f64).collect();
    let overflow = counts[d * d] as f64;
    let mut meta = exact.meta.clone();
    meta.shots = Some(shots);
    meta.seed = Some(seed);
    Ok(CoincidenceHistogram::from_parts(meta, cells, overflow))
}

/// Histograms at the swept phases phi_j = j pi / m, j = 0..m-1, so the
/// standard setting (phi = 0) is always the first entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiSweep {
    pub m: usize,
    pub frame: SweepFrame,
    pub base: DetectorConfig,
    pub entries: Vec<CoincidenceHistogram>,
}

impl PhiSweep {
    pub fn angles(&self) -> Vec<f64> {
        (0..self.m)
            .map(|j| j as f64 * std::f64::consts::PI / self.m as f64)
            .collect()
    }
}

/// Measure the state across the phase sweep.
///
/// `shots = None` produces exact probabilities; otherwise each angle is
/// sampled with a seed derived from (`seed`, "sweep", j).
pub fn phi_sweep(
    state: &GaussianState4,
    base: &DetectorConfig,
    m: usize,
    shots: Option<u64>,
    seed: u64,
    frame: SweepFrame,
) -> Result<PhiSweep> {
    if m < 1 {
        return Err(Error::InvalidParameters("sweep requires m >= 1".into()));
    }
    let (qa, _) = base.basis.pair();
    let base_var = state.variance(qa);
    let entries: Vec<Result<CoincidenceHistogram>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let phi = j as f64 * std::f64::consts::PI / m as f64;
            let (rotated_b, _) = crate::biphoton::rotate_arm_b(state, phi);
            let (measured, config) = match frame {
                SweepFrame::FixedArmA => {
                    let mut config = *base;
                    config.phi = phi;
                    (rotated_b, config)
                }
                SweepFrame::CoRotating => {
                    let both = rotated_b.rotate_arm(crate::biphoton::Q_XA, -phi);
                    let scale = (both.variance(qa) / base_var).sqrt();
                    let mut config = *base;
                    config.phi = phi;
                    config.half_range = base.half_range * scale;
                    (both, config)
                }
            };
            match shots {
                None => bin_joint_probabilities(&measured, &config),
                Some(n) => {
                    sample_coincidences(&measured, &config, n, derive_seed(seed, "sweep", j as u64))
                }
            }
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PhiSweep {
        m,
        frame,
        base: *base,
        entries,
    })
}

/// Pool the per-angle count histograms of a co-rotating sweep back into
/// the phi = 0 frame.
///
/// In the co-rotating frame each angle's bins cover the same quantile
/// regions of its measured quadrature pair, so mapping back to phi = 0 is
/// the identity on bin indices and pooling is a cellwise sum of counts.
pub fn pool_sweep_counts(sweep: &PhiSweep) -> Result<CoincidenceHistogram> {
    if sweep.frame != SweepFrame::CoRotating {
        return Err(Error::IncomparableSettings(
            "pooling requires the co-rotating sweep frame; fixed-arm angles do not map back"
                .into(),
        ));
    }
    let first = sweep
        .entries
        .first()
        .ok_or_else(|| Error::InvalidParameters("empty sweep".into()))?;
    if !first.is_count_mode() {
        return Err(Error::CountModeRequired("sweep pooling".into()));
    }
    let d = first.dimension();
    let mut cells = vec![0.0; d * d];
    let mut overflow = 0.0;
    let mut shots = 0u64;
    for entry in &sweep.entries {
        if entry.dimension() != d || !entry.is_count_mode() {
            return Err(Error::IncomparableSettings(
                "sweep entries disagree in dimension or mode".into(),
            ));
        }
        for (acc, &c) in cells.iter_mut().zip(entry.cells()) {
            *acc += c;
        }
        overflow += entry.overflow();
        shots += entry.meta.shots.unwrap_or(0);
    }
    let mut meta = first.meta.clone();
    meta.phi = 0.0;
    meta.shots = Some(shots);
    Ok(CoincidenceHistogram::from_parts(meta, cells, overflow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biphoton::{covariance_from_params, rotate_arm_b, BiphotonParams, GaussianState4};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    fn section_params() -> BiphotonParams {
        let (w1, w2) = crate::biphoton::invert_widths(1500.0, 40.0).unwrap();
        BiphotonParams::new(w1, w2, 325.0).unwrap()
    }

    fn unit_corr_state(r: f64) -> GaussianState4 {
        // Unit-variance position pair with correlation r; momentum pair
        // left uncorrelated at unit variance.
        let mut cov = [[0.0; 4]; 4];
        for i in 0..4 {
            cov[i][i] = 1.0;
        }
        cov[0][2] = r;
        cov[2][0] = r;
        GaussianState4::from_covariance(cov).unwrap()
    }

    #[test]
    fn uncorrelated_state_factorizes_into_marginal_product() {
        // w1 = 2 w2 zeroes both cross covariances.
        let params = BiphotonParams::new(2.0, 1.0, 325.0).unwrap();
        let state = covariance_from_params(&params);
        assert_abs_diff_eq!(state.covariance_entry(0, 2), 0.0, epsilon = 1e-15);
        let config = DetectorConfig::new(8, 3.0, Basis::Position, 0.0).unwrap();
        let hist = bin_joint_probabilities(&state, &config).unwrap();

        let sigma = state.variance(0).sqrt();
        let edges = config.edges();
        let marginal: Vec<f64> = (0..8)
            .map(|k| normal_cdf(edges[k + 1] / sigma) - normal_cdf(edges[k] / sigma))
            .collect();
        for i in 0..8 {
            for j in 0..8 {
                assert_abs_diff_eq!(hist.cell(i, j), marginal[i] * marginal[j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn quadrant_probabilities_match_orthant_formula() {
        for r in [0.25, -0.6, 0.9] {
            let state = unit_corr_state(r);
            let config = DetectorConfig::new(2, 40.0, Basis::Position, 0.0).unwrap();
            let hist = bin_joint_probabilities(&state, &config).unwrap();
            let same_sign = 0.25 + (r as f64).asin() / (2.0 * std::f64::consts::PI);
            assert_abs_diff_eq!(hist.cell(0, 0), same_sign, epsilon = 1e-9);
            assert_abs_diff_eq!(hist.cell(1, 1), same_sign, epsilon = 1e-9);
            assert_abs_diff_eq!(hist.cell(0, 1), 0.5 - same_sign, epsilon = 1e-9);
        }
    }

    #[test]
    fn quadrant_probabilities_match_monte_carlo_oracle() {
        let r = 0.7;
        let state = unit_corr_state(r);
        let config = DetectorConfig::new(2, 40.0, Basis::Position, 0.0).unwrap();
        let hist = bin_joint_probabilities(&state, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let shots = 1_000_000;
        let mut counts = [[0u64; 2]; 2];
        let sc = (1.0 - r * r).sqrt();
        for _ in 0..shots {
            let a: f64 = rng.sample(rand_distr::StandardNormal);
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let b = r * a + sc * z;
            counts[(a >= 0.0) as usize][(b >= 0.0) as usize] += 1;
        }
        for i in 0..2 {
            for j in 0..2 {
                let freq = counts[i][j] as f64 / shots as f64;
                // Bin index 0 covers the negative half-axis.
                let p = hist.cell(1 - (i == 0) as usize, 1 - (j == 0) as usize);
                assert_abs_diff_eq!(freq, p, epsilon = 5.0 * (p * (1.0 - p) / shots as f64).sqrt());
            }
        }
    }

    #[test]
    fn total_probability_with_overflow_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let w1 = 10f64.powf(rng.gen_range(-1.0..1.5));
            let w2 = 10f64.powf(rng.gen_range(-1.0..1.5));
            let params = BiphotonParams::new(w1, w2, 325.0).unwrap();
            let state = covariance_from_params(&params);
            let basis = if rng.gen_bool(0.5) { Basis::Position } else { Basis::Momentum };
            let d = rng.gen_range(2..40);
            let config = DetectorConfig::auto(&state, d, basis).unwrap();
            let hist = bin_joint_probabilities(&state, &config).unwrap();
            assert_abs_diff_eq!(hist.total(), 1.0, epsilon = 1e-9);
            assert!(hist.overflow() >= 0.0);
        }
    }

    #[test]
    fn symmetric_state_gives_arm_symmetric_histogram() {
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 16, Basis::Position).unwrap();
        let hist = bin_joint_probabilities(&state, &config).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert_abs_diff_eq!(hist.cell(i, j), hist.cell(j, i), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn overflow_vanishes_at_six_sigma_window() {
        let state = covariance_from_params(&section_params());
        let hr = 6.0 * state.variance(0).sqrt();
        let config = DetectorConfig::new(16, hr, Basis::Position, 0.0).unwrap();
        let hist = bin_joint_probabilities(&state, &config).unwrap();
        assert!(hist.overflow() < 1e-6, "overflow {}", hist.overflow());
    }

    #[test]
    fn degenerate_marginal_is_rejected() {
        let state = unit_corr_state(0.3);
        // Window so wide the conditional width is below 1e-12 of it.
        let config = DetectorConfig::new(4, 1e13, Basis::Position, 0.0).unwrap();
        assert!(matches!(
            bin_joint_probabilities(&state, &config),
            Err(Error::DegenerateState(_))
        ));
    }

    #[test]
    fn zero_shots_gives_empty_histogram() {
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 8, Basis::Position).unwrap();
        let hist = sample_coincidences(&state, &config, 0, 1).unwrap();
        assert!(hist.cells().iter().all(|&c| c == 0.0));
        assert_eq!(hist.overflow(), 0.0);
    }

    #[test]
    fn sampled_counts_conserve_shots_exactly() {
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 12, Basis::Momentum).unwrap();
        for seed in 0..5 {
            let hist = sample_coincidences(&state, &config, 100_000, seed).unwrap();
            let total: f64 = hist.cells().iter().sum::<f64>() + hist.overflow();
            assert_eq!(total as u64, 100_000);
            assert!(hist.cells().iter().all(|&c| c.fract() == 0.0));
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 8, Basis::Position).unwrap();
        let a = sample_coincidences(&state, &config, 50_000, 42).unwrap();
        let b = sample_coincidences(&state, &config, 50_000, 42).unwrap();
        let c = sample_coincidences(&state, &config, 50_000, 43).unwrap();
        assert_eq!(a.cells(), b.cells());
        assert_ne!(a.cells(), c.cells());
    }

    #[test]
    fn empirical_frequencies_concentrate_around_probabilities() {
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 8, Basis::Position).unwrap();
        let exact = bin_joint_probabilities(&state, &config).unwrap();
        let shots = 1_000_000u64;
        let sampled = sample_from_probabilities(&exact, shots, 7).unwrap();
        let n = shots as f64;
        let mut ok = 0;
        let total = 64;
        for k in 0..total {
            let p = exact.cells()[k];
            let freq = sampled.cells()[k] / n;
            if (freq - p).abs() <= 5.0 * (p * (1.0 - p) / n).sqrt() {
                ok += 1;
            }
        }
        assert!(ok * 100 >= total * 99, "only {ok}/{total} bins within 5 sigma");
    }

    #[test]
    fn single_angle_sweep_reproduces_standard_histogram() {
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 8, Basis::Position).unwrap();
        for frame in [SweepFrame::CoRotating, SweepFrame::FixedArmA] {
            let sweep = phi_sweep(&state, &config, 1, None, 0, frame).unwrap();
            assert_eq!(sweep.entries.len(), 1);
            let direct = bin_joint_probabilities(&state, &config).unwrap();
            assert_eq!(sweep.entries[0].cells(), direct.cells());
        }
    }

    #[test]
    fn four_angle_sweep_covers_expected_grid() {
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 4, Basis::Position).unwrap();
        let sweep = phi_sweep(&state, &config, 4, None, 0, SweepFrame::CoRotating).unwrap();
        let angles = sweep.angles();
        let pi = std::f64::consts::PI;
        for (a, b) in angles.iter().zip([0.0, pi / 4.0, pi / 2.0, 3.0 * pi / 4.0]) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-15);
        }
        for (j, e) in sweep.entries.iter().enumerate() {
            assert_abs_diff_eq!(e.meta.phi, angles[j], epsilon = 1e-15);
        }
    }

    #[test]
    fn fixed_arm_quarter_rotation_matches_quadrature_swapped_state() {
        // At phi = pi/2 the fixed-arm position histogram equals the
        // phi = 0 histogram of the state with arm B's x and p swapped
        // (xB -> pB, pB -> -xB).
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 8, Basis::Position).unwrap();
        let sweep = phi_sweep(&state, &config, 4, None, 0, SweepFrame::FixedArmA).unwrap();

        let c = state.covariance();
        let map = |q: usize| -> (usize, f64) {
            match q {
                2 => (3, 1.0),  // new xB reads old pB
                3 => (2, -1.0), // new pB reads -old xB
                q => (q, 1.0),
            }
        };
        let mut swapped = [[0.0; 4]; 4];
        for r in 0..4 {
            for s in 0..4 {
                let (ro, rs) = map(r);
                let (so, ss) = map(s);
                swapped[r][s] = rs * ss * c[ro][so];
            }
        }
        let swapped = GaussianState4::from_covariance(swapped).unwrap();
        let reference = bin_joint_probabilities(&swapped, &config).unwrap();
        let at_quarter = &sweep.entries[2];
        for k in 0..64 {
            assert_abs_diff_eq!(at_quarter.cells()[k], reference.cells()[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn co_rotating_sweep_is_phase_invariant() {
        let state = covariance_from_params(&section_params());
        for basis in [Basis::Position, Basis::Momentum] {
            let config = DetectorConfig::auto(&state, 12, basis).unwrap();
            let sweep = phi_sweep(&state, &config, 8, None, 0, SweepFrame::CoRotating).unwrap();
            let first = &sweep.entries[0];
            for entry in &sweep.entries[1..] {
                for k in 0..first.cells().len() {
                    assert_abs_diff_eq!(entry.cells()[k], first.cells()[k], epsilon = 1e-12);
                }
                assert_abs_diff_eq!(entry.overflow(), first.overflow(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fixed_arm_sweep_loses_correlation_at_quarter_turn() {
        // With arm A unrotated the state has no xA-pB covariance, so the
        // pi/2 entry factorizes; this is the structural reason the fixed
        // frame cannot pool across angles.
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 8, Basis::Position).unwrap();
        let sweep = phi_sweep(&state, &config, 4, None, 0, SweepFrame::FixedArmA).unwrap();
        let q = &sweep.entries[2]; // phi = pi/2
        let d = 8;
        // Marginals
        let pa: Vec<f64> = (0..d).map(|i| (0..d).map(|j| q.cell(i, j)).sum()).collect();
        let pb: Vec<f64> = (0..d).map(|j| (0..d).map(|i| q.cell(i, j)).sum()).collect();
        let in_window: f64 = pa.iter().sum();
        for i in 0..d {
            for j in 0..d {
                assert_abs_diff_eq!(q.cell(i, j), pa[i] * pb[j] / in_window, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn pooled_counts_sum_across_angles() {
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 6, Basis::Position).unwrap();
        let sweep =
            phi_sweep(&state, &config, 4, Some(10_000), 5, SweepFrame::CoRotating).unwrap();
        let pooled = pool_sweep_counts(&sweep).unwrap();
        assert_eq!(pooled.meta.shots, Some(40_000));
        let total: f64 = pooled.cells().iter().sum::<f64>() + pooled.overflow();
        assert_eq!(total as u64, 40_000);

        let fixed = phi_sweep(&state, &config, 4, Some(10_000), 5, SweepFrame::FixedArmA).unwrap();
        assert!(pool_sweep_counts(&fixed).is_err());
    }

    #[test]
    fn histogram_csv_round_trip() {
        let state = covariance_from_params(&section_params());
        let config = DetectorConfig::auto(&state, 4, Basis::Position).unwrap();
        let hist = sample_coincidences(&state, &config, 1000, 9).unwrap();
        let csv = hist.to_csv();
        let sidecar = hist.sidecar_json();
        let back = CoincidenceHistogram::from_csv(&csv, &sidecar).unwrap();
        assert_eq!(back.cells(), hist.cells());
        assert_eq!(back.meta, hist.meta);
        assert_eq!(back.overflow(), hist.overflow());
    }
}
