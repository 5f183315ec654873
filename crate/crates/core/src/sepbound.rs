//! Entropic separability bound and its violation statistics.
//!
//! The witness is the conditional-entropy sum H(A|B)_x + H(A|B)_p over
//! the position- and momentum-basis histograms; a sum below 6.18 bits
//! rules out separability. "Violated by tau standard deviations" is read
//! as tau = (6.18 - sum) / sigma_hat with sigma_hat the multinomial
//! bootstrap standard deviation of the measured sum. Both conditioning
//! directions are computed and the report carries the larger
//! (conservative) sum.

use crate::info::{entropy_bits, joint_with_overflow};
use crate::measurement::CoincidenceHistogram;
use crate::seeding::derive_seed;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Entropic separability threshold in bits.
pub const SEPARABILITY_BOUND_BITS: f64 = 6.18;

/// Which measurement setting produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Single-phase data at phi = 0.
    Standard,
    /// Pooled data across the phase sweep.
    Radon,
}

/// Conditioning direction of the reported sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    AGivenB,
    BGivenA,
}

/// Violation report for one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepBoundReport {
    pub setting: Setting,
    pub dimension: usize,
    /// Conditional entropy in the position basis, bits.
    pub h_ab_x: f64,
    /// Conditional entropy in the momentum basis, bits.
    pub h_ab_p: f64,
    pub sum: f64,
    pub bound: f64,
    pub violated: bool,
    /// Conservative direction the sum was taken from.
    pub direction: Direction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviations: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resamples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// H(A|B) = H(AB) - H(B) of one histogram, in bits.
fn conditional_entropy(hist: &CoincidenceHistogram) -> Result<f64> {
    let (joint, n) = joint_with_overflow(hist)?;
    let mut pb = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            pb[j] += joint[i * n + j];
        }
    }
    let h_ab = entropy_bits(joint.into_iter());
    let h_b = entropy_bits(pb.into_iter());
    Ok((h_ab - h_b).max(0.0))
}

/// Conditional-entropy sum (H(A|B)_x, H(A|B)_p, sum) from a
/// position-basis and a momentum-basis histogram of the same dimension.
pub fn conditional_entropy_sum(
    hist_x: &CoincidenceHistogram,
    hist_p: &CoincidenceHistogram,
) -> Result<(f64, f64, f64)> {
    if hist_x.dimension() != hist_p.dimension() {
        return Err(Error::IncomparableSettings(format!(
            "basis histograms disagree in dimension: {} vs {}",
            hist_x.dimension(),
            hist_p.dimension()
        )));
    }
    let hx = conditional_entropy(hist_x)?;
    let hp = conditional_entropy(hist_p)?;
    Ok((hx, hp, hx + hp))
}

/// Deviation count (bound - sum) / std; positive means violation.
pub fn deviation_count(sum: f64, std_estimate: f64) -> Result<f64> {
    if !(std_estimate > 0.0) {
        return Err(Error::UndefinedDeviation(std_estimate));
    }
    Ok((SEPARABILITY_BOUND_BITS - sum) / std_estimate)
}

/// The bootstrapped statistic: the conservative (larger) of the two
/// conditioning directions' sums.
fn conservative_sum(
    hist_x: &CoincidenceHistogram,
    hist_p: &CoincidenceHistogram,
) -> Result<(f64, f64, f64, Direction)> {
    let (hx_ab, hp_ab, sum_ab) = conditional_entropy_sum(hist_x, hist_p)?;
    let (hx_ba, hp_ba, sum_ba) =
        conditional_entropy_sum(&hist_x.transposed(), &hist_p.transposed())?;
    if sum_ba > sum_ab {
        Ok((hx_ba, hp_ba, sum_ba, Direction::BGivenA))
    } else {
        Ok((hx_ab, hp_ab, sum_ab, Direction::AGivenB))
    }
}

fn resample(hist: &CoincidenceHistogram, rng: &mut ChaCha8Rng) -> CoincidenceHistogram {
    let d = hist.dimension();
    let shots = hist.meta.shots.expect("count mode checked by caller");
    let mut weights = Vec::with_capacity(d * d + 1);
    weights.extend_from_slice(hist.cells());
    weights.push(hist.overflow());
    let counts = crate::measurement::multinomial_counts(&weights, shots, rng);
    let cells: Vec<f64> = counts[..d * d].iter().map(|&c| c as f64).collect();
    CoincidenceHistogram::from_parts(hist.meta.clone(), cells, counts[d * d] as f64)
}

/// Multinomial bootstrap standard deviation of the conditional-entropy
/// sum; deterministic per seed, resamples drawn in index order.
pub fn bootstrap_std(
    hist_x: &CoincidenceHistogram,
    hist_p: &CoincidenceHistogram,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if !hist_x.is_count_mode() || !hist_p.is_count_mode() {
        return Err(Error::CountModeRequired(
            "bootstrap needs sampled counts, not exact probabilities".into(),
        ));
    }
    if resamples < 100 {
        return Err(Error::InvalidParameters(format!(
            "bootstrap needs at least 100 resamples, got {resamples}"
        )));
    }
    let sums: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "bootstrap", r as u64));
            let rx = resample(hist_x, &mut rng);
            let rp = resample(hist_p, &mut rng);
            conservative_sum(&rx, &rp).map(|(_, _, sum, _)| sum)
        })
        .collect::<Result<_>>()?;
    let mean = sums.iter().sum::<f64>() / resamples as f64;
    let var = sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

/// Build the violation report for one setting. Count-mode inputs get a
/// bootstrap standard deviation and a deviation count; exact-probability
/// inputs report the deterministic sum only.
pub fn evaluate_setting(
    setting: Setting,
    hist_x: &CoincidenceHistogram,
    hist_p: &CoincidenceHistogram,
    resamples: usize,
    seed: u64,
) -> Result<SepBoundReport> {
    let (h_ab_x, h_ab_p, sum, direction) = conservative_sum(hist_x, hist_p)?;
    let (std_estimate, deviations, resamples_used) =
        if hist_x.is_count_mode() && hist_p.is_count_mode() {
            let std = bootstrap_std(hist_x, hist_p, resamples, seed)?;
            let dev = if std > 0.0 {
                Some(deviation_count(sum, std)?)
            } else {
                None
            };
            (Some(std), dev, Some(resamples))
        } else {
            (None, None, None)
        };
    Ok(SepBoundReport {
        setting,
        dimension: hist_x.dimension(),
        h_ab_x,
        h_ab_p,
        sum,
        bound: SEPARABILITY_BOUND_BITS,
        violated: sum < SEPARABILITY_BOUND_BITS,
        direction,
        std_estimate,
        deviations,
        shots: hist_x.meta.shots,
        resamples: resamples_used,
        seed: Some(seed),
    })
}

/// Comparison of the standard and Radon settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsComparison {
    pub tau: f64,
    pub kappa: f64,
    pub difference: f64,
    /// True when the pooled setting violates by strictly more standard
    /// deviations.
    pub radon_stronger: bool,
}

/// Compare the per-setting deviation counts; requires both reports to
/// come from the same detector dimension and carry deviation counts.
pub fn compare_settings(
    standard: &SepBoundReport,
    radon: &SepBoundReport,
) -> Result<SettingsComparison> {
    if standard.dimension != radon.dimension {
        return Err(Error::IncomparableSettings(format!(
            "dimensions differ: {} vs {}",
            standard.dimension, radon.dimension
        )));
    }
    let tau = standard
        .deviations
        .ok_or_else(|| Error::IncomparableSettings("standard report lacks deviations".into()))?;
    let kappa = radon
        .deviations
        .ok_or_else(|| Error::IncomparableSettings("radon report lacks deviations".into()))?;
    Ok(SettingsComparison {
        tau,
        kappa,
        difference: kappa - tau,
        radon_stronger: kappa > tau,
    })
}
