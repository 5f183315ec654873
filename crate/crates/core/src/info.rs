//! Mutual information measures.
//!
//! The discrete estimator is the plain plug-in I = H(A) + H(B) - H(AB)
//! over histogram outcomes, with the overflow mass kept as one extra
//! outcome per arm so the entropy bookkeeping stays exact. The closed
//! forms operate on the width parameters directly. Phase-aggregated
//! results are reported in three modes (literal sum over angles, mean
//! over angles, and the mutual information of a reconstructed grid) and
//! the sum is never presented without its angle count.

use crate::biphoton::BiphotonParams;
use crate::measurement::{Basis, CoincidenceHistogram, PhiSweep};
use crate::tomography::Grid2D;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which estimator produced a mutual information value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "phi", rename_all = "camelCase")]
pub enum MiKind {
    StandardI0,
    PartialAtPhi(f64),
    RadonFullSum,
    RadonFullMean,
    RadonReconstructed,
    ClosedForm,
    ShannonAdditive,
}

/// A mutual information value in bits per photon with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiResult {
    pub bits: f64,
    #[serde(flatten)]
    pub kind: MiKind,
    pub basis: Option<Basis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    /// Angle count behind a phase-aggregated value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    /// Additive noise scale of the Shannon form, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive_noise: Option<f64>,
    /// Negative density mass clamped before renormalizing a
    /// reconstructed grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamped_mass: Option<f64>,
}

impl MiResult {
    fn bare(bits: f64, kind: MiKind) -> Self {
        MiResult {
            bits,
            kind,
            basis: None,
            dimension: None,
            angles: None,
            shots: None,
            additive_noise: None,
            clamped_mass: None,
        }
    }
}

/// Shannon entropy in bits of a normalized distribution; 0 log 0 = 0.
pub(crate) fn entropy_bits(probs: impl Iterator<Item = f64>) -> f64 {
    let mut h = 0.0;
    for p in probs {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

/// The (d+1)-outcome-per-arm joint distribution of a histogram: the d*d
/// cells normalized, with the overflow mass as the (d, d) outcome.
pub(crate) fn joint_with_overflow(hist: &CoincidenceHistogram) -> Result<(Vec<f64>, usize)> {
    let d = hist.dimension();
    let total = hist.total();
    if !(total > 0.0) {
        return Err(Error::UndefinedDistribution);
    }
    let n = d + 1;
    let mut joint = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            joint[i * n + j] = hist.cell(i, j) / total;
        }
    }
    joint[n * n - 1] = hist.overflow() / total;
    Ok((joint, n))
}

/// Plug-in mutual information of a coincidence histogram in bits.
///
/// Counts are normalized first; the overflow category participates as an
/// extra outcome on each arm.
pub fn mi_discrete(hist: &CoincidenceHistogram) -> Result<MiResult> {
    let (joint, n) = joint_with_overflow(hist)?;
    let mut pa = vec![0.0; n];
    let mut pb = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let p = joint[i * n + j];
            pa[i] += p;
            pb[j] += p;
        }
    }
    let h_a = entropy_bits(pa.into_iter());
    let h_b = entropy_bits(pb.into_iter());
    let h_ab = entropy_bits(joint.into_iter());
    let bits = (h_a + h_b - h_ab).max(0.0);
    let kind = if hist.meta.phi == 0.0 {
        MiKind::StandardI0
    } else {
        MiKind::PartialAtPhi(hist.meta.phi)
    };
    Ok(MiResult {
        basis: Some(hist.meta.basis),
        dimension: Some(hist.dimension()),
        shots: hist.meta.shots,
        ..MiResult::bare(bits, kind)
    })
}

/// Closed-form information of the Gaussian pair: 2 log2(sigma_s/sigma_c).
pub fn mi_closed_form(params: &BiphotonParams) -> Result<MiResult> {
    let sigma_s = params.single_photon_width();
    let sigma_c = params.conditional_width();
    if sigma_c <= 0.0 {
        return Err(Error::InvalidParameters(
            "closed form requires a positive conditional width".into(),
        ));
    }
    Ok(MiResult::bare(
        2.0 * (sigma_s / sigma_c).log2(),
        MiKind::ClosedForm,
    ))
}

/// Additive-noise Shannon form log2(1 + sigma_s^2 / N^2) with
/// N^2 = sigma_c^2 / (1 - sigma_c^2/sigma_s^2), which makes it
/// identically equal to the closed form and gives N -> sigma_c for
/// sigma_c << sigma_s. The N value is carried in the result.
pub fn mi_shannon_additive(params: &BiphotonParams) -> Result<MiResult> {
    let sigma_s = params.single_photon_width();
    let sigma_c = params.conditional_width();
    if sigma_c >= sigma_s {
        return Err(Error::InvalidParameters(format!(
            "additive form requires sigma_c < sigma_s (got {sigma_c} >= {sigma_s})"
        )));
    }
    let ratio2 = (sigma_c / sigma_s).powi(2);
    let n2 = sigma_c * sigma_c / (1.0 - ratio2);
    let bits = (1.0 + sigma_s * sigma_s / n2).log2();
    Ok(MiResult {
        additive_noise: Some(n2.sqrt()),
        ..MiResult::bare(bits, MiKind::ShannonAdditive)
    })
}

/// Aggregation of per-angle information over a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAggregation {
    /// Literal sum of the per-angle values; scales with the angle count,
    /// which is always recorded alongside.
    Sum,
    /// Mean over the angle grid.
    Mean,
}

/// Per-angle partial information values of a sweep.
pub fn partial_mi(sweep: &PhiSweep) -> Result<Vec<MiResult>> {
    sweep.entries.iter().map(mi_discrete).collect()
}

/// Phase-aggregated information of a sweep.
pub fn mi_radon_full(sweep: &PhiSweep, aggregation: SweepAggregation) -> Result<MiResult> {
    if sweep.entries.is_empty() {
        return Err(Error::InvalidParameters("empty sweep".into()));
    }
    let partials = partial_mi(sweep)?;
    let sum: f64 = partials.iter().map(|r| r.bits).sum();
    let (bits, kind) = match aggregation {
        SweepAggregation::Sum => (sum, MiKind::RadonFullSum),
        SweepAggregation::Mean => (sum / sweep.m as f64, MiKind::RadonFullMean),
    };
    let first = &sweep.entries[0];
    Ok(MiResult {
        basis: Some(first.meta.basis),
        dimension: Some(first.dimension()),
        angles: Some(sweep.m),
        shots: first.meta.shots,
        ..MiResult::bare(bits, kind)
    })
}

/// Mutual information of a reconstructed grid treated as a joint
/// distribution over its two axes. Negative values (inverse-transform
/// ringing) are clamped to zero before renormalization and the clamped
/// mass is reported.
pub fn mi_reconstructed_grid(grid: &Grid2D) -> Result<MiResult> {
    let n = grid.n();
    let mut clamped = 0.0;
    let mut joint = Vec::with_capacity(n * n);
    for &v in grid.values() {
        if v < 0.0 {
            clamped -= v;
            joint.push(0.0);
        } else {
            joint.push(v);
        }
    }
    let total: f64 = joint.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedDistribution);
    }
    for v in &mut joint {
        *v /= total;
    }
    let mut pa = vec![0.0; n];
    let mut pb = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let p = joint[i * n + j];
            pa[i] += p;
            pb[j] += p;
        }
    }
    let bits = (entropy_bits(pa.into_iter()) + entropy_bits(pb.into_iter())
        - entropy_bits(joint.into_iter()))
    .max(0.0);
    Ok(MiResult {
        dimension: Some(n),
        clamped_mass: Some(clamped),
        ..MiResult::bare(bits, MiKind::RadonReconstructed)
    })
}

/// Information cap of a d-outcome measurement: log2(d) bits.
pub fn theoretical_max(d: usize) -> f64 {
    (d as f64).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biphoton::{covariance_from_params, invert_widths};
    use crate::measurement::{
        bin_joint_probabilities, phi_sweep, sample_from_probabilities, DetectorConfig, HistogramMeta,
        SweepFrame,
    };
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn hist_from_cells(d: usize, cells: Vec<f64>, overflow: f64) -> CoincidenceHistogram {
        CoincidenceHistogram::from_parts(
            HistogramMeta {
                phi: 0.0,
                basis: Basis::Position,
                dimension: d,
                half_range: 1.0,
                shots: None,
                seed: None,
            },
            cells,
            overflow,
        )
    }

    fn section_state() -> crate::biphoton::GaussianState4 {
        let (w1, w2) = invert_widths(1500.0, 40.0).unwrap();
        covariance_from_params(&BiphotonParams::new(w1, w2, 325.0).unwrap())
    }

    #[test]
    fn independent_marginals_have_zero_information() {
        let pa = [0.1, 0.2, 0.3, 0.4];
        let pb = [0.4, 0.3, 0.2, 0.1];
        let mut cells = vec![0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                cells[i * 4 + j] = pa[i] * pb[j];
            }
        }
        let mi = mi_discrete(&hist_from_cells(4, cells, 0.0)).unwrap();
        assert_abs_diff_eq!(mi.bits, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn uniform_diagonal_reaches_log2_d() {
        for d in [2usize, 5, 16] {
            let mut cells = vec![0.0; d * d];
            for i in 0..d {
                cells[i * d + i] = 1.0 / d as f64;
            }
            let mi = mi_discrete(&hist_from_cells(d, cells, 0.0)).unwrap();
            assert_abs_diff_eq!(mi.bits, (d as f64).log2(), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_by_two_reference_value() {
        // Frozen from independent entropy evaluation:
        // H(A) = H(B) = 1, H(AB) = 1.7219280948873623.
        let mi = mi_discrete(&hist_from_cells(2, vec![0.4, 0.1, 0.1, 0.4], 0.0)).unwrap();
        assert_abs_diff_eq!(mi.bits, 0.2780719051126377, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_histogram_is_rejected() {
        assert!(matches!(
            mi_discrete(&hist_from_cells(2, vec![0.0; 4], 0.0)),
            Err(Error::UndefinedDistribution)
        ));
    }

    #[test]
    fn count_mode_is_normalized() {
        let mut hist = hist_from_cells(2, vec![40.0, 10.0, 10.0, 40.0], 0.0);
        hist.meta.shots = Some(100);
        let mi = mi_discrete(&hist).unwrap();
        assert_abs_diff_eq!(mi.bits, 0.2780719051126377, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_reference_parameterization() {
        let (w1, w2) = invert_widths(1500.0, 40.0).unwrap();
        let params = BiphotonParams::new(w1, w2, 325.0).unwrap();
        let mi = mi_closed_form(&params).unwrap();
        assert_abs_diff_eq!(mi.bits, 10.457637380991762, epsilon = 1e-9);
        assert_abs_diff_eq!(mi.bits, 2.0 * 37.5f64.log2(), epsilon = 1e-9);
    }

    #[test]
    fn closed_form_power_of_two_ratio() {
        let (w1, w2) = invert_widths(100.0, 25.0).unwrap();
        let params = BiphotonParams::new(w1, w2, 325.0).unwrap();
        assert_abs_diff_eq!(mi_closed_form(&params).unwrap().bits, 4.0, epsilon = 1e-10);
    }

    #[test]
    fn shannon_additive_equals_closed_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let s = 10f64.powf(rng.gen_range(0.0..4.0));
            let c = s * rng.gen_range(1e-4..0.99);
            let (w1, w2) = invert_widths(s, c).unwrap();
            let params = BiphotonParams::new(w1, w2, 325.0).unwrap();
            let closed = mi_closed_form(&params).unwrap().bits;
            let additive = mi_shannon_additive(&params).unwrap().bits;
            assert_abs_diff_eq!(closed, additive, epsilon = 1e-12 * closed.max(1.0));
        }
    }

    #[test]
    fn additive_noise_approaches_conditional_width() {
        let (w1, w2) = invert_widths(1500.0, 40.0).unwrap();
        let params = BiphotonParams::new(w1, w2, 325.0).unwrap();
        let n = mi_shannon_additive(&params).unwrap().additive_noise.unwrap();
        let sigma_c = params.conditional_width();
        let ratio2 = (sigma_c / params.single_photon_width()).powi(2);
        assert!((n - sigma_c).abs() / sigma_c < ratio2 + 1e-12);
    }

    #[test]
    fn additive_form_at_sqrt_two_ratio_is_one_bit() {
        let c = 10.0;
        let s = 2f64.sqrt() * c;
        let (w1, w2) = invert_widths(s, c).unwrap();
        let params = BiphotonParams::new(w1, w2, 325.0).unwrap();
        let mi = mi_shannon_additive(&params).unwrap();
        assert_relative_eq!(mi.additive_noise.unwrap(), 2f64.sqrt() * c, max_relative = 1e-10);
        assert_abs_diff_eq!(mi.bits, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn theoretical_max_values() {
        assert_abs_diff_eq!(theoretical_max(1024), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(theoretical_max(900), 9.813781191217037, epsilon = 1e-12);
        assert_abs_diff_eq!(theoretical_max(2), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_angle_aggregates_collapse_to_standard_value() {
        let state = section_state();
        let config = DetectorConfig::auto(&state, 16, Basis::Position).unwrap();
        let sweep = phi_sweep(&state, &config, 1, None, 0, SweepFrame::CoRotating).unwrap();
        let i0 = mi_discrete(&sweep.entries[0]).unwrap().bits;
        let sum = mi_radon_full(&sweep, SweepAggregation::Sum).unwrap();
        let mean = mi_radon_full(&sweep, SweepAggregation::Mean).unwrap();
        assert_abs_diff_eq!(sum.bits, i0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean.bits, i0, epsilon = 1e-12);
        assert_eq!(sum.angles, Some(1));
    }

    #[test]
    fn mean_bounded_by_largest_partial() {
        let state = section_state();
        let config = DetectorConfig::auto(&state, 8, Basis::Position).unwrap();
        let sweep = phi_sweep(&state, &config, 5, None, 0, SweepFrame::FixedArmA).unwrap();
        let partials = partial_mi(&sweep).unwrap();
        let max = partials.iter().map(|r| r.bits).fold(0.0, f64::max);
        let mean = mi_radon_full(&sweep, SweepAggregation::Mean).unwrap().bits;
        assert!(mean <= max + 1e-12);
    }

    #[test]
    fn information_capped_by_outcome_count() {
        let state = section_state();
        for d in [2usize, 8, 32] {
            let config = DetectorConfig::auto(&state, d, Basis::Position).unwrap();
            let hist = bin_joint_probabilities(&state, &config).unwrap();
            let mi = mi_discrete(&hist).unwrap().bits;
            assert!(mi <= theoretical_max(d + 1));
            assert!(mi <= theoretical_max(d) + 1e-6, "d={d} mi={mi}");
        }
    }

    #[test]
    fn invariant_under_simultaneous_relabeling() {
        let cells = vec![0.3, 0.1, 0.05, 0.02, 0.25, 0.08, 0.1, 0.02, 0.08];
        let base = mi_discrete(&hist_from_cells(3, cells.clone(), 0.0)).unwrap().bits;
        // Swap labels 0 and 2 on both arms.
        let perm = [2usize, 1, 0];
        let mut permuted = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                permuted[perm[i] * 3 + perm[j]] = cells[i * 3 + j];
            }
        }
        let relabeled = mi_discrete(&hist_from_cells(3, permuted, 0.0)).unwrap().bits;
        assert_abs_diff_eq!(base, relabeled, epsilon = 1e-13);
    }

    #[test]
    fn refinement_does_not_decrease_information() {
        let state = section_state();
        let mut prev = 0.0;
        for d in [2usize, 4, 8, 16, 32, 64] {
            let config = DetectorConfig::new(
                d,
                4.0 * state.variance(0).sqrt(),
                Basis::Position,
                0.0,
            )
            .unwrap();
            let hist = bin_joint_probabilities(&state, &config).unwrap();
            let mi = mi_discrete(&hist).unwrap().bits;
            assert!(mi >= prev - 1e-10, "d={d}: {mi} < {prev}");
            prev = mi;
        }
    }

    #[test]
    fn plug_in_estimator_bias_is_positive() {
        let state = section_state();
        let config = DetectorConfig::auto(&state, 8, Basis::Position).unwrap();
        let exact_hist = bin_joint_probabilities(&state, &config).unwrap();
        let exact = mi_discrete(&exact_hist).unwrap().bits;
        let shots = 2000u64;
        let mean: f64 = (0..60)
            .map(|seed| {
                let sampled = sample_from_probabilities(&exact_hist, shots, seed).unwrap();
                mi_discrete(&sampled).unwrap().bits
            })
            .sum::<f64>()
            / 60.0;
        assert!(
            mean > exact,
            "sampled mean {mean} not above exact {exact}"
        );
    }
}
