//! The position-momentum entangled Gaussian biphoton state.
//!
//! The state is stored as a zero-mean Gaussian covariance matrix over the
//! ordered quadratures (xA, pA, xB, pB) rather than as sampled
//! wavefunctions: both basis wavefunctions are exactly Gaussian, so every
//! downstream marginal and bin probability is computable without
//! discretizing the amplitude. Momentum is in inverse length units
//! (hbar = 1); the wavelength is carried as metadata only.
//!
//! Note the amplitude prefactor `1/(2 pi w1 w2)` does not L2-normalize
//! the wavefunction; all probability densities derived from it are
//! explicitly renormalized by their computed mass.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Quadrature ordering used throughout: xA, pA, xB, pB.
pub const Q_XA: usize = 0;
pub const Q_PA: usize = 1;
pub const Q_XB: usize = 2;
pub const Q_PB: usize = 3;

/// Width parameters of the entangled Gaussian pair.
///
/// `w1` is half the Gaussian width in the x1 - x2 direction, `w2` the
/// width in the x1 + x2 direction, both in micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiphotonParams {
    pub w1: f64,
    pub w2: f64,
    /// Source wavelength in nanometers. Metadata only; enters no
    /// computation.
    pub wavelength_nm: f64,
}

impl BiphotonParams {
    pub fn new(w1: f64, w2: f64, wavelength_nm: f64) -> Result<Self> {
        if !(w1.is_finite() && w2.is_finite() && wavelength_nm.is_finite()) {
            return Err(Error::NonFinite("biphoton width parameters".into()));
        }
        if w1 <= 0.0 || w2 <= 0.0 || wavelength_nm <= 0.0 {
            return Err(Error::InvalidParameters(format!(
                "widths and wavelength must be positive (w1={w1}, w2={w2}, wavelength={wavelength_nm})"
            )));
        }
        Ok(Self { w1, w2, wavelength_nm })
    }

    /// Measured single-photon width: sigma_s^2 = w2^2 + (w1/2)^2.
    pub fn single_photon_width(&self) -> f64 {
        (self.w2 * self.w2 + 0.25 * self.w1 * self.w1).sqrt()
    }

    /// Conditional width: sigma_c^2 = 4 w1^2 w2^2 / (4 w2^2 + w1^2).
    pub fn conditional_width(&self) -> f64 {
        let (w12, w22) = (self.w1 * self.w1, self.w2 * self.w2);
        (4.0 * w12 * w22 / (4.0 * w22 + w12)).sqrt()
    }

    /// Amplitude prefactor 1/(2 pi w1 w2). Kept as a derived quantity;
    /// see the module note on normalization.
    pub fn norm_prefactor(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.w1 * self.w2)
    }
}

/// Recover (w1, w2) from measured single-photon and conditional widths.
///
/// With A = w1^2/4 and B = w2^2, the forward maps reduce to
/// A + B = sigma_s^2 and A*B = sigma_c^2 sigma_s^2 / 4, so A and B are
/// the two roots of z^2 - sigma_s^2 z + sigma_c^2 sigma_s^2/4 = 0, with
/// B the larger root.
pub fn invert_widths(sigma_s: f64, sigma_c: f64) -> Result<(f64, f64)> {
    if !(sigma_s.is_finite() && sigma_c.is_finite()) {
        return Err(Error::NonFinite("width inversion inputs".into()));
    }
    if sigma_c <= 0.0 || sigma_c >= sigma_s {
        return Err(Error::InvalidParameters(format!(
            "width inversion requires 0 < sigma_c < sigma_s (got sigma_c={sigma_c}, sigma_s={sigma_s})"
        )));
    }
    let s2 = sigma_s * sigma_s;
    let product = sigma_c * sigma_c * s2 / 4.0;
    let disc = (s2 * s2 - 4.0 * product).sqrt();
    let b = 0.5 * (s2 + disc);
    // Smaller root via the product to avoid cancellation.
    let a = product / b;
    Ok((2.0 * a.sqrt(), b.sqrt()))
}

/// Position-basis amplitude of the pair.
pub fn wavefunction_position(params: &BiphotonParams, x_a: f64, x_b: f64) -> Result<f64> {
    if !(x_a.is_finite() && x_b.is_finite()) {
        return Err(Error::NonFinite("position arguments".into()));
    }
    let diff = x_a - x_b;
    let sum = x_a + x_b;
    let e1 = -diff * diff / (4.0 * params.w1 * params.w1);
    let e2 = -sum * sum / (16.0 * params.w2 * params.w2);
    Ok(params.norm_prefactor() * (e1 + e2).exp())
}

/// Momentum-basis amplitude of the pair (hbar = 1, momenta in 1/um).
pub fn wavefunction_momentum(params: &BiphotonParams, p_a: f64, p_b: f64) -> Result<f64> {
    if !(p_a.is_finite() && p_b.is_finite()) {
        return Err(Error::NonFinite("momentum arguments".into()));
    }
    let (w1, w2) = (params.w1, params.w2);
    let scale = (4.0 * w1 * w2).powi(2) * params.norm_prefactor();
    let diff = p_a - p_b;
    let sum = p_a + p_b;
    let e1 = -w1 * w1 * diff * diff;
    let e2 = -4.0 * w2 * w2 * sum * sum;
    Ok(scale * (e1 + e2).exp())
}

/// Zero-mean Gaussian over the four quadratures (xA, pA, xB, pB), stored
/// as its symmetric positive-definite covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState4 {
    cov: [[f64; 4]; 4],
}

impl GaussianState4 {
    pub fn from_covariance(cov: [[f64; 4]; 4]) -> Result<Self> {
        for r in 0..4 {
            for c in 0..4 {
                if !cov[r][c].is_finite() {
                    return Err(Error::NonFinite("covariance entry".into()));
                }
                let scale = cov[r][r].abs().max(cov[c][c].abs()).max(1.0);
                if (cov[r][c] - cov[c][r]).abs() > 1e-9 * scale {
                    return Err(Error::InvalidParameters(format!(
                        "covariance not symmetric at ({r},{c})"
                    )));
                }
            }
        }
        let state = Self { cov };
        if !state.is_positive_definite() {
            return Err(Error::InvalidParameters(
                "covariance not positive definite".into(),
            ));
        }
        Ok(state)
    }

    pub fn covariance(&self) -> &[[f64; 4]; 4] {
        &self.cov
    }

    pub fn variance(&self, q: usize) -> f64 {
        self.cov[q][q]
    }

    pub fn covariance_entry(&self, a: usize, b: usize) -> f64 {
        self.cov[a][b]
    }

    /// Cholesky-based check with a relative tolerance on the pivots.
    pub fn is_positive_definite(&self) -> bool {
        cholesky4(&self.cov).is_some()
    }

    pub fn determinant(&self) -> f64 {
        match cholesky4(&self.cov) {
            Some(l) => (l[0][0] * l[1][1] * l[2][2] * l[3][3]).powi(2),
            None => det4(&self.cov),
        }
    }

    /// 2x2 marginal covariance of the quadrature pair (a, b).
    pub fn marginal_pair(&self, a: usize, b: usize) -> [[f64; 2]; 2] {
        [
            [self.cov[a][a], self.cov[a][b]],
            [self.cov[b][a], self.cov[b][b]],
        ]
    }

    fn congruence(&self, m: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
        // M * S * M^T
        let mut ms = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                ms[r][c] = (0..4).map(|k| m[r][k] * self.cov[k][c]).sum();
            }
        }
        let mut out = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                out[r][c] = (0..4).map(|k| ms[r][k] * m[c][k]).sum();
            }
        }
        // Re-symmetrize to scrub rounding asymmetry.
        for r in 0..4 {
            for c in (r + 1)..4 {
                let avg = 0.5 * (out[r][c] + out[c][r]);
                out[r][c] = avg;
                out[c][r] = avg;
            }
        }
        out
    }

    /// Quadrature rotation of a single arm; `arm_offset` is 0 for arm A
    /// and 2 for arm B. x' = x cos(phi) + p sin(phi),
    /// p' = -x sin(phi) + p cos(phi).
    pub(crate) fn rotate_arm(&self, arm_offset: usize, phi: f64) -> GaussianState4 {
        let (s, c) = phi.sin_cos();
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            m[i][i] = 1.0;
        }
        let (x, p) = (arm_offset, arm_offset + 1);
        m[x][x] = c;
        m[x][p] = s;
        m[p][x] = -s;
        m[p][p] = c;
        GaussianState4 {
            cov: self.congruence(&m),
        }
    }
}

/// Build the 4x4 covariance from width parameters.
///
/// In the position pair, Var(xA) = Var(xB) = sigma_s^2 and
/// Cov(xA, xB) = (4 w2^2 - w1^2)/4; in the momentum pair,
/// Var(pA) = Var(pB) = 1/(16 w1^2) + 1/(64 w2^2) and
/// Cov(pA, pB) = 1/(64 w2^2) - 1/(16 w1^2). Cross blocks are zero (the
/// amplitude is real), so each pair carries the full correlation.
pub fn covariance_from_params(params: &BiphotonParams) -> GaussianState4 {
    let (w12, w22) = (params.w1 * params.w1, params.w2 * params.w2);
    let var_x = w2b_var_x(w12, w22);
    let cov_x = (4.0 * w22 - w12) / 4.0;
    let var_p = 1.0 / (16.0 * w12) + 1.0 / (64.0 * w22);
    let cov_p = 1.0 / (64.0 * w22) - 1.0 / (16.0 * w12);
    let mut cov = [[0.0; 4]; 4];
    cov[Q_XA][Q_XA] = var_x;
    cov[Q_XB][Q_XB] = var_x;
    cov[Q_XA][Q_XB] = cov_x;
    cov[Q_XB][Q_XA] = cov_x;
    cov[Q_PA][Q_PA] = var_p;
    cov[Q_PB][Q_PB] = var_p;
    cov[Q_PA][Q_PB] = cov_p;
    cov[Q_PB][Q_PA] = cov_p;
    GaussianState4 { cov }
}

fn w2b_var_x(w12: f64, w22: f64) -> f64 {
    w22 + 0.25 * w12
}

/// Rotate arm B's quadratures by `phi`; arm A is untouched.
///
/// Angles outside [0, pi) are reduced mod pi (a covariance congruence is
/// invariant under the half-turn sign flip); the returned flag reports
/// that the input was normalized.
pub fn rotate_arm_b(state: &GaussianState4, phi: f64) -> (GaussianState4, bool) {
    let normalized = !(0.0..std::f64::consts::PI).contains(&phi);
    let phi = phi.rem_euclid(std::f64::consts::PI);
    (state.rotate_arm(Q_XB, phi), normalized)
}

/// Isotropic Gaussian density on the (x, p) phase plane, unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPhaseDensity {
    pub sigma: f64,
}

impl GaussianPhaseDensity {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::NonFinite("phase density sigma".into()));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidParameters(format!(
                "phase density sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn density(&self, x: f64, p: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (-(x * x + p * p) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
    }
}

fn cholesky4(a: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut l = [[0.0; 4]; 4];
    let scale = (0..4).map(|i| a[i][i].abs()).fold(0.0_f64, f64::max);
    for i in 0..4 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= scale * 1e-14 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn det4(a: &[[f64; 4]; 4]) -> f64 {
    // Laplace expansion; only used for non-PD diagnostics.
    let m = |r: [usize; 3], c: [usize; 3]| -> f64 {
        a[r[0]][c[0]] * (a[r[1]][c[1]] * a[r[2]][c[2]] - a[r[1]][c[2]] * a[r[2]][c[1]])
            - a[r[0]][c[1]] * (a[r[1]][c[0]] * a[r[2]][c[2]] - a[r[1]][c[2]] * a[r[2]][c[0]])
            + a[r[0]][c[2]] * (a[r[1]][c[0]] * a[r[2]][c[1]] - a[r[1]][c[1]] * a[r[2]][c[0]])
    };
    a[0][0] * m([1, 2, 3], [1, 2, 3]) - a[0][1] * m([1, 2, 3], [0, 2, 3])
        + a[0][2] * m([1, 2, 3], [0, 1, 3])
        - a[0][3] * m([1, 2, 3], [0, 1, 2])
}
