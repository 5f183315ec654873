//! Forward Radon transform and the direct-Fourier inversion chain.
//!
//! Conventions: a [`Grid2D`] samples a function at the centers of n x n
//! cells over [-half_width, +half_width]^2. All tomography arithmetic
//! runs in normalized coordinates (the domain mapped to [-1, 1]^2), so
//! sinogram values are line integrals in normalized arc length, offsets
//! are signed and normalized to [-1, 1), and `half_width` rides along as
//! metadata that restores physical scales on import/export.
//!
//! The projection DFT samples radial frequencies r_f = f/2, f = 0..n-1;
//! bins above n/2 alias to negative radii, so the m angles in [0, pi)
//! together cover the full frequency disk. Offsets are signed rather
//! than the half-open [0, 1) grid: a transform over half offsets cannot
//! represent a function without reflection bookkeeping, while the
//! unit-disk restriction is preserved either way.

use crate::{Error, Result};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Square grid of samples at cell centers over
/// [-half_width, +half_width]^2, row-major with the first index along x
/// and the second along p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    n: usize,
    half_width: f64,
    values: Vec<f64>,
}

impl Grid2D {
    pub fn from_values(n: usize, half_width: f64, values: Vec<f64>) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidParameters(format!(
                "grid needs n >= 8, got {n}"
            )));
        }
        if values.len() != n * n {
            return Err(Error::InvalidParameters(format!(
                "grid expects {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::InvalidParameters(
                "grid half width must be positive".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid values".into()));
        }
        Ok(Self {
            n,
            half_width,
            values,
        })
    }

    /// Sample a function of the physical coordinates at the cell centers.
    pub fn sample(n: usize, half_width: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let centers: Vec<f64> = (0..n)
            .map(|i| (-1.0 + (2.0 * i as f64 + 1.0) / n as f64) * half_width)
            .collect();
        let mut values = Vec::with_capacity(n * n);
        for &x in &centers {
            for &p in &centers {
                values.push(f(x, p));
            }
        }
        Self::from_values(n, half_width, values)
    }

    /// Unit-mass isotropic Gaussian phantom with physical width `sigma`.
    pub fn gaussian_phantom(n: usize, half_width: f64, sigma: f64) -> Result<Self> {
        let g = crate::biphoton::GaussianPhaseDensity::new(sigma)?;
        Self::sample(n, half_width, |x, p| g.density(x, p))
    }

    /// Unit-value disk of physical radius `radius` centered at the origin.
    pub fn disk_phantom(n: usize, half_width: f64, radius: f64) -> Result<Self> {
        Self::sample(n, half_width, |x, p| {
            if x * x + p * p <= radius * radius {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.n + ip]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / (self.n * self.n) as f64
    }

    /// Integral in the normalized measure (domain mapped to [-1, 1]^2).
    pub fn integral_normalized(&self) -> f64 {
        let cell = 2.0 / self.n as f64;
        self.values.iter().sum::<f64>() * cell * cell
    }

    /// Bilinear interpolation at normalized coordinates; zero outside the
    /// domain.
    fn sample_normalized(&self, x: f64, p: f64) -> f64 {
        let n = self.n as f64;
        // Cell-center i sits at u = i in index space.
        let u = (x + 1.0) * 0.5 * n - 0.5;
        let v = (p + 1.0) * 0.5 * n - 0.5;
        if u < -1.0 || v < -1.0 || u > n || v > n {
            return 0.0;
        }
        let i0 = u.floor();
        let j0 = v.floor();
        let fu = u - i0;
        let fv = v - j0;
        let mut acc = 0.0;
        for (di, wu) in [(0i64, 1.0 - fu), (1, fu)] {
            for (dj, wv) in [(0i64, 1.0 - fv), (1, fv)] {
                let i = i0 as i64 + di;
                let j = j0 as i64 + dj;
                if i >= 0 && j >= 0 && (i as usize) < self.n && (j as usize) < self.n {
                    acc += wu * wv * self.values[i as usize * self.n + j as usize];
                }
            }
        }
        acc
    }

    /// CSV body with header `i,j,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,value\n");
        for i in 0..self.n {
            for j in 0..self.n {
                out.push_str(&format!("{},{},{}\n", i, j, self.values[i * self.n + j]));
            }
        }
        out
    }

    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "domainHalfWidth": self.half_width,
        })
    }
}

/// Relative L2 distance of `a` from the reference `b`.
pub fn relative_l2_error(a: &Grid2D, b: &Grid2D) -> f64 {
    assert_eq!(a.n, b.n, "grids must share a resolution");
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    (num / den).sqrt()
}

/// Line integrals of a grid: m angles phi_j = j pi / m (j = 0..m-1) by n
/// signed normalized offsets rho_l = -1 + 2l/n (l = 0..n-1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    m: usize,
    n: usize,
    half_width: f64,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_offsets(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.m)
            .map(|j| j as f64 * std::f64::consts::PI / self.m as f64)
            .collect()
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.n)
            .map(|l| -1.0 + 2.0 * l as f64 / self.n as f64)
            .collect()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn from_values(m: usize, n: usize, half_width: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * n {
            return Err(Error::InvalidParameters(format!(
                "sinogram expects {} values, got {}",
                m * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sinogram values".into()));
        }
        Ok(Self {
            m,
            n,
            half_width,
            values,
        })
    }

    /// CSV body with header `j,l,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,l,value\n");
        for j in 0..self.m {
            for l in 0..self.n {
                out.push_str(&format!("{},{},{}\n", j, l, self.values[j * self.n + l]));
            }
        }
        out
    }

    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::json!({
            "m": self.m,
            "n": self.n,
            "domainHalfWidth": self.half_width,
            "offsetConvention": "signed-unit",
        })
    }
}

/// Forward Radon transform by equal-step sampling along each line with
/// bilinear interpolation; step is half a grid cell and samples outside
/// the domain contribute zero.
pub fn radon_forward(grid: &Grid2D, m: usize, n_offsets: usize) -> Result<Sinogram> {
    if m < 1 || n_offsets < 2 {
        return Err(Error::InvalidParameters(format!(
            "radon transform needs m >= 1 and n >= 2 (got m={m}, n={n_offsets})"
        )));
    }
    let step = 1.0 / grid.n as f64; // half a cell in normalized units
    let reach = std::f64::consts::SQRT_2;
    let samples = (2.0 * reach / step).ceil() as usize;
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let phi = j as f64 * std::f64::consts::PI / m as f64;
            let (s, c) = phi.sin_cos();
            (0..n_offsets)
                .map(|l| {
                    let rho = -1.0 + 2.0 * l as f64 / n_offsets as f64;
                    let mut acc = 0.0;
                    for k in 0..samples {
                        let t = -reach + (k as f64 + 0.5) * step;
                        acc += grid.sample_normalized(rho * c - t * s, rho * s + t * c);
                    }
                    acc * step
                })
                .collect()
        })
        .collect();
    Sinogram::from_values(m, n_offsets, grid.half_width, rows.concat())
}

/// Radon transform of the unit-mass 2-D Gaussian of width `sigma` at
/// offset `rho`: exp(-rho^2 / (2 sigma^2)) / (sqrt(2 pi) sigma).
///
/// This is the brute-force-verified normalization; integrating the
/// result over all offsets returns the unit mass.
pub fn radon_gaussian_analytic(sigma: f64, rho: f64) -> Result<f64> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameters(format!(
            "gaussian radon transform needs sigma > 0, got {sigma}"
        )));
    }
    Ok((-0.5 * (rho / sigma).powi(2)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma))
}

/// Normalization conventions of the projection DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DftMode {
    /// (1/n) sum over the signed offset grid; the default for the
    /// reconstruction chain.
    Standard,
    /// Trapezoidal variant over the unsigned offset grid rho_l = l/n with
    /// an overall factor 2. Kept for comparison; the factor breaks the
    /// forward/inverse round trip, so it never feeds reconstruction.
    TrapezoidUnsigned,
}

impl std::fmt::Display for DftMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DftMode::Standard => write!(f, "standard"),
            DftMode::TrapezoidUnsigned => write!(f, "trapezoid-unsigned"),
        }
    }
}

/// DFT of one sinogram row at half-integer radial frequencies r_f = f/2,
/// f = 0..n-1.
pub fn projection_dft(row: &[f64], mode: DftMode) -> Vec<Complex64> {
    let n = row.len();
    let mut planner = FftPlanner::new();
    match mode {
        DftMode::Standard => {
            // exp(-2 pi i (f/2) rho_l) over rho_l = -1 + 2l/n collapses to
            // (-1)^f times the plain DFT bin.
            let fft = planner.plan_fft_forward(n);
            let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.process(&mut buf);
            buf.iter_mut().enumerate().for_each(|(f, v)| {
                let sign = if f % 2 == 0 { 1.0 } else { -1.0 };
                *v *= sign / n as f64;
            });
            buf
        }
        DftMode::TrapezoidUnsigned => {
            // Half-integer frequencies over [0, 1) come out of a
            // zero-padded length-2n transform.
            let fft = planner.plan_fft_forward(2 * n);
            let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
            for (l, &v) in row.iter().enumerate() {
                buf[l] = Complex64::new(v, 0.0);
            }
            fft.process(&mut buf);
            buf.truncate(n);
            buf.iter_mut().for_each(|v| *v *= 2.0 / n as f64);
            buf
        }
    }
}

/// Polar frequency samples chi(r_f, phi_j) of a sinogram.
#[derive(Debug, Clone)]
pub struct PolarSpectrum {
    m: usize,
    n: usize,
    half_width: f64,
    /// Row-major [angle][frequency bin]; bins above n/2 alias to
    /// negative radii.
    values: Vec<Complex64>,
}

impl PolarSpectrum {
    pub fn from_sinogram(sinogram: &Sinogram) -> Self {
        let rows: Vec<Vec<Complex64>> = (0..sinogram.m)
            .into_par_iter()
            .map(|j| projection_dft(sinogram.row(j), DftMode::Standard))
            .collect();
        PolarSpectrum {
            m: sinogram.m,
            n: sinogram.n,
            half_width: sinogram.half_width,
            values: rows.concat(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, j: usize, f: usize) -> Complex64 {
        self.values[j * self.n + f]
    }

    /// Signed radial position of frequency bin f in Cartesian bin units.
    pub fn signed_radius(&self, f: usize) -> i64 {
        if f < self.n / 2 {
            f as i64
        } else {
            f as i64 - self.n as i64
        }
    }
}

/// Polar samples regridded onto the Cartesian frequency plane, centered
/// layout with indices k + n/2 for k in [-n/2, n/2).
#[derive(Debug, Clone)]
pub struct CartesianSpectrum {
    n: usize,
    values: Vec<Complex64>,
    covered: Vec<bool>,
}

impl CartesianSpectrum {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, a: usize, b: usize) -> Complex64 {
        self.values[a * self.n + b]
    }

    pub fn is_covered(&self, a: usize, b: usize) -> bool {
        self.covered[a * self.n + b]
    }

    pub fn coverage_fraction(&self) -> f64 {
        self.covered.iter().filter(|&&c| c).count() as f64 / (self.n * self.n) as f64
    }
}

/// Scatter every polar sample to its four nearest Cartesian nodes with
/// bilinear weights; each node averages its accumulated contributions by
/// total weight. Nodes that receive nothing stay zero and are masked.
pub fn polar_to_cartesian(spectrum: &PolarSpectrum) -> CartesianSpectrum {
    let n = spectrum.n;
    let half = (n / 2) as f64;
    let mut num = vec![Complex64::new(0.0, 0.0); n * n];
    let mut den = vec![0.0f64; n * n];
    // Accumulation runs in a fixed (angle, frequency) order so the
    // floating-point result is bit-stable.
    for j in 0..spectrum.m {
        let phi = j as f64 * std::f64::consts::PI / spectrum.m as f64;
        let (s, c) = phi.sin_cos();
        for f in 0..n {
            let r = spectrum.signed_radius(f) as f64;
            let u = r * c + half;
            let v = r * s + half;
            let value = spectrum.value(j, f);
            let i0 = u.floor();
            let j0 = v.floor();
            let fu = u - i0;
            let fv = v - j0;
            for (di, wu) in [(0i64, 1.0 - fu), (1, fu)] {
                for (dj, wv) in [(0i64, 1.0 - fv), (1, fv)] {
                    let a = i0 as i64 + di;
                    let b = j0 as i64 + dj;
                    let w = wu * wv;
                    if w > 0.0 && a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                        let idx = a as usize * n + b as usize;
                        num[idx] += value * w;
                        den[idx] += w;
                    }
                }
            }
        }
    }
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    let mut covered = vec![false; n * n];
    for idx in 0..n * n {
        if den[idx] > 0.0 {
            values[idx] = num[idx] / den[idx];
            covered[idx] = true;
        }
    }
    CartesianSpectrum { n, values, covered }
}

/// Recover the grid from a sinogram: projection DFT per angle, polar to
/// Cartesian regridding, then an inverse 2-D FFT; the real part is the
/// reconstruction.
pub fn reconstruct(sinogram: &Sinogram) -> Result<Grid2D> {
    if sinogram.m < 2 {
        return Err(Error::InsufficientAngles(sinogram.m));
    }
    let n = sinogram.n;
    if n % 2 != 0 || n < 8 {
        return Err(Error::InvalidParameters(format!(
            "reconstruction needs an even offset count >= 8, got {n}"
        )));
    }
    let cart = polar_to_cartesian(&PolarSpectrum::from_sinogram(sinogram));

    // Cell centers sit half a cell off the domain edge, which shows up as
    // a half-bin phase ramp; the alternating sign recenters the domain
    // from [0, 2) to [-1, 1).
    let phase = |k: i64| -> Complex64 {
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let (s, c) = (std::f64::consts::PI * k as f64 / n as f64).sin_cos();
        Complex64::new(c * sign, s * sign)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    let half = (n / 2) as i64;
    for a in 0..n {
        let k1 = a as i64 - half;
        let b1 = k1.rem_euclid(n as i64) as usize;
        for b in 0..n {
            let k2 = b as i64 - half;
            let b2 = k2.rem_euclid(n as i64) as usize;
            buf[b1 * n + b2] = cart.value(a, b) * phase(k1) * phase(k2);
        }
    }
    ifft2_unnormalized(&mut buf, n);
    let values: Vec<f64> = buf.iter().map(|v| 0.5 * v.re).collect();
    Grid2D::from_values(n, sinogram.half_width, values)
}

fn ifft2_unnormalized(buf: &mut [Complex64], n: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    // Transpose, transform the other axis, transpose back.
    transpose_square(buf, n);
    for row in buf.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    transpose_square(buf, n);
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Compare one projection-slice pair: (a) the projection DFT of the
/// forward-Radon row at r_f and (b) the direct 2-D Fourier sum of the
/// grid at (lambda1, lambda2) = r_f (cos phi_j, sin phi_j), normalized to
/// the same offset-measure convention. Returns (a, b, |a - b|).
pub fn slice_theorem_check(
    grid: &Grid2D,
    m: usize,
    n_offsets: usize,
    j: usize,
    f: usize,
) -> Result<(Complex64, Complex64, f64)> {
    let sinogram = radon_forward(grid, m, n_offsets)?;
    let checker = SliceTheoremCheck::new(grid, sinogram);
    Ok(checker.check(j, f))
}

/// Precomputed state for checking many (angle, frequency) pairs of one
/// grid without redoing the forward transform.
pub struct SliceTheoremCheck<'a> {
    grid: &'a Grid2D,
    spectra: Vec<Vec<Complex64>>,
    m: usize,
}

impl<'a> SliceTheoremCheck<'a> {
    pub fn new(grid: &'a Grid2D, sinogram: Sinogram) -> Self {
        let spectra = (0..sinogram.m())
            .map(|j| projection_dft(sinogram.row(j), DftMode::Standard))
            .collect();
        SliceTheoremCheck {
            grid,
            spectra,
            m: sinogram.m(),
        }
    }

    pub fn check(&self, j: usize, f: usize) -> (Complex64, Complex64, f64) {
        let a = self.spectra[j][f];
        let phi = j as f64 * std::f64::consts::PI / self.m as f64;
        let r = 0.5 * f as f64;
        let (s, c) = phi.sin_cos();
        let b = self.direct_fourier(r * c, r * s);
        (a, b, (a - b).norm())
    }

    /// Direct Fourier sum over the grid cells, separable along the two
    /// axes; carries the factor 1/2 that matches the projection DFT's
    /// (1/n)-sum over the offset grid of length 2.
    fn direct_fourier(&self, l1: f64, l2: f64) -> Complex64 {
        let n = self.grid.n();
        let cell = 2.0 / n as f64;
        let centers: Vec<f64> = (0..n)
            .map(|i| -1.0 + (2.0 * i as f64 + 1.0) / n as f64)
            .collect();
        let kernel = |l: f64| -> Vec<Complex64> {
            centers
                .iter()
                .map(|&x| {
                    let (s, c) = (-2.0 * std::f64::consts::PI * l * x).sin_cos();
                    Complex64::new(c, s)
                })
                .collect()
        };
        let kx = kernel(l1);
        let kp = kernel(l2);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                row += kp[j] * self.grid.value(i, j);
            }
            acc += kx[i] * row;
        }
        acc * (0.5 * cell * cell)
    }
}
