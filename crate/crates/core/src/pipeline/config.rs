//! Run configuration: a flat key-value text format with dotted section
//! keys, chosen to be diff-friendly and free of schema ambiguity. The
//! canonical serialization is also the input to the provenance hash, so
//! the hash changes exactly when a config field changes.

use crate::biphoton::{invert_widths, BiphotonParams};
use crate::measurement::SweepFrame;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// State parameterization: direct widths or measured widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StateSpec {
    Widths { w1: f64, w2: f64 },
    Measured { sigma_s: f64, sigma_c: f64 },
}

/// Detector window policy per basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HalfRange {
    /// Four standard deviations of the arm-A basis variable.
    Auto,
    Fixed(f64),
}

/// Grid resolution of the tomography stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TomoResolution {
    Disabled,
    /// Even-rounded detector dimension (at least 8).
    MatchDimension,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub state: StateSpec,
    pub wavelength_nm: f64,
    /// Detector dimensions to run, strictly increasing.
    pub dims: Vec<usize>,
    pub half_range_x: HalfRange,
    pub half_range_p: HalfRange,
    /// Angle count of the phase sweep.
    pub m: usize,
    /// None runs exact probabilities; Some(n) samples n shots per angle.
    pub shots: Option<u64>,
    pub frame: SweepFrame,
    pub tomo_n: TomoResolution,
    /// Angle count of the tomography stage; 0 reuses the sweep's m.
    pub tomo_angles: usize,
    /// Bootstrap resamples for the separability statistics.
    pub resamples: usize,
    pub seed: u64,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            state: StateSpec::Measured {
                sigma_s: 1500.0,
                sigma_c: 40.0,
            },
            wavelength_nm: 325.0,
            dims: vec![32],
            half_range_x: HalfRange::Auto,
            half_range_p: HalfRange::Auto,
            m: 8,
            shots: None,
            frame: SweepFrame::CoRotating,
            tomo_n: TomoResolution::MatchDimension,
            tomo_angles: 0,
            resamples: 200,
            seed: 0,
            output_dir: "out".into(),
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<BiphotonParams> {
        match self.state {
            StateSpec::Widths { w1, w2 } => BiphotonParams::new(w1, w2, self.wavelength_nm),
            StateSpec::Measured { sigma_s, sigma_c } => {
                let (w1, w2) = invert_widths(sigma_s, sigma_c)?;
                BiphotonParams::new(w1, w2, self.wavelength_nm)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.dims.is_empty() {
            return Err(Error::Config("detector.dims must not be empty".into()));
        }
        if self.dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "detector.dims must be strictly increasing".into(),
            ));
        }
        if self.dims.iter().any(|&d| d < 2) {
            return Err(Error::Config("detector dimensions must be >= 2".into()));
        }
        if self.m < 1 {
            return Err(Error::Config("sweep.m must be >= 1".into()));
        }
        if self.shots.is_some() && self.resamples < 100 {
            return Err(Error::Config(
                "analysis.resamples must be >= 100 for sampled runs".into(),
            ));
        }
        if let TomoResolution::Fixed(n) = self.tomo_n {
            if n < 8 || n % 2 != 0 {
                return Err(Error::Config(
                    "tomography.n must be an even number >= 8".into(),
                ));
            }
        }
        Ok(())
    }

    /// Tomography grid resolution for a given detector dimension, if the
    /// stage is enabled.
    pub fn tomo_resolution(&self, d: usize) -> Option<usize> {
        match self.tomo_n {
            TomoResolution::Disabled => None,
            TomoResolution::Fixed(n) => Some(n),
            TomoResolution::MatchDimension => {
                let n = d.max(8);
                Some(n + n % 2)
            }
        }
    }

    /// Canonical flat key-value serialization.
    pub fn serialize_flat(&self) -> String {
        let mut out = String::new();
        match self.state {
            StateSpec::Measured { sigma_s, sigma_c } => {
                out.push_str(&format!("state.sigmaS = {sigma_s}\n"));
                out.push_str(&format!("state.sigmaC = {sigma_c}\n"));
            }
            StateSpec::Widths { w1, w2 } => {
                out.push_str(&format!("state.w1 = {w1}\n"));
                out.push_str(&format!("state.w2 = {w2}\n"));
            }
        }
        out.push_str(&format!("state.wavelengthNm = {}\n", self.wavelength_nm));
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!("detector.dims = {}\n", dims.join(",")));
        let hr = |h: HalfRange| match h {
            HalfRange::Auto => "auto".to_string(),
            HalfRange::Fixed(v) => format!("{v}"),
        };
        out.push_str(&format!("detector.halfRangeX = {}\n", hr(self.half_range_x)));
        out.push_str(&format!("detector.halfRangeP = {}\n", hr(self.half_range_p)));
        out.push_str(&format!("sweep.m = {}\n", self.m));
        out.push_str(&format!(
            "sweep.shots = {}\n",
            self.shots.map_or("exact".to_string(), |s| s.to_string())
        ));
        out.push_str(&format!(
            "sweep.frame = {}\n",
            match self.frame {
                SweepFrame::CoRotating => "corotating",
                SweepFrame::FixedArmA => "fixedarma",
            }
        ));
        out.push_str(&format!(
            "tomography.n = {}\n",
            match self.tomo_n {
                TomoResolution::Disabled => "0".to_string(),
                TomoResolution::MatchDimension => "auto".to_string(),
                TomoResolution::Fixed(n) => n.to_string(),
            }
        ));
        out.push_str(&format!("tomography.angles = {}\n", self.tomo_angles));
        out.push_str(&format!("analysis.resamples = {}\n", self.resamples));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("output.dir = {}\n", self.output_dir));
        out
    }

    /// Parse the flat key-value format; `#` starts a comment.
    pub fn parse_flat(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut saw_seed = false;
        let mut sigma_s = None;
        let mut sigma_c = None;
        let mut w1 = None;
        let mut w2 = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::Config(format!("line {}: bad {what}: '{value}'", lineno + 1));
            let parse_f64 = || value.parse::<f64>().map_err(|_| bad("number"));
            let parse_usize = || value.parse::<usize>().map_err(|_| bad("integer"));
            match key {
                "state.sigmaS" => sigma_s = Some(parse_f64()?),
                "state.sigmaC" => sigma_c = Some(parse_f64()?),
                "state.w1" => w1 = Some(parse_f64()?),
                "state.w2" => w2 = Some(parse_f64()?),
                "state.wavelengthNm" => cfg.wavelength_nm = parse_f64()?,
                "detector.dims" => {
                    cfg.dims = value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>().map_err(|_| bad("dimension list")))
                        .collect::<Result<_>>()?;
                }
                "detector.halfRangeX" | "detector.halfRangeP" => {
                    let hr = if value == "auto" {
                        HalfRange::Auto
                    } else {
                        HalfRange::Fixed(parse_f64()?)
                    };
                    if key.ends_with('X') {
                        cfg.half_range_x = hr;
                    } else {
                        cfg.half_range_p = hr;
                    }
                }
                "sweep.m" => cfg.m = parse_usize()?,
                "sweep.shots" => {
                    cfg.shots = if value == "exact" {
                        None
                    } else {
                        Some(value.parse::<u64>().map_err(|_| bad("shot count"))?)
                    };
                }
                "sweep.frame" => {
                    cfg.frame = match value {
                        "corotating" => SweepFrame::CoRotating,
                        "fixedarma" => SweepFrame::FixedArmA,
                        _ => return Err(bad("sweep frame")),
                    };
                }
                "tomography.n" => {
                    cfg.tomo_n = match value {
                        "auto" => TomoResolution::MatchDimension,
                        "0" => TomoResolution::Disabled,
                        _ => TomoResolution::Fixed(parse_usize()?),
                    };
                }
                "tomography.angles" => cfg.tomo_angles = parse_usize()?,
                "analysis.resamples" => cfg.resamples = parse_usize()?,
                "seed" => {
                    cfg.seed = value.parse::<u64>().map_err(|_| bad("seed"))?;
                    saw_seed = true;
                }
                "output.dir" => cfg.output_dir = value.to_string(),
                _ => return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        cfg.state = match (sigma_s, sigma_c, w1, w2) {
            (Some(s), Some(c), None, None) => StateSpec::Measured {
                sigma_s: s,
                sigma_c: c,
            },
            (None, None, Some(a), Some(b)) => StateSpec::Widths { w1: a, w2: b },
            (None, None, None, None) => cfg.state,
            _ => {
                return Err(Error::Config(
                    "state needs either sigmaS+sigmaC or w1+w2, not a mixture".into(),
                ))
            }
        };
        if cfg.shots.is_some() && !saw_seed {
            return Err(Error::Config(
                "seed is mandatory when sweep.shots is finite".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply a `key=value` override on top of this config.
    pub fn with_override(&self, assignment: &str) -> Result<RunConfig> {
        let mut text = self.serialize_flat();
        text.push_str(assignment);
        text.push('\n');
        RunConfig::parse_flat(&text)
    }

    /// Provenance hash over the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.serialize_flat().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
