//! Direction-aware Fitts' law models.
//!
//! Movement time is modeled as `MT = a + b·ID` with the Shannon index of
//! difficulty `ID = log2(D/W + 1)`, fitted separately for each of the 16
//! angular bins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hexgeom::{angle_bin, N_BINS};

/// Intercept of the generic (population) pointing model, seconds.
pub const GENERIC_A: f64 = 0.127;
/// Slope of the generic pointing model, seconds per bit.
pub const GENERIC_B: f64 = 1.0 / 4.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementSample {
    pub distance: f64,
    /// `None` for zero-distance (re-click) samples.
    pub angle: Option<f64>,
    pub movement_time: f64,
    pub demanded_bin: usize,
    pub distance_class: u8,
}

impl MovementSample {
    /// The bin this sample is regressed in.
    pub fn bin(&self) -> usize {
        match self.angle {
            Some(angle) if self.distance > 0.0 => angle_bin(angle),
            _ => self.demanded_bin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittsBinModel {
    pub index: usize,
    #[serde(rename = "a_s")]
    pub a: f64,
    #[serde(rename = "b_s_per_bit")]
    pub b: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    #[serde(rename = "n")]
    pub n_samples: usize,
    #[serde(rename = "outliers")]
    pub outlier_count: usize,
    pub fitted: bool,
}

impl FittsBinModel {
    fn unfitted(index: usize, n_samples: usize) -> Self {
        FittsBinModel {
            index,
            a: 0.0,
            b: 0.0,
            r_squared: 0.0,
            n_samples,
            outlier_count: 0,
            fitted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalFittsModel {
    #[serde(rename = "key_width_px")]
    pub key_width: f64,
    pub bins: Vec<FittsBinModel>,
    #[serde(rename = "mean_intercept_s")]
    pub mean_intercept: f64,
    /// Set for models built from fixed constants rather than fitted data.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

/// Result of a per-bin fit, including which samples were flagged.
#[derive(Debug, Clone)]
pub struct BinFit {
    pub model: DirectionalFittsModel,
    /// Indices into the input sample list whose residual exceeds 3 residual SDs.
    pub outliers: Vec<usize>,
}

pub fn index_of_difficulty(distance: f64, key_width: f64) -> Result<f64> {
    if !(key_width > 0.0) {
        return Err(Error::invalid(format!("key width must be positive, got {key_width}")));
    }
    if !(distance >= 0.0) {
        return Err(Error::invalid(format!("distance must be nonnegative, got {distance}")));
    }
    Ok((distance / key_width + 1.0).log2())
}

struct Ols {
    a: f64,
    b: f64,
    r_squared: f64,
    residuals: Vec<f64>,
}

fn ols(xs: &[f64], ys: &[f64]) -> Option<Ols> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    // fewer than two distinct IDs
    if sxx <= 1e-12 * nf.max(1.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let b = sxy / sxx;
    let a = mean_y - b * mean_x;
    let residuals: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (a + b * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        // constant MT: no relationship with ID to speak of
        0.0
    };
    Some(Ols {
        a,
        b,
        r_squared,
        residuals,
    })
}

/// Fits `MT = a + b·ID` in each angular bin and flags (but keeps) outliers.
pub fn fit_bins_detailed(samples: &[MovementSample], key_width: f64) -> Result<BinFit> {
    if samples.is_empty() {
        return Err(Error::invalid("no movement samples to fit"));
    }
    if !(key_width > 0.0) {
        return Err(Error::invalid(format!("key width must be positive, got {key_width}")));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); N_BINS];
    for (i, s) in samples.iter().enumerate() {
        if s.demanded_bin >= N_BINS {
            return Err(Error::invalid(format!("sample {i} has bin {}", s.demanded_bin)));
        }
        members[s.bin()].push(i);
    }

    let mut bins = Vec::with_capacity(N_BINS);
    let mut outliers = Vec::new();
    for (index, idx) in members.iter().enumerate() {
        let xs = idx
            .iter()
            .map(|&i| index_of_difficulty(samples[i].distance, key_width))
            .collect::<Result<Vec<_>>>()?;
        let ys: Vec<f64> = idx.iter().map(|&i| samples[i].movement_time).collect();
        let Some(fit) = ols(&xs, &ys) else {
            bins.push(FittsBinModel::unfitted(index, idx.len()));
            continue;
        };
        let n = idx.len() as f64;
        let ss_res: f64 = fit.residuals.iter().map(|r| r * r).sum();
        let sd = (ss_res / (n - 1.0)).sqrt();
        // an exact fit leaves only rounding error in the residuals
        let scale = ys.iter().map(|y| y.abs()).fold(0.0, f64::max);
        let exact = sd <= 1e-12 * scale;
        let mut outlier_count = 0;
        for (&i, r) in idx.iter().zip(&fit.residuals) {
            if !exact && r.abs() > 3.0 * sd {
                outlier_count += 1;
                outliers.push(i);
            }
        }
        bins.push(FittsBinModel {
            index,
            a: fit.a,
            b: fit.b,
            r_squared: fit.r_squared,
            n_samples: idx.len(),
            outlier_count,
            fitted: true,
        });
    }
    outliers.sort_unstable();

    let fitted: Vec<&FittsBinModel> = bins.iter().filter(|b| b.fitted).collect();
    let mean_intercept = if fitted.is_empty() {
        0.0
    } else {
        fitted.iter().map(|b| b.a).sum::<f64>() / fitted.len() as f64
    };
    Ok(BinFit {
        model: DirectionalFittsModel {
            key_width,
            bins,
            mean_intercept,
            synthetic: false,
        },
        outliers,
    })
}

pub fn fit_bins(samples: &[MovementSample], key_width: f64) -> Result<DirectionalFittsModel> {
    fit_bins_detailed(samples, key_width).map(|fit| fit.model)
}

/// The population model: identical constants in every direction.
pub fn generic_model(key_width: f64) -> DirectionalFittsModel {
    constant_model(key_width, |_| (GENERIC_A, GENERIC_B))
}

/// Builds a synthetic model from per-bin `(a, b)` constants.
pub fn constant_model(key_width: f64, mut constants: impl FnMut(usize) -> (f64, f64)) -> DirectionalFittsModel {
    let bins: Vec<FittsBinModel> = (0..N_BINS)
        .map(|index| {
            let (a, b) = constants(index);
            FittsBinModel {
                index,
                a,
                b,
                r_squared: 1.0,
                n_samples: 0,
                outlier_count: 0,
                fitted: true,
            }
        })
        .collect();
    let mean_intercept = bins.iter().map(|b| b.a).sum::<f64>() / N_BINS as f64;
    DirectionalFittsModel {
        key_width,
        bins,
        mean_intercept,
        synthetic: true,
    }
}

impl DirectionalFittsModel {
    /// Pretty JSON with a trailing newline, the `model.json` file format.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: DirectionalFittsModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn unfitted_bins(&self) -> Vec<usize> {
        self.bins.iter().filter(|b| !b.fitted).map(|b| b.index).collect()
    }

    /// Across-bin mean `(a, b)` of the fitted bins, used in place of unfitted ones.
    fn fallback(&self) -> Option<(f64, f64)> {
        let fitted: Vec<&FittsBinModel> = self.bins.iter().filter(|b| b.fitted).collect();
        if fitted.is_empty() {
            return None;
        }
        let n = fitted.len() as f64;
        Some((
            fitted.iter().map(|b| b.a).sum::<f64>() / n,
            fitted.iter().map(|b| b.b).sum::<f64>() / n,
        ))
    }

    /// `(a, b)` used for predictions in `bin`.
    pub fn constants(&self, bin: usize) -> Result<(f64, f64)> {
        match self.bins.get(bin) {
            Some(b) if b.fitted => Ok((b.a, b.b)),
            Some(_) => self.fallback().ok_or(Error::ModelUnusable),
            None => Err(Error::invalid(format!("bin {bin} out of range"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins.len() != N_BINS {
            return Err(Error::invalid(format!(
                "model has {} bins, expected {N_BINS}",
                self.bins.len()
            )));
        }
        if !(self.key_width > 0.0) {
            return Err(Error::invalid("model key width must be positive"));
        }
        if self.bins.iter().enumerate().any(|(i, b)| b.index != i) {
            return Err(Error::invalid("model bins must be listed in index order"));
        }
        if self.fallback().is_none() {
            return Err(Error::ModelUnusable);
        }
        Ok(())
    }
}

/// Predicted movement time for a movement of `distance` pixels at `angle`.
pub fn predict_mt(model: &DirectionalFittsModel, angle: Option<f64>, distance: f64) -> Result<f64> {
    if !(distance >= 0.0) {
        return Err(Error::invalid(format!("distance must be nonnegative, got {distance}")));
    }
    if distance == 0.0 {
        return Ok(model.mean_intercept.max(0.0));
    }
    let angle = angle.ok_or_else(|| Error::invalid("angle is required for a nonzero distance"))?;
    let (a, b) = model.constants(angle_bin(angle))?;
    let id = index_of_difficulty(distance, model.key_width)?;
    Ok((a + b * id).max(0.0))
}
