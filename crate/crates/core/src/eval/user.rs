use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::charact::CharacterizationSession;
use crate::error::{Error, Result};
use crate::fitts::{constant_model, predict_mt, DirectionalFittsModel};
use crate::hexgeom::{angle_deg, distance_px, HexGrid, KeyPosition, BIN_WIDTH_DEG};

/// Shortest movement time a simulated click may take, seconds.
const MIN_CLICK_MT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Normal with standard deviation `mt_noise_sd`.
    #[default]
    Gaussian,
    /// Uniform with the same standard deviation; bounded, so it never
    /// produces 3-SD residuals.
    Uniform,
}

/// A parametric stand-in for a participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedUser {
    pub model: DirectionalFittsModel,
    pub mt_noise_sd: f64,
    #[serde(default)]
    pub noise: NoiseKind,
    pub miss_rate: f64,
    pub seed: u64,
}

impl SimulatedUser {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.mt_noise_sd >= 0.0 && self.mt_noise_sd.is_finite()) {
            return Err(Error::invalid(format!(
                "mt_noise_sd must be >= 0, got {}",
                self.mt_noise_sd
            )));
        }
        if !(0.0..1.0).contains(&self.miss_rate) {
            return Err(Error::invalid(format!(
                "miss_rate must lie in [0, 1), got {}",
                self.miss_rate
            )));
        }
        Ok(())
    }

    fn noise(&self, rng: &mut ChaCha8Rng) -> f64 {
        let sd = self.mt_noise_sd;
        if sd == 0.0 {
            return 0.0;
        }
        match self.noise {
            NoiseKind::Gaussian => Normal::new(0.0, sd).expect("sd >= 0").sample(rng),
            NoiseKind::Uniform => {
                let half = sd * 3f64.sqrt();
                rng.random_range(-half..=half)
            }
        }
    }

    /// Noisy movement time from `from` to `to`, truncated at zero.
    pub fn movement_time(&self, rng: &mut ChaCha8Rng, from: &KeyPosition, to: &KeyPosition) -> Result<f64> {
        let d = distance_px(from, to);
        let angle = if d > 0.0 { Some(angle_deg(from, to)?) } else { None };
        let mt = predict_mt(&self.model, angle, d)?;
        Ok((mt + self.noise(rng)).max(0.0))
    }

    /// Whether the next selection attempt misses.
    pub fn misses(&self, rng: &mut ChaCha8Rng) -> bool {
        self.miss_rate > 0.0 && rng.random::<f64>() < self.miss_rate
    }

    /// Plays a full characterization session on `grid`.
    ///
    /// Misses land on a random neighbor of the target; the user then retries
    /// from there until the target is hit.
    pub fn characterize(&self, grid: &HexGrid, session_seed: u64) -> Result<CharacterizationSession> {
        self.validate()?;
        let mut session = CharacterizationSession::new(grid.clone(), session_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(session_seed);
        let mut t = 0.0;
        let mut cursor = *session.current_key();
        while let Some(target) = session.next_target()? {
            let target_idx = grid.index_of_key(&target).expect("target on grid");
            let clicked = if self.misses(&mut rng) {
                let around = grid.neighbors(target_idx);
                around.choose(&mut rng).copied().unwrap_or(target_idx)
            } else {
                target_idx
            };
            let landed = grid.position(clicked);
            t += self.movement_time(&mut rng, &cursor, landed)?.max(MIN_CLICK_MT);
            session.click(clicked, t)?;
            cursor = *landed;
        }
        Ok(session)
    }
}

/// Direction-dependent model with intercept `a` and slope
/// `b(θ) = b_vertical · (1 + (ratio − 1)·cos²θ)` at each bin's center angle,
/// so horizontal movements cost `ratio` times the vertical slope per bit.
pub fn anisotropic_model(key_width: f64, a: f64, b_vertical: f64, ratio: f64) -> DirectionalFittsModel {
    constant_model(key_width, |bin| {
        let theta = (bin as f64 * BIN_WIDTH_DEG).to_radians();
        (a, b_vertical * (1.0 + (ratio - 1.0) * theta.cos().powi(2)))
    })
}
