//! Fast approximate QAP: Frank-Wolfe over the Birkhoff polytope.
//!
//! The relaxation minimizes `f(P) = Σ F[i][j]·C[p][q]·P[i][p]·P[j][q]` over
//! doubly stochastic `P`. Each step solves a linear assignment on the
//! gradient, line-searches the quadratic exactly, and the final iterate is
//! projected back to a permutation.

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lap::solve_lap, objective, Assignment, QapInstance};
use crate::error::{Error, Result};

const SINKHORN_SWEEPS: usize = 20;
const SINKHORN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaqParams {
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative objective change below which a restart stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for FaqParams {
    fn default() -> Self {
        FaqParams {
            restarts: 10,
            max_iters: 30,
            tol: 1e-6,
            seed: 0,
        }
    }
}

pub fn solve_faq(instance: &QapInstance, params: &FaqParams) -> Result<Assignment> {
    if params.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    if !(params.tol >= 0.0) {
        return Err(Error::invalid("tolerance must be nonnegative"));
    }
    let m = instance.m();
    if m == 0 {
        return Ok(Assignment {
            mapping: Vec::new(),
            objective: 0.0,
        });
    }
    let flow = instance.padded_flow();
    let cost = instance.cost();

    let results: Vec<Result<Assignment>> = (0..params.restarts)
        .into_par_iter()
        .map(|k| {
            let start = initial_point(m, k, params.seed);
            let relaxed = frank_wolfe(&flow, cost, start, params)?;
            let neg = relaxed.mapv(|x| -x);
            let perm = solve_lap(&neg)?;
            let mapping = perm[..instance.n()].to_vec();
            let objective = objective(instance, &mapping)?;
            Ok(Assignment { mapping, objective })
        })
        .collect();

    // lowest restart index wins ties, independent of scheduling
    let mut best: Option<Assignment> = None;
    for r in results {
        let a = r?;
        if best.as_ref().is_none_or(|b| a.objective < b.objective) {
            best = Some(a);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Restart 0 starts from the barycenter; others from a seeded Sinkhorn-balanced matrix.
fn initial_point(m: usize, restart: usize, seed: u64) -> Array2<f64> {
    if restart == 0 {
        return Array2::from_elem((m, m), 1.0 / m as f64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let mut p = Array2::from_shape_simple_fn((m, m), || rng.random_range(1e-3..1.0));
    sinkhorn(&mut p);
    p
}

/// Alternating row/column normalization; runs the fixed sweep budget, then
/// continues until both marginals are within tolerance.
pub(crate) fn sinkhorn(p: &mut Array2<f64>) {
    for sweep in 0.. {
        for mut row in p.rows_mut() {
            let s = row.sum();
            row /= s;
        }
        for mut col in p.columns_mut() {
            let s = col.sum();
            col /= s;
        }
        if sweep + 1 >= SINKHORN_SWEEPS && max_marginal_error(p) < SINKHORN_TOL {
            break;
        }
        if sweep > 10_000 {
            break;
        }
    }
}

pub(crate) fn max_marginal_error(p: &Array2<f64>) -> f64 {
    let rows = p.rows().into_iter().map(|r| (r.sum() - 1.0).abs());
    let cols = p.columns().into_iter().map(|c| (c.sum() - 1.0).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

/// `Σ F ∘ (X C Yᵀ)`
fn bilinear(flow: &Array2<f64>, cost: &Array2<f64>, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let inner = x.dot(cost).dot(&y.t());
    Zip::from(flow).and(&inner).fold(0.0, |acc, f, v| acc + f * v)
}

fn frank_wolfe(flow: &Array2<f64>, cost: &Array2<f64>, mut p: Array2<f64>, params: &FaqParams) -> Result<Array2<f64>> {
    let mut f_cur = bilinear(flow, cost, &p, &p);
    for _ in 0..params.max_iters {
        let grad = flow.dot(&p).dot(&cost.t()) + flow.t().dot(&p).dot(cost);
        let perm = solve_lap(&grad)?;
        let mut q = Array2::zeros(p.dim());
        for (i, &j) in perm.iter().enumerate() {
            q[[i, j]] = 1.0;
        }
        let d = &q - &p;
        // f(P + αD) = f(P) + α·lin + α²·quad
        let lin = Zip::from(&grad).and(&d).fold(0.0, |acc, g, x| acc + g * x);
        let quad = bilinear(flow, cost, &d, &d);
        let alpha = if quad > 0.0 {
            (-lin / (2.0 * quad)).clamp(0.0, 1.0)
        } else if lin + quad < 0.0 {
            1.0
        } else {
            0.0
        };
        if alpha == 0.0 {
            break;
        }
        p.scaled_add(alpha, &d);
        let f_next = bilinear(flow, cost, &p, &p);
        debug_assert!(
            f_next <= f_cur + 1e-9 * (1.0 + f_cur.abs()),
            "Frank-Wolfe objective increased: {f_cur} -> {f_next}"
        );
        debug_assert!(max_marginal_error(&p) < 1e-9);
        let change = (f_cur - f_next).abs() / f_cur.abs().max(f64::MIN_POSITIVE);
        f_cur = f_next;
        if change < params.tol {
            break;
        }
    }
    Ok(p)
}
