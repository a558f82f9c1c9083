//! Time evolution `e^{−itH}` through the spectral decomposition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigensolve::EigenSystem;
use crate::error::{domain, Result};
use crate::localization::overlap_sum;

/// Uniform grid `t_j = j·t_max/(count − 1)`, `j = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, count: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(domain(format!("t_max = {t_max} must be positive")));
        }
        if count < 2 {
            return Err(domain("time grid needs at least two points"));
        }
        Ok(Self { t_max, count })
    }

    /// 10³ points up to `10·N`.
    pub fn default_for(dimension: usize) -> Self {
        Self { t_max: 10.0 * dimension.max(1) as f64, count: 1000 }
    }

    pub fn spacing(&self) -> f64 {
        self.t_max / (self.count - 1) as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.spacing();
        (0..self.count).map(move |j| if j + 1 == self.count { self.t_max } else { j as f64 * dt })
    }
}

/// `ψ(t) = V e^{−itΛ} Vᵀ ψ₀`.
pub fn evolve(eig: &EigenSystem, psi0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    let n = eig.dimension();
    if psi0.len() != n {
        return Err(domain(format!("state length {} != dimension {n}", psi0.len())));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (s, &energy) in eig.values().iter().enumerate() {
        let phi = eig.vector(s);
        let coeff: Complex64 = phi.iter().zip(psi0).map(|(&p, &z)| z * p).sum();
        let coeff = coeff * Complex64::from_polar(1.0, -t * energy);
        for (o, &p) in out.iter_mut().zip(phi) {
            *o += coeff * p;
        }
    }
    Ok(out)
}

/// `⟨δ_k, e^{−itH} δ_ℓ⟩ = Σ_s φ_s(k) φ_s(ℓ) e^{−itE_s}`.
pub fn overlap(eig: &EigenSystem, k: i64, l: i64, t: f64) -> Result<Complex64> {
    let weights = pair_weights(eig, k, l)?;
    Ok(weighted_phase_sum(&weights, eig.values(), t))
}

fn pair_weights(eig: &EigenSystem, k: i64, l: i64) -> Result<Vec<f64>> {
    let window = eig.window();
    let ik = window.index_of(k)?;
    let il = window.index_of(l)?;
    Ok((0..eig.dimension()).map(|s| eig.component(s, ik) * eig.component(s, il)).collect())
}

fn weighted_phase_sum(weights: &[f64], energies: &[f64], t: f64) -> Complex64 {
    weights.iter().zip(energies).map(|(&w, &e)| Complex64::from_polar(w, -t * e)).sum()
}

/// Grid maximum of `|⟨δ_k, e^{−itH} δ_ℓ⟩|` together with the bound
/// `Σ_s |φ_s(k)||φ_s(ℓ)|`, which holds for every real `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupOverlap {
    pub grid_max: f64,
    pub argmax_t: f64,
    pub certified_bound: f64,
}

pub fn sup_overlap(eig: &EigenSystem, k: i64, l: i64, grid: &TimeGrid) -> Result<SupOverlap> {
    let weights = pair_weights(eig, k, l)?;
    // terms that cannot move the maximum at double precision are skipped
    let scale: f64 = weights.iter().map(|w| w.abs()).sum();
    let (w, e): (Vec<f64>, Vec<f64>) =
        weights.iter().zip(eig.values()).filter(|(w, _)| w.abs() > scale * 1e-18).map(|(&w, &e)| (w, e)).unzip();
    let (mut grid_max, mut argmax_t) = (0.0f64, 0.0);
    for t in grid.times() {
        let m = weighted_phase_sum(&w, &e, t).norm();
        if m > grid_max {
            grid_max = m;
            argmax_t = t;
        }
    }
    Ok(SupOverlap { grid_max, argmax_t, certified_bound: overlap_sum(eig, k, l)? })
}

/// Euclidean norm of a complex vector.
pub fn norm(psi: &[Complex64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
