//! Localization centers, per-center mass profiles `S_n(ℓ)`, the pointwise
//! overlap chain, exponential decay fits and the transfer-matrix Lyapunov
//! exponent.

use serde::Serialize;

use crate::arithmetic::Frequency;
use crate::dynamics::{sup_overlap, TimeGrid};
use crate::eigensolve::EigenSystem;
use crate::error::{domain, Error, Result};
use crate::operator::{potential, Window};

/// Values entering logarithms are floored here by default.
pub const LOG_FLOOR: f64 = 1e-15;
/// Floor for quantities quadratic in eigenvector entries.
pub const SQUARED_LOG_FLOOR: f64 = LOG_FLOOR * LOG_FLOOR;
/// Absolute slack for the pointwise chain `sup_t |overlap| ≤ Q ≤ regrouped`.
pub const CHAIN_SLACK: f64 = 1e-10;
/// Fewest points accepted by [`decay_fit`].
pub const MIN_FIT_POINTS: usize = 5;

/// Localization center of every eigenvector: the site of largest modulus.
/// Exact ties go to the smallest `|n|`, then to the negative site.
pub fn centers(eig: &EigenSystem) -> Vec<i64> {
    let window = eig.window();
    (0..eig.dimension())
        .map(|s| {
            let v = eig.vector(s);
            let mut best = 0usize;
            for i in 1..v.len() {
                let (a, b) = (v[i].abs(), v[best].abs());
                if a > b || (a == b && prefer_site(window.site_of(i), window.site_of(best))) {
                    best = i;
                }
            }
            window.site_of(best)
        })
        .collect()
}

fn prefer_site(candidate: i64, current: i64) -> bool {
    (candidate.unsigned_abs(), candidate >= 0) < (current.unsigned_abs(), current >= 0)
}

/// `S_n(ℓ) = Σ_{s: n_s = n} |φ_s(ℓ)|²` on the whole window.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterProfile {
    window: Window,
    centers: Vec<i64>,
    /// Row-major `[center index][site index]`.
    mass: Vec<f64>,
}

impl CenterProfile {
    pub fn window(&self) -> Window {
        self.window
    }

    /// Sites over which results are trusted.
    pub fn inner_window(&self) -> Window {
        self.window.inner()
    }

    pub fn center_of(&self, s: usize) -> i64 {
        self.centers[s]
    }

    pub fn centers(&self) -> &[i64] {
        &self.centers
    }

    pub fn mass(&self, center: i64, site: i64) -> Result<f64> {
        let n = self.window.index_of(center)?;
        let l = self.window.index_of(site)?;
        Ok(self.mass[n * self.window.len() + l])
    }

    /// `(S_n(site))_n` over all centers `n` of the window.
    pub fn masses_at(&self, site: i64) -> Result<Vec<f64>> {
        let l = self.window.index_of(site)?;
        let len = self.window.len();
        Ok((0..len).map(|n| self.mass[n * len + l]).collect())
    }

    /// `Σ_n √(S_n(k) S_n(ℓ))`.
    pub fn regrouped_bound(&self, k: i64, l: i64) -> Result<f64> {
        let a = self.masses_at(k)?;
        let b = self.masses_at(l)?;
        Ok(a.iter().zip(&b).map(|(x, y)| (x * y).sqrt()).sum())
    }
}

pub fn center_mass_profile(eig: &EigenSystem) -> CenterProfile {
    let window = eig.window();
    let len = window.len();
    let centers = centers(eig);
    let mut mass = vec![0.0; len * len];
    for (s, &c) in centers.iter().enumerate() {
        let row = (c - window.n_min) as usize * len;
        for (slot, x) in mass[row..row + len].iter_mut().zip(eig.vector(s)) {
            *slot += x * x;
        }
    }
    CenterProfile { window, centers, mass }
}

/// `Q(k, ℓ) = Σ_s |φ_s(k)|·|φ_s(ℓ)|`.
pub fn overlap_sum(eig: &EigenSystem, k: i64, l: i64) -> Result<f64> {
    let window = eig.window();
    let ik = window.index_of(k)?;
    let il = window.index_of(l)?;
    Ok((0..eig.dimension()).map(|s| (eig.component(s, ik) * eig.component(s, il)).abs()).sum())
}

/// The three sides of the pointwise overlap chain for one pair of sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapChainReport {
    pub k: i64,
    pub l: i64,
    /// Largest `|⟨δ_k, e^{−itH} δ_ℓ⟩|` over the time grid.
    pub lhs_sup: f64,
    /// `Σ_s |φ_s(k)||φ_s(ℓ)|`.
    pub middle: f64,
    /// `Σ_n √(S_n(k) S_n(ℓ))`.
    pub rhs: f64,
}

impl OverlapChainReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs_sup <= self.middle + slack && self.middle <= self.rhs + slack
    }
}

/// Evaluates the chain and fails if it is violated beyond [`CHAIN_SLACK`];
/// a violation can only come from a defective eigensystem.
pub fn overlap_chain_pointwise(
    eig: &EigenSystem,
    profile: &CenterProfile,
    k: i64,
    l: i64,
    grid: &TimeGrid,
) -> Result<OverlapChainReport> {
    let sup = sup_overlap(eig, k, l, grid)?;
    let report = OverlapChainReport {
        k,
        l,
        lhs_sup: sup.grid_max,
        middle: sup.certified_bound,
        rhs: profile.regrouped_bound(k, l)?,
    };
    if !report.holds(CHAIN_SLACK) {
        return Err(Error::InvariantViolation(format!(
            "overlap chain broken at (k, l) = ({k}, {l}): {} <= {} <= {} fails",
            report.lhs_sup, report.middle, report.rhs
        )));
    }
    Ok(report)
}

/// Least-squares fit of `−ln value = γ·k − ln C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub gamma_hat: f64,
    pub log_prefactor: f64,
    pub r_squared: f64,
    pub k_range: (u64, u64),
    /// `min_k −ln(value)/k` over the fitted points with `k > 0`.
    pub pointwise_min_rate: f64,
    pub points: usize,
    /// Number of values raised to the floor before taking logs.
    pub floored: usize,
}

/// [`decay_fit_with_floor`] at [`LOG_FLOOR`].
pub fn decay_fit(points: &[(u64, f64)], k_min: u64, k_max: u64) -> Result<DecayFit> {
    decay_fit_with_floor(points, k_min, k_max, LOG_FLOOR)
}

pub fn decay_fit_with_floor(points: &[(u64, f64)], k_min: u64, k_max: u64, floor: f64) -> Result<DecayFit> {
    if !(floor > 0.0) {
        return Err(domain("log floor must be positive"));
    }
    let mut floored = 0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(k, v) in points.iter().filter(|(k, _)| (k_min..=k_max).contains(k)) {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(domain(format!("decay value {v} at distance {k} is not a nonnegative number")));
        }
        let v = if v < floor {
            floored += 1;
            floor
        } else {
            v
        };
        xs.push(k as f64);
        ys.push(-v.ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points in [{k_min}, {k_max}], need {MIN_FIT_POINTS}",
            xs.len()
        )));
    }
    let m = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all distances coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    let pointwise_min_rate =
        xs.iter().zip(&ys).filter(|(x, _)| **x > 0.0).map(|(x, y)| y / x).fold(f64::INFINITY, f64::min);
    let k_lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) as u64;
    let k_hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) as u64;
    Ok(DecayFit {
        gamma_hat: slope,
        log_prefactor: -intercept,
        r_squared,
        k_range: (k_lo, k_hi),
        pointwise_min_rate,
        points: xs.len(),
        floored,
    })
}

/// Decay rate of each eigenvector whose center lies in the inner window, from
/// a fit of `√((φ(c+d)² + φ(c−d)²)/2)` over `d ∈ [d_min, d_max]`.
pub fn eigenfunction_decay_rates(
    eig: &EigenSystem,
    profile: &CenterProfile,
    d_min: u64,
    d_max: u64,
) -> Result<Vec<f64>> {
    if d_max < d_min + MIN_FIT_POINTS as u64 - 1 {
        return Err(Error::InsufficientData("distance range too short".into()));
    }
    let window = eig.window();
    let inner = window.inner();
    let mut rates = Vec::new();
    for s in 0..eig.dimension() {
        let c = profile.center_of(s);
        let reach = d_max as i64;
        if !inner.contains(c) || !window.contains(c - reach) || !window.contains(c + reach) {
            continue;
        }
        let points: Vec<(u64, f64)> = (d_min..=d_max)
            .map(|d| {
                let left = eig.component(s, window.index_of(c - d as i64).unwrap_or(0));
                let right = eig.component(s, window.index_of(c + d as i64).unwrap_or(0));
                (d, (0.5 * (left * left + right * right)).sqrt())
            })
            .collect();
        rates.push(decay_fit(&points, d_min, d_max)?.gamma_hat);
    }
    Ok(rates)
}

/// Median of a nonempty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] })
}

pub type Matrix2 = [[f64; 2]; 2];

fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Spectral norm of a 2x2 matrix.
pub fn spectral_norm(m: &Matrix2) -> f64 {
    let frob2 = m.iter().flatten().map(|x| x * x).sum::<f64>();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (frob2 * frob2 - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (frob2 + disc)).sqrt()
}

/// One-step transfer matrix `[[E − V(n), −1], [1, 0]]`.
pub fn transfer_matrix(lambda: f64, alpha: &Frequency, theta: f64, energy: f64, n: i64) -> Matrix2 {
    [[energy - potential(lambda, alpha, theta, n), -1.0], [1.0, 0.0]]
}

/// Unnormalised `A_{to} ⋯ A_{from}`.
pub fn transfer_product(lambda: f64, alpha: &Frequency, theta: f64, energy: f64, from: i64, to: i64) -> Matrix2 {
    let mut p = [[1.0, 0.0], [0.0, 1.0]];
    for n in from..=to {
        p = mat_mul(&transfer_matrix(lambda, alpha, theta, energy, n), &p);
    }
    p
}

/// `(1/M) ln ‖A_M ⋯ A_1‖`, renormalising the running product every 10 steps.
pub fn lyapunov_transfer(lambda: f64, alpha: &Frequency, theta: f64, energy: f64, steps: u64) -> Result<f64> {
    if steps < 1000 {
        return Err(domain(format!("{steps} steps given, need at least 1000")));
    }
    if !(lambda >= 0.0 && lambda.is_finite() && energy.is_finite() && theta.is_finite()) {
        return Err(domain("transfer matrix parameters must be finite with lambda >= 0"));
    }
    let mut p: Matrix2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_norm = 0.0;
    for n in 1..=steps as i64 {
        p = mat_mul(&transfer_matrix(lambda, alpha, theta, energy, n), &p);
        if n % 10 == 0 {
            let norm = spectral_norm(&p);
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Numeric(format!("transfer product degenerate at step {n}")));
            }
            log_norm += norm.ln();
            for x in p.iter_mut().flatten() {
                *x /= norm;
            }
        }
    }
    let norm = spectral_norm(&p);
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Numeric("transfer product degenerate".into()));
    }
    Ok((log_norm + norm.ln()) / steps as f64)
}
