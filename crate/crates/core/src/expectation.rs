//! Averages over the phase `θ ∈ [0, 1)`: expected center masses, expected
//! overlap sums, the decay-rate estimate built on them, and the closed-form
//! summation bound that turns center-mass decay into overlap decay.
//!
//! Per-phase work runs in parallel, but every reduction is a sequential sum
//! in phase order, so results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arithmetic::Frequency;
use crate::dynamics::{sup_overlap, TimeGrid};
use crate::eigensolve::{eigh_tridiagonal, EigenSystem, Origin};
use crate::error::{domain, Error, Result};
use crate::localization::{
    center_mass_profile, decay_fit_with_floor, overlap_sum, DecayFit, CHAIN_SLACK, LOG_FLOOR, SQUARED_LOG_FLOOR,
};
use crate::operator::{OperatorSpec, TridiagonalOperator, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseStrategy {
    MidpointGrid,
    JitteredGrid,
    UniformRandom,
}

impl std::str::FromStr for PhaseStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint-grid" | "midpoint" => Ok(Self::MidpointGrid),
            "jittered-grid" | "jittered" => Ok(Self::JitteredGrid),
            "uniform-random" | "uniform" => Ok(Self::UniformRandom),
            other => Err(domain(format!("unknown phase strategy '{other}'"))),
        }
    }
}

/// How the phase integral is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub count: usize,
    pub strategy: PhaseStrategy,
    pub seed: u64,
}

impl PhasePlan {
    pub fn new(count: usize, strategy: PhaseStrategy, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(domain("phase plan needs at least one sample"));
        }
        Ok(Self { count, strategy, seed })
    }

    pub fn jittered(count: usize, seed: u64) -> Result<Self> {
        Self::new(count, PhaseStrategy::JitteredGrid, seed)
    }
}

/// Phases of a plan, deterministic in `(strategy, seed, count)`.
pub fn sample_phases(plan: &PhasePlan) -> Vec<f64> {
    let m = plan.count as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    (0..plan.count)
        .map(|j| {
            let theta = match plan.strategy {
                PhaseStrategy::MidpointGrid => (j as f64 + 0.5) / m,
                PhaseStrategy::JitteredGrid => (j as f64 + rng.gen::<f64>()) / m,
                PhaseStrategy::UniformRandom => rng.gen::<f64>(),
            };
            if theta >= 1.0 {
                theta - 1.0
            } else {
                theta
            }
        })
        .collect()
}

/// Serializable description of a phase family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyDescriptor {
    AlmostMathieu { lambda: f64, alpha: f64, n_min: i64, n_max: i64 },
    Planted { rate: f64, n_min: i64, n_max: i64 },
}

/// A phase-indexed family of finite eigensystems on a fixed window.
pub trait PhaseFamily: Sync {
    fn window(&self) -> Window;
    fn eigensystem(&self, theta: f64) -> Result<EigenSystem>;
    fn descriptor(&self) -> FamilyDescriptor;

    /// Smallest value trusted when fitting logarithms of averaged quantities.
    fn log_floor(&self) -> f64 {
        LOG_FLOOR
    }
}

/// The truncated operator with everything but the phase fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmoFamily {
    pub lambda: f64,
    pub alpha: Frequency,
    pub window: Window,
}

impl AmoFamily {
    pub fn new(lambda: f64, alpha: Frequency, window: Window) -> Result<Self> {
        OperatorSpec::new(lambda, alpha, 0.0, window)?;
        Ok(Self { lambda, alpha, window })
    }

    pub fn spec(&self, theta: f64) -> Result<OperatorSpec> {
        OperatorSpec::new(self.lambda, self.alpha, theta, self.window)
    }
}

impl PhaseFamily for AmoFamily {
    fn window(&self) -> Window {
        self.window
    }

    fn eigensystem(&self, theta: f64) -> Result<EigenSystem> {
        eigh_tridiagonal(&TridiagonalOperator::build(&self.spec(theta)?)?)
    }

    fn descriptor(&self) -> FamilyDescriptor {
        FamilyDescriptor::AlmostMathieu {
            lambda: self.lambda,
            alpha: self.alpha.value(),
            n_min: self.window.n_min,
            n_max: self.window.n_max,
        }
    }
}

/// Orthonormal bases with a known exponential overlap profile.
///
/// The basis is the product of nearest-neighbour rotations
/// `G(0,1) G(1,2) ⋯ G(N−2,N−1)`, each by the angle with `sin = e^{−rate}`.
/// Away from the window edges this gives exactly
/// `Σ_s |φ_s(k)||φ_s(k+m)| = 2cos²·e^{−rate·m}` for `m ≥ 1`. The phase only
/// shifts the (otherwise arbitrary) eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedFamily {
    pub rate: f64,
    pub window: Window,
}

impl PlantedFamily {
    pub fn new(rate: f64, window: Window) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(domain(format!("planted rate {rate} must be positive")));
        }
        Ok(Self { rate, window })
    }

    /// Exact overlap sum between interior sites at distance `m ≥ 1`.
    pub fn interior_overlap(&self, m: u64) -> f64 {
        let s = (-self.rate).exp();
        2.0 * (1.0 - s * s) * (-self.rate * m as f64).exp()
    }
}

impl PhaseFamily for PlantedFamily {
    fn window(&self) -> Window {
        self.window
    }

    /// Entries are products of rotation sines with no cancellation, so they
    /// stay accurate far below the noise level of a computed eigenbasis.
    fn log_floor(&self) -> f64 {
        f64::MIN_POSITIVE
    }

    fn eigensystem(&self, theta: f64) -> Result<EigenSystem> {
        let n = self.window.len();
        let s = (-self.rate).exp();
        let c = (1.0 - s * s).sqrt();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        for i in 0..n.saturating_sub(1) {
            let (left, right) = v.split_at_mut((i + 1) * n);
            let (a, b) = (&mut left[i * n..], &mut right[..n]);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (p, q) = (*x, *y);
                *x = c * p + s * q;
                *y = -s * p + c * q;
            }
        }
        let values = (0..n).map(|i| i as f64 + theta).collect();
        EigenSystem::from_parts(values, v, self.window, Origin::Planted { rate: self.rate })
    }

    fn descriptor(&self) -> FamilyDescriptor {
        FamilyDescriptor::Planted { rate: self.rate, n_min: self.window.n_min, n_max: self.window.n_max }
    }
}

/// Runs `f` on the eigensystem of every sampled phase, in parallel, and
/// returns the results in phase order.
pub fn map_phases<F, T>(family: &dyn PhaseFamily, plan: &PhasePlan, f: F) -> Result<Vec<T>>
where
    F: Fn(f64, &EigenSystem) -> Result<T> + Sync,
    T: Send,
{
    sample_phases(plan)
        .par_iter()
        .map(|&theta| {
            family
                .eigensystem(theta)
                .and_then(|eig| f(theta, &eig))
                .map_err(|e| Error::AtPhase { theta, source: Box::new(e) })
        })
        .collect()
}

/// Sample mean and `sd/√M`, summed in order.
pub fn mean_and_std_error(samples: &[f64]) -> (f64, f64) {
    let m = samples.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    CenterMass,
    OverlapSum,
    SupOverlapGrid,
}

/// Phase average of one quantity at a pair of sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationRecord {
    pub quantity: Quantity,
    /// `k` for overlaps, the center `n` for center masses.
    pub first: i64,
    /// `ℓ`.
    pub second: i64,
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
    pub family: FamilyDescriptor,
}

fn check_inner(family: &dyn PhaseFamily, sites: &[i64]) -> Result<()> {
    let inner = family.window().inner();
    match sites.iter().find(|s| !inner.contains(**s)) {
        Some(s) => Err(domain(format!("site {s} outside the inner window [{}, {}]", inner.n_min, inner.n_max))),
        None => Ok(()),
    }
}

/// `𝔼 S_n(ℓ)` for each `(n, ℓ)`.
pub fn expected_center_masses(
    family: &dyn PhaseFamily,
    plan: &PhasePlan,
    pairs: &[(i64, i64)],
) -> Result<Vec<ExpectationRecord>> {
    let sites: Vec<i64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    check_inner(family, &sites)?;
    let samples = map_phases(family, plan, |_, eig| {
        let profile = center_mass_profile(eig);
        pairs.iter().map(|&(n, l)| profile.mass(n, l)).collect::<Result<Vec<f64>>>()
    })?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(j, &(n, l))| {
            let column: Vec<f64> = samples.iter().map(|row| row[j]).collect();
            let (mean, std_error) = mean_and_std_error(&column);
            ExpectationRecord {
                quantity: Quantity::CenterMass,
                first: n,
                second: l,
                mean,
                std_error,
                count: plan.count,
                family: family.descriptor(),
            }
        })
        .collect())
}

pub fn expected_center_mass(family: &dyn PhaseFamily, plan: &PhasePlan, n: i64, l: i64) -> Result<ExpectationRecord> {
    Ok(expected_center_masses(family, plan, &[(n, l)])?.remove(0))
}

/// `𝔼 Q(k, ℓ)` with the phase-averaged regrouped bound beside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapExpectation {
    pub record: ExpectationRecord,
    /// `Σ_n √(𝔼S_n(k) · 𝔼S_n(ℓ))`.
    pub regrouped_bound: f64,
}

impl OverlapExpectation {
    /// The averaged chain holds exactly for the empirical phase measure, so
    /// only rounding slack is allowed.
    pub fn chain_holds(&self) -> bool {
        self.record.mean <= self.regrouped_bound + CHAIN_SLACK
    }

    /// Weaker statistical form: `𝔼Q ≤ bound + 3·std_error`.
    pub fn chain_holds_within(&self, sigmas: f64) -> bool {
        self.record.mean <= self.regrouped_bound + sigmas * self.record.std_error + CHAIN_SLACK
    }
}

pub fn expected_overlap_sums(
    family: &dyn PhaseFamily,
    plan: &PhasePlan,
    pairs: &[(i64, i64)],
) -> Result<Vec<OverlapExpectation>> {
    let sites: Vec<i64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    check_inner(family, &sites)?;
    let mut distinct = sites.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let len = family.window().len();

    struct PhaseSample {
        q: Vec<f64>,
        masses: Vec<Vec<f64>>,
    }
    let samples = map_phases(family, plan, |_, eig| {
        let profile = center_mass_profile(eig);
        let q = pairs.iter().map(|&(k, l)| overlap_sum(eig, k, l)).collect::<Result<_>>()?;
        let masses = distinct.iter().map(|&site| profile.masses_at(site)).collect::<Result<_>>()?;
        Ok(PhaseSample { q, masses })
    })?;

    let mut mean_masses = vec![vec![0.0; len]; distinct.len()];
    for sample in &samples {
        for (acc, m) in mean_masses.iter_mut().zip(&sample.masses) {
            for (a, x) in acc.iter_mut().zip(m) {
                *a += x;
            }
        }
    }
    for acc in &mut mean_masses {
        for a in acc.iter_mut() {
            *a /= samples.len() as f64;
        }
    }
    let slot = |site: i64| distinct.binary_search(&site).expect("site collected above");

    Ok(pairs
        .iter()
        .enumerate()
        .map(|(j, &(k, l))| {
            let column: Vec<f64> = samples.iter().map(|s| s.q[j]).collect();
            let (mean, std_error) = mean_and_std_error(&column);
            let (a, b) = (&mean_masses[slot(k)], &mean_masses[slot(l)]);
            let regrouped_bound = a.iter().zip(b).map(|(x, y)| (x * y).sqrt()).sum();
            OverlapExpectation {
                record: ExpectationRecord {
                    quantity: Quantity::OverlapSum,
                    first: k,
                    second: l,
                    mean,
                    std_error,
                    count: plan.count,
                    family: family.descriptor(),
                },
                regrouped_bound,
            }
        })
        .collect())
}

pub fn expected_overlap_sum(family: &dyn PhaseFamily, plan: &PhasePlan, k: i64, l: i64) -> Result<OverlapExpectation> {
    Ok(expected_overlap_sums(family, plan, &[(k, l)])?.remove(0))
}

/// Decay-rate estimate from `𝔼 Q(0, k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaEstimate {
    pub records: Vec<ExpectationRecord>,
    pub fit: DecayFit,
}

pub fn gamma_hat(family: &dyn PhaseFamily, plan: &PhasePlan, k_list: &[u64]) -> Result<GammaEstimate> {
    if k_list.len() < crate::localization::MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!("{} distances given, need 5", k_list.len())));
    }
    let pairs: Vec<(i64, i64)> = k_list.iter().map(|&k| (0, k as i64)).collect();
    let overlaps = expected_overlap_sums(family, plan, &pairs)?;
    let records: Vec<ExpectationRecord> = overlaps.iter().map(|o| o.record).collect();
    let points: Vec<(u64, f64)> = k_list.iter().zip(&records).map(|(&k, r)| (k, r.mean)).collect();
    let k_min = *k_list.iter().min().unwrap_or(&0);
    let k_max = *k_list.iter().max().unwrap_or(&0);
    let fit = decay_fit_with_floor(&points, k_min, k_max, family.log_floor())?;
    Ok(GammaEstimate { records, fit })
}

/// `C₁(γ, d, C) = C·(1 + 2/(1 − e^{−γ}))^d`, the constant used for `d > 1`.
pub fn chain_sum_constant(c: f64, gamma: f64, d: u32) -> f64 {
    c * (1.0 + 2.0 / (1.0 - (-gamma).exp())).powi(d as i32)
}

/// Overlap bound from a center-mass bound `C e^{−2γ|n−ℓ|}`:
/// `C((1+γ)/γ + m) e^{−γm}` for `d = 1`,
/// `C₁(γ,d,C)(1 + m^{d−1}) e^{−γm}` for `d > 1`, with `m` the distance.
pub fn chain_sum_bound(c: f64, gamma: f64, d: u32, dist: u64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(domain(format!("gamma = {gamma} must be positive")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(domain(format!("C = {c} must be positive")));
    }
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    let m = dist as f64;
    let decay = (-gamma * m).exp();
    Ok(if d == 1 {
        c * ((1.0 + gamma) / gamma + m) * decay
    } else {
        chain_sum_constant(c, gamma, d) * (1.0 + m.powi(d as i32 - 1)) * decay
    })
}

/// Closed form of `Σ_{n∈ℤ} e^{−γ(|n| + |n − m|)} = e^{−γm}(m + 1 + 2e^{−2γ}/(1 − e^{−2γ}))`.
pub fn chain_sum_closed_form(gamma: f64, m: u64) -> f64 {
    let q = (-2.0 * gamma).exp();
    (-gamma * m as f64).exp() * (m as f64 + 1.0 + 2.0 * q / (1.0 - q))
}

/// Truncation radius beyond the segment so that the one-dimensional tail
/// `2e^{−γm} Σ_{j>R} e^{−2γj}` stays below `tol`.
fn tail_radius(gamma: f64, m: f64, tol: f64) -> i64 {
    let q = (-2.0 * gamma).exp();
    let lead = 2.0 * (-gamma * m).exp() / (1.0 - q);
    if lead <= tol {
        return 0;
    }
    ((lead / tol).ln() / (2.0 * gamma)).ceil() as i64
}

/// Direct summation of `Σ_{n∈ℤ^d} e^{−γ(|n−k|₁ + |n−ℓ|₁)}` for the
/// displacement `ℓ − k`, truncated to a box whose neglected tail is below `tol`.
pub fn lattice_chain_sum(gamma: f64, displacement: &[i64], tol: f64) -> Result<f64> {
    if !(gamma > 0.0) || displacement.is_empty() || !(tol > 0.0) {
        return Err(domain("lattice sum needs gamma > 0, d >= 1, tol > 0"));
    }
    let d = displacement.len();
    // every axis factor is at most its m = 0 value coth γ
    let axis_max = 1.0 / (gamma).tanh();
    let per_axis_tol = tol / (d as f64 * axis_max.powi(d as i32 - 1));
    let ranges: Vec<(i64, i64)> = displacement
        .iter()
        .map(|&m| {
            let r = tail_radius(gamma, m.unsigned_abs() as f64, per_axis_tol);
            (m.min(0) - r, m.max(0) + r)
        })
        .collect();
    let total: usize = ranges.iter().map(|(a, b)| (b - a + 1) as usize).product();
    if total > 200_000_000 {
        return Err(domain("lattice box too large for direct summation"));
    }
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut sum = 0.0;
    loop {
        let dist: i64 = idx.iter().zip(displacement).map(|(&n, &m)| n.abs() + (n - m).abs()).sum();
        sum += (-gamma * dist as f64).exp();
        let mut axis = 0;
        loop {
            if axis == d {
                return Ok(sum);
            }
            idx[axis] += 1;
            if idx[axis] <= ranges[axis].1 {
                break;
            }
            idx[axis] = ranges[axis].0;
            axis += 1;
        }
    }
}

/// Envelope `C₁² e^{−2γ|ℓ|} + e^{−η|ℓ|}` for a center-mass curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoTermEnvelope {
    pub c1_squared: f64,
    pub gamma: f64,
    pub eta: f64,
    pub r_squared: f64,
    /// Every data point lies on or below the envelope.
    pub dominated: bool,
    /// `max_ℓ value/envelope`.
    pub worst_ratio: f64,
}

impl TwoTermEnvelope {
    pub fn evaluate(&self, l: u64) -> f64 {
        let l = l as f64;
        self.c1_squared * (-2.0 * self.gamma * l).exp() + (-self.eta * l).exp()
    }
}

/// Fits the two-term envelope: `(C₁², 2γ)` from the log-linear regression and
/// `η` as the pointwise minimal rate, which makes `e^{−ηℓ}` dominate every
/// point with `ℓ ≥ 1` on its own when η is positive.
pub fn two_term_envelope(points: &[(u64, f64)]) -> Result<TwoTermEnvelope> {
    let k_min = points.iter().map(|p| p.0).min().unwrap_or(0);
    let k_max = points.iter().map(|p| p.0).max().unwrap_or(0);
    let fit = decay_fit_with_floor(points, k_min, k_max, SQUARED_LOG_FLOOR)?;
    let eta = fit.pointwise_min_rate;
    let mut env = TwoTermEnvelope {
        c1_squared: fit.log_prefactor.exp(),
        gamma: 0.5 * fit.gamma_hat,
        eta,
        r_squared: fit.r_squared,
        dominated: false,
        worst_ratio: 0.0,
    };
    let worst = points.iter().map(|&(l, v)| v / env.evaluate(l)).fold(0.0f64, f64::max);
    env.worst_ratio = worst;
    env.dominated = worst <= 1.0 + 1e-12;
    Ok(env)
}

/// One row of an expected-dynamics check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdlRow {
    pub k: i64,
    pub l: i64,
    pub distance: u64,
    /// `𝔼 Σ_s|φ_s(k)||φ_s(ℓ)|`, an upper bound for `𝔼 sup_t |overlap|`.
    pub certified: ExpectationRecord,
    pub grid_sup: ExpectationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdlReport {
    pub rows: Vec<EdlRow>,
    /// Fit of the per-distance mean certified bound.
    pub fit: DecayFit,
    pub gamma_positive: bool,
    /// `grid_sup ≤ certified` held at every phase and pair.
    pub certificate_holds: bool,
}

pub fn edl_check(
    family: &dyn PhaseFamily,
    plan: &PhasePlan,
    pairs: &[(i64, i64)],
    grid: &TimeGrid,
) -> Result<EdlReport> {
    if pairs.is_empty() {
        return Err(domain("no site pairs given"));
    }
    let sites: Vec<i64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    check_inner(family, &sites)?;
    let samples = map_phases(family, plan, |_, eig| {
        pairs
            .iter()
            .map(|&(k, l)| sup_overlap(eig, k, l, grid).map(|s| (s.certified_bound, s.grid_max)))
            .collect::<Result<Vec<_>>>()
    })?;
    let certificate_holds = samples.iter().flatten().all(|&(cert, sup)| sup <= cert + 1e-12);
    let descriptor = family.descriptor();
    let record = |quantity, k, l, column: &[f64]| {
        let (mean, std_error) = mean_and_std_error(column);
        ExpectationRecord { quantity, first: k, second: l, mean, std_error, count: plan.count, family: descriptor }
    };
    let rows: Vec<EdlRow> = pairs
        .iter()
        .enumerate()
        .map(|(j, &(k, l))| {
            let cert: Vec<f64> = samples.iter().map(|s| s[j].0).collect();
            let sup: Vec<f64> = samples.iter().map(|s| s[j].1).collect();
            EdlRow {
                k,
                l,
                distance: (k - l).unsigned_abs(),
                certified: record(Quantity::OverlapSum, k, l, &cert),
                grid_sup: record(Quantity::SupOverlapGrid, k, l, &sup),
            }
        })
        .collect();

    let mut by_distance: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
    for row in &rows {
        let e = by_distance.entry(row.distance).or_insert((0.0, 0));
        e.0 += row.certified.mean;
        e.1 += 1;
    }
    let points: Vec<(u64, f64)> = by_distance.iter().map(|(&d, &(s, c))| (d, s / c as f64)).collect();
    let (lo, hi) = (points[0].0, points[points.len() - 1].0);
    let fit = decay_fit_with_floor(&points, lo, hi, family.log_floor())?;
    Ok(EdlReport { rows, gamma_positive: fit.gamma_hat > 0.0, fit, certificate_holds })
}
