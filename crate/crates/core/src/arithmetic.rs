//! Continued fractions, Diophantine bookkeeping and phase resonances for the
//! frequency of the quasiperiodic potential.
//!
//! Every `‖qα‖` goes through [`DoubleDouble`] so that `q·α mod 1` keeps about
//! 30 significant digits for `q` up to `10⁶`. Named frequencies (`golden`,
//! `sqrt2`) are carried to double-double precision; decimal inputs carry the
//! rounding uncertainty of an `f64`, which is what decides when an input is
//! treated as rational.

use serde::{Deserialize, Serialize};

use crate::dd::DoubleDouble;
use crate::error::{domain, Result};

/// Horizon below which every `q` is scanned by [`beta_estimate`].
const BETA_DENSE_PREFIX: u64 = 100;
/// Cap on the exhaustive part of the tail scan in [`beta_estimate`].
const BETA_TAIL_SCAN_CAP: u64 = 1_000_000;
/// Maximal continued-fraction depth used internally for convergent lists.
pub const MAX_CF_DEPTH: usize = 64;

/// Frequency `α ∈ (0, 1)` of the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    value: DoubleDouble,
    /// Absolute uncertainty of `value` as a representation of the intended number.
    uncertainty: f64,
}

impl Frequency {
    /// Frequency from a plain double; uncertainty is half an ulp of the input.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("frequency {alpha} outside (0, 1)")));
        }
        Ok(Self { value: DoubleDouble::from_f64(alpha), uncertainty: alpha * f64::EPSILON })
    }

    /// `(√5 − 1)/2`, the inverse golden mean.
    pub fn golden() -> Self {
        let s = DoubleDouble::sqrt_of(5.0);
        let v = (s - DoubleDouble::ONE).mul_f64(0.5);
        Self { value: v, uncertainty: 1e-31 }
    }

    /// `√2 − 1`, continued fraction `[0; 2, 2, 2, …]`.
    pub fn sqrt2() -> Self {
        let v = DoubleDouble::sqrt_of(2.0) - DoubleDouble::ONE;
        Self { value: v, uncertainty: 1e-31 }
    }

    /// Rebuild `[0; a₁, a₂, …]` from its partial quotients, evaluated in
    /// double-double from the innermost term outwards.
    pub fn from_partial_quotients(quotients: &[u64]) -> Result<Self> {
        if quotients.is_empty() || quotients.contains(&0) {
            return Err(domain("partial quotients must be nonempty and positive"));
        }
        let mut x = DoubleDouble::ZERO;
        for &a in quotients.iter().rev() {
            x = (DoubleDouble::from_f64(a as f64) + x).recip();
        }
        if !(x.hi > 0.0 && x.hi < 1.0) {
            return Err(domain("continued fraction does not lie in (0, 1)"));
        }
        Ok(Self { value: x, uncertainty: 1e-31 })
    }

    /// Parses `golden`, `sqrt2`, or a decimal in `(0, 1)`.
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "golden" => Ok(Self::golden()),
            "sqrt2" => Ok(Self::sqrt2()),
            other => {
                let alpha: f64 = other.parse().map_err(|_| domain(format!("cannot parse frequency '{other}'")))?;
                Self::new(alpha)
            }
        }
    }

    pub fn value(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn value_dd(&self) -> DoubleDouble {
        self.value
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    /// `k·α` reduced to `[0, 1)` in double-double.
    pub(crate) fn multiple_fract(&self, k: i64) -> DoubleDouble {
        self.value.mul_f64(k as f64).fract()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The requested depth was reached.
    Depth,
    /// The input is indistinguishable from the last convergent.
    Rational,
}

/// Partial quotients `a₁, a₂, …` of `α = [0; a₁, a₂, …]` and the matching
/// convergents `p_k/q_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    pub partial_quotients: Vec<u64>,
    pub convergents: Vec<(u128, u128)>,
    pub termination: Termination,
}

impl ContinuedFraction {
    pub fn depth(&self) -> usize {
        self.partial_quotients.len()
    }

    pub fn is_truncated(&self) -> bool {
        self.termination == Termination::Rational
    }

    pub fn denominators(&self) -> impl Iterator<Item = u128> + '_ {
        self.convergents.iter().map(|&(_, q)| q)
    }
}

pub fn continued_fraction(alpha: &Frequency, depth: usize) -> Result<ContinuedFraction> {
    if depth == 0 {
        return Err(domain("continued fraction depth must be at least 1"));
    }
    let target = alpha.value;
    let mut quotients = Vec::with_capacity(depth);
    let mut convergents = Vec::with_capacity(depth);
    // (p_{k-2}, q_{k-2}) and (p_{k-1}, q_{k-1}) seeded with 1/0 and 0/1
    let (mut p_prev, mut q_prev) = (1u128, 0u128);
    let (mut p, mut q) = (0u128, 1u128);
    let mut x = target;
    let mut termination = Termination::Depth;

    while quotients.len() < depth {
        if x.hi <= 0.0 {
            termination = Termination::Rational;
            break;
        }
        let inv = x.recip();
        let a_dd = inv.floor();
        let a = a_dd.to_f64();
        if !(a >= 1.0 && a < 2f64.powi(63)) {
            termination = Termination::Rational;
            break;
        }
        let a = a as u64;
        let next = a as u128;
        let (Some(p_new), Some(q_new)) = (
            next.checked_mul(p).and_then(|v| v.checked_add(p_prev)),
            next.checked_mul(q).and_then(|v| v.checked_add(q_prev)),
        ) else {
            termination = Termination::Rational;
            break;
        };
        quotients.push(a);
        convergents.push((p_new, q_new));
        (p_prev, q_prev, p, q) = (p, q, p_new, q_new);
        x = inv - a_dd;

        let gap = (target - DoubleDouble::from_f64(p as f64) / DoubleDouble::from_f64(q as f64)).abs().to_f64();
        if gap <= 4.0 * alpha.uncertainty {
            termination = Termination::Rational;
            break;
        }
    }

    Ok(ContinuedFraction { partial_quotients: quotients, convergents, termination })
}

/// `‖qα‖`, the distance from `q·α` to the nearest integer.
pub fn norm_dist(q: u64, alpha: &Frequency) -> f64 {
    alpha.value.mul_f64(q as f64).centered_fract().abs().to_f64()
}

/// `‖x − kα‖` for an arbitrary real offset `x`.
pub fn offset_norm_dist(x: f64, k: i64, alpha: &Frequency) -> f64 {
    (DoubleDouble::from_f64(x) - alpha.value.mul_f64(k as f64)).centered_fract().abs().to_f64()
}

/// Finite-horizon proxy for `β(α) = limsup −ln‖qα‖ / q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub horizon: u64,
    /// `max_{1 ≤ q ≤ Q} max(0, −ln‖qα‖/q)`; nondecreasing in `Q`.
    pub running_max: f64,
    pub argmax_q: u64,
    /// Same maximum restricted to `⌈Q/10⌉ ≤ q ≤ Q`, the part that tracks the limsup.
    pub tail_max: f64,
    pub tail_argmax_q: u64,
    /// Set when `‖qα‖` vanished (to input precision) for some scanned `q`.
    pub infinite: bool,
}

pub fn beta_estimate(alpha: &Frequency, horizon: u64) -> Result<BetaEstimate> {
    if horizon == 0 {
        return Err(domain("beta horizon must be at least 1"));
    }
    let cf = continued_fraction(alpha, MAX_CF_DEPTH)?;
    let convergents: Vec<u64> = cf.denominators().filter(|&q| q <= horizon as u128).map(|q| q as u64).collect();

    let rate = |q: u64| -> Option<f64> {
        let d = norm_dist(q, alpha);
        if d <= q as f64 * alpha.uncertainty {
            None
        } else {
            Some((-d.ln() / q as f64).max(0.0))
        }
    };

    let mut est = BetaEstimate {
        horizon,
        running_max: 0.0,
        argmax_q: 1,
        tail_max: 0.0,
        tail_argmax_q: horizon.div_ceil(10).max(1),
        infinite: false,
    };

    let mut candidates: Vec<u64> = (1..=horizon.min(BETA_DENSE_PREFIX)).collect();
    candidates.extend(convergents.iter().copied());
    candidates.sort_unstable();
    candidates.dedup();
    for &q in &candidates {
        match rate(q) {
            None => {
                est.infinite = true;
                est.running_max = f64::INFINITY;
                est.argmax_q = q;
                break;
            }
            Some(r) if r > est.running_max => {
                est.running_max = r;
                est.argmax_q = q;
            }
            _ => {}
        }
    }

    // Tail: convergents inside the window dominate every q they precede;
    // the stretch before the first of them is scanned directly.
    let tail_lo = horizon.div_ceil(10).max(1);
    let first_inside = convergents.iter().copied().find(|&q| q >= tail_lo);
    let scan_hi = first_inside
        .map(|q| q.saturating_sub(1))
        .unwrap_or(horizon)
        .min(horizon)
        .min(tail_lo.saturating_add(BETA_TAIL_SCAN_CAP));
    let mut tail: Vec<u64> = (tail_lo..=scan_hi).collect();
    tail.extend(convergents.iter().copied().filter(|&q| q >= tail_lo));
    for q in tail {
        match rate(q) {
            None => {
                est.infinite = true;
                est.tail_max = f64::INFINITY;
                est.tail_argmax_q = q;
                break;
            }
            Some(r) if r > est.tail_max => {
                est.tail_max = r;
                est.tail_argmax_q = q;
            }
            _ => {}
        }
    }
    Ok(est)
}

/// Constants `(κ, τ)` of the condition `‖qα‖ ≥ κ/q^τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineParams {
    pub kappa: f64,
    pub tau: f64,
}

impl DiophantineParams {
    pub fn new(kappa: f64, tau: f64) -> Result<Self> {
        if !(kappa > 0.0 && tau > 0.0) {
            return Err(domain("Diophantine constants must be positive"));
        }
        Ok(Self { kappa, tau })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineReport {
    pub holds: bool,
    /// Smallest minimiser of `‖qα‖·q^τ` over the horizon.
    pub worst_q: u64,
    pub worst_margin: f64,
}

/// Exhaustive check of `‖qα‖ ≥ κ/q^τ` for `1 ≤ q ≤ horizon`.
pub fn diophantine_check(alpha: &Frequency, params: DiophantineParams, horizon: u64) -> Result<DiophantineReport> {
    if horizon == 0 {
        return Err(domain("Diophantine horizon must be at least 1"));
    }
    let mut worst_q = 1;
    let mut worst_margin = f64::INFINITY;
    for q in 1..=horizon {
        let margin = norm_dist(q, alpha) * (q as f64).powf(params.tau);
        if margin < worst_margin {
            worst_margin = margin;
            worst_q = q;
        }
    }
    Ok(DiophantineReport { holds: worst_margin >= params.kappa, worst_q, worst_margin })
}

/// `‖2θ − kα‖`.
pub fn resonance_distance(theta: f64, alpha: &Frequency, k: i64) -> f64 {
    offset_norm_dist(2.0 * theta, k, alpha)
}

/// Whether `k` is η-resonant for `θ`: `‖2θ − kα‖ ≤ e^{−η|k|}`.
pub fn is_resonant(theta: f64, alpha: &Frequency, k: i64, eta: f64) -> bool {
    resonance_distance(theta, alpha, k) <= (-eta * k.unsigned_abs() as f64).exp()
}

/// The η-resonances of a phase up to a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub theta: f64,
    pub eta: f64,
    pub horizon: u64,
    pub resonant_k: Vec<i64>,
}

/// A range of distances `[lo, hi]` between consecutive resonances on which
/// exponential eigenfunction decay is expected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayWindow {
    pub lo: f64,
    pub hi: f64,
    /// The upper end is set by the scan horizon, not by a resonance.
    pub horizon_limited: bool,
}

impl ResonanceReport {
    /// Windows `[C₀(1 + |k_j|), |k_{j+1}|/C₀]` between resonances ordered by
    /// modulus. Empty windows are dropped.
    pub fn windows(&self, c0: f64) -> Result<Vec<DecayWindow>> {
        if !(c0 >= 1.0) {
            return Err(domain(format!("window constant C0 = {c0} must be at least 1")));
        }
        let mut moduli: Vec<u64> = self.resonant_k.iter().map(|k| k.unsigned_abs()).collect();
        moduli.sort_unstable();
        moduli.dedup();
        let mut out = Vec::new();
        for (j, &m) in moduli.iter().enumerate() {
            let lo = c0 * (1.0 + m as f64);
            let (hi, horizon_limited) = match moduli.get(j + 1) {
                Some(&next) => (next as f64 / c0, false),
                None => (self.horizon as f64 / c0, true),
            };
            if lo <= hi {
                out.push(DecayWindow { lo, hi, horizon_limited });
            }
        }
        Ok(out)
    }
}

pub fn resonances(theta: f64, alpha: &Frequency, eta: f64, horizon: u64) -> Result<ResonanceReport> {
    if !(eta > 0.0) {
        return Err(domain("eta must be positive"));
    }
    if horizon == 0 {
        return Err(domain("resonance horizon must be at least 1"));
    }
    if horizon > i64::MAX as u64 / 2 {
        return Err(domain("resonance horizon too large"));
    }
    if !theta.is_finite() {
        return Err(domain("phase must be finite"));
    }
    let theta = theta.rem_euclid(1.0);
    let k_max = horizon as i64;
    let resonant_k = (-k_max..=k_max).filter(|&k| is_resonant(theta, alpha, k, eta)).collect();
    Ok(ResonanceReport { theta, eta, horizon, resonant_k })
}

/// Lebesgue measure of `{θ ∈ [0,1) : ‖2θ − kα‖ ≤ e^{−η|k|}}`.
///
/// `2θ` must land in an arc of length `2e^{−η|k|}`, and `θ ↦ 2θ mod 1`
/// preserves Lebesgue measure, so the answer is `min(1, 2e^{−η|k|})` for
/// every `α`.
pub fn resonant_phase_measure(k: i64, eta: f64) -> Result<f64> {
    if k == 0 {
        return Err(domain("resonant phase measure needs k != 0"));
    }
    if !(eta > 0.0) {
        return Err(domain("eta must be positive"));
    }
    let eps = (-eta * k.unsigned_abs() as f64).exp();
    Ok((2.0 * eps).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_mean_is_all_ones() {
        let cf = continued_fraction(&Frequency::golden(), 6).unwrap();
        assert_eq!(cf.partial_quotients, vec![1; 6]);
        assert_eq!(cf.denominators().collect::<Vec<_>>(), vec![1, 2, 3, 5, 8, 13]);
        assert_eq!(cf.termination, Termination::Depth);
    }

    #[test]
    fn silver_mean_is_all_twos() {
        let cf = continued_fraction(&Frequency::sqrt2(), 5).unwrap();
        assert_eq!(cf.partial_quotients, vec![2; 5]);
    }

    #[test]
    fn rational_input_is_flagged() {
        let cf = continued_fraction(&Frequency::new(0.25).unwrap(), 10).unwrap();
        assert_eq!(cf.partial_quotients, vec![4]);
        assert!(cf.is_truncated());

        // the binary value sits just above 1/10, so the expansion ends [.., 9, 1]
        let cf = continued_fraction(&Frequency::new(0.1).unwrap(), 10).unwrap();
        assert_eq!(cf.partial_quotients, vec![9, 1]);
        assert_eq!(cf.convergents.last(), Some(&(1, 10)));
        assert!(cf.is_truncated());
    }

    #[test]
    fn deep_golden_expansion_stays_exact() {
        let cf = continued_fraction(&Frequency::golden(), MAX_CF_DEPTH).unwrap();
        assert!(cf.partial_quotients.iter().all(|&a| a == 1));
        assert_eq!(cf.depth(), MAX_CF_DEPTH);
    }

    #[test]
    fn frequency_domain() {
        assert!(Frequency::new(0.0).is_err());
        assert!(Frequency::new(1.0).is_err());
        assert!(Frequency::new(f64::NAN).is_err());
        assert!(Frequency::parse("golden").is_ok());
        assert!(Frequency::parse("nope").is_err());
        assert!(continued_fraction(&Frequency::golden(), 0).is_err());
    }

    #[test]
    fn norm_dist_trivial_values() {
        let a = Frequency::new(0.25).unwrap();
        assert_eq!(norm_dist(1, &a), 0.25);
        assert_eq!(norm_dist(2, &a), 0.5);
        assert_eq!(norm_dist(4, &a), 0.0);
    }

    #[test]
    fn beta_of_rational_is_infinite() {
        let b = beta_estimate(&Frequency::new(0.5).unwrap(), 10).unwrap();
        assert!(b.infinite);
        assert!(b.running_max.is_infinite());
        let b = beta_estimate(&Frequency::new(0.1).unwrap(), 1000).unwrap();
        assert!(b.infinite);
    }

    #[test]
    fn beta_golden_tail_is_small() {
        let b = beta_estimate(&Frequency::golden(), 10_000).unwrap();
        assert!(!b.infinite);
        assert!(b.tail_max <= 0.01, "{b:?}");
        // q = 1 dominates the running max: −ln(1 − α)
        assert_eq!(b.argmax_q, 1);
    }

    #[test]
    fn diophantine_examples() {
        let golden = Frequency::golden();
        let r = diophantine_check(&golden, DiophantineParams::new(0.2, 1.5).unwrap(), 10_000).unwrap();
        assert!(r.holds);
        let r = diophantine_check(&golden, DiophantineParams::new(1.0, 1.0).unwrap(), 100).unwrap();
        assert!(!r.holds);
        assert_eq!(r.worst_q, 1);
        let quarter = Frequency::new(0.25).unwrap();
        let r = diophantine_check(&quarter, DiophantineParams::new(1e-9, 2.0).unwrap(), 12).unwrap();
        assert!(!r.holds);
        assert_eq!(r.worst_q, 4);
        assert!(DiophantineParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_is_always_resonant() {
        for theta in [0.0, 0.1, 0.25, 0.49, 0.77] {
            let r = resonances(theta, &Frequency::golden(), 3.0, 5).unwrap();
            assert!(r.resonant_k.contains(&0));
        }
    }

    #[test]
    fn planted_resonance_is_found() {
        let alpha = Frequency::golden();
        let theta = alpha.value_dd().mul_f64(3.5).fract().to_f64();
        for eta in [0.1, 0.5, 1.0, 2.0, 3.5] {
            let r = resonances(theta, &alpha, eta, 20).unwrap();
            assert!(r.resonant_k.contains(&7), "eta {eta}: {:?}", r.resonant_k);
        }
    }

    #[test]
    fn windows_between_resonances() {
        let report = ResonanceReport { theta: 0.0, eta: 1.0, horizon: 100, resonant_k: vec![-3, 0, 3, 40] };
        let w = report.windows(1.0).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!((w[0].lo, w[0].hi), (1.0, 3.0));
        assert_eq!((w[1].lo, w[1].hi), (4.0, 40.0));
        assert_eq!((w[2].lo, w[2].hi, w[2].horizon_limited), (41.0, 100.0, true));
        let w = report.windows(2.0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].lo, w[0].hi), (8.0, 20.0));
        assert!(report.windows(0.5).is_err());
    }

    #[test]
    fn phase_measure_values() {
        assert_eq!(resonant_phase_measure(1, std::f64::consts::LN_2).unwrap(), 1.0);
        let m = resonant_phase_measure(10, 1.0).unwrap();
        assert!((m - 2.0 * (-10f64).exp()).abs() < 1e-18);
        assert!((m - 9.08e-5).abs() < 1e-7);
        assert_eq!(resonant_phase_measure(-1, 0.1).unwrap(), 1.0);
        assert!(resonant_phase_measure(0, 1.0).is_err());
        assert!(resonant_phase_measure(3, 0.0).is_err());
    }
}
