//! Finite-window truncation of `(Hu)(n) = u(n+1) + u(n−1) + 2λ cos(2π(nα + θ)) u(n)`
//! with Dirichlet boundary conditions.

use std::ops::{Add, Mul};

use crate::arithmetic::Frequency;
use crate::dd::DoubleDouble;
use crate::error::{domain, Result};

/// Largest site modulus accepted in a window. Keeps `n·α` inside the range
/// where the double-double reduction stays accurate.
pub const MAX_SITE: i64 = 1 << 40;

/// Closed integer interval of lattice sites `[n_min, n_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub n_min: i64,
    pub n_max: i64,
}

impl Window {
    pub fn new(n_min: i64, n_max: i64) -> Result<Self> {
        if n_min > n_max {
            return Err(domain(format!("empty window [{n_min}, {n_max}]")));
        }
        if n_min < -MAX_SITE || n_max > MAX_SITE {
            return Err(domain(format!("window [{n_min}, {n_max}] exceeds |n| <= 2^40")));
        }
        Ok(Self { n_min, n_max })
    }

    /// `[−radius, radius]`.
    pub fn symmetric(radius: i64) -> Result<Self> {
        Self::new(-radius, radius)
    }

    pub fn len(&self) -> usize {
        (self.n_max - self.n_min) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, site: i64) -> bool {
        (self.n_min..=self.n_max).contains(&site)
    }

    pub fn index_of(&self, site: i64) -> Result<usize> {
        if self.contains(site) {
            Ok((site - self.n_min) as usize)
        } else {
            Err(domain(format!("site {site} outside window [{}, {}]", self.n_min, self.n_max)))
        }
    }

    pub fn site_of(&self, index: usize) -> i64 {
        self.n_min + index as i64
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.n_min..=self.n_max
    }

    pub fn shifted(&self, by: i64) -> Result<Self> {
        let lo = self.n_min.checked_add(by).ok_or_else(|| domain("window shift overflows"))?;
        let hi = self.n_max.checked_add(by).ok_or_else(|| domain("window shift overflows"))?;
        Self::new(lo, hi)
    }

    /// Sites whose results are trusted: half the radius around the window's middle.
    /// Dirichlet truncation distorts eigenfunctions near the edges.
    pub fn inner(&self) -> Window {
        let span = self.n_max - self.n_min;
        let quarter = span / 4;
        let middle = self.n_min + span / 2;
        let lo = (middle - quarter).max(self.n_min);
        let hi = (middle + quarter).min(self.n_max);
        Window { n_min: lo, n_max: hi }
    }
}

/// Parameters of one truncated operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpec {
    pub lambda: f64,
    pub alpha: Frequency,
    /// Phase reduced to `[0, 1)`.
    pub theta: f64,
    pub window: Window,
}

impl OperatorSpec {
    pub fn new(lambda: f64, alpha: Frequency, theta: f64, window: Window) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(domain(format!("coupling {lambda} must be positive and finite")));
        }
        if !theta.is_finite() {
            return Err(domain("phase must be finite"));
        }
        Ok(Self { lambda, alpha, theta: theta.rem_euclid(1.0), window })
    }

    pub fn dimension(&self) -> usize {
        self.window.len()
    }

    /// Bound `2 + 2λ` on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        2.0 + 2.0 * self.lambda
    }
}

/// `fract(nα + θ)` with the reduction of `nα` done in double-double.
pub fn site_phase(alpha: &Frequency, theta: f64, n: i64) -> f64 {
    (alpha.multiple_fract(n) + DoubleDouble::from_f64(theta)).fract().to_f64()
}

/// `2λ cos(2π(nα + θ))`.
pub fn potential(lambda: f64, alpha: &Frequency, theta: f64, n: i64) -> f64 {
    2.0 * lambda * (std::f64::consts::TAU * site_phase(alpha, theta, n)).cos()
}

/// Symmetric tridiagonal matrix with unit hopping.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    diagonal: Vec<f64>,
    window: Window,
    spec: Option<OperatorSpec>,
}

impl TridiagonalOperator {
    pub fn build(spec: &OperatorSpec) -> Result<Self> {
        let diagonal = spec.window.sites().map(|n| potential(spec.lambda, &spec.alpha, spec.theta, n)).collect();
        Ok(Self { diagonal, window: spec.window, spec: Some(*spec) })
    }

    /// Operator with an arbitrary diagonal and unit off-diagonal.
    pub fn from_diagonal(diagonal: Vec<f64>, window: Window) -> Result<Self> {
        if diagonal.len() != window.len() {
            return Err(domain("diagonal length does not match window"));
        }
        Ok(Self { diagonal, window, spec: None })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn spec(&self) -> Option<&OperatorSpec> {
        self.spec.as_ref()
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    /// `2 + max|diagonal|`, which bounds `‖H‖`.
    pub fn norm_bound(&self) -> f64 {
        2.0 + self.diagonal.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }

    /// `(Hv)[i] = v[i−1] + v[i+1] + diagonal[i]·v[i]`, zero outside the window.
    pub fn apply<T>(&self, v: &[T]) -> Result<Vec<T>>
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    {
        let n = self.diagonal.len();
        if v.len() != n {
            return Err(domain(format!("vector length {} != dimension {n}", v.len())));
        }
        let out = (0..n)
            .map(|i| {
                let mut acc = v[i] * self.diagonal[i];
                if i > 0 {
                    acc = acc + v[i - 1];
                }
                if i + 1 < n {
                    acc = acc + v[i + 1];
                }
                acc
            })
            .collect();
        Ok(out)
    }
}
