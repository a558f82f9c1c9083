//! Full eigendecomposition of symmetric tridiagonal matrices by implicit QL
//! iteration with Wilkinson shifts (the `tql2` scheme), accumulating the
//! rotations into the eigenvector matrix.

use crate::error::{domain, Error, Result};
use crate::operator::{OperatorSpec, TridiagonalOperator, Window};

/// Where an eigensystem came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    Operator(OperatorSpec),
    /// Diagonal supplied directly, no operator parameters attached.
    Diagonal,
    /// Orthonormal basis with planted exponential profiles, see
    /// [`crate::expectation::PlantedFamily`].
    Planted {
        rate: f64,
    },
}

/// Eigenvalues in ascending order with orthonormal eigenvectors.
///
/// Vectors are stored column-major: column `s` is `φ_s`, indexed by window
/// position. The entry of largest modulus in each column is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    values: Vec<f64>,
    vectors: Vec<f64>,
    window: Window,
    origin: Origin,
}

impl EigenSystem {
    /// Assemble from raw parts. Columns are reordered so that values ascend and
    /// signs are normalised.
    pub fn from_parts(values: Vec<f64>, vectors: Vec<f64>, window: Window, origin: Origin) -> Result<Self> {
        let n = window.len();
        if values.len() != n || vectors.len() != n * n {
            return Err(domain("eigensystem shape does not match window"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut sorted_values = Vec::with_capacity(n);
        let mut sorted_vectors = Vec::with_capacity(n * n);
        for &s in &order {
            sorted_values.push(values[s]);
            let col = &vectors[s * n..(s + 1) * n];
            let pivot = col
                .iter()
                .enumerate()
                .fold((0usize, -1.0f64), |best, (i, &x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
                .0;
            let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            sorted_vectors.extend(col.iter().map(|&x| sign * x));
        }
        Ok(Self { values: sorted_values, vectors: sorted_vectors, window, origin })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    /// `φ_s` as a slice over window positions.
    pub fn vector(&self, s: usize) -> &[f64] {
        let n = self.dimension();
        &self.vectors[s * n..(s + 1) * n]
    }

    /// `φ_s` at window position `i`.
    #[inline]
    pub fn component(&self, s: usize, i: usize) -> f64 {
        self.vectors[s * self.dimension() + i]
    }

    /// `(φ_s(site))_s` for one site.
    pub fn row(&self, site: i64) -> Result<Vec<f64>> {
        let i = self.window.index_of(site)?;
        Ok((0..self.dimension()).map(|s| self.component(s, i)).collect())
    }

    /// Adds `delta` to every entry of `φ_s` without renormalising. Only meant
    /// for fault injection in verification runs.
    pub fn with_perturbed_vector(mut self, s: usize, delta: f64) -> Self {
        let n = self.dimension();
        for x in &mut self.vectors[s * n..(s + 1) * n] {
            *x += delta;
        }
        self
    }
}

/// Eigenpairs of `H`; fails after `30·N` QL iterations.
pub fn eigh_tridiagonal(h: &TridiagonalOperator) -> Result<EigenSystem> {
    let n = h.dimension();
    if n == 0 {
        return Err(domain("empty operator"));
    }
    let mut d = h.diagonal().to_vec();
    let mut e = vec![1.0; n];
    e[n - 1] = 0.0;
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut d, &mut e, &mut z, n)?;
    let origin = match h.spec() {
        Some(spec) => Origin::Operator(*spec),
        None => Origin::Diagonal,
    };
    EigenSystem::from_parts(d, z, h.window(), origin)
}

fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    let max_iterations = 30 * n;
    let mut iterations = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let scale = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > max_iterations {
                return Err(Error::Convergence { index: l, iterations });
            }

            // Wilkinson shift from the leading 2x2 block
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;

            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;

                let (left, right) = z.split_at_mut((i + 1) * n);
                let zi = &mut left[i * n..];
                let zj = &mut right[..n];
                for (a, b) in zi.iter_mut().zip(zj.iter_mut()) {
                    let f = *b;
                    *b = s * *a + c * f;
                    *a = c * *a - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Worst eigen-residual and orthogonality defect of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub max_orthogonality_defect: f64,
}

impl ResidualReport {
    pub fn within(&self, tolerance: f64) -> bool {
        self.max_residual <= tolerance && self.max_orthogonality_defect <= tolerance
    }
}

/// `max_s ‖Hφ_s − E_sφ_s‖₂` and `max_{s,t} |⟨φ_s, φ_t⟩ − δ_st|`.
pub fn residual_report(h: &TridiagonalOperator, eig: &EigenSystem) -> Result<ResidualReport> {
    let n = h.dimension();
    if eig.dimension() != n {
        return Err(domain("eigensystem and operator dimensions differ"));
    }
    let mut max_residual = 0.0f64;
    for s in 0..n {
        let phi = eig.vector(s);
        let hphi = h.apply(phi)?;
        let res = hphi.iter().zip(phi).map(|(a, b)| (a - eig.values[s] * b).powi(2)).sum::<f64>().sqrt();
        max_residual = max_residual.max(res);
    }
    let mut max_defect = 0.0f64;
    for s in 0..n {
        let a = eig.vector(s);
        for t in s..n {
            let b = eig.vector(t);
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let target = if s == t { 1.0 } else { 0.0 };
            max_defect = max_defect.max((dot - target).abs());
        }
    }
    Ok(ResidualReport { max_residual, max_orthogonality_defect: max_defect })
}
