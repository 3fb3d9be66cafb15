//! Dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Everything here works on small (d ≤ 16) Hermitian matrices, so the
//! matrix exponential and matrix square root are both evaluated through a
//! Hermitian eigendecomposition rather than series expansions.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left-most factor most significant.
pub fn kron_all(factors: &[&CMat]) -> CMat {
    let mut out = CMat::identity(1, 1);
    for f in factors {
        out = out.kronecker(*f);
    }
    out
}

pub fn real_matrix(m: &nalgebra::Matrix3<f64>) -> CMat {
    CMat::from_fn(3, 3, |i, j| C64::new(m[(i, j)], 0.0))
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Max-entry deviation from Hermiticity relative to the largest entry
/// (absolute when the matrix is zero).
pub fn hermiticity_error(m: &CMat) -> f64 {
    let diff = max_abs(&(m - m.adjoint()));
    let scale = max_abs(m);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn is_hermitian(m: &CMat, rel_tol: f64) -> bool {
    m.is_square() && hermiticity_error(m) <= rel_tol
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Hermitian eigendecomposition, eigenvalues ascending.
///
/// Each eigenvector's phase is fixed so that its largest-magnitude component
/// is real and positive; this makes the basis reproducible run to run.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: CMat,
}

pub fn eigh(m: &CMat) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    // symmetrise to remove rounding-level anti-Hermitian parts
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvalues[k];
        if !v.is_finite() {
            return Err(Error::Numerical("non-finite eigenvalue".into()));
        }
        values.push(v);
        let src = eig.eigenvectors.column(k);
        let mut best = 0;
        for r in 0..n {
            // ties resolved toward the lower index for determinism
            if src[r].norm() > src[best].norm() + 1e-12 {
                best = r;
            }
        }
        let phase = if src[best].norm() > 0.0 {
            src[best].conj() / src[best].norm()
        } else {
            ONE
        };
        for r in 0..n {
            vectors[(r, col)] = src[r] * phase;
        }
    }
    Ok(HermitianEigen { values, vectors })
}

impl HermitianEigen {
    /// V f(Λ) V† for a complex-valued scalar function of the eigenvalues.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let fv = f(v);
            for i in 0..n {
                scaled[(i, j)] *= fv;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Propagator exp(−i·2π·H·t) for a Hermitian `h` in Hz and `t` in seconds.
pub fn propagator(h: &CMat, t: f64) -> Result<CMat> {
    let eig = eigh(h)?;
    Ok(eig.apply(|e| C64::from_polar(1.0, -2.0 * PI * e * t)))
}

/// exp(−i·θ·G) for a Hermitian generator `g`.
pub fn rotation(g: &CMat, theta: f64) -> Result<CMat> {
    let eig = eigh(g)?;
    Ok(eig.apply(|e| C64::from_polar(1.0, -theta * e)))
}

/// Principal square root of a positive semidefinite Hermitian matrix;
/// negative eigenvalues are clipped to zero.
pub fn sqrtm_psd(m: &CMat) -> Result<CMat> {
    let eig = eigh(m)?;
    Ok(eig.apply(|e| C64::new(e.max(0.0).sqrt(), 0.0)))
}

/// Trace distance ½‖A − B‖₁ between Hermitian matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> Result<f64> {
    let eig = eigh(&(a - b))?;
    Ok(0.5 * eig.values.iter().map(|v| v.abs()).sum::<f64>())
}

/// Conjugation U ρ U†.
pub fn conjugate(u: &CMat, rho: &CMat) -> CMat {
    u * rho * u.adjoint()
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut x = phi % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        // small LCG keeps the test free of extra dependencies
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = CMat::from_fn(n, n, |_, _| C64::new(next(), next()));
        &a + a.adjoint()
    }

    /// Independent expm route: scaling and squaring with a Taylor series.
    fn expm_taylor(a: &CMat) -> CMat {
        let n = a.nrows();
        let norm = a.iter().map(|z| z.norm()).sum::<f64>();
        let mut s = 0;
        while norm / 2f64.powi(s) > 0.5 {
            s += 1;
        }
        let scaled = a / C64::new(2f64.powi(s), 0.0);
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..30 {
            term = &term * &scaled / C64::new(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn eigh_reconstructs_and_orders() {
        let h = random_hermitian(6, 7);
        let e = eigh(&h).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let rebuilt = e.apply(|v| C64::new(v, 0.0));
        assert!(max_abs(&(rebuilt - &h)) < 1e-12);
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!(max_abs(&(gram - identity(6))) < 1e-12);
    }

    #[test]
    fn propagator_matches_taylor_oracle() {
        let h = random_hermitian(5, 11);
        let t = 0.37;
        let u = propagator(&h, t).unwrap();
        let oracle = expm_taylor(&(&h * C64::new(0.0, -2.0 * PI * t)));
        assert!(max_abs(&(u - oracle)) < 1e-10);
    }

    #[test]
    fn sqrtm_squares_back() {
        let a = random_hermitian(4, 3);
        let psd = &a * a.adjoint();
        let r = sqrtm_psd(&psd).unwrap();
        assert!(max_abs(&(&r * &r - psd)) < 1e-10);
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.25)).abs() - 0.25 < 1e-15);
    }
}
