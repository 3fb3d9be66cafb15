use crate::error::{invalid, Result};
use crate::linalg::{kron_all, CMat, C64};

/// Cartesian angular-momentum matrices for one spin, basis ordered by
/// descending m (index 0 is m = +S).
#[derive(Debug, Clone)]
pub struct SpinOps {
    pub x: CMat,
    pub y: CMat,
    pub z: CMat,
}

impl SpinOps {
    pub fn component(&self, axis: usize) -> &CMat {
        match axis {
            0 => &self.x,
            1 => &self.y,
            _ => &self.z,
        }
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }
}

/// Sx, Sy, Sz for a spin of the given multiplicity 2S+1.
pub fn spin_operators(multiplicity: usize) -> Result<SpinOps> {
    if multiplicity < 2 {
        return Err(invalid(format!(
            "spin multiplicity must be at least 2, got {multiplicity}"
        )));
    }
    let n = multiplicity;
    let s = (n as f64 - 1.0) / 2.0;
    let m = |k: usize| s - k as f64;
    let mut plus = CMat::zeros(n, n);
    // S+ |m⟩ = sqrt(S(S+1) − m(m+1)) |m+1⟩; |m+1⟩ sits one index lower
    for k in 1..n {
        let mk = m(k);
        plus[(k - 1, k)] = C64::new((s * (s + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();
    let x = (&plus + &minus) * C64::new(0.5, 0.0);
    let y = (&plus - &minus) * C64::new(0.0, -0.5);
    let z = CMat::from_diagonal(&nalgebra::DVector::from_fn(n, |k, _| C64::new(m(k), 0.0)));
    Ok(SpinOps { x, y, z })
}

/// Spin operators of every site embedded in a product space.
///
/// Site 0 is the most significant factor of the Kronecker product.
#[derive(Debug, Clone)]
pub struct ProductOperators {
    pub dims: Vec<usize>,
    pub sites: Vec<SpinOps>,
}

impl ProductOperators {
    pub fn new(multiplicities: &[usize]) -> Result<Self> {
        let local: Vec<SpinOps> = multiplicities
            .iter()
            .map(|&m| spin_operators(m))
            .collect::<Result<_>>()?;
        let eyes: Vec<CMat> = multiplicities
            .iter()
            .map(|&m| CMat::identity(m, m))
            .collect();
        let mut sites = Vec::with_capacity(local.len());
        for (site, ops) in local.iter().enumerate() {
            let embed = |op: &CMat| {
                let factors: Vec<&CMat> = (0..local.len())
                    .map(|k| if k == site { op } else { &eyes[k] })
                    .collect();
                kron_all(&factors)
            };
            sites.push(SpinOps {
                x: embed(&ops.x),
                y: embed(&ops.y),
                z: embed(&ops.z),
            });
        }
        Ok(ProductOperators {
            dims: multiplicities.to_vec(),
            sites,
        })
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Local basis indices of a product-basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        out
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&d, &n)| acc * n + d)
    }
}
