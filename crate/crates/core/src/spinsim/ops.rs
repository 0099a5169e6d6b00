//! Spin operators on tensor-product Hilbert spaces.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    X,
    Y,
    Z,
}

/// Single-spin operator for a spin of the given multiplicity (2S + 1).
/// Basis ordered m = S, S − 1, …, −S.
pub fn spin_matrix(multiplicity: usize, c: Component) -> CMatrix {
    let s = (multiplicity as f64 - 1.0) / 2.0;
    let m = |k: usize| s - k as f64;
    let mut out = CMatrix::from_element(multiplicity, multiplicity, ZERO);
    match c {
        Component::Z => {
            for k in 0..multiplicity {
                out[(k, k)] = C64::new(m(k), 0.0);
            }
        }
        Component::X | Component::Y => {
            // ⟨m+1|S+|m⟩ = sqrt(s(s+1) − m(m+1))
            for k in 1..multiplicity {
                let mm = m(k);
                let amp = (s * (s + 1.0) - mm * (mm + 1.0)).sqrt();
                let (up, down) = match c {
                    Component::X => (C64::new(amp / 2.0, 0.0), C64::new(amp / 2.0, 0.0)),
                    _ => (C64::new(0.0, -amp / 2.0), C64::new(0.0, amp / 2.0)),
                };
                out[(k - 1, k)] = up;
                out[(k, k - 1)] = down;
            }
        }
    }
    out
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::from_element(ar * br, ac * bc, ZERO);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Embeds a single-site operator at `site` of a product space with the
/// given per-site dimensions.
pub fn embed(op: &CMatrix, site: usize, dims: &[usize]) -> CMatrix {
    let left: usize = dims[..site].iter().product();
    let right: usize = dims[site + 1..].iter().product();
    let l = CMatrix::identity(left, left);
    let r = CMatrix::identity(right, right);
    kron(&kron(&l, op), &r)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Tr(a·b) without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn angular_momentum_algebra() {
        for mult in [2, 3, 4] {
            let x = spin_matrix(mult, Component::X);
            let y = spin_matrix(mult, Component::Y);
            let z = spin_matrix(mult, Component::Z);
            let i_z = z.map(|v| v * C64::new(0.0, 1.0));
            assert!((commutator(&x, &y) - i_z).norm() < 1e-12);
            let s = (mult as f64 - 1.0) / 2.0;
            let casimir = &x * &x + &y * &y + &z * &z;
            let want = CMatrix::identity(mult, mult) * C64::new(s * (s + 1.0), 0.0);
            assert!((casimir - want).norm() < 1e-12);
        }
    }

    #[test]
    fn embed_dimensions() {
        let z = spin_matrix(2, Component::Z);
        let e = embed(&z, 1, &[3, 2, 2]);
        assert_eq!(e.shape(), (12, 12));
        assert!((trace(&e)).norm() < 1e-15);
    }
}
