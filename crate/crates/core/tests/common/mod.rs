//! Dense reference constructions shared by the integration tests. Everything
//! here is built from block definitions, independently of the index-shift code
//! in the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use notmf_core::{MaskedMatrix, VarCoefficients};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn random_masked(rng: &mut ChaCha8Rng, n: usize, t: usize, density: f64) -> MaskedMatrix {
    let values = randn(rng, n, t);
    let mask = DMatrix::from_fn(n, t, |_, _| rng.random::<f64>() < density);
    MaskedMatrix::new(values, mask).unwrap()
}

/// `[0_{h x left} | sign * I_h | 0_{h x right}]`.
fn shifted_identity(h: usize, left: usize, right: usize, sign: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(h, left + h + right);
    for j in 0..h {
        m[(j, left + j)] = sign;
    }
    m
}

/// Lag-`k` seasonal operator assembled as the sum of its two blocks. With
/// `m = 0` only the selection block is kept.
pub fn literal_psi(d: usize, m: usize, t: usize, k: usize) -> DMatrix<f64> {
    let h = t - d - m;
    let plus = shifted_identity(h, d + m - k, k, 1.0);
    if m == 0 {
        return plus;
    }
    shifted_identity(h, d - k, k + m, -1.0) + plus
}

/// First-difference operator `[0 | I_h] - [I_h | 0]`, `h x (h + 1)`.
pub fn literal_phi(h: usize) -> DMatrix<f64> {
    shifted_identity(h, 1, 0, 1.0) - shifted_identity(h, 0, 1, 1.0)
}

pub fn literal_theta(d: usize, m: usize, t: usize, k: usize, first_order: bool) -> DMatrix<f64> {
    let psi = literal_psi(d, m, t, k);
    if first_order {
        literal_phi(t - d - m - 1) * psi
    } else {
        psi
    }
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Vectorized system matrix `S + λ ΣΣ (Θ_k ⊗ A_k)ᵀ (Θ_h ⊗ A_h) + ρI` as a
/// literal double sum.
pub fn lemma_matrix(
    y: &MaskedMatrix,
    w: &DMatrix<f64>,
    coeffs: &VarCoefficients,
    (d, m, first_order): (usize, usize, bool),
    lambda: f64,
    rho: f64,
) -> DMatrix<f64> {
    let r = w.nrows();
    let t = y.n_cols();
    let n = r * t;
    let mut sys = DMatrix::from_diagonal_element(n, n, rho);
    for col in 0..t {
        for i in 0..y.n_rows() {
            if y.is_observed(i, col) {
                let wi = w.column(i);
                let outer = wi * wi.transpose();
                let mut block = sys.view_mut((col * r, col * r), (r, r));
                block += outer;
            }
        }
    }
    let a = |k: usize| -> DMatrix<f64> {
        if k == 0 {
            -DMatrix::identity(r, r)
        } else {
            coeffs.block(k).into_owned()
        }
    };
    let terms: Vec<DMatrix<f64>> = (0..=d)
        .map(|k| kron(&literal_theta(d, m, t, k, first_order), &a(k)))
        .collect();
    for tk in &terms {
        for th in &terms {
            sys += lambda * tk.transpose() * th;
        }
    }
    sys
}

/// Literal objective: data term, ridge, and the VAR loss written as
/// `‖X Θ_0ᵀ - Σ_k A_k X Θ_kᵀ‖²`.
pub fn literal_objective(
    y: &MaskedMatrix,
    w: &DMatrix<f64>,
    x: &DMatrix<f64>,
    coeffs: &VarCoefficients,
    (d, m, first_order): (usize, usize, bool),
    lambda: f64,
    rho: f64,
) -> f64 {
    let t = y.n_cols();
    let recon = w.transpose() * x;
    let mut fit = 0.0;
    for i in 0..y.n_rows() {
        for col in 0..t {
            if y.is_observed(i, col) {
                fit += (y.values()[(i, col)] - recon[(i, col)]).powi(2);
            }
        }
    }
    let mut var = x * literal_theta(d, m, t, 0, first_order).transpose();
    for k in 1..=d {
        var -= coeffs.block(k) * x * literal_theta(d, m, t, k, first_order).transpose();
    }
    0.5 * fit
        + 0.5 * rho * (w.norm_squared() + x.norm_squared())
        + 0.5 * lambda * var.norm_squared()
}

pub fn random_coeffs(rng: &mut ChaCha8Rng, r: usize, d: usize, scale: f64) -> VarCoefficients {
    let stacked = randn(rng, r, r * d) * scale;
    VarCoefficients::new(stacked, d, false).unwrap()
}

pub fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Builds `x` so that its (season-`m`, optionally first-order) differences
/// follow `u_t = Σ_k A_k u_{t-k}` exactly, by integrating a VAR path.
pub fn var_integrated(
    blocks: &[DMatrix<f64>],
    m: usize,
    first: bool,
    t: usize,
    seed: u64,
) -> DMatrix<f64> {
    let r = blocks[0].nrows();
    let d = blocks.len();
    let mut rng = rng(seed);
    let n_u = t - m - usize::from(first);
    let mut u = randn(&mut rng, r, n_u);
    for s in d..n_u {
        let mut next = DVector::zeros(r);
        for (k, a) in blocks.iter().enumerate() {
            next += a * u.column(s - k - 1);
        }
        u.set_column(s, &next);
    }
    let v = if first {
        let mut v = DMatrix::zeros(r, n_u + 1);
        v.set_column(0, &randn(&mut rng, r, 1).column(0));
        for s in 0..n_u {
            let next = v.column(s) + u.column(s);
            v.set_column(s + 1, &next);
        }
        v
    } else {
        u
    };
    let mut x = DMatrix::zeros(r, t);
    let step = m.max(1);
    if m > 0 {
        x.columns_mut(0, m).copy_from(&randn(&mut rng, r, m));
        for s in 0..v.ncols() {
            let next = x.column(s) + v.column(s);
            x.set_column(s + step, &next);
        }
    } else {
        x.copy_from(&v);
    }
    x
}
