//! Dense linear algebra for small symmetric matrices (n <= 9).
//!
//! Matrices are row-major `Vec<f64>`; symmetric data additionally appears in
//! packed lower-triangle form (see [`crate::expr`]'s `sym_index`). Everything
//! here is sized for coordinate dimensions of a handful, so plain loops beat
//! pulling in a matrix library.

use crate::expr::{sym_index, Jet2};

/// Cholesky factorization of a symmetric positive definite matrix given in
/// packed lower-triangle form. On failure returns the order of the leading
/// principal minor that is not positive (1-based).
pub fn cholesky_packed(n: usize, a: &[f64]) -> Result<Vec<f64>, usize> {
    let mut l = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[sym_index(i, j)];
            for k in 0..j {
                sum -= l[sym_index(i, k)] * l[sym_index(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(i + 1);
                }
                l[sym_index(i, i)] = sum.sqrt();
            } else {
                l[sym_index(i, j)] = sum / l[sym_index(j, j)];
            }
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
/// Returns the dense row-major inverse, or the failing minor order.
pub fn spd_inverse(n: usize, a_packed: &[f64]) -> Result<Vec<f64>, usize> {
    let l = cholesky_packed(n, a_packed)?;
    let mut inv = vec![0.0; n * n];
    // Solve A x = e_j column by column: forward then backward substitution.
    for col in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l[sym_index(i, k)] * y[k];
            }
            y[i] = sum / l[sym_index(i, i)];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[sym_index(k, i)] * x[k];
            }
            x[i] = sum / l[sym_index(i, i)];
        }
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    // Symmetrize to kill the last bits of asymmetric roundoff.
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = m;
            inv[j * n + i] = m;
        }
    }
    Ok(inv)
}

pub fn mat_mul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub fn packed_to_dense(n: usize, packed: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = packed[sym_index(i, j)];
        }
    }
    out
}

/// Inverse of a symmetric matrix of order-2 jets (entries packed, each a jet
/// in `nv` base variables), propagating first and second derivatives through
///
/// ```text
/// ∂(A⁻¹)  = -A⁻¹ (∂A) A⁻¹
/// ∂²(A⁻¹) =  A⁻¹ [ (∂_k A) A⁻¹ (∂_l A) + (∂_l A) A⁻¹ (∂_k A) - ∂²_{kl} A ] A⁻¹
/// ```
///
/// On failure returns the order of the non-positive leading minor.
pub fn jet_sym_inverse(n: usize, nv: usize, a: &[Jet2]) -> Result<Vec<Jet2>, usize> {
    let npairs = nv * (nv + 1) / 2;
    let a_val: Vec<f64> = a.iter().map(|j| j.value()).collect();
    let inv = spd_inverse(n, &a_val)?;

    // Dense derivative matrices of A.
    let grad_mats: Vec<Vec<f64>> = (0..nv)
        .map(|k| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] = a[sym_index(i, j)].grad()[k];
                }
            }
            m
        })
        .collect();
    let hess_mats: Vec<Vec<f64>> = (0..npairs)
        .map(|p| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] = a[sym_index(i, j)].hess_packed()[p];
                }
            }
            m
        })
        .collect();

    // dB_k = -B G_k B
    let dinv: Vec<Vec<f64>> = grad_mats
        .iter()
        .map(|g| {
            let bg = mat_mul(n, &inv, g);
            let bgb = mat_mul(n, &bg, &inv);
            bgb.iter().map(|x| -x).collect()
        })
        .collect();

    // d2B_kl = B (G_k B G_l + G_l B G_k - H_kl) B
    let mut d2inv: Vec<Vec<f64>> = Vec::with_capacity(npairs);
    for k in 0..nv {
        for l in 0..=k {
            let p = sym_index(k, l);
            let gk_b = mat_mul(n, &grad_mats[k], &inv);
            let gl_b = mat_mul(n, &grad_mats[l], &inv);
            let mut core = mat_mul(n, &gk_b, &grad_mats[l]);
            let core2 = mat_mul(n, &gl_b, &grad_mats[k]);
            for (c, (c2, h)) in core.iter_mut().zip(core2.iter().zip(&hess_mats[p])) {
                *c += c2 - h;
            }
            let b_core = mat_mul(n, &inv, &core);
            d2inv.push(mat_mul(n, &b_core, &inv));
        }
    }

    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let v = inv[i * n + j];
            let g: Vec<f64> = (0..nv).map(|k| dinv[k][i * n + j]).collect();
            let h: Vec<f64> = (0..npairs).map(|p| d2inv[p][i * n + j]).collect();
            out.push(Jet2::from_raw(nv, v, g, h));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;

    #[test]
    fn cholesky_flags_indefinite_minor() {
        // diag(1, -1): the 2x2 leading minor fails.
        let a = vec![1.0, 0.0, -1.0];
        assert_eq!(cholesky_packed(2, &a), Err(2));
    }

    #[test]
    fn spd_inverse_identity_residual() {
        let a = vec![2.0, 0.3, 1.5, -0.2, 0.4, 1.1]; // packed 3x3 SPD
        let inv = spd_inverse(3, &a).unwrap();
        let dense = packed_to_dense(3, &a);
        let prod = mat_mul(3, &inv, &dense);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i * 3 + j] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jet_inverse_matches_finite_differences() {
        // a(x) = [[2 + sin(x1), 0.3 x1 x2], [., 1.5 + 0.2 cos(x2)]]
        let entries = [
            Expression::parse("2 + sin(x1)", 2).unwrap(),
            Expression::parse("0.3*x1*x2", 2).unwrap(),
            Expression::parse("1.5 + 0.2*cos(x2)", 2).unwrap(),
        ];
        let eval_packed = |x: &[f64]| -> Vec<f64> {
            entries.iter().map(|e| e.eval_value(x).unwrap()).collect()
        };
        let x = [0.4, -0.7];
        let jets: Vec<Jet2> = entries.iter().map(|e| e.eval_jet2(&x).unwrap()).collect();
        let inv_jets = jet_sym_inverse(2, 2, &jets).unwrap();

        let h = 1e-5;
        let inv_at = |pt: &[f64]| spd_inverse(2, &eval_packed(pt)).unwrap();
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let ip = inv_at(&xp);
            let im = inv_at(&xm);
            for i in 0..2 {
                for j in 0..=i {
                    let fd = (ip[i * 2 + j] - im[i * 2 + j]) / (2.0 * h);
                    let jet = inv_jets[sym_index(i, j)].grad()[k];
                    assert!((jet - fd).abs() < 1e-8, "grad[{k}] entry ({i},{j})");
                }
            }
        }
        // Second derivatives: diagonal in the variables.
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let ip = inv_at(&xp);
            let i0 = inv_at(&x);
            let im = inv_at(&xm);
            for i in 0..2 {
                for j in 0..=i {
                    let fd = (ip[i * 2 + j] - 2.0 * i0[i * 2 + j] + im[i * 2 + j]) / (h * h);
                    let jet = inv_jets[sym_index(i, j)].hess(k, k);
                    assert!((jet - fd).abs() < 1e-4, "hess[{k}{k}] entry ({i},{j})");
                }
            }
        }
    }
}
