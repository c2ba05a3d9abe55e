//! Restarted GMRES with right preconditioning for the small matrix-free
//! systems of the initial-data solver.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) struct GmresOutcome {
    pub solution: Vec<f64>,
    pub converged: bool,
}

/// Solves `A x = b` for `x`, where `apply` evaluates `A` and `precond`
/// applies an approximate inverse.
pub(crate) fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    restart: usize,
    max_restarts: usize,
    rel_tol: f64,
) -> GmresOutcome {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return GmresOutcome {
            solution: x,
            converged: true,
        };
    }
    let tol = rel_tol * b_norm;

    for _ in 0..max_restarts {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let mut res_norm = beta;
        if beta <= tol {
            return GmresOutcome {
                solution: x,
                converged: true,
            };
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut precond_basis: Vec<Vec<f64>> = Vec::with_capacity(restart);
        // Hessenberg columns, rotated in place to upper triangular
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut steps = 0;

        for j in 0..restart {
            let z = precond(&basis[j]);
            let mut w = apply(&z);
            precond_basis.push(z);
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let wn = norm(&w);
            col[j + 1] = wn;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(col[j + 1]);
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / denom, col[j + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            col[j] = c * col[j] + s * col[j + 1];
            col[j + 1] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            h.push(col);
            steps = j + 1;
            res_norm = g[j + 1].abs();
            if res_norm <= tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }

        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for k in (i + 1)..steps {
                acc -= h[k][i] * y[k];
            }
            y[i] = acc / h[i][i];
        }
        for (yi, z) in y.iter().zip(&precond_basis) {
            x.iter_mut().zip(z).for_each(|(xk, zk)| *xk += yi * zk);
        }
        if res_norm <= tol {
            break;
        }
    }

    let ax = apply(&x);
    let true_res = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    GmresOutcome {
        solution: x,
        converged: true_res <= tol * 10.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        let a = [[4.0, 1.0, 0.0], [2.0, -3.0, 1.0], [0.0, 1.0, 5.0]];
        let apply = |x: &[f64]| -> Vec<f64> {
            a.iter()
                .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
                .collect()
        };
        let b = [1.0, 2.0, 3.0];
        let out = gmres(apply, |v| v.to_vec(), &b, 3, 5, 1e-14);
        assert!(out.converged);
        let check = apply(&out.solution);
        for (c, bi) in check.iter().zip(&b) {
            assert!((c - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn preconditioned_diagonal_system() {
        let d: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let apply = |x: &[f64]| -> Vec<f64> { x.iter().zip(&d).map(|(v, di)| v * di).collect() };
        let pre = |x: &[f64]| -> Vec<f64> { x.iter().zip(&d).map(|(v, di)| v / di).collect() };
        let b = vec![1.0; 50];
        let out = gmres(apply, pre, &b, 10, 3, 1e-13);
        assert!(out.converged);
        for (x, di) in out.solution.iter().zip(&d) {
            assert!((x * di - 1.0).abs() < 1e-12);
        }
    }
}
