use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{axpy, dot, norm2, sym_eigenvalues, DenseMatrix};

/// Extreme Ritz values of a symmetric operator after `steps` Lanczos steps
/// with full reorthogonalization. Ritz values lie inside the spectrum, so
/// the returned pair brackets from within.
pub fn lanczos_extremes<F>(n: usize, steps: usize, seed: u64, mut apply: F) -> (f64, f64)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let steps = steps.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nq = norm2(&q);
    q.iter_mut().for_each(|x| *x /= nq);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![0.0; n];
    for _ in 0..steps {
        apply(&q, &mut w);
        let a = dot(&w, &q);
        alpha.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                axpy(-c, b, &mut w);
            }
        }
        let nb = norm2(&w);
        if nb < 1e-14 * a.abs().max(1.0) {
            break;
        }
        beta.push(nb);
        q = w.iter().map(|x| x / nb).collect();
    }
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let ev = sym_eigenvalues(&DenseMatrix::from_nalgebra(t));
    (ev[0], ev[m - 1])
}
