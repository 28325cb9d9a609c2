//! Limited-memory BFGS with Armijo backtracking, plus helpers to move complex
//! matrices in and out of flat real parameter vectors.

use crate::matrix::{ComplexMatrix, C64};

#[derive(Debug, Clone)]
pub(crate) struct LbfgsResult {
    pub x: Vec<f64>,
}

/// Minimize `f` from `x0`. `f` returns the value and writes the gradient; a
/// non-finite value marks an infeasible point and makes the line search back off.
pub(crate) fn lbfgs<F>(mut f: F, x0: Vec<f64>, max_iter: usize, gtol: f64) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const MEM: usize = 12;
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return LbfgsResult { x };
    }
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut stall = 0;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let gnorm = norm(&g);
        if gnorm <= gtol * (1.0 + fx.abs()) {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &d);
            axpy(&mut d, -alpha[i], &y_hist[i]);
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            d.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let sc = 1.0 / gnorm.max(1e-300);
            d.iter_mut().for_each(|v| *v *= sc.min(1.0));
        }
        for i in 0..k {
            let beta = rho_hist[i] * dot(&y_hist[i], &d);
            axpy(&mut d, alpha[i] - beta, &s_hist[i]);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            d = g.iter().map(|v| -v / gnorm.max(1e-300)).collect();
            slope = dot(&g, &d);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            for i in 0..n {
                xn[i] = x[i] + step * d[i];
            }
            let fnew = f(&xn, &mut gn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-14 * norm(&s) * norm(&y) {
                    if s_hist.len() == MEM {
                        s_hist.remove(0);
                        y_hist.remove(0);
                        rho_hist.remove(0);
                    }
                    rho_hist.push(1.0 / sy);
                    s_hist.push(s);
                    y_hist.push(y);
                }
                let rel = (fx - fnew) / (1.0 + fx.abs());
                stall = if rel < 1e-15 { stall + 1 } else { 0 };
                x.copy_from_slice(&xn);
                g.copy_from_slice(&gn);
                fx = fnew;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            stall += 1;
        }
        if stall >= 4 {
            break;
        }
    }
    LbfgsResult { x }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Append the (re, im) pairs of `m` to `out`.
pub(crate) fn pack(m: &ComplexMatrix, out: &mut Vec<f64>) {
    for z in m.data() {
        out.push(z.re);
        out.push(z.im);
    }
}

/// Read a `rows x cols` matrix from `x` starting at `*offset`.
pub(crate) fn unpack(x: &[f64], offset: &mut usize, rows: usize, cols: usize) -> ComplexMatrix {
    let m = ComplexMatrix::from_fn(rows, cols, |i, j| {
        let k = *offset + 2 * (i * cols + j);
        C64::new(x[k], x[k + 1])
    });
    *offset += 2 * rows * cols;
    m
}

pub(crate) fn write_grad(g: &ComplexMatrix, out: &mut [f64], offset: &mut usize) {
    for z in g.data() {
        out[*offset] = z.re;
        out[*offset + 1] = z.im;
        *offset += 2;
    }
}
