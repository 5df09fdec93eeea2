//! Restarted GMRES with left preconditioning.
//!
//! Solves `M A x = M b` using Arnoldi with modified Gram–Schmidt and Givens
//! rotations. A second orthogonalization pass is applied whenever the first
//! pass leaves a component above `1e-8` relative to the new vector.

use crate::error::{Error, Result};

/// A linear map on `R^N`.
pub trait LinearOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl<F> LinearOperator for F
where
    F: Fn(&[f64], &mut [f64]),
{
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self(x, y)
    }
}

/// The identity map, for unpreconditioned solves.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl LinearOperator for Identity {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    pub rel_tol: f64,
    pub restart: usize,
    pub max_iters: usize,
    pub record_history: bool,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            restart: 100,
            max_iters: 300,
            record_history: true,
        }
    }
}

impl KrylovOptions {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "GMRES tolerance must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.restart == 0 {
            return Err(Error::InvalidArgument("GMRES restart length must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KrylovReport {
    /// Total Arnoldi steps (operator applications).
    pub iterations: usize,
    /// Estimated `‖M(b - Ax)‖₂` after each step, when recorded.
    pub preconditioned_residuals: Vec<f64>,
    /// `‖b - A x‖₂` for the returned `x`.
    pub true_final_residual: f64,
    pub converged: bool,
    /// Arnoldi produced a vanishing vector.
    pub breakdown: bool,
}

const BREAKDOWN: f64 = 1e-300;
const REORTHOGONALIZE: f64 = 1e-8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Solves `A x = rhs` with left preconditioner `M`, starting from zero.
///
/// Converges when `‖M(A x - rhs)‖₂ ≤ rel_tol · ‖M rhs‖₂`. A NaN from either
/// operator is a hard error; running out of iterations or an Arnoldi
/// breakdown is reported in [`KrylovReport`].
pub fn gmres<A, M>(a: &A, m: &M, rhs: &[f64], opts: &KrylovOptions) -> Result<(Vec<f64>, KrylovReport)>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    opts.validate()?;
    check_finite(rhs, "GMRES right-hand side")?;
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut report = KrylovReport::default();

    let mut tmp = vec![0.0; n];
    let mut mb = vec![0.0; n];
    m.apply(rhs, &mut mb);
    check_finite(&mb, "preconditioner output")?;
    let target = opts.rel_tol * norm(&mb);
    if norm(&mb) == 0.0 {
        report.converged = true;
        report.true_final_residual = norm(rhs);
        return Ok((x, report));
    }

    // r0 = M(b - A x)
    let precond_residual = |x: &[f64], tmp: &mut Vec<f64>, out: &mut Vec<f64>| -> Result<()> {
        a.apply(x, tmp);
        check_finite(tmp, "operator output")?;
        for (t, b) in tmp.iter_mut().zip(rhs) {
            *t = b - *t;
        }
        m.apply(tmp, out);
        check_finite(out, "preconditioner output")
    };

    let restart = opts.restart.min(n.max(1));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    let mut hess = vec![vec![0.0; restart]; restart + 1];
    let mut cs = vec![0.0; restart];
    let mut sn = vec![0.0; restart];
    let mut g = vec![0.0; restart + 1];
    let mut r = mb.clone();
    let mut beta = norm(&r);
    let mut w = vec![0.0; n];

    loop {
        if beta <= target {
            report.converged = true;
            break;
        }
        if report.iterations >= opts.max_iters || report.breakdown {
            break;
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut steps = 0;
        for j in 0..restart {
            a.apply(&basis[j], &mut tmp);
            check_finite(&tmp, "operator output")?;
            m.apply(&tmp, &mut w);
            check_finite(&w, "preconditioner output")?;
            report.iterations += 1;
            steps = j + 1;

            for i in 0..=j {
                let h = dot(&w, &basis[i]);
                hess[i][j] = h;
                w.iter_mut().zip(&basis[i]).for_each(|(wk, vk)| *wk -= h * vk);
            }
            let wnorm = norm(&w);
            let corrections: Vec<f64> = (0..=j).map(|i| dot(&w, &basis[i])).collect();
            if corrections.iter().any(|c| c.abs() > REORTHOGONALIZE * wnorm) {
                for (i, c) in corrections.iter().enumerate() {
                    hess[i][j] += c;
                    w.iter_mut().zip(&basis[i]).for_each(|(wk, vk)| *wk -= c * vk);
                }
            }
            let h_next = norm(&w);
            hess[j + 1][j] = h_next;

            for i in 0..j {
                let (hi, hi1) = (hess[i][j], hess[i + 1][j]);
                hess[i][j] = cs[i] * hi + sn[i] * hi1;
                hess[i + 1][j] = -sn[i] * hi + cs[i] * hi1;
            }
            let (hjj, hj1) = (hess[j][j], hess[j + 1][j]);
            let denom = hjj.hypot(hj1);
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = hjj / denom;
                sn[j] = hj1 / denom;
            }
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            let estimate = g[j + 1].abs();
            if opts.record_history {
                report.preconditioned_residuals.push(estimate);
            }

            if h_next <= BREAKDOWN {
                report.breakdown = true;
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
            if estimate <= target || report.iterations >= opts.max_iters {
                break;
            }
        }

        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let mut s = g[i];
            for k in i + 1..steps {
                s -= hess[i][k] * y[k];
            }
            y[i] = if hess[i][i] != 0.0 { s / hess[i][i] } else { 0.0 };
        }
        for (k, yk) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[k]).for_each(|(xi, vi)| *xi += yk * vi);
        }
        precond_residual(&x, &mut tmp, &mut r)?;
        beta = norm(&r);
        if report.breakdown {
            report.converged = beta <= target;
            break;
        }
    }

    a.apply(&x, &mut tmp);
    report.true_final_residual = tmp
        .iter()
        .zip(rhs)
        .map(|(ax, b)| (b - ax) * (b - ax))
        .sum::<f64>()
        .sqrt();
    Ok((x, report))
}
