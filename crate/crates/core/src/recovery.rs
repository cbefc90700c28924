//! Sparse decoders and recovery scoring.
//!
//! Both solvers work on the effective dictionary `Phi = c A D` (with
//! `c = 1/sqrt(n)` for scaled frames) and return the coefficient estimate
//! together with `x_hat = D s_hat`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::numerics::{self, DenseMatrix, LinearOperator, PseudoInverse};
use crate::sensing::{EncodingMatrix, MeasurementFrame};
use crate::signals::OrthonormalBasis;

/// RSNR reported for an exact reconstruction.
pub const RSNR_CAP_DB: f64 = 300.0;

/// What a decoder knows: the ciphertext, the matrix it believes was used,
/// the sparsity basis, a noise radius and optionally the sparsity.
#[derive(Debug, Clone)]
pub struct RecoveryProblem<'a> {
    y: &'a [f64],
    phi: DenseMatrix,
    basis: &'a OrthonormalBasis,
    gamma: f64,
    k: Option<usize>,
}

impl<'a> RecoveryProblem<'a> {
    pub fn new(
        frame: &'a MeasurementFrame,
        a: &EncodingMatrix,
        basis: &'a OrthonormalBasis,
        gamma: f64,
        k: Option<usize>,
    ) -> Result<Self> {
        if frame.y.len() != a.rows() {
            return Err(Error::ShapeMismatch {
                expected: (a.rows(), 1),
                found: (frame.y.len(), 1),
            });
        }
        let scale = if frame.scaled {
            1.0 / math::sqrt(a.cols() as f64)
        } else {
            1.0
        };
        let phi = basis.dictionary(a, scale)?;
        Self::with_dictionary(&frame.y, phi, basis, gamma, k)
    }

    /// Build from an explicit dictionary `Phi` (`m x n`).
    pub fn with_dictionary(
        y: &'a [f64],
        phi: DenseMatrix,
        basis: &'a OrthonormalBasis,
        gamma: f64,
        k: Option<usize>,
    ) -> Result<Self> {
        if phi.nrows() != y.len() || phi.ncols() != basis.dim() {
            return Err(Error::ShapeMismatch {
                expected: (y.len(), basis.dim()),
                found: phi.shape(),
            });
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::domain("noise radius must be finite and non-negative"));
        }
        if !math::all_finite(y) {
            return Err(Error::NonFinite("measurements"));
        }
        Ok(RecoveryProblem {
            y,
            phi,
            basis,
            gamma,
            k,
        })
    }

    pub fn dictionary(&self) -> &DenseMatrix {
        &self.phi
    }

    fn result(&self, s: Vec<f64>, iterations: usize, converged: bool) -> RecoveryResult {
        let residual = residual_norm(&self.phi, self.y, &s);
        RecoveryResult {
            x_hat: self.basis.synthesize(&s),
            s_hat: s,
            iterations,
            residual,
            converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub x_hat: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub iterations: usize,
    /// `||y - Phi s_hat||_2`
    pub residual: f64,
    pub converged: bool,
}

fn residual_norm(phi: &DenseMatrix, y: &[f64], s: &[f64]) -> f64 {
    let mut r = phi.matvec(s);
    for (ri, yi) in r.iter_mut().zip(y) {
        *ri = yi - *ri;
    }
    math::norm2(&r)
}

/// Knobs of [`solve_bpdn`].
#[derive(Debug, Clone, Copy)]
pub struct BpdnOptions {
    /// Noise floor used when `gamma = 0`, relative to `||y||`.
    pub floor: f64,
    /// Accepted `|residual - target|`, relative to the target.
    pub target_tol: f64,
    /// Inner stop on the relative iterate change.
    pub inner_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        BpdnOptions {
            floor: 1e-6,
            target_tol: 1e-3,
            inner_tol: 1e-8,
            max_inner: 5000,
            max_outer: 80,
        }
    }
}

/// Basis pursuit denoising `min ||s||_1 s.t. ||y - Phi s|| <= gamma`.
///
/// Solved through the penalized form `1/2 ||y - Phi s||^2 + lambda ||s||_1`
/// (FISTA with gradient restart, step `1/sigma_max(Phi)^2`) and a search on
/// `lambda` until the residual matches `max(gamma, floor ||y||)`.
pub fn solve_bpdn(p: &RecoveryProblem) -> Result<RecoveryResult> {
    solve_bpdn_with(p, &BpdnOptions::default())
}

pub fn solve_bpdn_with(p: &RecoveryProblem, opts: &BpdnOptions) -> Result<RecoveryResult> {
    let n = p.phi.ncols();
    let y_norm = math::norm2(p.y);
    if y_norm == 0.0 {
        return Ok(p.result(vec![0.0; n], 0, true));
    }
    let target = p.gamma.max(opts.floor * y_norm);
    if target >= y_norm {
        // The zero vector is feasible and has the least l1 norm.
        return Ok(p.result(vec![0.0; n], 0, true));
    }
    let tol = opts.target_tol * target;
    let floor_only = p.gamma < opts.floor * y_norm;
    let sigma = numerics::sigma_max(&p.phi)?;
    let step = 1.0 / (sigma * sigma);
    let aty = p.phi.matvec_transpose(p.y);
    let lambda_max = aty.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut fista = Fista::new(&p.phi, p.y, step, opts);
    let mut total_iters = 0;

    // Continuation: shrink lambda until the residual falls below the target,
    // warm starting each solve. Then refine inside the bracket in log-log space.
    let mut hi = (lambda_max, y_norm);
    let mut lo: Option<(f64, f64)> = None;
    let mut best: Option<Vec<f64>> = None;
    let mut lambda = lambda_max * (target / y_norm).max(1e-3);
    let mut side_hi = 0i32;
    let mut side_lo = 0i32;

    for _ in 0..opts.max_outer {
        let (iters, ok) = fista.solve(lambda);
        total_iters += iters;
        let r = residual_norm(&p.phi, p.y, &fista.x);
        // Below the floor any tighter fit is welcome; a real noise radius is
        // matched from both sides.
        if r <= target + tol && (floor_only || r >= target - tol) {
            return Ok(p.result(fista.x.clone(), total_iters, ok));
        }
        if r > target {
            hi = (lambda, r);
            side_hi += 1;
            side_lo = 0;
        } else {
            lo = Some((lambda, r));
            best = Some(fista.x.clone());
            side_lo += 1;
            side_hi = 0;
        }
        lambda = match lo {
            None => {
                // Still above the target: extrapolate with r ~ lambda, at
                // least a factor 10 down.
                let guess = lambda * target / r;
                guess.min(lambda * 0.1).max(lambda * 1e-3)
            }
            Some((l_lo, r_lo)) => {
                let (l_hi, r_hi) = hi;
                let (a, b) = (math::log(l_lo), math::log(l_hi));
                let (fa, fb) = (log_gap(r_lo, target), log_gap(r_hi, target));
                // Illinois-style damping of the stale end point.
                let fa = if side_hi >= 2 { fa * 0.5 } else { fa };
                let fb = if side_lo >= 2 { fb * 0.5 } else { fb };
                let mut t = a - fa * (b - a) / (fb - fa);
                if !(t > a && t < b) {
                    t = 0.5 * (a + b);
                }
                if b - a < 1e-12 {
                    // The residual cannot be resolved any finer; the feasible
                    // end of the bracket is the answer.
                    let x = best.unwrap_or_else(|| fista.x.clone());
                    return Ok(p.result(x, total_iters, ok));
                }
                math::exp(t)
            }
        };
    }
    // Out of budget: hand back the feasible end of the bracket, flagged.
    let x = best.unwrap_or_else(|| fista.x.clone());
    Ok(p.result(x, total_iters, false))
}

fn log_gap(r: f64, target: f64) -> f64 {
    math::log(r.max(1e-300)) - math::log(target)
}

struct Fista<'a> {
    phi: &'a DenseMatrix,
    y: &'a [f64],
    step: f64,
    tol: f64,
    max_iter: usize,
    /// Current iterate, kept between solves for warm starts.
    x: Vec<f64>,
}

impl<'a> Fista<'a> {
    fn new(phi: &'a DenseMatrix, y: &'a [f64], step: f64, opts: &BpdnOptions) -> Self {
        Fista {
            phi,
            y,
            step,
            tol: opts.inner_tol,
            max_iter: opts.max_inner,
            x: vec![0.0; phi.ncols()],
        }
    }

    /// Returns `(iterations, converged)`.
    fn solve(&mut self, lambda: f64) -> (usize, bool) {
        let (m, n) = (self.phi.nrows(), self.phi.ncols());
        let thr = lambda * self.step;
        let mut z = self.x.clone();
        let mut x_new = vec![0.0; n];
        let mut r = vec![0.0; m];
        let mut g = vec![0.0; n];
        let mut t = 1.0f64;
        for it in 1..=self.max_iter {
            self.phi.apply(&z, &mut r);
            for (ri, yi) in r.iter_mut().zip(self.y) {
                *ri -= yi;
            }
            self.phi.apply_transpose(&r, &mut g);
            for j in 0..n {
                let v = z[j] - self.step * g[j];
                x_new[j] = soft(v, thr);
            }
            let mut diff = 0.0;
            let mut restart = 0.0;
            for j in 0..n {
                let d = x_new[j] - self.x[j];
                diff += d * d;
                restart += (z[j] - x_new[j]) * d;
            }
            let nrm = math::norm2(&x_new);
            let t_next = 0.5 * (1.0 + math::sqrt(1.0 + 4.0 * t * t));
            if restart > 0.0 {
                // Momentum points uphill: restart from the plain prox step.
                t = 1.0;
                z.copy_from_slice(&x_new);
            } else {
                let beta = (t - 1.0) / t_next;
                for j in 0..n {
                    z[j] = x_new[j] + beta * (x_new[j] - self.x[j]);
                }
                t = t_next;
            }
            core::mem::swap(&mut self.x, &mut x_new);
            let change = math::sqrt(diff);
            if change <= self.tol * nrm.max(f64::MIN_POSITIVE) || (nrm == 0.0 && change == 0.0) {
                return (it, true);
            }
        }
        (self.max_iter, false)
    }
}

#[inline]
fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Knobs of [`solve_cosamp`].
#[derive(Debug, Clone, Copy)]
pub struct CosampOptions {
    /// Stop when the residual norm moves less than this times `||y||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CosampOptions {
    fn default() -> Self {
        CosampOptions {
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// CoSaMP with the sparsity taken from the problem.
pub fn solve_cosamp(p: &RecoveryProblem) -> Result<RecoveryResult> {
    solve_cosamp_with(p, &CosampOptions::default())
}

pub fn solve_cosamp_with(p: &RecoveryProblem, opts: &CosampOptions) -> Result<RecoveryResult> {
    let k = p
        .k
        .ok_or_else(|| Error::domain("CoSaMP needs the sparsity level k"))?;
    let (m, n) = p.phi.shape();
    if k == 0 || 3 * k > m {
        return Err(Error::domain(alloc::format!(
            "CoSaMP needs 1 <= k <= m/3, got k={k}, m={m}"
        )));
    }
    let y_norm = math::norm2(p.y);
    let mut s = vec![0.0; n];
    if y_norm == 0.0 {
        return Ok(p.result(s, 1, true));
    }
    let mut support: Vec<usize> = Vec::new();
    let mut resid = p.y.to_vec();
    let mut resid_norm = y_norm;
    let mut proxy = vec![0.0; n];
    for it in 1..=opts.max_iter {
        p.phi.apply_transpose(&resid, &mut proxy);
        let mut merged = largest(&proxy, (2 * k).min(n));
        merged.extend_from_slice(&support);
        merged.sort_unstable();
        merged.dedup();

        let sub = p.phi.select_columns(&merged);
        let b = PseudoInverse::new(&sub).map(|pinv| {
            let mut b = vec![0.0; merged.len()];
            pinv.apply(p.y, &mut b);
            b
        })?;
        let mut full = vec![0.0; n];
        for (&j, &v) in merged.iter().zip(&b) {
            full[j] = v;
        }
        support = largest(&full, k);
        support.sort_unstable();
        s.iter_mut().for_each(|v| *v = 0.0);
        for &j in &support {
            s[j] = full[j];
        }

        let fit = p.phi.matvec(&s);
        for ((r, yi), fi) in resid.iter_mut().zip(p.y).zip(&fit) {
            *r = yi - fi;
        }
        let new_norm = math::norm2(&resid);
        if (resid_norm - new_norm).abs() < opts.tol * y_norm {
            return Ok(p.result(s, it, true));
        }
        resid_norm = new_norm;
    }
    Ok(p.result(s, opts.max_iter, false))
}

/// Indices of the `k` largest magnitudes; ties go to the lower index.
fn largest(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// `10 log10(||x||^2 / ||x - x_hat||^2)`, capped at [`RSNR_CAP_DB`].
pub fn rsnr(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    let ratio = rsnr_ratio(x, x_hat)?;
    Ok(math::db(ratio).min(RSNR_CAP_DB))
}

fn rsnr_ratio(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::ShapeMismatch {
            expected: (x.len(), 1),
            found: (x_hat.len(), 1),
        });
    }
    let ex: f64 = x.iter().map(|v| v * v).sum();
    if ex == 0.0 {
        return Err(Error::domain("RSNR of a zero reference signal"));
    }
    let err: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(ex / err)
}

/// `10 log10` of the mean per-pair ratio `||x||^2 / ||x - x_hat||^2`.
pub fn arsnr<X: AsRef<[f64]>, Y: AsRef<[f64]>>(pairs: &[(X, Y)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::domain("ARSNR of an empty set"));
    }
    let mut total = 0.0;
    for (x, xh) in pairs {
        total += rsnr_ratio(x.as_ref(), xh.as_ref())?;
    }
    Ok(math::db(total / pairs.len() as f64).min(RSNR_CAP_DB))
}

/// ARSNR from per-pair RSNR values already in dB.
pub fn arsnr_from_db(rsnr_db: &[f64]) -> Result<f64> {
    if rsnr_db.is_empty() {
        return Err(Error::domain("ARSNR of an empty set"));
    }
    let mean = rsnr_db
        .iter()
        .map(|d| math::pow(10.0, d / 10.0))
        .sum::<f64>()
        / rsnr_db.len() as f64;
    Ok(math::db(mean).min(RSNR_CAP_DB))
}

#[cfg(test)]
mod tests;
