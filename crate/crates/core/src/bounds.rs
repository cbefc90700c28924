//! Recovery-error bounds for a decoder that only knows `A0` while the
//! ciphertext was produced with `A1 = A0 + dA`.
//!
//! Closed forms live next to the Monte Carlo estimators used to check them
//! and to fill in the constants they need.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::keystream::{BitStream, KeyChain, Seed};
use crate::math;
use crate::numerics::{self, symmetric_eigenvalues, DenseMatrix, LinearOperator, PseudoInverse};
use crate::par;
use crate::recovery::RSNR_CAP_DB;
use crate::sensing::{perturbation_of, EncodingMatrix, MatrixChain, PerturbationMatrix, SensingConfig};
use crate::signals::{mean_se, OrthonormalBasis, SignalStats};

/// `2^(1/4) - 1`, the largest admissible `eps^(2k)`.
pub const EPS_2K_LIMIT: f64 = 0.189_207_115_002_721_1;

/// Dimensions, flip density and Chebyshev parameter of one bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationRegime {
    pub m: usize,
    pub n: usize,
    pub eta: f64,
    pub theta: f64,
}

impl PerturbationRegime {
    pub fn new(m: usize, n: usize, eta: f64, theta: f64) -> Result<Self> {
        let r = PerturbationRegime { m, n, eta, theta };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::domain("dimensions must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 0.5) {
            return Err(Error::domain(alloc::format!(
                "flip density must lie in (0, 1/2], got {}",
                self.eta
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::domain(alloc::format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        Ok(())
    }

    /// `m / n`
    pub fn q(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

/// `sqrt(m) + sqrt(n)`, the large-size edge of the spectrum of a ±1 matrix.
pub fn asymptotic_sigma_max(m: usize, n: usize) -> f64 {
    math::sqrt(m as f64) + math::sqrt(n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Bound {
    /// Lower bound on `||x_hat - x||^2`.
    pub bound: f64,
    /// Probability with which it holds.
    pub zeta: f64,
}

/// Lower bound on the squared recovery error of a decoder using `A0`,
/// `4 eta m E_x theta / sigma_max(A0)^2`, and its probability `zeta`.
pub fn theorem1_lb(
    regime: &PerturbationRegime,
    stats: &SignalStats,
    sigma_max_a0: f64,
) -> Result<Theorem1Bound> {
    regime.validate()?;
    if !(stats.energy > 0.0) {
        return Err(Error::domain("plaintext energy must be positive"));
    }
    if !(sigma_max_a0 > 0.0 && sigma_max_a0.is_finite()) {
        return Err(Error::domain("sigma_max(A0) must be positive"));
    }
    let m = regime.m as f64;
    let bound = 4.0 * regime.eta * m * stats.energy * regime.theta / (sigma_max_a0 * sigma_max_a0);
    let zeta = theorem1_zeta(regime.m, regime.eta, regime.theta, stats.kurtosis_ratio());
    Ok(Theorem1Bound { bound, zeta })
}

/// `zeta = 1 / (1 + (1-theta)^-2 [(1 + (3/(2 eta) - 1)/m) F_x/E_x^2 - 1])`
pub fn theorem1_zeta(m: usize, eta: f64, theta: f64, kurtosis_ratio: f64) -> f64 {
    let inner = (1.0 + (1.5 / eta - 1.0) / m as f64) * kurtosis_ratio - 1.0;
    let omt = 1.0 - theta;
    1.0 / (1.0 + inner / (omt * omt))
}

/// Asymptotic lower bound on the recovery error power,
/// `4 eta q W_x theta / (1 + sqrt(q))^2`.
pub fn corollary1_lb(q: f64, eta: f64, wx: f64, theta: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::domain("q must lie in (0, 1]"));
    }
    if !(0.0..=0.5).contains(&eta) {
        return Err(Error::domain("flip density must lie in [0, 1/2]"));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::domain("theta must lie in (0, 1]"));
    }
    if !(wx >= 0.0) {
        return Err(Error::domain("power must be non-negative"));
    }
    let d = 1.0 + math::sqrt(q);
    Ok(4.0 * eta * q * wx * theta / (d * d))
}

/// `E[||dA xi||^4] = 16 m eta (eta (m-1) F + 3 eta (F - G) + G)`.
pub fn lemma1_second_moment(m: usize, eta: f64, stats: &SignalStats) -> Result<f64> {
    if !stats.fourth.is_finite() || !stats.energy_sq.is_finite() {
        return Err(Error::domain("stats lack the fourth-order moments"));
    }
    let (f, g) = (stats.energy_sq, stats.fourth);
    let m = m as f64;
    Ok(16.0 * m * eta * (eta * (m - 1.0) * f + 3.0 * eta * (f - g) + g))
}

/// Monte Carlo draws of `||dA xi||^2` over fresh `(A0, C0, xi)`.
#[derive(Debug, Clone)]
pub struct Lemma1Draws {
    pub m: usize,
    pub n: usize,
    /// `c / (m n)` actually used, after rounding the flip count.
    pub eta: f64,
    pub values: Vec<f64>,
}

impl Lemma1Draws {
    /// Draw `trials` samples; `xi` draws the plaintext from its own stream.
    pub fn sample<F>(m: usize, n: usize, eta: f64, trials: usize, seed: Seed, xi: F) -> Result<Self>
    where
        F: Fn(&mut BitStream) -> Vec<f64> + Sync + Send,
    {
        let cfg = SensingConfig::new(m, n, vec![eta])?;
        let values = par::map_trials(trials, |t| -> Result<f64> {
            let keys = KeyChain::derive(seed.child(2 * t as u64), 2)?;
            let chain = MatrixChain::generate(&keys, &cfg, 1, 0)?;
            let da = perturbation_of(chain.base(), &chain.flips()[0])?;
            let v = xi(&mut BitStream::new(seed.child(2 * t as u64 + 1)));
            let mut out = vec![0.0; m];
            da.apply(&v, &mut out);
            Ok(out.iter().map(|x| x * x).sum())
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        Ok(Lemma1Draws {
            m,
            n,
            eta: cfg.flip_count(0) as f64 / (m * n) as f64,
            values,
        })
    }

    /// Sample mean of `||dA xi||^2` and its standard error.
    pub fn mean(&self) -> (f64, f64) {
        mean_se(&self.values)
    }

    /// Sample mean of `||dA xi||^4` and its standard error.
    pub fn second_moment(&self) -> (f64, f64) {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        mean_se(&sq)
    }

    /// Fraction of draws with `||dA xi||^2 >= 4 m eta E_xi theta`, and its
    /// binomial standard error.
    pub fn exceedance(&self, energy: f64, theta: f64) -> (f64, f64) {
        let thr = 4.0 * self.m as f64 * self.eta * energy * theta;
        let hits = self.values.iter().filter(|&&v| v >= thr).count();
        let nt = self.values.len() as f64;
        let p = hits as f64 / nt;
        (p, math::sqrt(p * (1.0 - p) / nt))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Check {
    pub rate: f64,
    pub rate_se: f64,
    pub zeta: f64,
}

impl Lemma1Check {
    /// `rate >= zeta - 3 se`
    pub fn holds(&self) -> bool {
        self.rate >= self.zeta - 3.0 * self.rate_se
    }
}

/// Empirical exceedance rate of the Chebyshev event against its bound `zeta`.
pub fn lemma1_probability_check(
    regime: &PerturbationRegime,
    stats: &SignalStats,
    draws: &Lemma1Draws,
) -> Result<Lemma1Check> {
    regime.validate()?;
    if draws.values.len() < 100 {
        return Err(Error::domain("need at least 100 draws"));
    }
    let (rate, rate_se) = draws.exceedance(stats.energy, regime.theta);
    let zeta = theorem1_zeta(regime.m, draws.eta, regime.theta, stats.kurtosis_ratio());
    Ok(Lemma1Check {
        rate,
        rate_se,
        zeta,
    })
}

/// Extreme singular values over random `k`-column supports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicEstimate {
    pub k: usize,
    /// Of `A1 D / sqrt(m)`.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Largest singular value of `-dA D / sqrt(m)` over the same supports.
    pub perturbation_sigma_max: f64,
    /// `max(sigma_max^2 - 1, 1 - sigma_min^2)`
    pub delta: f64,
    /// `perturbation_sigma_max / sigma_max`
    pub eps: f64,
    pub trials: usize,
}

/// Monte Carlo RIC and `eps` for supports of size `k` and `2k`.
///
/// Columns are normalized by `1/sqrt(m)` so that `A1 D` is near isometric on
/// sparse vectors. Each trial draws one `2k` support; its first `k` draws
/// form the `k` support.
pub fn estimate_ric_constants(
    a1: &EncodingMatrix,
    da: &PerturbationMatrix,
    basis: &OrthonormalBasis,
    k: usize,
    trials: usize,
    seed: Seed,
) -> Result<(RicEstimate, RicEstimate)> {
    let (m, n) = (a1.rows(), a1.cols());
    if (da.rows(), da.cols()) != (m, n) {
        return Err(Error::ShapeMismatch {
            expected: (m, n),
            found: (da.rows(), da.cols()),
        });
    }
    if k == 0 || 2 * k > m || 2 * k > n {
        return Err(Error::domain(alloc::format!("need 1 <= 2k <= m, got k={k}, m={m}")));
    }
    if trials < 100 {
        return Err(Error::domain("need at least 100 trials"));
    }
    let scale = 1.0 / math::sqrt(m as f64);
    let phi = basis.dictionary(a1, scale)?;
    let mut dphi = da.mul_dense(&basis.to_dense())?;
    dphi.as_mut_slice().iter_mut().for_each(|v| *v *= scale);

    let per_trial = par::map_trials(trials, |t| -> Result<[f64; 6]> {
        let mut stream = BitStream::new(seed.child(t as u64));
        // Unsorted draw order: the first k of the 2k support are uniform too.
        let support = draw_unsorted(&mut stream, n, 2 * k)?;
        let (lo_k, hi_k) = extreme_sv(&phi, &support[..k]);
        let (lo_2k, hi_2k) = extreme_sv(&phi, &support);
        let (_, p_k) = extreme_sv(&dphi, &support[..k]);
        let (_, p_2k) = extreme_sv(&dphi, &support);
        Ok([lo_k, hi_k, p_k, lo_2k, hi_2k, p_2k])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let fold = |off: usize, kk: usize| {
        let smin = per_trial.iter().map(|r| r[off]).fold(f64::INFINITY, f64::min);
        let smax = per_trial.iter().map(|r| r[off + 1]).fold(0.0, f64::max);
        let pmax = per_trial.iter().map(|r| r[off + 2]).fold(0.0, f64::max);
        RicEstimate {
            k: kk,
            sigma_min: smin,
            sigma_max: smax,
            perturbation_sigma_max: pmax,
            delta: (smax * smax - 1.0).max(1.0 - smin * smin),
            eps: pmax / smax,
            trials,
        }
    };
    Ok((fold(0, k), fold(3, 2 * k)))
}

fn draw_unsorted(stream: &mut BitStream, n: usize, k: usize) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + stream.draw_index((n - i) as u64)? as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    Ok(idx)
}

/// `(sigma_min, sigma_max)` of the column subset, through its Gram matrix.
fn extreme_sv(a: &DenseMatrix, cols: &[usize]) -> (f64, f64) {
    let g = a.select_columns(cols).gram();
    let ev = symmetric_eigenvalues(&g);
    let top = ev.first().copied().unwrap_or(0.0).max(0.0);
    let bottom = ev.last().copied().unwrap_or(0.0).max(0.0);
    (math::sqrt(bottom), math::sqrt(top))
}

/// Constants and value of the RIP-based upper bound `||x_hat - x|| <= C gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposition1Bound {
    pub gamma: f64,
    pub c_bar: f64,
    pub ub: f64,
    /// `sqrt(2) (1 + eps^(2k))^-2 - 1`
    pub delta_2k_max: f64,
}

/// `sqrt(2) (1 + eps_2k)^-2 - 1`
pub fn delta_2k_max(eps_2k: f64) -> f64 {
    core::f64::consts::SQRT_2 / ((1.0 + eps_2k) * (1.0 + eps_2k)) - 1.0
}

pub fn proposition1_ub(est_k: &RicEstimate, est_2k: &RicEstimate, y_norm: f64) -> Result<Proposition1Bound> {
    proposition1_from_constants(est_k.eps, est_k.delta, est_2k.eps, est_2k.delta, y_norm)
}

/// Upper bound from explicit constants. Hypothesis violations come back as
/// [`Error::Inapplicable`].
pub fn proposition1_from_constants(
    eps_k: f64,
    delta_k: f64,
    eps_2k: f64,
    delta_2k: f64,
    y_norm: f64,
) -> Result<Proposition1Bound> {
    for v in [eps_k, delta_k, eps_2k, delta_2k, y_norm] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::domain("constants must be finite and non-negative"));
        }
    }
    if eps_2k >= EPS_2K_LIMIT {
        return Err(Error::Inapplicable(alloc::format!(
            "eps^(2k) = {eps_2k:.4} is not below 2^(1/4) - 1"
        )));
    }
    let dmax = delta_2k_max(eps_2k);
    if delta_2k >= dmax {
        return Err(Error::Inapplicable(alloc::format!(
            "delta^(2k) = {delta_2k:.4} is not below {dmax:.4}"
        )));
    }
    if delta_k >= 1.0 {
        return Err(Error::Inapplicable(alloc::format!(
            "delta^(k) = {delta_k:.4} is not below 1"
        )));
    }
    let gamma = eps_k * math::sqrt((1.0 + delta_k) / (1.0 - delta_k)) * y_norm;
    let e = 1.0 + eps_2k;
    let denom = 1.0 - (core::f64::consts::SQRT_2 + 1.0) * ((1.0 + delta_2k) * e * e - 1.0);
    let c_bar = 4.0 * math::sqrt(1.0 + delta_2k) * e / denom;
    Ok(Proposition1Bound {
        gamma,
        c_bar,
        ub: c_bar * gamma,
        delta_2k_max: dmax,
    })
}

/// Monte Carlo estimate of `LB = -10 log10 E[sigma_max(A0^+ dA)^2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PracticalLb {
    pub db: f64,
    /// Mean of `sigma_max(A0^+ dA)^2` and its standard error.
    pub mean_sq: f64,
    pub mean_sq_se: f64,
    pub trials: usize,
}

pub fn practical_lb_arsnr(m: usize, n: usize, eta: f64, trials: usize, seed: Seed) -> Result<PracticalLb> {
    if trials < 100 {
        return Err(Error::domain("need at least 100 trials"));
    }
    let cfg = SensingConfig::new(m, n, vec![eta])?;
    if cfg.flip_count(0) == 0 {
        return Ok(PracticalLb {
            db: RSNR_CAP_DB,
            mean_sq: 0.0,
            mean_sq_se: 0.0,
            trials,
        });
    }
    let sq = par::map_trials(trials, |t| -> Result<f64> {
        let keys = KeyChain::derive(seed.child(t as u64), 2)?;
        let chain = MatrixChain::generate(&keys, &cfg, 1, 0)?;
        let da = perturbation_of(chain.base(), &chain.flips()[0])?;
        let s = numerics::sigma_max_pinv_product(&chain.base().to_dense(), &da)?;
        Ok(s * s)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let (mean_sq, mean_sq_se) = mean_se(&sq);
    Ok(PracticalLb {
        db: (-math::db(mean_sq)).min(RSNR_CAP_DB),
        mean_sq,
        mean_sq_se,
        trials,
    })
}

/// `UB = -10 log10(4 eta m / (sqrt(m) + sqrt(n))^2)`
pub fn practical_ub_arsnr(m: usize, n: usize, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 0.5) {
        return Err(Error::domain("flip density must lie in (0, 1/2]"));
    }
    if m == 0 || n == 0 {
        return Err(Error::domain("dimensions must be positive"));
    }
    let s = asymptotic_sigma_max(m, n);
    Ok(-math::db(4.0 * eta * m as f64 / (s * s)))
}

/// Least-squares model of a naive lower-class decoder:
/// `dx = A0^+ dA x` and its RSNR proxy `-10 log10(||dx||^2 / ||x||^2)`.
pub fn naive_second_class_error(
    a0: &EncodingMatrix,
    da: &PerturbationMatrix,
    x: &[f64],
) -> Result<(Vec<f64>, f64)> {
    if (da.rows(), da.cols()) != (a0.rows(), a0.cols()) || x.len() != a0.cols() {
        return Err(Error::ShapeMismatch {
            expected: (a0.rows(), a0.cols()),
            found: (da.rows(), da.cols()),
        });
    }
    let pinv = PseudoInverse::new(&a0.to_dense())?;
    if pinv.rank() < a0.rows() {
        return Err(Error::RankDeficient {
            rank: pinv.rank(),
            required: a0.rows(),
        });
    }
    let mut dax = vec![0.0; a0.rows()];
    da.apply(x, &mut dax);
    let mut dx = vec![0.0; a0.cols()];
    pinv.apply(&dax, &mut dx);
    let ex: f64 = x.iter().map(|v| v * v).sum();
    let ed: f64 = dx.iter().map(|v| v * v).sum();
    let proxy = if ed == 0.0 {
        RSNR_CAP_DB
    } else {
        (-math::db(ed / ex)).min(RSNR_CAP_DB)
    };
    Ok((dx, proxy))
}

/// One row of a bound sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub eta: f64,
    pub lb_arsnr_db: f64,
    pub ub_arsnr_db: f64,
    pub zeta: f64,
    pub theorem1_lb: f64,
    /// `None` when the RIP hypotheses fail.
    pub proposition1: Option<Proposition1Bound>,
    pub eps_k: f64,
    pub eps_2k: f64,
    pub delta_k: f64,
    pub delta_2k: f64,
}

/// Monte Carlo setup for the RIP constants of a bound sweep row.
#[derive(Debug, Clone, Copy)]
pub struct RicSetup<'a> {
    pub k: usize,
    pub trials: usize,
    pub basis: &'a OrthonormalBasis,
}

/// One sweep row for `regime`.
///
/// Theorem 1 uses `sigma_max(A0) ~ sqrt(m) + sqrt(n)`. The RIP constants,
/// when `ric` is set, come from one `(A1, dA)` pair drawn from `seed`, and
/// the upper bound is evaluated at `||y|| = sqrt(E_x)` (the norm of a
/// `1/sqrt(m)` normalized measurement). Without `ric` the RIP columns are NaN,
/// and `lb_trials = 0` leaves the practical lower bound NaN.
pub fn bound_report(
    regime: &PerturbationRegime,
    stats: &SignalStats,
    lb_trials: usize,
    ric: Option<RicSetup<'_>>,
    seed: Seed,
) -> Result<BoundReport> {
    regime.validate()?;
    let (m, n, eta) = (regime.m, regime.n, regime.eta);
    let t1 = theorem1_lb(regime, stats, asymptotic_sigma_max(m, n))?;
    let lb = match lb_trials {
        0 => f64::NAN,
        t => practical_lb_arsnr(m, n, eta, t, seed.child(0))?.db,
    };
    let ub = practical_ub_arsnr(m, n, eta)?;
    let mut report = BoundReport {
        eta,
        lb_arsnr_db: lb,
        ub_arsnr_db: ub,
        zeta: t1.zeta,
        theorem1_lb: t1.bound,
        proposition1: None,
        eps_k: f64::NAN,
        eps_2k: f64::NAN,
        delta_k: f64::NAN,
        delta_2k: f64::NAN,
    };
    if let Some(setup) = ric {
        if setup.basis.dim() != n {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                found: (setup.basis.dim(), setup.basis.dim()),
            });
        }
        let cfg = SensingConfig::new(m, n, vec![eta])?;
        let keys = KeyChain::derive(seed.child(1), 2)?;
        let chain = MatrixChain::generate(&keys, &cfg, 1, 0)?;
        let a1 = chain.class_matrix(1)?;
        let da = PerturbationMatrix::difference(&a1, chain.base())?;
        let (ek, e2k) = estimate_ric_constants(&a1, &da, setup.basis, setup.k, setup.trials, seed.child(2))?;
        report.eps_k = ek.eps;
        report.eps_2k = e2k.eps;
        report.delta_k = ek.delta;
        report.delta_2k = e2k.delta;
        report.proposition1 = match proposition1_ub(&ek, &e2k, math::sqrt(stats.energy)) {
            Ok(b) => Some(b),
            Err(Error::Inapplicable(_)) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(report)
}
