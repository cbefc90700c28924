//! Statistical cryptanalysis of the ciphertexts.
//!
//! An eavesdropper sees measurements `y_j = <a_j, x>` with fresh ±1 rows.
//! The tests below check how much of `x` leaks into their distribution: a
//! two-level Kolmogorov–Smirnov distinguisher between two plaintexts, a
//! normality check, and the `O(1/n)` convergence of the measurement law.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::keystream::{BitStream, Seed};
use crate::math;
use crate::par;
use crate::signals::sphere_uniform;

/// Second-level significance level.
pub const SIGNIFICANCE: f64 = 0.05;

/// Inner product of `x` with a fresh ±1 row, eight coordinates per table
/// lookup. Bits are consumed exactly as by repeated `draw_sign`.
#[derive(Debug, Clone)]
pub struct RowEncoder {
    n: usize,
    /// One table per chunk of up to 8 coordinates, indexed by the chunk's
    /// bits (first coordinate in the most significant position).
    tables: Vec<Vec<f64>>,
    widths: Vec<u32>,
}

impl RowEncoder {
    pub fn new(x: &[f64]) -> Self {
        let mut tables = Vec::new();
        let mut widths = Vec::new();
        for chunk in x.chunks(8) {
            let w = chunk.len() as u32;
            let table = (0..1usize << w)
                .map(|idx| {
                    chunk
                        .iter()
                        .enumerate()
                        .map(|(b, &v)| {
                            let bit = (idx >> (w as usize - 1 - b)) & 1;
                            if bit == 0 {
                                v
                            } else {
                                -v
                            }
                        })
                        .sum()
                })
                .collect();
            tables.push(table);
            widths.push(w);
        }
        RowEncoder {
            n: x.len(),
            tables,
            widths,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `sum_l A_l x_l` for the next row of `stream`.
    #[inline]
    pub fn encode_row(&self, stream: &mut BitStream) -> f64 {
        let mut acc = 0.0;
        for (t, &w) in self.tables.iter().zip(&self.widths) {
            acc += t[stream.next_bits(w) as usize];
        }
        acc
    }
}

/// Pooled measurement scalars of one plaintext.
#[derive(Debug, Clone, PartialEq)]
pub struct CiphertextSample {
    pub values: Vec<f64>,
    pub energy: f64,
    pub n: usize,
}

/// `chi` measurements of `x`, each from a fresh single-row encoding,
/// scaled by `1/sqrt(n)`.
pub fn collect_ciphertexts(x: &[f64], chi: usize, seed: Seed) -> Result<CiphertextSample> {
    if chi < 1000 {
        return Err(Error::domain("need at least 1000 ciphertexts"));
    }
    check_plaintext(x)?;
    let enc = RowEncoder::new(x);
    let scale = 1.0 / math::sqrt(x.len() as f64);
    let mut stream = BitStream::new(seed);
    let values = (0..chi).map(|_| enc.encode_row(&mut stream) * scale).collect();
    Ok(CiphertextSample {
        values,
        energy: x.iter().map(|v| v * v).sum(),
        n: x.len(),
    })
}

fn check_plaintext(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::domain("empty plaintext"));
    }
    if !math::all_finite(x) {
        return Err(Error::NonFinite("plaintext"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n_a: usize,
    /// `None` for a one-sample test.
    pub n_b: Option<usize>,
}

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2)`.
///
/// For `lambda < 1.18` the equivalent theta-function form
/// `1 - sqrt(2 pi)/lambda sum exp(-(2j-1)^2 pi^2 / (8 lambda^2))` is summed
/// instead, since the alternating series converges slowly there. Both are
/// truncated once a term drops below `1e-10`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda.is_nan() {
        return f64::NAN;
    }
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let pi2 = core::f64::consts::PI * core::f64::consts::PI;
        let mut s = 0.0;
        let mut j = 1u32;
        loop {
            let odd = (2 * j - 1) as f64;
            let term = math::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
            s += term;
            if term < 1e-10 || j > 1000 {
                break;
            }
            j += 1;
        }
        1.0 - math::sqrt(2.0 * core::f64::consts::PI) / lambda * s
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        let mut j = 1u32;
        loop {
            let jf = j as f64;
            let term = math::exp(-2.0 * jf * jf * lambda * lambda);
            s += sign * term;
            if term < 1e-10 || j > 1000 {
                break;
            }
            sign = -sign;
            j += 1;
        }
        2.0 * s
    };
    q.clamp(0.0, 1.0)
}

/// Two-sample KS test with the asymptotic p-value at
/// `lambda = D sqrt(n_a n_b / (n_a + n_b))`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS test on an empty sample"));
    }
    if !math::all_finite(a) || !math::all_finite(b) {
        return Err(Error::NonFinite("KS sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let v = a[i].min(b[j]);
        while i < na && a[i] <= v {
            i += 1;
        }
        while j < nb && b[j] <= v {
            j += 1;
        }
        d = d.max(math::abs(i as f64 / na as f64 - j as f64 / nb as f64));
    }
    let lambda = d * math::sqrt((na * nb) as f64 / (na + nb) as f64);
    Ok(KsOutcome {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        n_a: na,
        n_b: Some(nb),
    })
}

/// One-sample KS test against a continuous CDF, asymptotic p-value at
/// `lambda = D sqrt(n)`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsOutcome> {
    if sample.is_empty() {
        return Err(Error::domain("KS test on an empty sample"));
    }
    if !math::all_finite(sample) {
        return Err(Error::NonFinite("KS sample"));
    }
    let mut s = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in s.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsOutcome {
        statistic: d,
        p_value: kolmogorov_q(d * math::sqrt(n)),
        n_a: s.len(),
        n_b: None,
    })
}

/// One-sample KS test of `p_values` against `U[0, 1]`.
pub fn ks_uniformity(p_values: &[f64]) -> Result<KsOutcome> {
    if p_values.len() < 20 {
        return Err(Error::domain("uniformity test needs at least 20 p-values"));
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::domain("p-values must lie in [0, 1]"));
    }
    ks_one_sample(p_values, |v| v.clamp(0.0, 1.0))
}

/// Two orthogonal plaintexts with energies `e1` and `e2`: sphere-uniform
/// draws, the second orthogonalized against the first.
pub fn orthogonal_pair(stream: &mut BitStream, n: usize, e1: f64, e2: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::domain("orthogonal pair needs n >= 2"));
    }
    if !(e1 >= 0.0 && e2 >= 0.0 && e1.is_finite() && e2.is_finite()) {
        return Err(Error::domain("energies must be finite and non-negative"));
    }
    let u = sphere_uniform(stream, n, 1.0);
    let mut v = sphere_uniform(stream, n, 1.0);
    for _ in 0..2 {
        let c = math::dot(&u, &v);
        math::axpy(-c, &u, &mut v);
    }
    let nv = math::norm2(&v);
    let (s1, s2) = (math::sqrt(e1), math::sqrt(e2) / nv);
    Ok((u.iter().map(|a| a * s1).collect(), v.iter().map(|a| a * s2).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Indistinguishable,
    Distinguishable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Indistinguishable => "indistinguishable",
            Verdict::Distinguishable => "distinguishable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub e1: f64,
    pub e2: f64,
    pub n: usize,
    /// Ciphertexts per plaintext.
    pub chi: usize,
    /// Plaintext pairs (first-level tests).
    pub pairs: usize,
    pub seed: Seed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub config: AttackConfig,
    /// In repetition order.
    pub first_level_p_values: Vec<f64>,
    pub second_level_p: f64,
    pub verdict: Verdict,
}

/// Two-level distinguishing attack between plaintexts of energy `e1`, `e2`.
///
/// Repetition `r` draws a fresh orthogonal pair and `chi` ciphertexts of
/// each, compares them with a two-sample KS test, and the `P` resulting
/// p-values are tested for uniformity.
pub fn distinguishing_attack(cfg: &AttackConfig) -> Result<AttackReport> {
    if cfg.chi < 1000 {
        return Err(Error::domain("need chi >= 1000"));
    }
    if cfg.pairs < 20 {
        return Err(Error::domain("need at least 20 repetitions"));
    }
    let p_values = par::map_trials(cfg.pairs, |r| -> Result<f64> {
        let base = cfg.seed.child(r as u64);
        let (x1, x2) = orthogonal_pair(&mut BitStream::new(base.child(0)), cfg.n, cfg.e1, cfg.e2)?;
        let y1 = collect_ciphertexts(&x1, cfg.chi, base.child(1))?;
        let y2 = collect_ciphertexts(&x2, cfg.chi, base.child(2))?;
        Ok(ks_two_sample(&y1.values, &y2.values)?.p_value)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let second = ks_uniformity(&p_values)?;
    let verdict = if second.p_value < SIGNIFICANCE {
        Verdict::Distinguishable
    } else {
        Verdict::Indistinguishable
    };
    Ok(AttackReport {
        config: *cfg,
        first_level_p_values: p_values,
        second_level_p: second.p_value,
        verdict,
    })
}

/// One-sample KS of `chi` scaled ciphertexts of `x` against `N(0, e_x / n)`.
pub fn gaussianity_check(x: &[f64], chi: usize, seed: Seed) -> Result<KsOutcome> {
    if chi < 10_000 {
        return Err(Error::domain("need chi >= 10^4"));
    }
    let sample = collect_ciphertexts(x, chi, seed)?;
    let sd = math::sqrt(sample.energy / sample.n as f64);
    if sd == 0.0 {
        return Err(Error::domain("zero plaintext"));
    }
    ks_one_sample(&sample.values, |v| math::normal_cdf(v / sd))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub n_grid: Vec<usize>,
    pub plaintexts: usize,
    /// Measurement rows per plaintext.
    pub rows: usize,
    pub rhos: Vec<f64>,
    pub seed: Seed,
}

/// Deviations of one grid point, in plaintext order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDeviations {
    pub n: usize,
    pub deviations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub grid: Vec<GridDeviations>,
    /// `(rho, C(rho))`
    pub c_rho: Vec<(f64, f64)>,
    /// Least-squares slope of `log(median deviation)` against `log n`;
    /// `None` with fewer than two grid points.
    pub slope: Option<f64>,
    pub bins: usize,
}

/// Binned sup-over-intervals distance between the law of `<a, x>` (unscaled,
/// `e_x = ||x||^2`) and `N(0, e_x)`, from `rows` fresh ±1 rows.
///
/// Bins are the `B = min(4096, rows / 100)` equiprobable intervals of the
/// reference normal law. With `D_i` the empirical minus the reference CDF at
/// the `i`-th edge (`D_0 = D_B = 0`), the distance is `max D_i - min D_i`.
pub fn binned_interval_deviation(x: &[f64], rows: usize, stream: &mut BitStream) -> Result<f64> {
    check_plaintext(x)?;
    let bins = bin_count(rows)?;
    let enc = RowEncoder::new(x);
    let sd = math::sqrt(x.iter().map(|v| v * v).sum::<f64>());
    if sd == 0.0 {
        return Err(Error::domain("zero plaintext"));
    }
    let mut counts = vec![0u64; bins];
    for _ in 0..rows {
        let y = enc.encode_row(stream);
        let u = math::normal_cdf(y / sd);
        let b = ((u * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    let mut cum = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        cum += c;
        let d = cum as f64 / rows as f64 - (i + 1) as f64 / bins as f64;
        hi = hi.max(d);
        lo = lo.min(d);
    }
    Ok(hi - lo)
}

fn bin_count(rows: usize) -> Result<usize> {
    let b = (rows / 100).min(4096);
    if b < 2 {
        return Err(Error::domain("need at least 200 rows"));
    }
    Ok(b)
}

/// Monte Carlo estimate of `C(rho)`: for each `n`, sphere-uniform unit
/// plaintexts get a binned deviation each; `C(rho)` is the largest, over the
/// grid, `(1 - rho)`-quantile of `n * deviation`.
pub fn estimate_convergence_constant(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if cfg.n_grid.is_empty() {
        return Err(Error::domain("empty n grid"));
    }
    if cfg.plaintexts == 0 {
        return Err(Error::domain("need at least one plaintext per n"));
    }
    if cfg.rhos.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::domain("rho must lie in (0, 1)"));
    }
    if cfg.n_grid.contains(&0) {
        return Err(Error::domain("grid dimensions must be positive"));
    }
    let bins = bin_count(cfg.rows)?;
    let np = cfg.plaintexts;
    let jobs = cfg.n_grid.len() * np;
    let devs = par::map_trials(jobs, |job| -> Result<f64> {
        let (g, p) = (job / np, job % np);
        let n = cfg.n_grid[g];
        let base = cfg.seed.child(g as u64).child(p as u64);
        let x = sphere_uniform(&mut BitStream::new(base.child(0)), n, 1.0);
        binned_interval_deviation(&x, cfg.rows, &mut BitStream::new(base.child(1)))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let grid: Vec<GridDeviations> = cfg
        .n_grid
        .iter()
        .enumerate()
        .map(|(g, &n)| GridDeviations {
            n,
            deviations: devs[g * np..(g + 1) * np].to_vec(),
        })
        .collect();

    let c_rho = cfg
        .rhos
        .iter()
        .map(|&rho| {
            let c = grid
                .iter()
                .map(|gd| {
                    let scaled: Vec<f64> = gd.deviations.iter().map(|d| d * gd.n as f64).collect();
                    upper_quantile(&scaled, 1.0 - rho)
                })
                .fold(0.0, f64::max);
            (rho, c)
        })
        .collect();

    let slope = if grid.len() >= 2 {
        let pts: Vec<(f64, f64)> = grid
            .iter()
            .map(|gd| (math::log(gd.n as f64), math::log(median(&gd.deviations))))
            .collect();
        Some(ls_slope(&pts))
    } else {
        None
    };
    Ok(ConvergenceReport {
        grid,
        c_rho,
        slope,
        bins,
    })
}

/// Order statistic `ceil(q N)` (1-based) of `v`.
pub fn upper_quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let rank = (libm::ceil(q * s.len() as f64) as usize).clamp(1, s.len());
    s[rank - 1]
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
