//! Sparsity bases, sparse plaintext models and plaintext moment estimates.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::keystream::{BitStream, Seed};
use crate::math;
use crate::numerics::DenseMatrix;
use crate::par;
use crate::sensing::EncodingMatrix;

/// Tolerance of the orthonormality gate, relative Frobenius norm of `D^T D - I`.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Identity,
    Dct2,
    Daubechies4,
    RandomOnb,
    FileLoaded,
}

/// Orthonormal synthesis basis: `x = D s`, `s = D^T x`.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    kind: BasisKind,
    n: usize,
    /// `None` for the identity.
    matrix: Option<DenseMatrix>,
}

impl OrthonormalBasis {
    pub fn identity(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(OrthonormalBasis {
            kind: BasisKind::Identity,
            n,
            matrix: None,
        })
    }

    /// Orthonormal DCT-II; column `k` is the `k`-th cosine atom.
    pub fn dct2(n: usize) -> Result<Self> {
        check_dim(n)?;
        let nf = n as f64;
        let d = DenseMatrix::from_fn(n, n, |i, k| {
            let c = if k == 0 {
                math::sqrt(1.0 / nf)
            } else {
                math::sqrt(2.0 / nf)
            };
            c * math::cos(core::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf))
        });
        Ok(Self::wrap(BasisKind::Dct2, d))
    }

    /// Periodic Daubechies-4 wavelet basis, decomposed down to two
    /// approximation coefficients. `n` must be a power of two, at least 4.
    pub fn daubechies4(n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::domain(alloc::format!(
                "daubechies4 needs a power of two n >= 4, got {n}"
            )));
        }
        // Row j of D^T is the analysis of e_j, so D[j][i] = (W e_j)[i].
        let mut d = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let w = dwt_db4(&e);
            d.row_mut(j).copy_from_slice(&w);
        }
        Ok(Self::wrap(BasisKind::Daubechies4, d))
    }

    /// Orthonormalized i.i.d. Gaussian matrix drawn from `seed`.
    pub fn random(n: usize, seed: Seed) -> Result<Self> {
        check_dim(n)?;
        let mut stream = BitStream::new(seed);
        // Columns stored as rows while orthonormalizing.
        let mut cols: Vec<Vec<f64>> = (0..n).map(|_| stream.normal_vec(n)).collect();
        for j in 0..n {
            let (done, rest) = cols.split_at_mut(j);
            let v = &mut rest[0];
            for _ in 0..2 {
                for q in done.iter() {
                    let c = math::dot(v, q);
                    math::axpy(-c, q, v);
                }
            }
            let nrm = math::norm2(v);
            v.iter_mut().for_each(|x| *x /= nrm);
        }
        let d = DenseMatrix::from_fn(n, n, |i, j| cols[j][i]);
        Ok(Self::wrap(BasisKind::RandomOnb, d))
    }

    /// Wrap an externally supplied matrix, rejecting it unless `D^T D = I`
    /// within [`ORTHONORMAL_TOL`].
    pub fn from_matrix(d: DenseMatrix) -> Result<Self> {
        if d.nrows() != d.ncols() {
            return Err(Error::ShapeMismatch {
                expected: (d.nrows(), d.nrows()),
                found: d.shape(),
            });
        }
        check_dim(d.nrows())?;
        if !d.is_finite() {
            return Err(Error::NonFinite("basis"));
        }
        let deviation = orthonormality_deviation(&d);
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self::wrap(BasisKind::FileLoaded, d))
    }

    fn wrap(kind: BasisKind, d: DenseMatrix) -> Self {
        OrthonormalBasis {
            kind,
            n: d.nrows(),
            matrix: Some(d),
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match &self.matrix {
            Some(d) => d.clone(),
            None => DenseMatrix::identity(self.n),
        }
    }

    /// `x = D s`
    pub fn synthesize(&self, s: &[f64]) -> Vec<f64> {
        match &self.matrix {
            Some(d) => d.matvec(s),
            None => s.to_vec(),
        }
    }

    /// `s = D^T x`
    pub fn analyze(&self, x: &[f64]) -> Vec<f64> {
        match &self.matrix {
            Some(d) => d.matvec_transpose(x),
            None => x.to_vec(),
        }
    }

    /// Effective dictionary `scale * A D`.
    pub fn dictionary(&self, a: &EncodingMatrix, scale: f64) -> Result<DenseMatrix> {
        if a.cols() != self.n {
            return Err(Error::ShapeMismatch {
                expected: (a.rows(), self.n),
                found: (a.rows(), a.cols()),
            });
        }
        let mut phi = match &self.matrix {
            Some(d) => a.mul_dense(d)?,
            None => a.to_dense(),
        };
        if scale != 1.0 {
            phi.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
        }
        Ok(phi)
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("basis dimension must be positive"));
    }
    Ok(())
}

/// `||D^T D - I||_F / sqrt(n)`
pub fn orthonormality_deviation(d: &DenseMatrix) -> f64 {
    let n = d.ncols();
    let g = d.gram();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = g[(i, j)] - if i == j { 1.0 } else { 0.0 };
            s += t * t;
        }
    }
    math::sqrt(s / n as f64)
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn db4_lowpass() -> [f64; 4] {
    let s = 4.0 * core::f64::consts::SQRT_2;
    [
        (1.0 + SQRT3) / s,
        (3.0 + SQRT3) / s,
        (3.0 - SQRT3) / s,
        (1.0 - SQRT3) / s,
    ]
}

/// Full periodic DB4 analysis. Output layout: `[a_J | d_J | ... | d_1]`.
fn dwt_db4(x: &[f64]) -> Vec<f64> {
    let h = db4_lowpass();
    let g = [h[3], -h[2], h[1], -h[0]];
    let mut out = x.to_vec();
    let mut len = out.len();
    let mut tmp = vec![0.0; len];
    while len >= 4 {
        let half = len / 2;
        for i in 0..half {
            let mut a = 0.0;
            let mut d = 0.0;
            for k in 0..4 {
                let v = out[(2 * i + k) % len];
                a += h[k] * v;
                d += g[k] * v;
            }
            tmp[i] = a;
            tmp[half + i] = d;
        }
        out[..len].copy_from_slice(&tmp[..len]);
        len = half;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientLaw {
    /// i.i.d. standard normal on the support.
    Gaussian,
    /// Independent `±1` on the support.
    UniformSign,
}

/// `x = D s` with `s` exactly `k`-sparse.
#[derive(Debug, Clone)]
pub struct SignalModel {
    pub k: usize,
    pub basis: OrthonormalBasis,
    pub law: CoefficientLaw,
    /// Rescale each draw to this energy when set.
    pub energy: Option<f64>,
}

impl SignalModel {
    pub fn new(
        basis: OrthonormalBasis,
        k: usize,
        law: CoefficientLaw,
        energy: Option<f64>,
    ) -> Result<Self> {
        if k > basis.dim() {
            return Err(Error::domain(alloc::format!(
                "sparsity {k} exceeds dimension {}",
                basis.dim()
            )));
        }
        if let Some(e) = energy {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::domain("signal energy must be finite and non-negative"));
            }
        }
        Ok(SignalModel {
            k,
            basis,
            law,
            energy,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// One draw of a [`SignalModel`] with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSample {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    /// Sorted.
    pub support: Vec<usize>,
}

/// `k` distinct indices of `0..n`, uniform without replacement (partial
/// Fisher–Yates), sorted.
pub fn sample_support(stream: &mut BitStream, n: usize, k: usize) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::domain("support larger than dimension"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + stream.draw_index((n - i) as u64)? as usize;
        idx.swap(i, j);
    }
    let mut support = idx[..k].to_vec();
    support.sort_unstable();
    Ok(support)
}

pub fn sample_signal(model: &SignalModel, stream: &mut BitStream) -> Result<SparseSample> {
    let n = model.dim();
    let support = sample_support(stream, n, model.k)?;
    let mut s = vec![0.0; n];
    for &i in &support {
        s[i] = match model.law {
            CoefficientLaw::Gaussian => stream.next_normal(),
            CoefficientLaw::UniformSign => stream.draw_sign() as f64,
        };
    }
    if let Some(e) = model.energy {
        let cur: f64 = s.iter().map(|v| v * v).sum();
        if cur > 0.0 {
            let g = math::sqrt(e / cur);
            s.iter_mut().for_each(|v| *v *= g);
        }
    }
    let x = model.basis.synthesize(&s);
    Ok(SparseSample { x, s, support })
}

/// Uniform draw on the sphere of radius `sqrt(energy)` in `R^n`.
pub fn sphere_uniform(stream: &mut BitStream, n: usize, energy: f64) -> Vec<f64> {
    let mut v = stream.normal_vec(n);
    let nrm = math::norm2(&v);
    let g = math::sqrt(energy) / nrm;
    v.iter_mut().for_each(|x| *x *= g);
    v
}

/// Stationary Gaussian AR(1) path `x_t = pole x_(t-1) + e_t` with unit
/// innovations, started from the stationary law.
pub fn ar1_path(stream: &mut BitStream, n: usize, pole: f64) -> Result<Vec<f64>> {
    if !(pole.abs() < 1.0) {
        return Err(Error::domain("AR(1) pole must satisfy |pole| < 1"));
    }
    let mut x = Vec::with_capacity(n);
    let mut prev = stream.next_normal() / math::sqrt(1.0 - pole * pole);
    for _ in 0..n {
        x.push(prev);
        prev = pole * prev + stream.next_normal();
    }
    Ok(x)
}

/// Non-overlapping windows of length `n`; an incomplete tail is dropped.
pub fn windows(samples: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::domain("window length must be positive"));
    }
    Ok(samples.chunks_exact(n).map(<[f64]>::to_vec).collect())
}

/// Plaintext moments and their Monte Carlo standard errors.
///
/// `energy` is `E[sum X^2]`, `energy_sq` is `E[(sum X^2)^2]`, `fourth` is
/// `E[sum X^4]`, `power` is `energy / n`, `fourth_bound` is `max_j E[X_j^4]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalStats {
    pub n: usize,
    pub energy: f64,
    pub energy_sq: f64,
    pub fourth: f64,
    pub power: f64,
    pub fourth_bound: f64,
    pub energy_se: f64,
    pub energy_sq_se: f64,
    pub fourth_se: f64,
    pub trials: usize,
}

impl SignalStats {
    /// Exact moments of a fixed plaintext.
    pub fn deterministic(x: &[f64]) -> Self {
        let e: f64 = x.iter().map(|v| v * v).sum();
        let g: f64 = x.iter().map(|v| v * v * v * v).sum();
        let mb = x.iter().map(|v| v * v * v * v).fold(0.0, f64::max);
        SignalStats {
            n: x.len(),
            energy: e,
            energy_sq: e * e,
            fourth: g,
            power: e / x.len() as f64,
            fourth_bound: mb,
            energy_se: 0.0,
            energy_sq_se: 0.0,
            fourth_se: 0.0,
            trials: 0,
        }
    }

    /// Exact moments of the uniform law on the sphere of radius `sqrt(energy)`.
    pub fn sphere(n: usize, energy: f64) -> Self {
        let nf = n as f64;
        // E[u_j^4] = 3 / (n (n + 2)) on the unit sphere.
        let per = 3.0 * energy * energy / (nf * (nf + 2.0));
        SignalStats {
            n,
            energy,
            energy_sq: energy * energy,
            fourth: nf * per,
            power: energy / nf,
            fourth_bound: per,
            energy_se: 0.0,
            energy_sq_se: 0.0,
            fourth_se: 0.0,
            trials: 0,
        }
    }

    /// `F_x / E_x^2`
    pub fn kurtosis_ratio(&self) -> f64 {
        self.energy_sq / (self.energy * self.energy)
    }
}

/// Monte Carlo moments of plaintexts produced by `sampler(trial)`.
pub fn estimate_stats<F>(sampler: F, trials: usize) -> Result<SignalStats>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    if trials < 2 {
        return Err(Error::domain("need at least two trials"));
    }
    let draws = par::map_trials(trials, |t| {
        let x = sampler(t);
        let e: f64 = x.iter().map(|v| v * v).sum();
        let fourths: Vec<f64> = x.iter().map(|v| v * v * v * v).collect();
        (e, fourths)
    });
    let n = draws[0].1.len();
    if draws.iter().any(|d| d.1.len() != n) {
        return Err(Error::domain("sampler returned vectors of different lengths"));
    }
    let nt = trials as f64;
    let mut per_coord = vec![0.0; n];
    let es: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let e2s: Vec<f64> = es.iter().map(|e| e * e).collect();
    let gs: Vec<f64> = draws
        .iter()
        .map(|d| {
            for (acc, v) in per_coord.iter_mut().zip(&d.1) {
                *acc += v;
            }
            d.1.iter().sum()
        })
        .collect();
    let (energy, energy_se) = mean_se(&es);
    let (energy_sq, energy_sq_se) = mean_se(&e2s);
    let (fourth, fourth_se) = mean_se(&gs);
    let fourth_bound = per_coord.iter().map(|v| v / nt).fold(0.0, f64::max);
    Ok(SignalStats {
        n,
        energy,
        energy_sq,
        fourth,
        power: energy / n as f64,
        fourth_bound,
        energy_se,
        energy_sq_se,
        fourth_se,
        trials,
    })
}

/// Sample mean and its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, math::sqrt(var / n))
}
