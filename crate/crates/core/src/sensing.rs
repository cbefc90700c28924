//! Encoding matrices for every user class and the encoding step itself.
//!
//! `A0` is a Bernoulli ±1 matrix filled row-major from the frame stream of
//! `Key(A0)`. Class `u` flips the signs of `A0` on the disjoint position
//! sets `C0 .. C(u-1)`, each drawn from the frame stream of its own key.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::keystream::{BitStream, KeyChain, Seed};
use crate::math;
use crate::numerics::{DenseMatrix, LinearOperator};

/// Largest supported `m * n`.
pub const MAX_ENTRIES: usize = 1 << 26;

/// Dense ±1 encoding matrix of a given class and frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
    class_level: usize,
    frame_index: u64,
}

impl EncodingMatrix {
    /// Wraps row-major ±1 entries.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: Vec<i8>,
        class_level: usize,
        frame_index: u64,
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                found: (entries.len(), 1),
            });
        }
        if entries.iter().any(|&e| e != 1 && e != -1) {
            return Err(Error::domain("encoding matrix entries must be +1 or -1"));
        }
        Ok(EncodingMatrix {
            rows,
            cols,
            entries,
            class_level,
            frame_index,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn class_level(&self) -> usize {
        self.class_level
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) as f64)
    }

    /// `self * d`, e.g. the effective dictionary `A D`.
    pub fn mul_dense(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        if d.nrows() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: (self.cols, d.ncols()),
                found: d.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, d.ncols());
        for i in 0..self.rows {
            let dst = out.row_mut(i);
            for (k, &s) in self.row(i).iter().enumerate() {
                math::axpy(s as f64, d.row(k), dst);
            }
        }
        Ok(out)
    }

    fn flipped(&self, flips: &FlipSet, class_level: usize) -> EncodingMatrix {
        let mut entries = self.entries.clone();
        for &idx in &flips.indices {
            entries[idx] = -entries[idx];
        }
        EncodingMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
            class_level,
            frame_index: self.frame_index,
        }
    }
}

impl LinearOperator for EncodingMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .row(i)
                .iter()
                .zip(x)
                .map(|(&s, &v)| s as f64 * v)
                .sum();
        }
    }
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (o, &s) in out.iter_mut().zip(self.row(i)) {
                *o += s as f64 * yi;
            }
        }
    }
}

/// Positions whose sign is flipped at one class level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipSet {
    level: usize,
    rows: usize,
    cols: usize,
    /// Sorted row-major linear indices.
    indices: Vec<usize>,
}

impl FlipSet {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cardinality(&self) -> usize {
        self.indices.len()
    }

    /// `c_u / (m n)`
    pub fn density(&self) -> f64 {
        self.indices.len() as f64 / (self.rows * self.cols) as f64
    }

    pub fn linear_indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.iter().map(move |&i| (i / self.cols, i % self.cols))
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.indices.binary_search(&(row * self.cols + col)).is_ok()
    }
}

/// Draw `count` distinct positions of an `m x n` grid, uniformly without
/// replacement, skipping positions already set in `taken` (which is updated).
///
/// Each candidate is `draw_index(m n)`; duplicates and taken positions are
/// rejected. Returned in draw order.
pub fn sample_positions(
    stream: &mut BitStream,
    total: usize,
    count: usize,
    taken: &mut [bool],
) -> Result<Vec<usize>> {
    debug_assert_eq!(taken.len(), total);
    let free = taken.iter().filter(|&&t| !t).count();
    if count > free {
        return Err(Error::domain(alloc::format!(
            "cannot place {count} flips in {free} free positions"
        )));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let idx = stream.draw_index(total as u64)? as usize;
        if !taken[idx] {
            taken[idx] = true;
            out.push(idx);
        }
    }
    Ok(out)
}

/// Flip set of level `level`: `count` positions drawn from `flip_seed`'s
/// stream, disjoint from every set in `forbidden`.
pub fn gen_flipset(
    flip_seed: Seed,
    level: usize,
    rows: usize,
    cols: usize,
    count: usize,
    forbidden: &[FlipSet],
) -> Result<FlipSet> {
    let total = rows * cols;
    let mut taken = vec![false; total];
    for f in forbidden {
        if (f.rows, f.cols) != (rows, cols) {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                found: (f.rows, f.cols),
            });
        }
        for &i in &f.indices {
            taken[i] = true;
        }
    }
    let mut stream = BitStream::new(flip_seed);
    let mut indices = sample_positions(&mut stream, total, count, &mut taken)?;
    indices.sort_unstable();
    Ok(FlipSet {
        level,
        rows,
        cols,
        indices,
    })
}

/// Dimensions and per-level flip densities `eta_0 .. eta_(w-2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingConfig {
    pub rows: usize,
    pub cols: usize,
    pub flip_densities: Vec<f64>,
}

impl SensingConfig {
    pub fn new(rows: usize, cols: usize, flip_densities: Vec<f64>) -> Result<Self> {
        let cfg = SensingConfig {
            rows,
            cols,
            flip_densities,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::domain("matrix dimensions must be positive"));
        }
        if self.rows.saturating_mul(self.cols) > MAX_ENTRIES {
            return Err(Error::domain("m * n exceeds 2^26"));
        }
        for (u, &eta) in self.flip_densities.iter().enumerate() {
            if !(0.0..=0.5).contains(&eta) {
                return Err(Error::domain(alloc::format!(
                    "flip density of level {u} must lie in [0, 1/2], got {eta}"
                )));
            }
        }
        let total: usize = (0..self.flip_densities.len()).map(|u| self.flip_count(u)).sum();
        if total > self.rows * self.cols {
            return Err(Error::domain("flip sets of all levels do not fit in the matrix"));
        }
        Ok(())
    }

    /// `c_u = round(eta_u m n)`, halves rounded away from zero.
    pub fn flip_count(&self, level: usize) -> usize {
        libm::round(self.flip_densities[level] * (self.rows * self.cols) as f64) as usize
    }
}

/// `A0` of one frame together with the flip sets of the levels a key can see.
#[derive(Debug, Clone)]
pub struct MatrixChain {
    base: EncodingMatrix,
    flips: Vec<FlipSet>,
}

impl MatrixChain {
    /// Build `A0` and flip sets `C0 .. C(levels-1)` for `frame_index`.
    pub fn generate(
        keys: &KeyChain,
        cfg: &SensingConfig,
        levels: usize,
        frame_index: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if levels > keys.flip_seeds().len() {
            return Err(Error::KeyDeficit {
                requested: levels,
                available: keys.flip_seeds().len(),
            });
        }
        if levels > cfg.flip_densities.len() {
            return Err(Error::domain(alloc::format!(
                "class {levels} requested but only {} flip densities configured",
                cfg.flip_densities.len()
            )));
        }
        let (m, n) = (cfg.rows, cfg.cols);
        let mut entries = vec![0i8; m * n];
        BitStream::new(keys.matrix_seed().for_frame(frame_index)).fill_signs(&mut entries);
        let base = EncodingMatrix {
            rows: m,
            cols: n,
            entries,
            class_level: 0,
            frame_index,
        };
        let mut flips: Vec<FlipSet> = Vec::with_capacity(levels);
        for v in 0..levels {
            let seed = keys.flip_seeds()[v].for_frame(frame_index);
            let set = gen_flipset(seed, v, m, n, cfg.flip_count(v), &flips)?;
            flips.push(set);
        }
        Ok(MatrixChain { base, flips })
    }

    /// `A0`.
    pub fn base(&self) -> &EncodingMatrix {
        &self.base
    }

    pub fn flips(&self) -> &[FlipSet] {
        &self.flips
    }

    /// Highest class available from this chain.
    pub fn top_class(&self) -> usize {
        self.flips.len()
    }

    /// `A(u)` for `u <= top_class()`.
    pub fn class_matrix(&self, u: usize) -> Result<EncodingMatrix> {
        if u > self.flips.len() {
            return Err(Error::KeyDeficit {
                requested: u,
                available: self.flips.len(),
            });
        }
        let mut a = self.base.clone();
        for (v, set) in self.flips[..u].iter().enumerate() {
            a = a.flipped(set, v + 1);
        }
        Ok(a)
    }
}

/// Class-`u` encoding matrix of a frame.
pub fn gen_matrix(
    keys: &KeyChain,
    cfg: &SensingConfig,
    u: usize,
    frame_index: u64,
) -> Result<EncodingMatrix> {
    MatrixChain::generate(keys, cfg, u, frame_index)?.class_matrix(u)
}

/// Sparse matrix with entries in `{-2, 0, +2}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationMatrix {
    rows: usize,
    cols: usize,
    /// `(row-major index, value)`, sorted by index, values `±2`.
    entries: Vec<(usize, i8)>,
}

impl PerturbationMatrix {
    /// From `(linear index, ±2)` pairs; the indices must be distinct.
    pub fn from_entries(rows: usize, cols: usize, mut entries: Vec<(usize, i8)>) -> Result<Self> {
        entries.sort_unstable_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("duplicate perturbation position"));
        }
        if entries
            .iter()
            .any(|&(i, v)| i >= rows * cols || (v != 2 && v != -2))
        {
            return Err(Error::domain("perturbation entries must be ±2 inside the matrix"));
        }
        Ok(PerturbationMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        PerturbationMatrix {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    /// `hi - lo` for two encoding matrices of the same frame.
    pub fn difference(hi: &EncodingMatrix, lo: &EncodingMatrix) -> Result<Self> {
        if (hi.rows, hi.cols) != (lo.rows, lo.cols) {
            return Err(Error::ShapeMismatch {
                expected: (lo.rows, lo.cols),
                found: (hi.rows, hi.cols),
            });
        }
        let entries = hi
            .entries
            .iter()
            .zip(&lo.entries)
            .enumerate()
            .filter(|(_, (h, l))| h != l)
            .map(|(i, (h, l))| (i, h - l))
            .collect();
        Ok(PerturbationMatrix {
            rows: hi.rows,
            cols: hi.cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, i8)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        let idx = row * self.cols + col;
        match self.entries.binary_search_by_key(&idx, |e| e.0) {
            Ok(p) => self.entries[p].1,
            Err(_) => 0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for &(i, v) in &self.entries {
            d.as_mut_slice()[i] = v as f64;
        }
        d
    }

    /// `self * d` for a dense right factor.
    pub fn mul_dense(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        if d.nrows() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: (self.cols, d.ncols()),
                found: d.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, d.ncols());
        for &(i, v) in &self.entries {
            let (r, c) = (i / self.cols, i % self.cols);
            math::axpy(v as f64, d.row(c), out.row_mut(r));
        }
        Ok(out)
    }
}

impl LinearOperator for PerturbationMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, v) in &self.entries {
            out[i / self.cols] += v as f64 * x[i % self.cols];
        }
    }
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, v) in &self.entries {
            out[i % self.cols] += v as f64 * y[i / self.cols];
        }
    }
}

/// `dA = A1 - A0`: `-2 A0` on the flip positions, zero elsewhere.
pub fn perturbation_of(a0: &EncodingMatrix, flips: &FlipSet) -> Result<PerturbationMatrix> {
    if (a0.rows, a0.cols) != (flips.rows, flips.cols) {
        return Err(Error::ShapeMismatch {
            expected: (a0.rows, a0.cols),
            found: (flips.rows, flips.cols),
        });
    }
    let entries = flips
        .indices
        .iter()
        .map(|&i| (i, -2 * a0.entries[i]))
        .collect();
    Ok(PerturbationMatrix {
        rows: a0.rows,
        cols: a0.cols,
        entries,
    })
}

/// One ciphertext.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub y: Vec<f64>,
    pub frame_index: u64,
    /// `true` when `y` carries the `1/sqrt(n)` normalization.
    pub scaled: bool,
}

/// `y = A x`, times `1/sqrt(n)` when `scaled`.
pub fn encode(a: &EncodingMatrix, x: &[f64], scaled: bool) -> Result<MeasurementFrame> {
    if x.len() != a.cols {
        return Err(Error::ShapeMismatch {
            expected: (a.cols, 1),
            found: (x.len(), 1),
        });
    }
    if !math::all_finite(x) {
        return Err(Error::NonFinite("plaintext"));
    }
    let mut y = vec![0.0; a.rows];
    a.apply(x, &mut y);
    if scaled {
        let s = 1.0 / math::sqrt(a.cols as f64);
        y.iter_mut().for_each(|v| *v *= s);
    }
    Ok(MeasurementFrame {
        y,
        frame_index: a.frame_index,
        scaled,
    })
}
