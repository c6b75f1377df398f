//! Multi-resolution feature-grid encodings with hashing and d-linear
//! interpolation.
//!
//! An encoding maps a normalized point in `[0,1]^D` to the concatenation of
//! the raw coordinates and, per resolution level, the d-linear interpolation
//! of learnable corner features. Coarse levels store their lattice densely
//! (one table row per vertex); fine levels fold the lattice into a fixed-size
//! table with an XOR-of-primes hash. Gradients are hand-derived with respect
//! to both the stored features and the query coordinates.

use crate::real::Real;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest supported query dimensionality (2D canonical, 3D deformation).
pub const MAX_DIMS: usize = 3;
/// Corner count upper bound, `2^MAX_DIMS`.
const MAX_CORNERS: usize = 1 << MAX_DIMS;

/// Default hash multipliers. The first is 1 so that the x axis contributes
/// its coordinate directly; the others are large primes.
pub const DEFAULT_PRIMES: [u64; 3] = [1, 2_654_435_761, 805_459_861];

/// Geometry and capacity of one multi-level encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// Query dimensionality (2 or 3).
    pub dims: usize,
    /// Number of resolution levels.
    pub levels: usize,
    /// Feature entries stored per level table row.
    pub features_per_level: usize,
    /// Table rows per level (power of two). Levels whose full lattice fits
    /// are stored densely instead.
    pub table_size: usize,
    /// Coarsest resolution in cells per unit.
    pub n_min: u32,
    /// Finest resolution in cells per unit.
    pub n_max: u32,
    /// Per-axis hash multipliers.
    pub primes: [u64; 3],
}

impl EncodingConfig {
    /// Canonical-field default: a 2D encoding fine enough for kilopixel
    /// frames at desk-scale memory.
    pub fn canonical_2d() -> Self {
        Self {
            dims: 2,
            levels: 16,
            features_per_level: 2,
            table_size: 1 << 19,
            n_min: 16,
            n_max: 1024,
            primes: DEFAULT_PRIMES,
        }
    }

    /// Deformation-field default: a 3D encoding over `(x, y, t)` with time
    /// normalized to `[0,1]` like space.
    pub fn deformation_3d() -> Self {
        Self {
            dims: 3,
            levels: 16,
            features_per_level: 2,
            table_size: 1 << 19,
            n_min: 8,
            n_max: 256,
            primes: DEFAULT_PRIMES,
        }
    }

    /// Reduced-size variants used by the runnable examples and fast tests.
    pub fn compact_2d() -> Self {
        Self {
            levels: 8,
            table_size: 1 << 15,
            n_min: 16,
            n_max: 256,
            ..Self::canonical_2d()
        }
    }

    pub fn compact_3d() -> Self {
        Self {
            levels: 8,
            table_size: 1 << 15,
            n_min: 8,
            n_max: 128,
            ..Self::deformation_3d()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims < 1 || self.dims > MAX_DIMS {
            return Err(Error::Config(format!("dims must be in 1..=3, got {}", self.dims)));
        }
        if self.levels < 1 {
            return Err(Error::Config("levels must be >= 1".into()));
        }
        if self.features_per_level < 1 {
            return Err(Error::Config("features_per_level must be >= 1".into()));
        }
        if !self.table_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "table_size must be a power of two, got {}",
                self.table_size
            )));
        }
        if self.n_min == 0 {
            return Err(Error::Config("n_min must be positive".into()));
        }
        if self.levels >= 2 && self.n_max <= self.n_min {
            return Err(Error::Config(format!(
                "n_max ({}) must exceed n_min ({}) when levels >= 2",
                self.n_max, self.n_min
            )));
        }
        Ok(())
    }

    /// Per-level growth factor `b`, derived from the resolution endpoints.
    pub fn growth_factor(&self) -> f64 {
        if self.levels < 2 {
            return 1.0;
        }
        ((self.n_max as f64 / self.n_min as f64).ln() / (self.levels as f64 - 1.0)).exp()
    }

    /// Resolution of level `l` in cells per unit: `floor(n_min * b^l)`.
    ///
    /// Evaluated as `n_min * (n_max/n_min)^(l/(L-1))`, which is exact at both
    /// endpoints, so `N_0 = n_min` and `N_{L-1} = n_max` hold without the
    /// floor eating one cell to rounding.
    pub fn level_resolution(&self, level: usize) -> u32 {
        debug_assert!(level < self.levels);
        if self.levels < 2 {
            return self.n_min;
        }
        let ratio = self.n_max as f64 / self.n_min as f64;
        let exponent = level as f64 / (self.levels as f64 - 1.0);
        (self.n_min as f64 * ratio.powf(exponent)).floor() as u32
    }

    /// Whether level `l` stores its full lattice (a 1:1 vertex-to-row map).
    pub fn is_dense(&self, level: usize) -> bool {
        let side = self.level_resolution(level) as u128 + 1;
        let mut cells: u128 = 1;
        for _ in 0..self.dims {
            cells = cells.saturating_mul(side);
        }
        cells <= self.table_size as u128
    }

    /// Number of table rows actually allocated for level `l`.
    pub fn level_rows(&self, level: usize) -> usize {
        if self.is_dense(level) {
            let side = self.level_resolution(level) as usize + 1;
            side.pow(self.dims as u32)
        } else {
            self.table_size
        }
    }

    /// Length of the encoded feature vector: `dims + F * L`.
    pub fn output_dim(&self) -> usize {
        self.dims + self.features_per_level * self.levels
    }

    /// Total stored feature values across all levels.
    pub fn param_count(&self) -> usize {
        (0..self.levels)
            .map(|l| self.level_rows(l) * self.features_per_level)
            .sum()
    }
}

/// Table row index for an integer lattice corner at a given level.
///
/// Dense levels use the direct row-major index (x fastest); hashed levels
/// XOR the prime-multiplied coordinates and mask to the table size.
pub fn table_index(config: &EncodingConfig, level: usize, corner: &[u32]) -> usize {
    debug_assert_eq!(corner.len(), config.dims);
    if config.is_dense(level) {
        let side = config.level_resolution(level) as usize + 1;
        let mut idx = 0usize;
        for &c in corner.iter().rev() {
            idx = idx * side + c as usize;
        }
        idx
    } else {
        let mut h: u64 = 0;
        for (i, &c) in corner.iter().enumerate() {
            h ^= (c as u64).wrapping_mul(config.primes[i]);
        }
        (h & (config.table_size as u64 - 1)) as usize
    }
}

/// Lower lattice corner and per-axis fractions for a normalized query.
///
/// A query exactly at the upper boundary uses the last cell with fraction
/// 1.0 on that axis, so corners never leave the `[0, N]` lattice.
pub fn corner_coords<T: Real, const D: usize>(x: &[T; D], resolution: u32) -> ([u32; D], [T; D]) {
    let mut lower = [0u32; D];
    let mut frac = [T::zero(); D];
    let n = T::real(resolution as f64);
    for a in 0..D {
        let scaled = x[a] * n;
        let mut cell = scaled.floor();
        let last = T::real(resolution as f64 - 1.0);
        if cell > last {
            cell = last;
        }
        if cell < T::zero() {
            cell = T::zero();
        }
        lower[a] = cell.to_f64() as u32;
        frac[a] = scaled - cell;
    }
    (lower, frac)
}

/// Interpolation weights for the `2^D` cell corners, in corner-bit order
/// (bit `a` set selects the upper corner on axis `a`). Weights sum to 1.
pub fn corner_weights<T: Real, const D: usize>(frac: &[T; D]) -> [T; MAX_CORNERS] {
    let mut w = [T::zero(); MAX_CORNERS];
    for (c, slot) in w.iter_mut().enumerate().take(1 << D) {
        let mut prod = T::one();
        for (a, &f) in frac.iter().enumerate() {
            prod = prod * if c >> a & 1 == 1 { f } else { T::one() - f };
        }
        *slot = prod;
    }
    w
}

/// Learnable feature tables for one encoding, with gradient accumulators of
/// identical shape.
#[derive(Debug, Clone)]
pub struct FeatureGrid<T: Real, const D: usize> {
    pub config: EncodingConfig,
    /// Per level, `level_rows(l) * F` values.
    pub tables: Vec<Vec<T>>,
    /// Gradient accumulators matching `tables`.
    pub grads: Vec<Vec<T>>,
    resolutions: Vec<u32>,
    dense: Vec<bool>,
    sides: Vec<usize>,
    hash_mask: u64,
}

impl<T: Real, const D: usize> FeatureGrid<T, D> {
    /// Allocate a grid with features drawn uniformly from `[-1e-4, 1e-4]`.
    pub fn new(config: EncodingConfig, rng: &mut impl Rng) -> Result<Self> {
        let mut grid = Self::zeros(config)?;
        for table in &mut grid.tables {
            for v in table.iter_mut() {
                *v = T::real(rng.random_range(-1e-4..=1e-4));
            }
        }
        Ok(grid)
    }

    /// Allocate a grid with all features zero.
    pub fn zeros(config: EncodingConfig) -> Result<Self> {
        config.validate()?;
        if config.dims != D {
            return Err(Error::Config(format!(
                "encoding config has dims={}, grid is {}-dimensional",
                config.dims, D
            )));
        }
        let tables: Vec<Vec<T>> = (0..config.levels)
            .map(|l| vec![T::zero(); config.level_rows(l) * config.features_per_level])
            .collect();
        let grads = tables.clone();
        let resolutions = (0..config.levels).map(|l| config.level_resolution(l)).collect();
        let dense = (0..config.levels).map(|l| config.is_dense(l)).collect();
        let sides = (0..config.levels)
            .map(|l| config.level_resolution(l) as usize + 1)
            .collect();
        let hash_mask = config.table_size as u64 - 1;
        Ok(Self {
            config,
            tables,
            grads,
            resolutions,
            dense,
            sides,
            hash_mask,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(T::zero());
        }
    }

    #[inline(always)]
    fn row_of(&self, level: usize, corner: &[u32; D]) -> usize {
        if self.dense[level] {
            let side = self.sides[level];
            let mut idx = 0usize;
            for &c in corner.iter().rev() {
                idx = idx * side + c as usize;
            }
            idx
        } else {
            let mut h: u64 = 0;
            for a in 0..D {
                h ^= (corner[a] as u64).wrapping_mul(self.config.primes[a]);
            }
            (h & self.hash_mask) as usize
        }
    }

    /// Row indices of the `2^D` corners of the cell containing `lower`.
    #[inline(always)]
    fn cell_rows(&self, level: usize, lower: &[u32; D]) -> [usize; MAX_CORNERS] {
        let mut rows = [0usize; MAX_CORNERS];
        let mut corner = [0u32; D];
        for (c, row) in rows.iter_mut().enumerate().take(1 << D) {
            for a in 0..D {
                corner[a] = lower[a] + (c >> a & 1) as u32;
            }
            *row = self.row_of(level, &corner);
        }
        rows
    }

    /// Encode a normalized point: raw coordinates followed by, per level, the
    /// anneal-weighted d-linear interpolation of its corner features.
    ///
    /// `out` must have length `output_dim()`; `level_weights` length `L`.
    pub fn encode_into(&self, x: &[T; D], level_weights: &[T], out: &mut [T]) {
        let f_per = self.config.features_per_level;
        debug_assert_eq!(out.len(), self.output_dim());
        debug_assert_eq!(level_weights.len(), self.config.levels);
        out[..D].copy_from_slice(x);
        for (l, &w_level) in level_weights.iter().enumerate() {
            let base = D + l * f_per;
            let slot = &mut out[base..base + f_per];
            if w_level == T::zero() {
                slot.fill(T::zero());
                continue;
            }
            let (lower, frac) = corner_coords(x, self.resolutions[l]);
            let weights = corner_weights::<T, D>(&frac);
            let rows = self.cell_rows(l, &lower);
            let table = &self.tables[l];
            slot.fill(T::zero());
            for c in 0..1 << D {
                let w = weights[c];
                let row = &table[rows[c] * f_per..rows[c] * f_per + f_per];
                for (s, &v) in slot.iter_mut().zip(row) {
                    *s += w * v;
                }
            }
            for s in slot.iter_mut() {
                *s *= w_level;
            }
        }
    }

    /// Convenience allocating wrapper around [`encode_into`].
    ///
    /// [`encode_into`]: FeatureGrid::encode_into
    pub fn encode(&self, x: &[T; D], level_weights: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.output_dim()];
        self.encode_into(x, level_weights, &mut out);
        out
    }

    /// Backward pass of [`encode_into`]: scatters feature gradients through
    /// `emit(level, row, values)` and returns the gradient with respect to
    /// the query coordinates (the d-linear subgradient, piecewise constant
    /// per cell).
    ///
    /// [`encode_into`]: FeatureGrid::encode_into
    pub fn encode_backward_emit(
        &self,
        x: &[T; D],
        level_weights: &[T],
        upstream: &[T],
        mut emit: impl FnMut(usize, usize, &[T]),
    ) -> [T; D] {
        let f_per = self.config.features_per_level;
        debug_assert_eq!(upstream.len(), self.output_dim());
        let mut coord_grad = [T::zero(); D];
        coord_grad.copy_from_slice(&upstream[..D]);
        let mut scratch = [T::zero(); 8];
        let feat_grad = &mut scratch[..f_per.min(8)];
        let mut heap_feat;
        let feat_grad: &mut [T] = if f_per <= 8 {
            feat_grad
        } else {
            heap_feat = vec![T::zero(); f_per];
            &mut heap_feat
        };
        for (l, &w_level) in level_weights.iter().enumerate() {
            if w_level == T::zero() {
                continue;
            }
            let up = &upstream[D + l * f_per..D + (l + 1) * f_per];
            let (lower, frac) = corner_coords(x, self.resolutions[l]);
            let weights = corner_weights::<T, D>(&frac);
            let rows = self.cell_rows(l, &lower);
            let table = &self.tables[l];
            let n_scale = T::real(self.resolutions[l] as f64);
            for c in 0..1 << D {
                let w = weights[c];
                for (g, &u) in feat_grad.iter_mut().zip(up) {
                    *g = w_level * w * u;
                }
                emit(l, rows[c], feat_grad);
                // coordinate gradient: d(weight_c)/dx_a times corner feature
                // dotted with the upstream, accumulated per axis.
                let row = &table[rows[c] * f_per..rows[c] * f_per + f_per];
                let mut dot = T::zero();
                for (&v, &u) in row.iter().zip(up) {
                    dot += v * u;
                }
                for a in 0..D {
                    let mut dw = T::one();
                    for (b, &f) in frac.iter().enumerate() {
                        if b == a {
                            continue;
                        }
                        dw = dw * if c >> b & 1 == 1 { f } else { T::one() - f };
                    }
                    let signed = if c >> a & 1 == 1 { dw } else { -dw };
                    coord_grad[a] += w_level * n_scale * signed * dot;
                }
            }
        }
        coord_grad
    }

    /// Backward pass accumulating feature gradients into the grid's own
    /// accumulators. Returns the coordinate gradient. Same math path as the
    /// emit-based routine the trainer uses.
    pub fn encode_backward(&mut self, x: &[T; D], level_weights: &[T], upstream: &[T]) -> [T; D] {
        let mut sparse = SparseGridGrads::new(self.config.features_per_level);
        let coord = self.encode_backward_emit(x, level_weights, upstream, |l, row, vals| {
            sparse.push(l, row, vals);
        });
        self.apply_sparse(&sparse);
        coord
    }

    /// Add a sparse gradient batch (fixed order) into the accumulators.
    pub fn apply_sparse(&mut self, sparse: &SparseGridGrads<T>) {
        let f_per = self.config.features_per_level;
        debug_assert_eq!(sparse.features_per_level, f_per);
        for (i, &(level, row)) in sparse.entries.iter().enumerate() {
            let vals = &sparse.values[i * f_per..(i + 1) * f_per];
            let dst =
                &mut self.grads[level as usize][row as usize * f_per..(row as usize + 1) * f_per];
            for (d, &v) in dst.iter_mut().zip(vals) {
                *d += v;
            }
        }
    }
}

/// Gradient contributions recorded by one worker chunk, merged into the
/// dense accumulators in a fixed order for bitwise-reproducible training.
#[derive(Debug, Clone)]
pub struct SparseGridGrads<T> {
    pub entries: Vec<(u32, u32)>,
    pub values: Vec<T>,
    features_per_level: usize,
}

impl<T: Real> SparseGridGrads<T> {
    pub fn new(features_per_level: usize) -> Self {
        Self {
            entries: Vec::new(),
            values: Vec::new(),
            features_per_level,
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.values.clear();
    }

    #[inline(always)]
    pub fn push(&mut self, level: usize, row: usize, vals: &[T]) {
        debug_assert_eq!(vals.len(), self.features_per_level);
        self.entries.push((level as u32, row as u32));
        self.values.extend_from_slice(vals);
    }
}

/// Coarse-to-fine gating state for the encoding levels.
///
/// Levels below `base_levels` are always fully on. From `n_beg` the remaining
/// levels fade in over `n_step` steps, one after another, each following a
/// raised-cosine ramp; all weights are 1 once `k >= n_beg + n_step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealState {
    pub n_beg: usize,
    pub n_step: usize,
    pub base_levels: usize,
    pub step: usize,
}

impl AnnealState {
    pub fn new(n_beg: usize, n_step: usize, base_levels: usize) -> Self {
        Self {
            n_beg,
            n_step,
            base_levels,
            step: 0,
        }
    }

    pub fn at_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }
}

/// Per-level gating weights for the current step, each in `[0, 1]` and
/// nondecreasing in the step for a fixed level.
pub fn anneal_weights<T: Real>(state: &AnnealState, levels: usize) -> Vec<T> {
    let base = state.base_levels.min(levels);
    let annealed = (levels - base) as f64;
    let progress = if state.step <= state.n_beg {
        0.0
    } else if state.n_step == 0 {
        1.0
    } else {
        (((state.step - state.n_beg) as f64) / state.n_step as f64).min(1.0)
    };
    let alpha = annealed * progress;
    (0..levels)
        .map(|l| {
            if l < base {
                return T::one();
            }
            let t = alpha - (l - base) as f64;
            if t <= 0.0 {
                T::zero()
            } else if t >= 1.0 {
                T::one()
            } else {
                T::real((1.0 - (std::f64::consts::PI * t).cos()) / 2.0)
            }
        })
        .collect()
}
