//! Sectional meshes over a truncated size domain `[x_min, x_max]`.
//!
//! Cell `i` spans `[boundaries[i], boundaries[i + 1]]` and its population is
//! represented at the midpoint pivot. Five mesh families are provided, plus a
//! midpoint bisection used to build nested refinement sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interior boundaries of a random grid are drawn from `(i + u) h`, `|u| <= JITTER`.
const RANDOM_JITTER: f64 = 0.45;
const RANDOM_ATTEMPTS: usize = 100_000;
const SEGMENT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Uniform,
    Geometric,
    LocallyUniform,
    Random,
    Oscillatory,
}

impl GridKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::Uniform => "uniform",
            GridKind::Geometric => "geometric",
            GridKind::LocallyUniform => "locally_uniform",
            GridKind::Random => "random",
            GridKind::Oscillatory => "oscillatory",
        }
    }
}

impl std::fmt::Display for GridKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One piece of a locally-uniform grid: a fraction of the domain length
/// covered by `cells` equal cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub fraction: f64,
    pub cells: usize,
}

impl Segment {
    pub fn new(fraction: f64, cells: usize) -> Self {
        Segment { fraction, cells }
    }
}

/// Immutable cell geometry of a 1D sectional mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    kind: GridKind,
    boundaries: Vec<f64>,
    pivots: Vec<f64>,
    widths: Vec<f64>,
    seed: Option<u64>,
    ratio: f64,
}

/// JSON form of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub kind: GridKind,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub boundaries: Vec<f64>,
}

fn check_domain(x_min: f64, x_max: f64, cells: usize) -> Result<()> {
    if !(x_min.is_finite() && x_max.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "non-finite domain [{x_min}, {x_max}]"
        )));
    }
    if x_min < 0.0 {
        return Err(Error::InvalidGrid(format!("x_min = {x_min} < 0")));
    }
    if x_max <= x_min {
        return Err(Error::InvalidGrid(format!(
            "inverted domain: x_max = {x_max} <= x_min = {x_min}"
        )));
    }
    if cells == 0 {
        return Err(Error::InvalidGrid("cell count must be positive".into()));
    }
    Ok(())
}

fn widths_ratio(widths: &[f64]) -> f64 {
    let max = widths.iter().cloned().fold(f64::MIN, f64::max);
    let min = widths.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

impl Grid {
    /// Builds a grid from an explicit boundary list (at least two entries,
    /// strictly increasing, nonnegative).
    pub fn from_boundaries(kind: GridKind, boundaries: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidGrid(
                "a grid needs at least two boundaries".into(),
            ));
        }
        check_domain(boundaries[0], boundaries[boundaries.len() - 1], 1)?;
        for (i, w) in boundaries.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidGrid(format!(
                    "boundaries not strictly increasing at index {}: {} >= {}",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        let pivots: Vec<f64> = boundaries.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths: Vec<f64> = boundaries.windows(2).map(|w| w[1] - w[0]).collect();
        let ratio = widths_ratio(&widths);
        Ok(Grid {
            kind,
            boundaries,
            pivots,
            widths,
            seed,
            ratio,
        })
    }

    pub fn from_record(record: &GridRecord) -> Result<Self> {
        let grid = Grid::from_boundaries(record.kind, record.boundaries.clone(), record.seed)?;
        if grid.x_min() != record.x_min || grid.x_max() != record.x_max {
            return Err(Error::InvalidGrid(
                "record domain does not match its boundary list".into(),
            ));
        }
        Ok(grid)
    }

    pub fn to_record(&self) -> GridRecord {
        GridRecord {
            kind: self.kind,
            x_min: self.x_min(),
            x_max: self.x_max(),
            seed: self.seed,
            boundaries: self.boundaries.clone(),
        }
    }

    /// Equal widths `(x_max - x_min) / cells`.
    pub fn uniform(x_min: f64, x_max: f64, cells: usize) -> Result<Self> {
        check_domain(x_min, x_max, cells)?;
        let len = x_max - x_min;
        let mut b: Vec<f64> = (0..=cells)
            .map(|i| x_min + len * (i as f64) / (cells as f64))
            .collect();
        b[cells] = x_max;
        Grid::from_boundaries(GridKind::Uniform, b, None)
    }

    /// `boundaries[i] = x_min * r^i` with `r = (x_max / x_min)^(1 / cells)`.
    pub fn geometric(x_min: f64, x_max: f64, cells: usize) -> Result<Self> {
        check_domain(x_min, x_max, cells)?;
        if x_min <= 0.0 {
            return Err(Error::InvalidGrid(
                "geometric grids need x_min > 0".into(),
            ));
        }
        let log_ratio = (x_max / x_min).ln() / cells as f64;
        let mut b: Vec<f64> = (0..=cells)
            .map(|i| x_min * (log_ratio * i as f64).exp())
            .collect();
        b[0] = x_min;
        b[cells] = x_max;
        Grid::from_boundaries(GridKind::Geometric, b, None)
    }

    /// Geometric grid for a requested ratio; the cell count is the nearest
    /// integer to `ln(x_max / x_min) / ln(r)` and the ratio is then re-derived
    /// so that the last boundary lands on `x_max`.
    pub fn geometric_with_ratio(x_min: f64, x_max: f64, ratio: f64) -> Result<Self> {
        if !(ratio > 1.0) {
            return Err(Error::InvalidGrid(format!(
                "geometric ratio must exceed 1, got {ratio}"
            )));
        }
        check_domain(x_min, x_max, 1)?;
        if x_min <= 0.0 {
            return Err(Error::InvalidGrid(
                "geometric grids need x_min > 0".into(),
            ));
        }
        let cells = ((x_max / x_min).ln() / ratio.ln()).round().max(1.0) as usize;
        Grid::geometric(x_min, x_max, cells)
    }

    /// Piecewise-uniform grid: each segment covers `fraction` of the domain with
    /// equal cells.
    pub fn locally_uniform(x_min: f64, x_max: f64, segments: &[Segment]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidGrid("no segments given".into()));
        }
        let total_cells: usize = segments.iter().map(|s| s.cells).sum();
        check_domain(x_min, x_max, total_cells)?;
        let mut sum = 0.0;
        for s in segments {
            if !(s.fraction > 0.0) || s.cells == 0 {
                return Err(Error::InvalidGrid(format!(
                    "segment needs a positive fraction and at least one cell, got {s:?}"
                )));
            }
            sum += s.fraction;
        }
        if (sum - 1.0).abs() > SEGMENT_SUM_TOL {
            return Err(Error::InvalidGrid(format!(
                "segment fractions sum to {sum}, expected 1"
            )));
        }
        let len = x_max - x_min;
        let mut b = Vec::with_capacity(total_cells + 1);
        let mut start_fraction = 0.0;
        b.push(x_min);
        for s in segments {
            let start = x_min + len * start_fraction;
            let seg_len = len * s.fraction;
            for c in 1..=s.cells {
                b.push(start + seg_len * (c as f64) / (s.cells as f64));
            }
            start_fraction += s.fraction;
        }
        *b.last_mut().unwrap() = x_max;
        Grid::from_boundaries(GridKind::LocallyUniform, b, None)
    }

    /// Seeded jitter of the uniform partition, redrawn until the width ratio
    /// satisfies `max / min <= max_ratio`.
    pub fn random(x_min: f64, x_max: f64, cells: usize, seed: u64, max_ratio: f64) -> Result<Self> {
        check_domain(x_min, x_max, cells)?;
        if !(max_ratio >= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "max_ratio must be >= 1, got {max_ratio}"
            )));
        }
        if cells == 1 {
            let mut grid = Grid::from_boundaries(GridKind::Random, vec![x_min, x_max], Some(seed))?;
            grid.ratio = 1.0;
            return Ok(grid);
        }
        let h = (x_max - x_min) / cells as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = vec![0.0; cells + 1];
        for _ in 0..RANDOM_ATTEMPTS {
            b[0] = x_min;
            b[cells] = x_max;
            for (i, slot) in b.iter_mut().enumerate().take(cells).skip(1) {
                let u: f64 = rng.gen_range(-RANDOM_JITTER..=RANDOM_JITTER);
                *slot = x_min + h * (i as f64 + u);
            }
            let widths: Vec<f64> = b.windows(2).map(|w| w[1] - w[0]).collect();
            if widths.iter().all(|&w| w > 0.0) && widths_ratio(&widths) <= max_ratio {
                return Grid::from_boundaries(GridKind::Random, b, Some(seed));
            }
        }
        Err(Error::ResamplingExhausted {
            max_ratio,
            attempts: RANDOM_ATTEMPTS,
        })
    }

    /// Widths alternating `1, 2, 1, 2, ...` scaled to span the domain.
    pub fn oscillatory(x_min: f64, x_max: f64, cells: usize) -> Result<Self> {
        check_domain(x_min, x_max, cells)?;
        // 1-based recurrence: w_{i+1} = w_i / 2 for even i, 2 w_i for odd i.
        let mut raw = Vec::with_capacity(cells);
        let mut w = 1.0;
        raw.push(w);
        for i in 1..cells {
            w = if i % 2 == 0 { 0.5 * w } else { 2.0 * w };
            raw.push(w);
        }
        let total: f64 = raw.iter().sum();
        let scale = (x_max - x_min) / total;
        let mut b = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        b.push(x_min);
        for w in &raw {
            acc += w;
            b.push(x_min + scale * acc);
        }
        b[cells] = x_max;
        Grid::from_boundaries(GridKind::Oscillatory, b, None)
    }

    /// Splits every cell at its pivot.
    pub fn bisect(&self) -> Grid {
        self.subdivide(2)
    }

    /// Splits every cell into `parts` equal sub-cells. With an odd part count
    /// the middle sub-cell keeps the parent's pivot.
    pub fn subdivide(&self, parts: usize) -> Grid {
        assert!(parts >= 1, "subdivision needs at least one part");
        let mut b = Vec::with_capacity(self.cells() * parts + 1);
        for w in self.boundaries.windows(2) {
            b.push(w[0]);
            if parts == 2 {
                b.push(0.5 * (w[0] + w[1]));
            } else {
                for p in 1..parts {
                    b.push(w[0] + (w[1] - w[0]) * (p as f64) / (parts as f64));
                }
            }
        }
        b.push(self.x_max());
        Grid::from_boundaries(self.kind, b, self.seed)
            .expect("subdividing a valid grid yields a valid grid")
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn cells(&self) -> usize {
        self.pivots.len()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn x_min(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn x_max(&self) -> f64 {
        self.boundaries[self.boundaries.len() - 1]
    }

    /// Left edge of cell `i`.
    pub fn lower(&self, i: usize) -> f64 {
        self.boundaries[i]
    }

    /// Right edge of cell `i`.
    pub fn upper(&self, i: usize) -> f64 {
        self.boundaries[i + 1]
    }

    /// `max(widths) / min(widths)`.
    pub fn width_ratio(&self) -> f64 {
        self.ratio
    }

    /// Index of the cell containing `x` (right-closed on the last cell).
    pub fn locate(&self, x: f64) -> Option<usize> {
        if x < self.x_min() || x > self.x_max() {
            return None;
        }
        let idx = self.boundaries.partition_point(|&b| b <= x);
        Some(idx.saturating_sub(1).min(self.cells() - 1))
    }

    /// True when every boundary of `coarse` is also a boundary of `self`.
    pub fn refines(&self, coarse: &Grid) -> bool {
        let mut k = 0;
        for &b in coarse.boundaries() {
            while k < self.boundaries.len() && self.boundaries[k] < b {
                k += 1;
            }
            if k == self.boundaries.len() || self.boundaries[k] != b {
                return false;
            }
        }
        true
    }

    /// Two-column CSV `index,boundary`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,boundary\n");
        for (i, b) in self.boundaries.iter().enumerate() {
            out.push_str(&format!("{i},{b:.16e}\n"));
        }
        out
    }
}
