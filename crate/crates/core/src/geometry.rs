//! Axis-aligned boxes and uniform grids.
//!
//! Boxes are closed hyper-intervals `[lo, hi]`. The empty box is an ordinary
//! value (`lo = +inf`, `hi = -inf` on every axis) so that erosion can collapse
//! a set without an error and the caller decides whether that is fatal.
//!
//! Grid cells are aligned to the lower corner of the grid domain: cell `k` on
//! axis `i` covers `[lo_i + k*eta_i, lo_i + (k+1)*eta_i]`. Intersection and
//! containment tests treat cells as closed boxes, while [`GridSpec::quantize`]
//! bins half-open so that every point lands in exactly one cell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate {value} on axis {axis}")]
    NonFinite { axis: usize, value: f64 },
    #[error("quantization parameter must be positive on every axis, got {0:?}")]
    BadEta(Vec<f64>),
    #[error("grid domain must be a non-empty box")]
    EmptyDomain,
    #[error("cell id is an overflow cell")]
    Overflow,
}

fn check_dim(expected: usize, got: usize) -> Result<(), GeometryError> {
    if expected != got {
        return Err(GeometryError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// A closed axis-aligned box, possibly empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl IntervalBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        check_dim(lo.len(), hi.len())?;
        let b = IntervalBox { lo, hi };
        if b.lo.iter().zip(&b.hi).any(|(l, h)| l > h) {
            return Ok(IntervalBox::empty(b.dim()));
        }
        Ok(b)
    }

    /// Builds a box from per-axis `[lo, hi]` pairs.
    pub fn from_bounds(bounds: &[[f64; 2]]) -> Result<Self, GeometryError> {
        Self::new(
            bounds.iter().map(|b| b[0]).collect(),
            bounds.iter().map(|b| b[1]).collect(),
        )
    }

    pub fn empty(dim: usize) -> Self {
        IntervalBox {
            lo: vec![f64::INFINITY; dim],
            hi: vec![f64::NEG_INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn bounds(&self) -> Vec<[f64; 2]> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| [l, h])
            .collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        !self.is_empty()
            && p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    /// Closed containment: `self ⊆ other`. The empty box is a subset of anything.
    pub fn is_subset_of(&self, other: &IntervalBox) -> bool {
        if self.is_empty() {
            return true;
        }
        if other.is_empty() {
            return false;
        }
        (0..self.dim()).all(|i| other.lo[i] <= self.lo[i] && self.hi[i] <= other.hi[i])
    }

    /// Closed intersection test (touching boxes intersect).
    pub fn intersects(&self, other: &IntervalBox) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        (0..self.dim()).all(|i| self.lo[i] <= other.hi[i] && other.lo[i] <= self.hi[i])
    }

    pub fn translate(&self, shift: &[f64]) -> IntervalBox {
        if self.is_empty() {
            return self.clone();
        }
        IntervalBox {
            lo: self.lo.iter().zip(shift).map(|(l, s)| l + s).collect(),
            hi: self.hi.iter().zip(shift).map(|(h, s)| h + s).collect(),
        }
    }

    /// Euclidean distance from `p` to the box (zero inside).
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .map(|(i, &x)| {
                let d = (self.lo[i] - x).max(x - self.hi[i]).max(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Shrinks `b` by `margin` on every side; collapses to the empty box when any
/// axis becomes inverted.
pub fn erode(b: &IntervalBox, margin: &[f64]) -> Result<IntervalBox, GeometryError> {
    check_dim(b.dim(), margin.len())?;
    if b.is_empty() {
        return Ok(b.clone());
    }
    IntervalBox::new(
        b.lo.iter().zip(margin).map(|(l, m)| l + m).collect(),
        b.hi.iter().zip(margin).map(|(h, m)| h - m).collect(),
    )
}

/// Grows `b` by `margin` on every side. For a ball of radius `r` this is the
/// bounding box of the Minkowski sum, a superset of the Euclidean dilation.
pub fn dilate(b: &IntervalBox, margin: &[f64]) -> Result<IntervalBox, GeometryError> {
    check_dim(b.dim(), margin.len())?;
    if b.is_empty() {
        return Ok(b.clone());
    }
    IntervalBox::new(
        b.lo.iter().zip(margin).map(|(l, m)| l - m).collect(),
        b.hi.iter().zip(margin).map(|(h, m)| h + m).collect(),
    )
}

/// A grid cell, addressed by its flat row-major index, or the overflow cell
/// standing for everything outside the covered domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellId {
    Cell(usize),
    Overflow,
}

impl CellId {
    pub fn index(self) -> Option<usize> {
        match self {
            CellId::Cell(i) => Some(i),
            CellId::Overflow => None,
        }
    }
}

/// Uniform grid of congruent cells over a compact domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpecRaw", into = "GridSpecRaw")]
pub struct GridSpec {
    domain: IntervalBox,
    eta: Vec<f64>,
    counts: Vec<usize>,
    strides: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GridSpecRaw {
    domain: IntervalBox,
    eta: Vec<f64>,
}

impl TryFrom<GridSpecRaw> for GridSpec {
    type Error = GeometryError;
    fn try_from(raw: GridSpecRaw) -> Result<Self, Self::Error> {
        GridSpec::new(raw.domain, raw.eta)
    }
}

impl From<GridSpec> for GridSpecRaw {
    fn from(g: GridSpec) -> Self {
        GridSpecRaw {
            domain: g.domain,
            eta: g.eta,
        }
    }
}

// Widths within this many cells of an integer are not rounded up to an extra cell.
const COUNT_SLACK: f64 = 1e-9;

impl GridSpec {
    pub fn new(domain: IntervalBox, eta: Vec<f64>) -> Result<Self, GeometryError> {
        check_dim(domain.dim(), eta.len())?;
        if domain.is_empty() || domain.dim() == 0 {
            return Err(GeometryError::EmptyDomain);
        }
        if eta.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(GeometryError::BadEta(eta));
        }
        let counts: Vec<usize> = (0..domain.dim())
            .map(|i| {
                let ratio = domain.width(i) / eta[i];
                ((ratio - COUNT_SLACK).ceil() as usize).max(1)
            })
            .collect();
        let mut strides = vec![1usize; counts.len()];
        for i in (0..counts.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * counts[i + 1];
        }
        Ok(GridSpec {
            domain,
            eta,
            counts,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn domain(&self) -> &IntervalBox {
        &self.domain
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Cells per axis.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_cells(&self) -> usize {
        self.counts.iter().product()
    }

    /// The union of all cells; may extend past the domain's upper corner when
    /// a width is not a multiple of eta.
    pub fn covered(&self) -> IntervalBox {
        let lo = self.domain.lo().to_vec();
        let hi = (0..self.dim())
            .map(|i| lo[i] + self.counts[i] as f64 * self.eta[i])
            .collect();
        IntervalBox { lo, hi }
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn coords(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        self.strides
            .iter()
            .map(|s| {
                let c = rest / s;
                rest %= s;
                c
            })
            .collect()
    }

    pub fn cell_box(&self, flat: usize) -> IntervalBox {
        let coords = self.coords(flat);
        let lo: Vec<f64> = (0..self.dim())
            .map(|i| self.domain.lo()[i] + coords[i] as f64 * self.eta[i])
            .collect();
        let hi = (0..self.dim())
            .map(|i| self.domain.lo()[i] + (coords[i] + 1) as f64 * self.eta[i])
            .collect();
        IntervalBox { lo, hi }
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let coords = self.coords(flat);
        (0..self.dim())
            .map(|i| self.domain.lo()[i] + (coords[i] as f64 + 0.5) * self.eta[i])
            .collect()
    }

    /// Half-open binning of `point`. Points on the upper face of the covered
    /// domain belong to the last cell; anything else outside is `Overflow`.
    pub fn quantize(&self, point: &[f64]) -> Result<CellId, GeometryError> {
        check_dim(self.dim(), point.len())?;
        let mut coords = Vec::with_capacity(self.dim());
        for (axis, &p) in point.iter().enumerate() {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite { axis, value: p });
            }
            let rel = (p - self.domain.lo()[axis]) / self.eta[axis];
            if rel < 0.0 {
                return Ok(CellId::Overflow);
            }
            let k = rel.floor() as usize;
            let n = self.counts[axis];
            if k < n {
                coords.push(k);
            } else if k == n && rel == n as f64 {
                coords.push(n - 1);
            } else {
                return Ok(CellId::Overflow);
            }
        }
        Ok(CellId::Cell(self.flat_index(&coords)))
    }

    /// Flat indices of every cell whose closed box satisfies `pred`.
    pub fn cells_where(&self, mut pred: impl FnMut(&IntervalBox) -> bool) -> Vec<usize> {
        (0..self.num_cells())
            .filter(|&c| pred(&self.cell_box(c)))
            .collect()
    }
}

/// Exact reachable set of the single integrator `ξ' = u` from the cell's box
/// after holding `u` for `h` seconds.
pub fn reach_set(
    cell: CellId,
    u: &[f64],
    h: f64,
    grid: &GridSpec,
) -> Result<IntervalBox, GeometryError> {
    let flat = cell.index().ok_or(GeometryError::Overflow)?;
    check_dim(grid.dim(), u.len())?;
    let shift: Vec<f64> = u.iter().map(|ui| h * ui).collect();
    Ok(grid.cell_box(flat).translate(&shift))
}
