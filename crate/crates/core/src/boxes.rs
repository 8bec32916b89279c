//! Closed axis-aligned boxes, finite unions of them, and lattice grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when deciding which lattice indices fall inside a box, so that
/// e.g. `0.3 / 0.1` still admits the point `3 · 0.1`.
pub const LATTICE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl IntervalBox {
    pub fn new(bounds: &[[f64; 2]]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Validation("box: at least one dimension is required".into()));
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Validation(format!("box dimension {i}: [{lo}, {hi}] is not a finite nonempty interval")));
            }
        }
        Ok(IntervalBox {
            lo: bounds.iter().map(|b| b[0]).collect(),
            hi: bounds.iter().map(|b| b[1]).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Smallest side length.
    pub fn width(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(lo, hi)| hi - lo).fold(f64::INFINITY, f64::min)
    }

    pub fn bounds(&self) -> Vec<[f64; 2]> {
        self.lo.iter().zip(&self.hi).map(|(&lo, &hi)| [lo, hi]).collect()
    }
}

/// A finite union of closed boxes of a common dimension. May be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    dim: usize,
    boxes: Vec<IntervalBox>,
}

/// JSON form: one box as `[[lo, hi], ...]` or a list of such boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxSetDocument {
    Single(Vec<[f64; 2]>),
    Union(Vec<Vec<[f64; 2]>>),
}

impl BoxSet {
    pub fn empty(dim: usize) -> Self {
        BoxSet { dim, boxes: Vec::new() }
    }

    pub fn new(dim: usize, boxes: Vec<IntervalBox>) -> Result<Self> {
        for (j, b) in boxes.iter().enumerate() {
            if b.dim() != dim {
                return Err(Error::Validation(format!(
                    "box {j}: expected dimension {dim}, found {}",
                    b.dim()
                )));
            }
        }
        Ok(BoxSet { dim, boxes })
    }

    pub fn single(bounds: &[[f64; 2]]) -> Result<Self> {
        let b = IntervalBox::new(bounds)?;
        Ok(BoxSet { dim: b.dim(), boxes: vec![b] })
    }

    pub fn from_document(doc: &BoxSetDocument, dim: usize) -> Result<Self> {
        let boxes = match doc {
            BoxSetDocument::Single(b) => vec![IntervalBox::new(b)?],
            BoxSetDocument::Union(bs) => bs.iter().map(|b| IntervalBox::new(b)).collect::<Result<_>>()?,
        };
        BoxSet::new(dim, boxes)
    }

    pub fn to_document(&self) -> BoxSetDocument {
        match self.boxes.as_slice() {
            [b] => BoxSetDocument::Single(b.bounds()),
            bs => BoxSetDocument::Union(bs.iter().map(IntervalBox::bounds).collect()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[IntervalBox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    /// Minimum over boxes of the smallest side; `None` for the empty set.
    pub fn span(&self) -> Option<f64> {
        self.boxes.iter().map(IntervalBox::width).reduce(f64::min)
    }

    /// Axis-aligned bounding box of the union.
    pub fn hull(&self) -> Option<IntervalBox> {
        let first = self.boxes.first()?;
        let mut hull = first.clone();
        for b in &self.boxes[1..] {
            for i in 0..self.dim {
                hull.lo[i] = hull.lo[i].min(b.lo[i]);
                hull.hi[i] = hull.hi[i].max(b.hi[i]);
            }
        }
        Some(hull)
    }

    /// Closure of `self ∖ other` as a union of boxes.
    ///
    /// The space is cut at every box face of both sets; cells inside `self`
    /// and outside `other` are kept and then merged greedily along each axis.
    pub fn difference(&self, other: &BoxSet) -> BoxSet {
        let cells = self.cells(other);
        let kept: Vec<IntervalBox> = cells
            .into_iter()
            .filter(|c| {
                let mid: Vec<f64> = c.lo.iter().zip(&c.hi).map(|(a, b)| 0.5 * (a + b)).collect();
                self.contains(&mid) && !other.contains_interior(&mid, c)
            })
            .collect();
        BoxSet { dim: self.dim, boxes: merge_cells(kept) }
    }

    /// Whether every point of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &BoxSet) -> bool {
        self.cells(other).iter().all(|c| {
            let mid: Vec<f64> = c.lo.iter().zip(&c.hi).map(|(a, b)| 0.5 * (a + b)).collect();
            !self.contains(&mid) || other.contains(&mid)
        }) && self.boxes.iter().all(|b| other.contains(&b.lo) && other.contains(&b.hi))
    }

    fn contains_interior(&self, mid: &[f64], cell: &IntervalBox) -> bool {
        // A degenerate cell lying on a face of `other` belongs to the
        // closure of the complement only if it has positive extent there.
        self.boxes.iter().any(|b| {
            b.contains(mid)
                && (0..self.dim).all(|i| cell.hi[i] > cell.lo[i] || (b.lo[i] < mid[i] && mid[i] < b.hi[i]))
        })
    }

    fn cells(&self, other: &BoxSet) -> Vec<IntervalBox> {
        let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); self.dim];
        for b in self.boxes.iter().chain(&other.boxes) {
            for i in 0..self.dim {
                cuts[i].push(b.lo[i]);
                cuts[i].push(b.hi[i]);
            }
        }
        let segments: Vec<Vec<(f64, f64)>> = cuts
            .into_iter()
            .map(|mut c| {
                c.sort_by(f64::total_cmp);
                c.dedup();
                if c.len() == 1 {
                    vec![(c[0], c[0])]
                } else {
                    c.windows(2).map(|w| (w[0], w[1])).collect()
                }
            })
            .collect();
        let mut cells = vec![IntervalBox { lo: Vec::new(), hi: Vec::new() }];
        for seg in &segments {
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    seg.iter().map(move |&(a, b)| {
                        let mut c = c.clone();
                        c.lo.push(a);
                        c.hi.push(b);
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

fn merge_cells(mut cells: Vec<IntervalBox>) -> Vec<IntervalBox> {
    let dim = cells.first().map_or(0, IntervalBox::dim);
    loop {
        let mut merged = false;
        'outer: for i in 0..cells.len() {
            for j in 0..cells.len() {
                if i == j {
                    continue;
                }
                for axis in 0..dim {
                    let (a, b) = (&cells[i], &cells[j]);
                    let aligned = (0..dim).all(|k| k == axis || (a.lo[k] == b.lo[k] && a.hi[k] == b.hi[k]));
                    if aligned && a.hi[axis] == b.lo[axis] {
                        let hi = b.hi[axis];
                        cells[i].hi[axis] = hi;
                        cells.remove(j);
                        merged = true;
                        break 'outer;
                    }
                }
            }
        }
        if !merged {
            return cells;
        }
    }
}

/// `step > span` up to the lattice tolerance, so that `0.1` still fits
/// into `[0.9, 1]`.
pub fn exceeds_span(step: f64, span: f64) -> bool {
    step > span + LATTICE_TOLERANCE * step
}

/// Lattice points `k · step` of a box union, identified by their integer
/// coordinates `k`, in lexicographic order of `k` without duplicates.
pub fn grid_indices(set: &BoxSet, step: f64, cap: usize) -> Result<Vec<Vec<i64>>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Quantization(format!("grid step must be positive, got {step}")));
    }
    if let Some(span) = set.span() {
        if exceeds_span(step, span) {
            return Err(Error::Quantization(format!("grid step {step} exceeds the span {span}")));
        }
    }
    let mut points: Vec<Vec<i64>> = Vec::new();
    for b in set.boxes() {
        let ranges: Vec<(i64, i64)> = (0..b.dim())
            .map(|i| {
                let lo = (b.lo[i] / step - LATTICE_TOLERANCE).ceil() as i64;
                let hi = (b.hi[i] / step + LATTICE_TOLERANCE).floor() as i64;
                (lo, hi)
            })
            .collect();
        let count: u128 = ranges.iter().map(|(lo, hi)| (hi - lo + 1).max(0) as u128).product();
        if count + points.len() as u128 > cap as u128 {
            return Err(Error::Resource { what: "grid points", cap });
        }
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            continue;
        }
        let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'odometer: loop {
            points.push(k.clone());
            for axis in (0..k.len()).rev() {
                if k[axis] < ranges[axis].1 {
                    k[axis] += 1;
                    continue 'odometer;
                }
                k[axis] = ranges[axis].0;
            }
            break;
        }
    }
    points.sort();
    points.dedup();
    Ok(points)
}

pub fn lattice_point(k: &[i64], step: f64) -> Vec<f64> {
    k.iter().map(|&k| k as f64 * step).collect()
}

/// Lattice points of a box union as real vectors.
pub fn grid(set: &BoxSet, step: f64, cap: usize) -> Result<Vec<Vec<f64>>> {
    Ok(grid_indices(set, step, cap)?.iter().map(|k| lattice_point(k, step)).collect())
}
