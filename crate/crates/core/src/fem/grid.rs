//! Tensor-product hexahedral grids with graded axes.

use crate::error::{Error, Result};

/// A structured grid `xs × ys × zs`. Nodes are numbered with `z` fastest,
/// then `x`, then `y`, which keeps the matrix profile narrow for thin
/// domains with few layers through the thickness.
#[derive(Clone, Debug, PartialEq)]
pub struct HexGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
}

impl HexGrid {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, zs: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("x", &xs), ("y", &ys), ("z", &zs)] {
            if axis.len() < 2 {
                return Err(Error::InvalidInput(format!("{name} axis needs at least two nodes")));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput(format!("{name} axis is not strictly increasing")));
            }
        }
        Ok(Self { xs, ys, zs })
    }

    pub fn uniform(lo: [f64; 3], hi: [f64; 3], cells: [usize; 3]) -> Result<Self> {
        let axis = |k: usize| {
            (0..=cells[k]).map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / cells[k] as f64).collect()
        };
        Self::new(axis(0), axis(1), axis(2))
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.xs.len(), self.ys.len(), self.zs.len()]
    }

    pub fn n_nodes(&self) -> usize {
        self.xs.len() * self.ys.len() * self.zs.len()
    }

    pub fn n_elements(&self) -> usize {
        (self.xs.len() - 1) * (self.ys.len() - 1) * (self.zs.len() - 1)
    }

    pub fn node(&self, ix: usize, iy: usize, iz: usize) -> usize {
        iz + self.zs.len() * (ix + self.xs.len() * iy)
    }

    pub fn node_indices(&self, n: usize) -> [usize; 3] {
        let nz = self.zs.len();
        let nx = self.xs.len();
        [(n / nz) % nx, n / (nz * nx), n % nz]
    }

    pub fn coords(&self, n: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.node_indices(n);
        [self.xs[ix], self.ys[iy], self.zs[iz]]
    }

    /// Element `(ex, ey, ez)` as its lower corner indices.
    pub fn elements(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [nx, ny, nz] = self.dims();
        (0..ny - 1).flat_map(move |ey| {
            (0..nx - 1).flat_map(move |ex| (0..nz - 1).map(move |ez| [ex, ey, ez]))
        })
    }

    /// The 8 nodes of an element; local node `i + 2j + 4k` sits at corner
    /// `(i, j, k)` of the box.
    pub fn element_nodes(&self, e: [usize; 3]) -> [usize; 8] {
        std::array::from_fn(|l| self.node(e[0] + (l & 1), e[1] + ((l >> 1) & 1), e[2] + ((l >> 2) & 1)))
    }

    pub fn element_size(&self, e: [usize; 3]) -> [f64; 3] {
        [
            self.xs[e[0] + 1] - self.xs[e[0]],
            self.ys[e[1] + 1] - self.ys[e[1]],
            self.zs[e[2] + 1] - self.zs[e[2]],
        ]
    }

    pub fn element_centroid(&self, e: [usize; 3]) -> [f64; 3] {
        [
            0.5 * (self.xs[e[0] + 1] + self.xs[e[0]]),
            0.5 * (self.ys[e[1] + 1] + self.ys[e[1]]),
            0.5 * (self.zs[e[2] + 1] + self.zs[e[2]]),
        ]
    }

    /// Lumped nodal volumes (one eighth of each adjacent element).
    pub fn nodal_volumes(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n_nodes()];
        for e in self.elements() {
            let s = self.element_size(e);
            let share = s[0] * s[1] * s[2] / 8.0;
            for n in self.element_nodes(e) {
                v[n] += share;
            }
        }
        v
    }
}

/// Axis on `[a, b]` that is fine near the given focus points and coarsens
/// geometrically away from them. Spacing near a focus is `h_min`, grows by
/// `growth` per cell and never exceeds `h_max`. Foci are included as nodes.
pub fn graded_axis(a: f64, b: f64, foci: &[f64], h_min: f64, growth: f64, h_max: f64) -> Vec<f64> {
    assert!(b > a && h_min > 0.0 && growth >= 1.0 && h_max >= h_min);
    let spacing = |x: f64| -> f64 {
        let d = foci.iter().map(|f| (x - f).abs()).fold(f64::INFINITY, f64::min);
        let d = if d.is_finite() { d } else { 0.0 };
        (h_min + (growth - 1.0) * d).min(h_max)
    };
    let mut breaks: Vec<f64> = foci.iter().copied().filter(|f| *f > a && *f < b).collect();
    breaks.push(a);
    breaks.push(b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let mut nodes = vec![a];
    for w in breaks.windows(2) {
        let hi = w[1];
        let mut x = w[0];
        loop {
            let s = spacing(x).min(spacing(x + spacing(x)));
            if x + 1.5 * s >= hi {
                break;
            }
            x += s;
            nodes.push(x);
        }
        nodes.push(hi);
    }
    nodes
}

/// Symmetric axis on `[-t, t]` with uniform spacing `h_core` on
/// `[-core, core]` and spacing growing by `growth` up to `h_far` beyond.
pub fn symmetric_graded_axis(t: f64, core: f64, h_core: f64, growth: f64, h_far: f64) -> Vec<f64> {
    assert!(t > core && core > 0.0 && h_core > 0.0 && growth >= 1.0);
    let n_core = (core / h_core).round().max(1.0) as usize;
    let mut half: Vec<f64> = (0..=n_core).map(|i| i as f64 * h_core).collect();
    let mut x = n_core as f64 * h_core;
    let mut s = h_core;
    loop {
        s = (s * growth).min(h_far);
        if x + 1.5 * s >= t {
            break;
        }
        x += s;
        half.push(x);
    }
    half.push(t);
    let mut axis: Vec<f64> = half.iter().rev().map(|v| -v).collect();
    axis.extend(half.iter().skip(1));
    axis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_numbering_round_trip() {
        let g = HexGrid::uniform([0.0; 3], [1.0; 3], [3, 4, 2]).unwrap();
        for n in 0..g.n_nodes() {
            let [i, j, k] = g.node_indices(n);
            assert_eq!(g.node(i, j, k), n);
        }
        assert_eq!(g.n_elements(), 24);
    }

    #[test]
    fn graded_axis_hits_foci_and_ends() {
        let ax = graded_axis(0.0, 1.0, &[0.0, 0.5, 1.0], 0.01, 1.3, 0.1);
        assert_eq!(ax[0], 0.0);
        assert_eq!(*ax.last().unwrap(), 1.0);
        assert!(ax.iter().any(|x| (x - 0.5).abs() < 1e-12));
        assert!(ax.windows(2).all(|w| w[1] > w[0]));
        let max = ax.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(max <= 0.13, "max spacing {max}");
    }

    #[test]
    fn symmetric_axis_is_symmetric() {
        let ax = symmetric_graded_axis(8.0, 1.25, 0.25, 1.25, 0.5);
        assert_eq!(ax[0], -8.0);
        assert_eq!(*ax.last().unwrap(), 8.0);
        let n = ax.len();
        for i in 0..n {
            assert!((ax[i] + ax[n - 1 - i]).abs() < 1e-12);
        }
        assert!(ax.iter().any(|x| (x - 1.0).abs() < 1e-12));
    }
}
