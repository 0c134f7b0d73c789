//! Uniform grids, boundary enumeration and finite-difference stencils.
//!
//! Two spatial domains are supported: a closed interval, whose boundary is
//! its two end points, and the periodic strip `S^1 x (0, height)`, whose
//! boundary is the pair of rows `y = 0` and `y = height`. Node `k` of a strip
//! grid sits at column `k % n_x` and row `k / n_x`.
//!
//! Gradients use central differences at interior nodes and one-sided
//! three-point differences at non-periodic boundary nodes, so the trace of
//! `grad u` that enters the boundary law is second-order accurate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_nodes: usize,
    pub h: f64,
}

impl IntervalGrid {
    pub fn new(x_lo: f64, x_hi: f64, n_nodes: usize) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite()) || x_lo >= x_hi {
            return Err(Error::InvalidGrid(format!(
                "interval endpoints must satisfy x_lo < x_hi (got {x_lo}, {x_hi})"
            )));
        }
        if n_nodes < 3 {
            return Err(Error::InvalidGrid(format!(
                "an interval grid needs at least 3 nodes (got {n_nodes})"
            )));
        }
        Ok(IntervalGrid {
            x_lo,
            x_hi,
            n_nodes,
            h: (x_hi - x_lo) / (n_nodes - 1) as f64,
        })
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_nodes {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.h
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    pub period: f64,
    pub height: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub h_x: f64,
    pub h_y: f64,
}

impl StripGrid {
    pub fn new(period: f64, height: f64, n_x: usize, n_y: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "strip period and height must be positive (got {period}, {height})"
            )));
        }
        if n_x < 3 || n_y < 3 {
            return Err(Error::InvalidGrid(format!(
                "a strip grid needs n_x >= 3 and n_y >= 3 (got {n_x}, {n_y})"
            )));
        }
        Ok(StripGrid {
            period,
            height,
            n_x,
            n_y,
            h_x: period / n_x as f64,
            h_y: height / (n_y - 1) as f64,
        })
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_x + i
    }

    fn wrap(&self, i: usize, di: isize) -> usize {
        (i as isize + di).rem_euclid(self.n_x as isize) as usize
    }

    fn y(&self, j: usize) -> f64 {
        if j + 1 == self.n_y {
            self.height
        } else {
            j as f64 * self.h_y
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    Interval(IntervalGrid),
    Strip(StripGrid),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DirectionPair {
    XX,
    XY,
    YY,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryNode {
    pub index: usize,
    pub position: [f64; 2],
    pub normal: [f64; 2],
}

/// Sparse weights `sum_k w_k u[node_k]`. At most eight entries are needed by
/// any stencil on the supported grids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil {
    len: usize,
    nodes: [usize; 8],
    weights: [f64; 8],
}

impl Default for Stencil {
    fn default() -> Self {
        Stencil {
            len: 0,
            nodes: [0; 8],
            weights: [0.0; 8],
        }
    }
}

impl Stencil {
    fn push(&mut self, node: usize, weight: f64) {
        if let Some(k) = self.nodes[..self.len].iter().position(|&n| n == node) {
            self.weights[k] += weight;
        } else {
            self.nodes[self.len] = node;
            self.weights[self.len] = weight;
            self.len += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes[..self.len]
            .iter()
            .copied()
            .zip(self.weights[..self.len].iter().copied())
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights[..self.len].iter().sum()
    }

    pub fn apply(&self, field: &[f64]) -> f64 {
        self.iter().map(|(k, w)| w * field[k]).sum()
    }
}

// one-sided first derivative weights at offsets 0, 1, 2 (times 1/h)
const ONE_SIDED_D1: [f64; 3] = [-1.5, 2.0, -0.5];
// one-sided second derivative weights at offsets 0..4 (times 1/h^2)
const ONE_SIDED_D2: [f64; 4] = [2.0, -5.0, 4.0, -1.0];

impl Grid {
    pub fn interval(x_lo: f64, x_hi: f64, n_nodes: usize) -> Result<Self> {
        IntervalGrid::new(x_lo, x_hi, n_nodes).map(Grid::Interval)
    }

    pub fn strip(period: f64, height: f64, n_x: usize, n_y: usize) -> Result<Self> {
        StripGrid::new(period, height, n_x, n_y).map(Grid::Strip)
    }

    pub fn dim(&self) -> usize {
        match self {
            Grid::Interval(_) => 1,
            Grid::Strip(_) => 2,
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Grid::Interval(g) => g.n_nodes,
            Grid::Strip(g) => g.n_x * g.n_y,
        }
    }

    /// Largest mesh spacing.
    pub fn spacing(&self) -> f64 {
        match self {
            Grid::Interval(g) => g.h,
            Grid::Strip(g) => g.h_x.max(g.h_y),
        }
    }

    /// Half-bandwidth of the matrices assembled from this grid's stencils.
    pub fn bandwidth(&self) -> usize {
        match self {
            Grid::Interval(_) => 2,
            Grid::Strip(g) => 2 * g.n_x,
        }
    }

    pub fn position(&self, k: usize) -> [f64; 2] {
        match self {
            Grid::Interval(g) => [g.node(k), 0.0],
            Grid::Strip(g) => [(k % g.n_x) as f64 * g.h_x, g.y(k / g.n_x)],
        }
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        match self {
            Grid::Interval(g) => k == 0 || k + 1 == g.n_nodes,
            Grid::Strip(g) => {
                let j = k / g.n_x;
                j == 0 || j + 1 == g.n_y
            }
        }
    }

    pub fn boundary_nodes(&self) -> Vec<BoundaryNode> {
        match self {
            Grid::Interval(g) => vec![
                BoundaryNode {
                    index: 0,
                    position: [g.x_lo, 0.0],
                    normal: [-1.0, 0.0],
                },
                BoundaryNode {
                    index: g.n_nodes - 1,
                    position: [g.x_hi, 0.0],
                    normal: [1.0, 0.0],
                },
            ],
            Grid::Strip(g) => {
                let mut out = Vec::with_capacity(2 * g.n_x);
                for (j, ny) in [(0, -1.0), (g.n_y - 1, 1.0)] {
                    for i in 0..g.n_x {
                        let k = g.index(i, j);
                        out.push(BoundaryNode {
                            index: k,
                            position: self.position(k),
                            normal: [0.0, ny],
                        });
                    }
                }
                out
            }
        }
    }

    /// Geodesic distance: Euclidean on the interval, periodic in x and
    /// Euclidean in y on the strip.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let pa = self.position(a);
        let pb = self.position(b);
        match self {
            Grid::Interval(_) => (pa[0] - pb[0]).abs(),
            Grid::Strip(g) => {
                let dx = (pa[0] - pb[0]).abs();
                let dx = dx.min(g.period - dx);
                let dy = pa[1] - pb[1];
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    pub fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n_nodes() {
            return Err(Error::FieldLength {
                expected: self.n_nodes(),
                found: field.len(),
            });
        }
        Ok(())
    }

    /// First-derivative stencil along `axis` at node `k`. The y-derivative on
    /// an interval grid is the empty stencil.
    pub fn gradient_stencil(&self, k: usize, axis: Axis) -> Stencil {
        let mut s = Stencil::default();
        match (self, axis) {
            (Grid::Interval(g), Axis::X) => {
                let n = g.n_nodes;
                let c = 1.0 / g.h;
                if k == 0 {
                    for (o, w) in ONE_SIDED_D1.iter().enumerate() {
                        s.push(o, w * c);
                    }
                } else if k + 1 == n {
                    for (o, w) in ONE_SIDED_D1.iter().enumerate() {
                        s.push(n - 1 - o, -w * c);
                    }
                } else {
                    s.push(k - 1, -0.5 * c);
                    s.push(k + 1, 0.5 * c);
                }
            }
            (Grid::Interval(_), Axis::Y) => {}
            (Grid::Strip(g), Axis::X) => {
                let (i, j) = (k % g.n_x, k / g.n_x);
                let c = 0.5 / g.h_x;
                s.push(g.index(g.wrap(i, -1), j), -c);
                s.push(g.index(g.wrap(i, 1), j), c);
            }
            (Grid::Strip(g), Axis::Y) => {
                let (i, j) = (k % g.n_x, k / g.n_x);
                let c = 1.0 / g.h_y;
                if j == 0 {
                    for (o, w) in ONE_SIDED_D1.iter().enumerate() {
                        s.push(g.index(i, o), w * c);
                    }
                } else if j + 1 == g.n_y {
                    for (o, w) in ONE_SIDED_D1.iter().enumerate() {
                        s.push(g.index(i, g.n_y - 1 - o), -w * c);
                    }
                } else {
                    s.push(g.index(i, j - 1), -0.5 * c);
                    s.push(g.index(i, j + 1), 0.5 * c);
                }
            }
        }
        s
    }

    /// Second-derivative stencil at an interior node. Boundary nodes carry the
    /// dynamic condition instead and are rejected.
    pub fn second_derivative_stencil(&self, k: usize, pair: DirectionPair) -> Result<Stencil> {
        if k >= self.n_nodes() {
            return Err(Error::InvalidArgument(format!("node {k} out of range")));
        }
        if self.is_boundary(k) {
            return Err(Error::BoundaryNode(k));
        }
        Ok(self.closure_second_derivative_stencil(k, pair))
    }

    /// Second-derivative stencil valid at every node of the closed domain:
    /// central at interior nodes, one-sided (second order, four points) in the
    /// non-periodic direction at boundary nodes. On a grid with only three
    /// nodes in that direction the one-sided stencil drops to three points.
    pub fn closure_second_derivative_stencil(&self, k: usize, pair: DirectionPair) -> Stencil {
        let mut s = Stencil::default();
        match self {
            Grid::Interval(g) => {
                if pair != DirectionPair::XX {
                    return s;
                }
                let c = 1.0 / (g.h * g.h);
                let n = g.n_nodes;
                if k == 0 || k + 1 == n {
                    let at = |o: usize| if k == 0 { o } else { n - 1 - o };
                    if n >= 4 {
                        for (o, w) in ONE_SIDED_D2.iter().enumerate() {
                            s.push(at(o), w * c);
                        }
                    } else {
                        s.push(at(0), c);
                        s.push(at(1), -2.0 * c);
                        s.push(at(2), c);
                    }
                } else {
                    s.push(k - 1, c);
                    s.push(k, -2.0 * c);
                    s.push(k + 1, c);
                }
            }
            Grid::Strip(g) => {
                let (i, j) = (k % g.n_x, k / g.n_x);
                match pair {
                    DirectionPair::XX => {
                        let c = 1.0 / (g.h_x * g.h_x);
                        s.push(g.index(g.wrap(i, -1), j), c);
                        s.push(k, -2.0 * c);
                        s.push(g.index(g.wrap(i, 1), j), c);
                    }
                    DirectionPair::YY => {
                        let c = 1.0 / (g.h_y * g.h_y);
                        if j == 0 || j + 1 == g.n_y {
                            let at = |o: usize| g.index(i, if j == 0 { o } else { g.n_y - 1 - o });
                            if g.n_y >= 4 {
                                for (o, w) in ONE_SIDED_D2.iter().enumerate() {
                                    s.push(at(o), w * c);
                                }
                            } else {
                                s.push(at(0), c);
                                s.push(at(1), -2.0 * c);
                                s.push(at(2), c);
                            }
                        } else {
                            s.push(g.index(i, j - 1), c);
                            s.push(k, -2.0 * c);
                            s.push(g.index(i, j + 1), c);
                        }
                    }
                    DirectionPair::XY => {
                        let cx = 0.5 / g.h_x;
                        for (di, sx) in [(-1isize, -cx), (1, cx)] {
                            let col = g.index(g.wrap(i, di), j);
                            for (node, w) in self.gradient_stencil(col, Axis::Y).iter() {
                                s.push(node, sx * w);
                            }
                        }
                    }
                }
            }
        }
        s
    }

    /// Discrete gradient `[D_x u, D_y u]` at every node (`D_y u = 0` in 1-D).
    pub fn gradient(&self, field: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.check_len(field)?;
        Ok((0..self.n_nodes())
            .map(|k| {
                [
                    self.gradient_stencil(k, Axis::X).apply(field),
                    self.gradient_stencil(k, Axis::Y).apply(field),
                ]
            })
            .collect())
    }

    /// `[D_xx u, D_xy u, D_yy u]` at every node of the closed domain.
    pub fn second_derivatives(&self, field: &[f64]) -> Result<Vec<[f64; 3]>> {
        self.check_len(field)?;
        Ok((0..self.n_nodes())
            .map(|k| {
                [
                    self.closure_second_derivative_stencil(k, DirectionPair::XX)
                        .apply(field),
                    self.closure_second_derivative_stencil(k, DirectionPair::XY)
                        .apply(field),
                    self.closure_second_derivative_stencil(k, DirectionPair::YY)
                        .apply(field),
                ]
            })
            .collect())
    }

    /// Tangential derivative along a boundary row of the strip (periodic
    /// central difference). Returns `None` on the interval, whose boundary has
    /// no tangential direction.
    pub fn boundary_tangential_derivative(&self, field: &[f64]) -> Result<Option<Vec<f64>>> {
        self.check_len(field)?;
        Ok(match self {
            Grid::Interval(_) => None,
            Grid::Strip(_) => Some(
                self.boundary_nodes()
                    .iter()
                    .map(|b| self.gradient_stencil(b.index, Axis::X).apply(field))
                    .collect(),
            ),
        })
    }

    pub fn sample<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| f(self.position(k))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, tau: f64, n_steps: usize) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time window must be positive and finite (got {tau})"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        Ok(TimeGrid {
            t0,
            tau,
            n_steps,
            dt: tau / n_steps as f64,
        })
    }

    /// A grid with prescribed step, so consecutive windows share `dt` exactly.
    pub fn with_step(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive (got {dt})")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        Ok(TimeGrid {
            t0,
            tau: n_steps as f64 * dt,
            n_steps,
            dt,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.n_steps + 1
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// The first `n_steps` steps of this grid.
    pub fn prefix(&self, n_steps: usize) -> Result<Self> {
        TimeGrid::with_step(self.t0, self.dt, n_steps)
    }
}
