use crate::error::{Error, Result};
use crate::geometry::{Grid, TimeGrid};

/// Grid function on a time ladder: `values[n * n_nodes + k] = u(t_n, x_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid,
    time: TimeGrid,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid, time: TimeGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_nodes() * time.n_levels();
        if values.len() != expected {
            return Err(Error::FieldLength {
                expected,
                found: values.len(),
            });
        }
        Ok(SpaceTimeField { grid, time, values })
    }

    pub fn from_fn<F: Fn(f64, [f64; 2]) -> f64>(grid: Grid, time: TimeGrid, f: F) -> Self {
        let n = grid.n_nodes();
        let mut values = Vec::with_capacity(n * time.n_levels());
        for level in 0..time.n_levels() {
            let t = time.time(level);
            values.extend((0..n).map(|k| f(t, grid.position(k))));
        }
        SpaceTimeField { grid, time, values }
    }

    pub fn constant(grid: Grid, time: TimeGrid, c: f64) -> Self {
        let values = vec![c; grid.n_nodes() * time.n_levels()];
        SpaceTimeField { grid, time, values }
    }

    /// The field equal to `initial` at every level.
    pub fn frozen(grid: Grid, time: TimeGrid, initial: &[f64]) -> Result<Self> {
        grid.check_len(initial)?;
        let mut values = Vec::with_capacity(initial.len() * time.n_levels());
        for _ in 0..time.n_levels() {
            values.extend_from_slice(initial);
        }
        Ok(SpaceTimeField { grid, time, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn n_levels(&self) -> usize {
        self.time.n_levels()
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let m = self.n_nodes();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        let m = self.n_nodes();
        &mut self.values[n * m..(n + 1) * m]
    }

    pub fn levels(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks(self.n_nodes())
    }

    pub fn same_grids(&self, other: &SpaceTimeField) -> bool {
        self.grid == other.grid && self.time == other.time
    }

    fn zip_with(&self, other: &SpaceTimeField, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.same_grids(other) {
            return Err(Error::GridMismatch);
        }
        Ok(SpaceTimeField {
            grid: self.grid,
            time: self.time,
            values: self.values.iter().zip(&other.values).map(|(a, b)| op(*a, *b)).collect(),
        })
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &SpaceTimeField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SpaceTimeField {
            grid: self.grid,
            time: self.time,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The first `n_steps` steps (levels `0..=n_steps`).
    pub fn prefix(&self, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || n_steps > self.time.n_steps {
            return Err(Error::InvalidArgument(format!(
                "prefix of {n_steps} steps out of range 1..={}",
                self.time.n_steps
            )));
        }
        let time = self.time.prefix(n_steps)?;
        let m = self.n_nodes();
        Ok(SpaceTimeField {
            grid: self.grid,
            time,
            values: self.values[..(n_steps + 1) * m].to_vec(),
        })
    }

    /// Levels `from..=from + n_steps` re-based as a field starting at `t_from`.
    pub fn window(&self, from: usize, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || from + n_steps > self.time.n_steps {
            return Err(Error::InvalidArgument("window out of range".into()));
        }
        let time = TimeGrid::with_step(self.time.time(from), self.time.dt, n_steps)?;
        let m = self.n_nodes();
        Ok(SpaceTimeField {
            grid: self.grid,
            time,
            values: self.values[from * m..(from + n_steps + 1) * m].to_vec(),
        })
    }

    /// Appends the levels of `next` after the first one, which must coincide
    /// with this field's last level.
    pub fn append(&mut self, next: &SpaceTimeField) -> Result<()> {
        if self.grid != next.grid || self.time.dt != next.time.dt {
            return Err(Error::GridMismatch);
        }
        let m = self.n_nodes();
        self.values.extend_from_slice(&next.values[m..]);
        self.time = TimeGrid::with_step(self.time.t0, self.time.dt, self.time.n_steps + next.time.n_steps)?;
        Ok(())
    }
}
