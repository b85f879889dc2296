//! Uniform box grids and discrete calculus on them.
//!
//! A [`Grid`] covers the box `[-R, R]^n` with an odd number of nodes per
//! axis, so the origin is always a node. Fields are node-sampled;
//! quadrature over balls uses the center-in-ball rule (a node contributes
//! `h^n` iff it lies in the ball), spheres are approximated by shells of
//! width exactly `h`.

use crate::{Error, Result};

/// Uniform grid on `[-R, R]^n` with spacing `h` and an odd node count per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    half_width: f64,
    h: f64,
    per_axis: usize,
}

impl Grid {
    /// `2R/h` must be an even integer (so node counts are odd); `n` in `2..=4`.
    pub fn new(n: usize, half_width: f64, h: f64) -> Result<Self> {
        if !(2..=4).contains(&n) {
            return Err(Error::InvalidGrid(format!(
                "dimension {n} not supported for full grids (need 2 <= n <= 4)"
            )));
        }
        if !(h > 0.0) || !(half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "need h > 0 and R > 0, got h = {h}, R = {half_width}"
            )));
        }
        let steps_f = 2.0 * half_width / h;
        let steps = steps_f.round() as usize;
        if (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "2R/h = {steps_f} is not an integer"
            )));
        }
        if steps % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "2R/h = {steps} must be even so the origin is a node"
            )));
        }
        Ok(Self {
            n,
            half_width,
            h,
            per_axis: steps + 1,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn node_count(&self) -> usize {
        self.per_axis.pow(self.n as u32)
    }

    /// Coordinate of axis index `i` (0-based): `-R + i h`.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    /// Flat index of a multi-index (row-major, axis 0 slowest).
    pub fn flat(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.n);
        let mut idx = 0usize;
        for &m in multi {
            debug_assert!(m < self.per_axis);
            idx = idx * self.per_axis + m;
        }
        idx
    }

    /// Multi-index of a flat index.
    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.n];
        for d in (0..self.n).rev() {
            out[d] = flat % self.per_axis;
            flat /= self.per_axis;
        }
        out
    }

    /// Write the coordinates of a node into `out`.
    pub fn coord_into(&self, multi: &[usize], out: &mut [f64]) {
        for (o, &m) in out.iter_mut().zip(multi) {
            *o = self.axis_coord(m);
        }
    }

    pub fn coord(&self, flat: usize) -> Vec<f64> {
        let multi = self.multi(flat);
        let mut out = vec![0.0; self.n];
        self.coord_into(&multi, &mut out);
        out
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    /// Iterate over all nodes as (flat index, multi-index, coordinates).
    pub fn nodes(&self) -> NodeIter<'_> {
        NodeIter {
            grid: self,
            next: 0,
            multi: vec![0; self.n],
            coord: vec![0.0; self.n],
        }
    }

    fn contains_ball(&self, ball: &BallRegion) -> bool {
        ball.center
            .iter()
            .all(|&c| c.abs() + ball.radius <= self.half_width + 1e-12)
    }
}

/// Streaming node iterator; avoids allocating a multi-index per node.
pub struct NodeIter<'a> {
    grid: &'a Grid,
    next: usize,
    multi: Vec<usize>,
    coord: Vec<f64>,
}

impl NodeIter<'_> {
    /// Advance and expose the current node; `None` when exhausted.
    pub fn advance(&mut self) -> Option<(usize, &[usize], &[f64])> {
        if self.next >= self.grid.node_count() {
            return None;
        }
        let flat = self.next;
        if flat == 0 {
            self.multi.iter_mut().for_each(|m| *m = 0);
        } else {
            // increment the multi-index (last axis fastest)
            for d in (0..self.grid.n).rev() {
                self.multi[d] += 1;
                if self.multi[d] < self.grid.per_axis {
                    break;
                }
                self.multi[d] = 0;
            }
        }
        self.grid.coord_into(&self.multi, &mut self.coord);
        self.next += 1;
        Some((flat, &self.multi, &self.coord))
    }
}

/// Euclidean ball used as quadrature region.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRegion {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallRegion {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    /// Origin-centered ball.
    pub fn centered(n: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; n], radius)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let mut d2 = 0.0;
        for (xi, ci) in x.iter().zip(&self.center) {
            let d = xi - ci;
            d2 += d * d;
        }
        d2 < self.radius * self.radius
    }
}

/// Node-sampled scalar function.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidParameter(format!(
                "value length {} does not match node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "field contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        let values = vec![c; grid.node_count()];
        Self::new(grid, values)
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut values = vec![0.0; grid.node_count()];
        let mut it = grid.nodes();
        while let Some((flat, _, x)) = it.advance() {
            values[flat] = f(x);
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise `max(v - k, 0)`, the truncation `(v - k)_+`.
    pub fn truncate_above(&self, k: f64) -> ScalarField {
        let values = self.values.iter().map(|&v| (v - k).max(0.0)).collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Pointwise clamp to `[-m, m]`.
    pub fn clamp_abs(&self, m: f64) -> ScalarField {
        let values = self.values.iter().map(|&v| v.clamp(-m, m)).collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Central differences at interior nodes, one-sided second-order
    /// differences on the boundary layer.
    pub fn gradient(&self) -> Result<VectorField> {
        let g = &self.grid;
        if g.per_axis < 3 {
            return Err(Error::GridTooSmall {
                need: 3,
                have: g.per_axis,
            });
        }
        let n = g.n;
        let h = g.h;
        let m = g.per_axis;
        let mut values = vec![0.0; g.node_count() * n];
        // stride of axis d in flat indexing
        let mut strides = vec![1usize; n];
        for d in (0..n.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * m;
        }
        let v = &self.values;
        let mut it = g.nodes();
        while let Some((flat, multi, _)) = it.advance() {
            for d in 0..n {
                let s = strides[d];
                let i = multi[d];
                let df = if i == 0 {
                    (-3.0 * v[flat] + 4.0 * v[flat + s] - v[flat + 2 * s]) / (2.0 * h)
                } else if i == m - 1 {
                    (3.0 * v[flat] - 4.0 * v[flat - s] + v[flat - 2 * s]) / (2.0 * h)
                } else {
                    (v[flat + s] - v[flat - s]) / (2.0 * h)
                };
                values[flat * n + d] = df;
            }
        }
        Ok(VectorField {
            grid: g.clone(),
            values,
        })
    }

    /// `sum h^n v(x)` over nodes with center in the ball.
    pub fn integrate_ball(&self, ball: &BallRegion) -> Result<f64> {
        if !self.grid.contains_ball(ball) {
            return Err(Error::BallOutsideBox {
                center: ball.center.clone(),
                radius: ball.radius,
                half_width: self.grid.half_width,
            });
        }
        let hn = self.grid.cell_volume();
        let mut sum = 0.0;
        let mut it = self.grid.nodes();
        while let Some((flat, _, x)) = it.advance() {
            if ball.contains(x) {
                sum += self.values[flat];
            }
        }
        Ok(hn * sum)
    }

    /// Thin-shell approximation of the surface integral over `{|x| = r}`:
    /// `(1/h) * sum h^n v(x)` over nodes with `|x|` in `[r - h/2, r + h/2)`.
    pub fn sphere_integral(&self, r: f64) -> Result<f64> {
        let g = &self.grid;
        if r + g.h / 2.0 > g.half_width + 1e-12 {
            return Err(Error::OutOfRange {
                value: r,
                lo: 0.0,
                hi: g.half_width - g.h / 2.0,
            });
        }
        let lo = r - g.h / 2.0;
        let hi = r + g.h / 2.0;
        let hn = g.cell_volume();
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut it = g.nodes();
        while let Some((flat, _, x)) = it.advance() {
            let rad = x.iter().map(|xi| xi * xi).sum::<f64>().sqrt();
            if rad >= lo && rad < hi {
                sum += self.values[flat];
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyShell { r });
        }
        Ok(hn * sum / g.h)
    }

    /// `h^n * #{nodes in ball with v > k}`, the measure of the superlevel set.
    pub fn superlevel_measure(&self, k: f64, ball: &BallRegion) -> Result<f64> {
        if !self.grid.contains_ball(ball) {
            return Err(Error::BallOutsideBox {
                center: ball.center.clone(),
                radius: ball.radius,
                half_width: self.grid.half_width,
            });
        }
        let hn = self.grid.cell_volume();
        let mut count = 0usize;
        let mut it = self.grid.nodes();
        while let Some((flat, _, x)) = it.advance() {
            if self.values[flat] > k && ball.contains(x) {
                count += 1;
            }
        }
        Ok(hn * count as f64)
    }

    /// `W^{1,2}` norm over a ball: `sqrt(int v^2 + int |grad v|^2)`.
    pub fn w12_norm(&self, ball: &BallRegion) -> Result<f64> {
        let grad = self.gradient()?;
        let mut sum = 0.0;
        let n = self.grid.n;
        let mut it = self.grid.nodes();
        while let Some((flat, _, x)) = it.advance() {
            if ball.contains(x) {
                let v = self.values[flat];
                let mut g2 = 0.0;
                for d in 0..n {
                    let gd = grad.values[flat * n + d];
                    g2 += gd * gd;
                }
                sum += v * v + g2;
            }
        }
        if !self.grid.contains_ball(ball) {
            return Err(Error::BallOutsideBox {
                center: ball.center.clone(),
                radius: ball.radius,
                half_width: self.grid.half_width,
            });
        }
        Ok((self.grid.cell_volume() * sum).sqrt())
    }

    /// Maximum value over nodes in the ball.
    pub fn sup_ball(&self, ball: &BallRegion) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        let mut seen = false;
        let mut it = self.grid.nodes();
        while let Some((flat, _, x)) = it.advance() {
            if ball.contains(x) {
                best = best.max(self.values[flat]);
                seen = true;
            }
        }
        if !seen {
            return Err(Error::EmptyBall);
        }
        Ok(best)
    }

    /// Pointwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Node-sampled vector function (node-major storage).
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() * grid.dim() {
            return Err(Error::InvalidParameter(
                "vector field length mismatch".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "vector field contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component_at(&self, flat: usize, d: usize) -> f64 {
        self.values[flat * self.grid.n + d]
    }

    /// `|v|^2` as a scalar field.
    pub fn magnitude_squared(&self) -> ScalarField {
        let n = self.grid.n;
        let values = self
            .values
            .chunks_exact(n)
            .map(|z| z.iter().map(|zi| zi * zi).sum())
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }
}
