use std::sync::Arc;

use crate::geometry::{Dir, Grid, Point, NONE};

/// One value per interior cell of a [`Grid`]; boundary values are implied by
/// context (zero unless a caller says otherwise).
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Panics if `values` does not have one entry per interior cell.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        assert_eq!(
            grid.len(),
            values.len(),
            "field length must match the interior cell count"
        );
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self::new(grid, vec![0.0; n])
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|c| f(grid.cell_center(c))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cell holding the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (c, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = c;
            }
        }
        best
    }

    /// `Σ u·v·h²`.
    pub fn integral_product(&self, other: &ScalarField) -> f64 {
        let h2 = self.grid.h() * self.grid.h();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * h2
    }

    /// `Σ u·h²`.
    pub fn integral(&self) -> f64 {
        let h2 = self.grid.h() * self.grid.h();
        self.values.iter().sum::<f64>() * h2
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn node_value(&self, i: i64, j: i64) -> Option<f64> {
        self.grid.cell_at(i, j).map(|c| self.values[c])
    }

    /// Bilinear interpolation; `None` unless all four surrounding nodes are interior.
    pub fn interp_bilinear(&self, p: Point) -> Option<f64> {
        let h = self.grid.h();
        let (i, j) = self.grid.floor_ij(p);
        let tx = p.x / h - i as f64;
        let ty = p.y / h - j as f64;
        let v00 = self.node_value(i, j)?;
        let v10 = self.node_value(i + 1, j)?;
        let v01 = self.node_value(i, j + 1)?;
        let v11 = self.node_value(i + 1, j + 1)?;
        Some(
            (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11),
        )
    }

    /// Tensor-product cubic Lagrange interpolation on the surrounding 4×4
    /// nodes; `None` unless all of them are interior.
    pub fn interp_cubic(&self, p: Point) -> Option<f64> {
        let h = self.grid.h();
        let (i, j) = self.grid.floor_ij(p);
        let wx = cubic_weights(p.x / h - i as f64);
        let wy = cubic_weights(p.y / h - j as f64);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let mut row = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                row += wxa * self.node_value(i - 1 + a as i64, j - 1 + b as i64)?;
            }
            acc += wyb * row;
        }
        Some(acc)
    }

    /// Cubic where the 4×4 stencil is interior, bilinear otherwise.
    pub fn interp(&self, p: Point) -> Option<f64> {
        self.interp_cubic(p).or_else(|| self.interp_bilinear(p))
    }

    /// Second-order gradient at a cell centre. Boundary legs use the
    /// Shortley–Weller intersection point with value `boundary(point)`.
    pub fn gradient_at(&self, cell: usize, boundary: &impl Fn(Point) -> f64) -> Point {
        let h = self.grid.h();
        let nb = self.grid.neighbors(cell);
        let legs = self.grid.legs(cell);
        let u = self.values[cell];
        let side = |d: Dir| -> (f64, f64) {
            let k = d as usize;
            let dist = legs[k] * h;
            let val = if nb[k] == NONE {
                boundary(self.grid.boundary_point(cell, d))
            } else {
                self.values[nb[k] as usize]
            };
            (dist, val)
        };
        let deriv = |plus: (f64, f64), minus: (f64, f64)| {
            let (a, ua) = plus;
            let (b, ub) = minus;
            (b * b * (ua - u) + a * a * (u - ub)) / (a * b * (a + b))
        };
        Point::new(
            deriv(side(Dir::East), side(Dir::West)),
            deriv(side(Dir::North), side(Dir::South)),
        )
    }

    /// Gradient of a field with zero boundary data, at every cell.
    pub fn gradient_field(&self) -> (ScalarField, ScalarField) {
        let zero = |_: Point| 0.0;
        let (gx, gy): (Vec<f64>, Vec<f64>) = (0..self.len())
            .map(|c| {
                let g = self.gradient_at(c, &zero);
                (g.x, g.y)
            })
            .unzip();
        (
            ScalarField::new(self.grid.clone(), gx),
            ScalarField::new(self.grid.clone(), gy),
        )
    }

    /// Elementwise `self + alpha·other`.
    pub fn axpy(&mut self, alpha: f64, other: &ScalarField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> ScalarField {
        ScalarField::new(
            self.grid.clone(),
            self.values.iter().map(|v| alpha * v).collect(),
        )
    }
}

fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::new(&DomainSpec::unit_disk(), 1.0 / 32.0).unwrap())
    }

    #[test]
    fn interpolation_is_exact_for_cubics() {
        let g = grid();
        let f = |p: Point| 1.0 + 2.0 * p.x - p.y + p.x * p.y + p.x.powi(3) - 0.5 * p.y.powi(2) * p.x;
        let field = ScalarField::from_fn(g, f);
        let p = Point::new(0.1234, -0.3456);
        assert!((field.interp_cubic(p).unwrap() - f(p)).abs() < 1e-12);
        let lin = |p: Point| 0.5 + p.x - 3.0 * p.y + 2.0 * p.x * p.y;
        let field = ScalarField::from_fn(field.grid().clone(), lin);
        assert!((field.interp_bilinear(p).unwrap() - lin(p)).abs() < 1e-12);
        assert!(field.interp(Point::new(2.0, 0.0)).is_none());
    }

    #[test]
    fn gradient_is_exact_for_quadratics_near_boundary() {
        let g = grid();
        let f = |p: Point| 1.0 - p.norm_sq();
        let field = ScalarField::from_fn(g.clone(), f);
        for c in 0..g.len() {
            let p = g.cell_center(c);
            let grad = field.gradient_at(c, &f);
            assert!((grad.x + 2.0 * p.x).abs() < 1e-9);
            assert!((grad.y + 2.0 * p.y).abs() < 1e-9);
        }
    }
}
