//! Encoder and decoder representations.
//!
//! Two encoder forms coexist: a deterministic mapping tabulated on the source
//! grid (greedy descent, relaxation, and hardened annealing results), and a
//! randomized structured encoder made of K affine local models with per-point
//! association probabilities (the annealing state). The decoder is a table of
//! estimates over the (y, z) grid, evaluated by bilinear interpolation with
//! clamping at the boundary.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::Grid1D;

/// Association probabilities below this threshold do not count toward a
/// structured encoder's effective output range.
pub const ASSOC_SUPPORT_THRESHOLD: f64 = 1e-8;

/// A deterministic encoder g(x) sampled on the source grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedEncoder {
    x_grid: Grid1D,
    g_values: Vec<f64>,
}

impl TabulatedEncoder {
    pub fn new(x_grid: Grid1D, g_values: Vec<f64>) -> Result<Self> {
        if g_values.len() != x_grid.len() {
            return Err(Error::DimensionMismatch {
                what: "encoder samples",
                expected: x_grid.len(),
                got: g_values.len(),
            });
        }
        if let Some(bad) = g_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("g_values", format!("non-finite sample {bad}")));
        }
        Ok(Self { x_grid, g_values })
    }

    /// Tabulate a closure on the grid.
    pub fn from_fn(x_grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let g_values = x_grid.values().iter().map(|&x| f(x)).collect();
        Self::new(x_grid, g_values)
    }

    pub fn x_grid(&self) -> &Grid1D {
        &self.x_grid
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }

    pub(crate) fn g_values_mut(&mut self) -> &mut [f64] {
        &mut self.g_values
    }

    /// Linear interpolation between neighboring samples; exact at grid points.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.x_grid.contains(x) {
            return Err(Error::OutOfDomain {
                value: x,
                lo: self.x_grid.lo(),
                hi: self.x_grid.hi(),
            });
        }
        let (idx, frac) = self.x_grid.locate_clamped(x);
        Ok(self.g_values[idx] + frac * (self.g_values[idx + 1] - self.g_values[idx]))
    }

    /// Smallest and largest encoder output over the grid.
    pub fn output_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &g in &self.g_values {
            lo = lo.min(g);
            hi = hi.max(g);
        }
        (lo, hi)
    }
}

/// One affine local model g_k(x) = a x + b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    /// Slope, in channel units per source unit.
    pub a: f64,
    /// Intercept, in channel units.
    pub b: f64,
}

impl AffineModel {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid("affine model", format!("non-finite ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

/// K affine local models plus a K x n matrix of association probabilities
/// over the source grid. Regions are implied by the associations: soft
/// through the probabilities, hard through the cost argmin.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredEncoder {
    models: Vec<AffineModel>,
    assoc: Array2<f64>,
    x_grid: Grid1D,
}

impl StructuredEncoder {
    pub fn new(models: Vec<AffineModel>, assoc: Array2<f64>, x_grid: Grid1D) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::invalid("models", "need at least one local model"));
        }
        if assoc.nrows() != models.len() {
            return Err(Error::DimensionMismatch {
                what: "association rows",
                expected: models.len(),
                got: assoc.nrows(),
            });
        }
        if assoc.ncols() != x_grid.len() {
            return Err(Error::DimensionMismatch {
                what: "association columns",
                expected: x_grid.len(),
                got: assoc.ncols(),
            });
        }
        for i in 0..assoc.ncols() {
            let mut sum = 0.0;
            for k in 0..assoc.nrows() {
                let p = assoc[[k, i]];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(
                        "assoc",
                        format!("entry ({k}, {i}) = {p} outside [0, 1]"),
                    ));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(
                    "assoc",
                    format!("column {i} sums to {sum}, expected 1"),
                ));
            }
        }
        Ok(Self {
            models,
            assoc,
            x_grid,
        })
    }

    /// A single-model encoder with all probability on that model.
    pub fn single(model: AffineModel, x_grid: Grid1D) -> Self {
        let assoc = Array2::ones((1, x_grid.len()));
        Self {
            models: vec![model],
            assoc,
            x_grid,
        }
    }

    pub fn num_models(&self) -> usize {
        self.models.len()
    }

    pub fn models(&self) -> &[AffineModel] {
        &self.models
    }

    pub fn assoc(&self) -> &Array2<f64> {
        &self.assoc
    }

    pub fn x_grid(&self) -> &Grid1D {
        &self.x_grid
    }

    /// Replace the association matrix, revalidating dimensions.
    pub fn with_assoc(&self, assoc: Array2<f64>) -> Result<Self> {
        Self::new(self.models.clone(), assoc, self.x_grid.clone())
    }

    /// Evaluate local model k at x.
    pub fn model_eval(&self, k: usize, x: f64) -> Result<f64> {
        let model = self.models.get(k).ok_or(Error::BadModelIndex {
            index: k,
            len: self.models.len(),
        })?;
        Ok(model.eval(x))
    }

    /// The association-weighted mixture of the local models, tabulated.
    pub fn averaged_encoder(&self) -> TabulatedEncoder {
        let g_values: Vec<f64> = self
            .x_grid
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                self.models
                    .iter()
                    .enumerate()
                    .map(|(k, m)| self.assoc[[k, i]] * m.eval(x))
                    .sum()
            })
            .collect();
        TabulatedEncoder {
            x_grid: self.x_grid.clone(),
            g_values,
        }
    }

    /// Deterministic encoder that assigns each grid point to the model with
    /// the smallest per-point cost; ties go to the smallest index.
    pub fn harden(&self, per_point_costs: &Array2<f64>) -> Result<TabulatedEncoder> {
        if per_point_costs.nrows() != self.models.len() {
            return Err(Error::DimensionMismatch {
                what: "cost rows",
                expected: self.models.len(),
                got: per_point_costs.nrows(),
            });
        }
        if per_point_costs.ncols() != self.x_grid.len() {
            return Err(Error::DimensionMismatch {
                what: "cost columns",
                expected: self.x_grid.len(),
                got: per_point_costs.ncols(),
            });
        }
        let g_values: Vec<f64> = self
            .x_grid
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut best = 0;
                for k in 1..self.models.len() {
                    if per_point_costs[[k, i]] < per_point_costs[[best, i]] {
                        best = k;
                    }
                }
                self.models[best].eval(x)
            })
            .collect();
        Ok(TabulatedEncoder {
            x_grid: self.x_grid.clone(),
            g_values,
        })
    }

    /// Output range over (model, grid point) pairs whose association
    /// probability is at least [`ASSOC_SUPPORT_THRESHOLD`].
    pub fn effective_output_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &x) in self.x_grid.values().iter().enumerate() {
            for (k, m) in self.models.iter().enumerate() {
                if self.assoc[[k, i]] >= ASSOC_SUPPORT_THRESHOLD {
                    let g = m.eval(x);
                    lo = lo.min(g);
                    hi = hi.max(g);
                }
            }
        }
        (lo, hi)
    }
}

/// Decoder estimates tabulated over the (y, z) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderTable {
    y_grid: Grid1D,
    z_grid: Grid1D,
    xhat: Array2<f64>,
}

impl DecoderTable {
    pub fn new(y_grid: Grid1D, z_grid: Grid1D, xhat: Array2<f64>) -> Result<Self> {
        if xhat.nrows() != y_grid.len() {
            return Err(Error::DimensionMismatch {
                what: "decoder rows",
                expected: y_grid.len(),
                got: xhat.nrows(),
            });
        }
        if xhat.ncols() != z_grid.len() {
            return Err(Error::DimensionMismatch {
                what: "decoder columns",
                expected: z_grid.len(),
                got: xhat.ncols(),
            });
        }
        if let Some(bad) = xhat.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("xhat", format!("non-finite entry {bad}")));
        }
        Ok(Self {
            y_grid,
            z_grid,
            xhat,
        })
    }

    pub fn from_fn(y_grid: Grid1D, z_grid: Grid1D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut xhat = Array2::zeros((y_grid.len(), z_grid.len()));
        for (j, &y) in y_grid.values().iter().enumerate() {
            for (m, &z) in z_grid.values().iter().enumerate() {
                xhat[[j, m]] = f(y, z);
            }
        }
        Self::new(y_grid, z_grid, xhat)
    }

    pub fn y_grid(&self) -> &Grid1D {
        &self.y_grid
    }

    pub fn z_grid(&self) -> &Grid1D {
        &self.z_grid
    }

    pub fn xhat(&self) -> &Array2<f64> {
        &self.xhat
    }

    /// Bilinear interpolation, clamping (y, z) to the grid rectangle.
    pub fn eval(&self, y: f64, z: f64) -> f64 {
        let (jy, ty) = self.y_grid.locate_clamped(y);
        let (mz, tz) = self.z_grid.locate_clamped(z);
        let v00 = self.xhat[[jy, mz]];
        let v01 = self.xhat[[jy, mz + 1]];
        let v10 = self.xhat[[jy + 1, mz]];
        let v11 = self.xhat[[jy + 1, mz + 1]];
        let lo = v00 + tz * (v01 - v00);
        let hi = v10 + tz * (v11 - v10);
        lo + ty * (hi - lo)
    }

    /// Derivative of the table in y: the central difference of neighboring
    /// samples, located at each segment midpoint. Row j holds the slope on
    /// [y_j, y_{j+1}], which is also the exact y-derivative of the bilinear
    /// interpolant there, so gradients built from it match finite
    /// differences of the interpolated costs.
    pub fn y_slopes(&self) -> Array2<f64> {
        let ny = self.y_grid.len();
        let nz = self.z_grid.len();
        let h = self.y_grid.spacing();
        let mut d = Array2::zeros((ny - 1, nz));
        for m in 0..nz {
            for j in 0..ny - 1 {
                d[[j, m]] = (self.xhat[[j + 1, m]] - self.xhat[[j, m]]) / h;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::Grid1D;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(lo: f64, hi: f64, n: usize) -> Grid1D {
        Grid1D::new(lo, hi, n).unwrap()
    }

    #[test]
    fn tabulated_eval_grid_point_identity() {
        let g = grid(-5.0, 5.0, 21);
        let enc = TabulatedEncoder::from_fn(g.clone(), |x| x * x).unwrap();
        for (i, &x) in g.values().iter().enumerate() {
            assert_abs_diff_eq!(enc.eval(x).unwrap(), enc.g_values()[i], epsilon = 0.0);
        }
    }

    #[test]
    fn tabulated_eval_midpoint_average() {
        let g = grid(0.0, 1.0, 3);
        let enc = TabulatedEncoder::new(g, vec![1.0, 3.0, -2.0]).unwrap();
        assert_abs_diff_eq!(enc.eval(0.25).unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(enc.eval(0.75).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn tabulated_eval_linear_table() {
        let g = grid(-5.0, 5.0, 41);
        let enc = TabulatedEncoder::from_fn(g, |x| 2.0 * x).unwrap();
        assert_abs_diff_eq!(enc.eval(1.23).unwrap(), 2.46, epsilon = 1e-13);
    }

    #[test]
    fn tabulated_eval_out_of_domain() {
        let g = grid(-1.0, 1.0, 5);
        let enc = TabulatedEncoder::from_fn(g, |x| x).unwrap();
        assert!(matches!(enc.eval(1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn model_eval_cases() {
        let g = grid(-1.0, 1.0, 5);
        let enc = StructuredEncoder::new(
            vec![
                AffineModel::new(1.0, 0.0).unwrap(),
                AffineModel::new(0.0, 3.5).unwrap(),
                AffineModel::new(2.0, -1.0).unwrap(),
            ],
            Array2::from_shape_fn((3, 5), |(k, _)| if k == 0 { 1.0 } else { 0.0 }),
            g,
        )
        .unwrap();
        assert_abs_diff_eq!(enc.model_eval(0, 0.7).unwrap(), 0.7);
        assert_abs_diff_eq!(enc.model_eval(1, -4.0).unwrap(), 3.5);
        assert_abs_diff_eq!(enc.model_eval(2, 3.0).unwrap(), 5.0);
        assert!(matches!(
            enc.model_eval(3, 0.0),
            Err(Error::BadModelIndex { .. })
        ));
    }

    #[test]
    fn averaged_identical_models() {
        let g = grid(-2.0, 2.0, 9);
        let m = AffineModel::new(1.5, -0.5).unwrap();
        let enc = StructuredEncoder::new(
            vec![m, m],
            Array2::from_elem((2, 9), 0.5),
            g.clone(),
        )
        .unwrap();
        let avg = enc.averaged_encoder();
        for (&x, &gv) in g.values().iter().zip(avg.g_values()) {
            assert_abs_diff_eq!(gv, m.eval(x), epsilon = 1e-15);
        }
    }

    #[test]
    fn averaged_symmetric_constants_cancel() {
        let g = grid(-2.0, 2.0, 9);
        let enc = StructuredEncoder::new(
            vec![
                AffineModel::new(0.0, 3.0).unwrap(),
                AffineModel::new(0.0, -3.0).unwrap(),
            ],
            Array2::from_elem((2, 9), 0.5),
            g,
        )
        .unwrap();
        for &gv in enc.averaged_encoder().g_values() {
            assert_abs_diff_eq!(gv, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn averaged_degenerate_mixture_picks_model() {
        let g = grid(0.0, 1.0, 3);
        let mut assoc = Array2::from_elem((2, 3), 0.5);
        assoc[[0, 1]] = 1.0;
        assoc[[1, 1]] = 0.0;
        let enc = StructuredEncoder::new(
            vec![
                AffineModel::new(2.0, 0.0).unwrap(),
                AffineModel::new(-2.0, 0.0).unwrap(),
            ],
            assoc,
            g.clone(),
        )
        .unwrap();
        let avg = enc.averaged_encoder();
        assert_abs_diff_eq!(avg.g_values()[1], 2.0 * g.values()[1], epsilon = 1e-15);
    }

    #[test]
    fn harden_single_model() {
        let g = grid(-1.0, 1.0, 5);
        let m = AffineModel::new(2.0, 1.0).unwrap();
        let enc = StructuredEncoder::single(m, g.clone());
        let costs = Array2::from_elem((1, 5), 0.3);
        let hard = enc.harden(&costs).unwrap();
        for (&x, &gv) in g.values().iter().zip(hard.g_values()) {
            assert_abs_diff_eq!(gv, m.eval(x), epsilon = 0.0);
        }
    }

    #[test]
    fn harden_uniform_argmin_row() {
        let g = grid(-1.0, 1.0, 5);
        let models = vec![
            AffineModel::new(1.0, 0.0).unwrap(),
            AffineModel::new(-1.0, 0.0).unwrap(),
        ];
        let enc = StructuredEncoder::new(models, Array2::from_elem((2, 5), 0.5), g.clone()).unwrap();
        let mut costs = Array2::zeros((2, 5));
        costs.row_mut(0).fill(2.0);
        costs.row_mut(1).fill(1.0);
        let hard = enc.harden(&costs).unwrap();
        for (&x, &gv) in g.values().iter().zip(hard.g_values()) {
            assert_abs_diff_eq!(gv, -x, epsilon = 0.0);
        }
    }

    #[test]
    fn harden_tie_breaks_to_lowest_index() {
        let g = grid(-1.0, 1.0, 3);
        let models = vec![
            AffineModel::new(1.0, 0.0).unwrap(),
            AffineModel::new(5.0, 0.0).unwrap(),
            AffineModel::new(-1.0, 0.0).unwrap(),
        ];
        let assoc = Array2::from_elem((3, 3), 1.0 / 3.0);
        let enc = StructuredEncoder::new(models, assoc, g.clone()).unwrap();
        // Models 0 and 2 tie at cost 1; model 1 is worse.
        let mut costs = Array2::from_elem((3, 3), 1.0);
        costs.row_mut(1).fill(7.0);
        let hard = enc.harden(&costs).unwrap();
        for (&x, &gv) in g.values().iter().zip(hard.g_values()) {
            assert_abs_diff_eq!(gv, x, epsilon = 0.0);
        }
    }

    #[test]
    fn decoder_eval_grid_point_identity() {
        let yg = grid(-4.0, 4.0, 17);
        let zg = grid(-3.0, 3.0, 13);
        let dec = DecoderTable::from_fn(yg.clone(), zg.clone(), |y, z| y * z + 0.3 * y).unwrap();
        for (j, &y) in yg.values().iter().enumerate() {
            for (m, &z) in zg.values().iter().enumerate() {
                assert_abs_diff_eq!(dec.eval(y, z), dec.xhat()[[j, m]], epsilon = 0.0);
            }
        }
    }

    #[test]
    fn decoder_eval_linear_in_y() {
        let yg = grid(-4.0, 4.0, 17);
        let zg = grid(-3.0, 3.0, 13);
        let dec = DecoderTable::from_fn(yg, zg, |y, _| y / 2.0).unwrap();
        for z in [-2.7, 0.0, 1.1] {
            assert_abs_diff_eq!(dec.eval(1.0, z), 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn decoder_eval_clamps_out_of_range() {
        let yg = grid(-2.0, 2.0, 9);
        let zg = grid(-2.0, 2.0, 9);
        let dec = DecoderTable::from_fn(yg, zg, |y, z| y + z).unwrap();
        assert_abs_diff_eq!(dec.eval(10.0, 0.0), dec.eval(2.0, 0.0), epsilon = 0.0);
        assert_abs_diff_eq!(dec.eval(-10.0, 1.0), dec.eval(-2.0, 1.0), epsilon = 0.0);
        assert_abs_diff_eq!(dec.eval(0.5, 99.0), dec.eval(0.5, 2.0), epsilon = 0.0);
    }

    #[test]
    fn hard_average_equals_harden_with_consistent_costs() {
        // A 0/1 association matrix and a cost matrix whose argmin matches it
        // describe the same deterministic encoder two ways.
        let g = grid(-1.0, 1.0, 7);
        let models = vec![
            AffineModel::new(1.0, 0.2).unwrap(),
            AffineModel::new(-0.7, 0.0).unwrap(),
        ];
        let mut assoc = Array2::zeros((2, 7));
        let mut costs = Array2::zeros((2, 7));
        for i in 0..7 {
            let pick = if i % 3 == 0 { 1 } else { 0 };
            assoc[[pick, i]] = 1.0;
            costs[[pick, i]] = 1.0;
            costs[[1 - pick, i]] = 2.0;
        }
        let enc = StructuredEncoder::new(models, assoc, g).unwrap();
        let avg = enc.averaged_encoder();
        let hard = enc.harden(&costs).unwrap();
        for (a, h) in avg.g_values().iter().zip(hard.g_values()) {
            assert_abs_diff_eq!(a, h, epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn bilinear_reproduces_affine_tables(
            c0 in -2.0f64..2.0,
            cy in -2.0f64..2.0,
            cz in -2.0f64..2.0,
            y in -3.9f64..3.9,
            z in -2.9f64..2.9,
        ) {
            let yg = Grid1D::new(-4.0, 4.0, 23).unwrap();
            let zg = Grid1D::new(-3.0, 3.0, 11).unwrap();
            let dec = DecoderTable::from_fn(yg, zg, |yv, zv| c0 + cy * yv + cz * zv).unwrap();
            let expect = c0 + cy * y + cz * z;
            prop_assert!((dec.eval(y, z) - expect).abs() <= 1e-12);
        }

        #[test]
        fn linear_interp_reproduces_affine_tables(
            c0 in -2.0f64..2.0,
            c1 in -2.0f64..2.0,
            x in -4.9f64..4.9,
        ) {
            let g = Grid1D::new(-5.0, 5.0, 31).unwrap();
            let enc = TabulatedEncoder::from_fn(g, |xv| c0 + c1 * xv).unwrap();
            prop_assert!((enc.eval(x).unwrap() - (c0 + c1 * x)).abs() <= 1e-12);
        }

        #[test]
        fn harden_invariant_under_per_column_shift(
            seed in 0u64..512,
            shift_scale in -5.0f64..5.0,
        ) {
            let g = Grid1D::new(-1.0, 1.0, 9).unwrap();
            let models = vec![
                AffineModel::new(1.0, 0.0).unwrap(),
                AffineModel::new(-1.0, 0.5).unwrap(),
                AffineModel::new(0.3, -0.2).unwrap(),
            ];
            let assoc = Array2::from_elem((3, 9), 1.0 / 3.0);
            let enc = StructuredEncoder::new(models, assoc, g).unwrap();
            let costs = Array2::from_shape_fn((3, 9), |(k, i)| {
                (((seed as f64) + 3.7 * k as f64 + 1.3 * i as f64).sin() * 10.0).fract()
            });
            let mut shifted = costs.clone();
            for i in 0..9 {
                let delta = shift_scale * ((i as f64) * 0.9 + seed as f64).cos();
                for k in 0..3 {
                    shifted[[k, i]] += delta;
                }
            }
            let hard = enc.harden(&costs).unwrap();
            let hard_shifted = enc.harden(&shifted).unwrap();
            prop_assert_eq!(hard.g_values(), hard_shifted.g_values());
        }
    }
}
