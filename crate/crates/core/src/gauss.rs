//! Gaussian densities, uniform grids, and trapezoidal quadrature.
//!
//! Every expectation downstream (decoder tables, distortion and power
//! integrals, gradients) is evaluated by quadrature over the grids defined
//! here. All four variables share one discretization convention: uniform
//! grids truncated at five standard deviations, integrated with the
//! trapezoidal rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint Gaussian statistics of the source X, side information Z, and
/// channel noise N, plus the transmit power budget.
///
/// X and Z are zero-mean jointly Gaussian with correlation `rho`; N is
/// zero-mean Gaussian independent of both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceChannelModel {
    /// Variance of the source X.
    pub sigma_x2: f64,
    /// Variance of the side information Z.
    pub sigma_z2: f64,
    /// Correlation coefficient of (X, Z).
    pub rho: f64,
    /// Variance of the additive channel noise N.
    pub sigma_n2: f64,
    /// Transmit power budget P.
    pub power_limit: f64,
}

impl SourceChannelModel {
    pub fn new(
        sigma_x2: f64,
        sigma_z2: f64,
        rho: f64,
        sigma_n2: f64,
        power_limit: f64,
    ) -> Result<Self> {
        let model = Self {
            sigma_x2,
            sigma_z2,
            rho,
            sigma_n2,
            power_limit,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("sigma_x2", self.sigma_x2),
            ("sigma_z2", self.sigma_z2),
            ("sigma_n2", self.sigma_n2),
            ("power_limit", self.power_limit),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::invalid(name, format!("must be positive, got {value}")));
            }
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::invalid(
                "rho",
                format!("must satisfy |rho| <= 1, got {}", self.rho),
            ));
        }
        Ok(())
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x2.sqrt()
    }

    pub fn sigma_z(&self) -> f64 {
        self.sigma_z2.sqrt()
    }

    pub fn sigma_n(&self) -> f64 {
        self.sigma_n2.sqrt()
    }

    /// Slope of E[Z | X = x] in x.
    pub fn side_info_slope(&self) -> f64 {
        self.rho * (self.sigma_z2 / self.sigma_x2).sqrt()
    }

    /// Conditional variance Var(Z | X).
    pub fn side_info_variance(&self) -> f64 {
        self.sigma_z2 * (1.0 - self.rho * self.rho)
    }

    /// Prior conditional mean E[X | Z = z], used as the decoder fallback
    /// where the channel output carries no evidence.
    pub fn prior_mean_given_z(&self, z: f64) -> f64 {
        self.rho * (self.sigma_x2 / self.sigma_z2).sqrt() * z
    }
}

/// Scalar Gaussian density with the given mean and variance.
pub fn gaussian_pdf(x: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::invalid(
            "variance",
            format!("must be positive, got {variance}"),
        ));
    }
    let d = x - mean;
    Ok((2.0 * std::f64::consts::PI * variance).sqrt().recip() * (-d * d / (2.0 * variance)).exp())
}

/// Density of Z given X = x: Gaussian with mean `rho * sqrt(sigma_z2 / sigma_x2) * x`
/// and variance `sigma_z2 * (1 - rho^2)`.
pub fn side_info_conditional_pdf(z: f64, x: f64, model: &SourceChannelModel) -> Result<f64> {
    model.validate()?;
    if model.rho.abs() >= 1.0 {
        return Err(Error::DegenerateConditional);
    }
    gaussian_pdf(z, model.side_info_slope() * x, model.side_info_variance())
}

/// Serialized form of [`Grid1D`]; the sample values are rebuilt on load.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct GridSpec {
    lo: f64,
    hi: f64,
    n: usize,
}

/// A uniform grid of `n` points on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n: usize,
    values: Vec<f64>,
}

impl TryFrom<GridSpec> for Grid1D {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid1D::new(spec.lo, spec.hi, spec.n)
    }
}

impl From<Grid1D> for GridSpec {
    fn from(grid: Grid1D) -> Self {
        GridSpec {
            lo: grid.lo,
            hi: grid.hi,
            n: grid.n,
        }
    }
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("need at least 2 points, got {n}")));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("lo/hi", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let mut values: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
        // Pin the endpoint so the grid covers [lo, hi] exactly.
        values[n - 1] = hi;
        Ok(Self { lo, hi, n, values })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Trapezoidal quadrature weights: `h` inside, `h/2` at the endpoints.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n];
        w[0] = 0.5 * h;
        w[self.n - 1] = 0.5 * h;
        w
    }

    /// Segment index and fractional offset for `x`, clamped to the grid.
    pub(crate) fn locate_clamped(&self, x: f64) -> (usize, f64) {
        if x <= self.lo {
            return (0, 0.0);
        }
        if x >= self.hi {
            return (self.n - 2, 1.0);
        }
        let h = self.spacing();
        let pos = (x - self.lo) / h;
        let mut idx = pos as usize;
        if idx > self.n - 2 {
            idx = self.n - 2;
        }
        let frac = (x - self.values[idx]) / h;
        (idx, frac.clamp(0.0, 1.0))
    }
}

/// Trapezoidal rule over a uniform grid.
pub fn trapezoid(values: &[f64], grid: &Grid1D) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "trapezoid values",
            expected: grid.len(),
            got: values.len(),
        });
    }
    let h = grid.spacing();
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    Ok(h * (inner + 0.5 * (values[0] + values[values.len() - 1])))
}

/// Grid point counts, all overridable; the defaults keep one full cost
/// evaluation at K = 16 within a comfortable flop budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCounts {
    pub nx: usize,
    pub nz: usize,
    pub ny: usize,
    pub nn: usize,
}

impl Default for GridCounts {
    fn default() -> Self {
        Self {
            nx: 201,
            nz: 65,
            ny: 97,
            nn: 49,
        }
    }
}

/// The four grids shared by every quadrature in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSet {
    pub x_grid: Grid1D,
    pub z_grid: Grid1D,
    pub y_grid: Grid1D,
    pub n_grid: Grid1D,
}

/// Grids at the default point counts: x, z, n at +/- 5 sigma and y at
/// +/- (encoder_amplitude + 5 sigma_N).
pub fn default_grids(model: &SourceChannelModel, encoder_amplitude: f64) -> Result<GridSet> {
    grids_with_counts(model, encoder_amplitude, GridCounts::default())
}

/// Same spans as [`default_grids`] with explicit point counts.
pub fn grids_with_counts(
    model: &SourceChannelModel,
    encoder_amplitude: f64,
    counts: GridCounts,
) -> Result<GridSet> {
    model.validate()?;
    if !(encoder_amplitude > 0.0) || !encoder_amplitude.is_finite() {
        return Err(Error::invalid(
            "encoder_amplitude",
            format!("must be positive, got {encoder_amplitude}"),
        ));
    }
    let xr = 5.0 * model.sigma_x();
    let zr = 5.0 * model.sigma_z();
    let nr = 5.0 * model.sigma_n();
    let yr = encoder_amplitude + nr;
    Ok(GridSet {
        x_grid: Grid1D::new(-xr, xr, counts.nx)?,
        z_grid: Grid1D::new(-zr, zr, counts.nz)?,
        y_grid: Grid1D::new(-yr, yr, counts.ny)?,
        n_grid: Grid1D::new(-nr, nr, counts.nn)?,
    })
}
