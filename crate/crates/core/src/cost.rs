//! The cost engine: Bayes decoder updates, distortion/power/Lagrangian
//! evaluation, association entropy, free energy, Gibbs associations, and the
//! functional and parameter gradients driving the optimizers.
//!
//! All expectations are evaluated by nested trapezoidal quadrature on the
//! shared [`GridSet`]. The decoder is only ever known as a table, so its
//! derivative in the channel output is read off the table itself: the
//! central difference of neighboring samples, i.e. the exact slope of the
//! interpolated decoder on each y segment. Gradients built this way match
//! finite differences of the discretized costs.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::codec::{DecoderTable, StructuredEncoder, TabulatedEncoder};
use crate::error::{Error, Result};
use crate::gauss::{GridSet, SourceChannelModel};

/// Evidence below this value marks a (y, z) cell as uninformative; the
/// decoder falls back to the prior conditional mean E[X | z] there.
const EVIDENCE_FLOOR: f64 = 1e-300;

/// Costs of one (encoder, decoder, lambda, temperature) configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Mean squared error D, in source units squared.
    pub distortion: f64,
    /// Transmit power actually used, in channel units squared.
    pub power: f64,
    /// Lagrangian J = D + lambda * power.
    pub lagrangian: f64,
    /// Association entropy H(K|X) in nats.
    pub entropy: f64,
    /// Free energy F = J - temperature * H.
    pub free_energy: f64,
    /// Power multiplier lambda.
    pub lambda: f64,
    /// Annealing temperature T.
    pub temperature: f64,
}

impl CostReport {
    /// Assemble a report; the Lagrangian and free energy identities hold by
    /// construction.
    pub fn from_parts(
        distortion: f64,
        power: f64,
        entropy: f64,
        lambda: f64,
        temperature: f64,
    ) -> Self {
        let lagrangian = distortion + lambda * power;
        Self {
            distortion,
            power,
            lagrangian,
            entropy,
            free_energy: lagrangian - temperature * entropy,
            lambda,
            temperature,
        }
    }
}

/// Either encoder representation, for operations defined on both.
#[derive(Debug, Clone, Copy)]
pub enum EncoderRef<'a> {
    Tabulated(&'a TabulatedEncoder),
    Structured(&'a StructuredEncoder),
}

impl<'a> From<&'a TabulatedEncoder> for EncoderRef<'a> {
    fn from(enc: &'a TabulatedEncoder) -> Self {
        EncoderRef::Tabulated(enc)
    }
}

impl<'a> From<&'a StructuredEncoder> for EncoderRef<'a> {
    fn from(enc: &'a StructuredEncoder) -> Self {
        EncoderRef::Structured(enc)
    }
}

/// Precomputed densities and quadrature weights for one (model, grids) pair.
pub(crate) struct QuadCtx {
    /// Source grid samples.
    pub x: Vec<f64>,
    /// Trapezoid weights on the x grid.
    pub wx: Vec<f64>,
    /// Source density f_X at each grid point.
    pub fx: Vec<f64>,
    /// wz_pz[i][m] = w_m * f_{Z|X}(z_m | x_i), trapezoid weight included.
    pub wz_pz: Array2<f64>,
    /// wn_pn[j] = w_j * f_N(n_j).
    pub wn_pn: Vec<f64>,
    /// E[X | z_m] per z grid point, the decoder fallback.
    pub prior_mean_z: Vec<f64>,
    /// Gaussian noise density parameters (normalization, exponent scale).
    pub noise_norm: f64,
    pub noise_q: f64,
    pub sigma_n: f64,
}

impl QuadCtx {
    pub fn new(model: &SourceChannelModel, grids: &GridSet) -> Result<Self> {
        model.validate()?;
        if model.rho.abs() >= 1.0 {
            return Err(Error::DegenerateConditional);
        }
        let x = grids.x_grid.values().to_vec();
        let wx = grids.x_grid.trapezoid_weights();

        let fx_norm = (2.0 * std::f64::consts::PI * model.sigma_x2).sqrt().recip();
        let fx_q = 0.5 / model.sigma_x2;
        let fx: Vec<f64> = x.iter().map(|&xi| fx_norm * (-fx_q * xi * xi).exp()).collect();

        let cond_var = model.side_info_variance();
        let cond_slope = model.side_info_slope();
        let cz_norm = (2.0 * std::f64::consts::PI * cond_var).sqrt().recip();
        let cz_q = 0.5 / cond_var;
        let wz = grids.z_grid.trapezoid_weights();
        let zs = grids.z_grid.values();
        let mut wz_pz = Array2::zeros((x.len(), zs.len()));
        for (i, &xi) in x.iter().enumerate() {
            let mean = cond_slope * xi;
            for (m, &zm) in zs.iter().enumerate() {
                let d = zm - mean;
                wz_pz[[i, m]] = wz[m] * cz_norm * (-cz_q * d * d).exp();
            }
        }

        let noise_norm = (2.0 * std::f64::consts::PI * model.sigma_n2).sqrt().recip();
        let noise_q = 0.5 / model.sigma_n2;
        let wn = grids.n_grid.trapezoid_weights();
        let wn_pn: Vec<f64> = grids
            .n_grid
            .values()
            .iter()
            .zip(&wn)
            .map(|(&nj, &wj)| wj * noise_norm * (-noise_q * nj * nj).exp())
            .collect();

        let prior_mean_z = zs.iter().map(|&zm| model.prior_mean_given_z(zm)).collect();

        Ok(Self {
            x,
            wx,
            fx,
            wz_pz,
            wn_pn,
            prior_mean_z,
            noise_norm,
            noise_q,
            sigma_n: model.sigma_n(),
        })
    }
}

/// Local-model outputs over the x grid, one row per model. A tabulated
/// encoder contributes a single row.
pub(crate) fn model_outputs(enc: EncoderRef<'_>, grids: &GridSet) -> Result<(Array2<f64>, Option<Array2<f64>>)> {
    match enc {
        EncoderRef::Tabulated(t) => {
            if t.x_grid() != &grids.x_grid {
                return Err(Error::invalid("x_grid", "encoder grid differs from quadrature grid"));
            }
            let n = t.g_values().len();
            let gx = Array2::from_shape_vec((1, n), t.g_values().to_vec())
                .expect("row shape");
            Ok((gx, None))
        }
        EncoderRef::Structured(s) => {
            if s.x_grid() != &grids.x_grid {
                return Err(Error::invalid("x_grid", "encoder grid differs from quadrature grid"));
            }
            let k = s.num_models();
            let n = s.x_grid().len();
            let mut gx = Array2::zeros((k, n));
            for (ki, m) in s.models().iter().enumerate() {
                for (i, &xi) in s.x_grid().values().iter().enumerate() {
                    gx[[ki, i]] = m.eval(xi);
                }
            }
            Ok((gx, Some(s.assoc().clone())))
        }
    }
}

fn check_coverage(enc: EncoderRef<'_>, grids: &GridSet, sigma_n: f64) -> Result<()> {
    let (glo, ghi) = match enc {
        EncoderRef::Tabulated(t) => t.output_range(),
        EncoderRef::Structured(s) => s.effective_output_range(),
    };
    let needed_lo = glo - 5.0 * sigma_n;
    let needed_hi = ghi + 5.0 * sigma_n;
    let slack = 1e-9 * (1.0 + needed_hi.abs().max(needed_lo.abs()));
    if grids.y_grid.lo() > needed_lo + slack || grids.y_grid.hi() < needed_hi - slack {
        return Err(Error::GridCoverage {
            needed_lo,
            needed_hi,
            y_lo: grids.y_grid.lo(),
            y_hi: grids.y_grid.hi(),
        });
    }
    Ok(())
}

/// Optimal decoder for a fixed encoder: the conditional mean E[X | y, z],
/// tabulated on the (y, z) grid. For a structured encoder the channel
/// likelihood is the association-weighted mixture over local models.
pub fn bayes_decoder(
    enc: EncoderRef<'_>,
    model: &SourceChannelModel,
    grids: &GridSet,
) -> Result<DecoderTable> {
    let ctx = QuadCtx::new(model, grids)?;
    check_coverage(enc, grids, ctx.sigma_n)?;
    let (gx, assoc) = model_outputs(enc, grids)?;

    let nx = ctx.x.len();
    let ny = grids.y_grid.len();
    let nz = grids.z_grid.len();

    // Evidence factors per (z, x), transposed so the x loop is contiguous:
    // den_w[m][i] = wx_i f_X(x_i) f_{Z|X}(z_m | x_i), num_w adds the x_i factor.
    let mut den_w = Array2::zeros((nz, nx));
    let mut num_w = Array2::zeros((nz, nx));
    for i in 0..nx {
        let base = ctx.wx[i] * ctx.fx[i];
        for m in 0..nz {
            let v = base * ctx.wz_pz[[i, m]];
            den_w[[m, i]] = v;
            num_w[[m, i]] = v * ctx.x[i];
        }
    }

    let mut xhat = Array2::zeros((ny, nz));
    let mut likelihood = vec![0.0; nx];
    for (j, &yj) in grids.y_grid.values().iter().enumerate() {
        // p(y_j | x_i): single Gaussian for a table, mixture for local models.
        match &assoc {
            None => {
                for i in 0..nx {
                    let d = yj - gx[[0, i]];
                    likelihood[i] = ctx.noise_norm * (-ctx.noise_q * d * d).exp();
                }
            }
            Some(p) => {
                likelihood.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..gx.nrows() {
                    for i in 0..nx {
                        let pk = p[[k, i]];
                        if pk > 0.0 {
                            let d = yj - gx[[k, i]];
                            likelihood[i] += pk * ctx.noise_norm * (-ctx.noise_q * d * d).exp();
                        }
                    }
                }
            }
        }
        for m in 0..nz {
            let mut num = 0.0;
            let mut den = 0.0;
            let dw = den_w.row(m);
            let nw = num_w.row(m);
            for i in 0..nx {
                num += nw[i] * likelihood[i];
                den += dw[i] * likelihood[i];
            }
            xhat[[j, m]] = if den < EVIDENCE_FLOOR {
                ctx.prior_mean_z[m]
            } else {
                num / den
            };
        }
    }
    DecoderTable::new(grids.y_grid.clone(), grids.z_grid.clone(), xhat)
}

/// Per-model distortion terms, and optionally the slope integrals used by
/// the gradients.
pub(crate) struct DistortionPass {
    /// d[k][i] = integral of (x_i - w(g_k(x_i)+n, z))^2 over noise and side info.
    pub(crate) d: Array2<f64>,
    /// s[k][i] = integral of w'(g_k(x_i)+n, z) * (x_i - w(..)) over the same.
    pub(crate) s: Option<Array2<f64>>,
}

pub(crate) fn distortion_pass(
    gx: &Array2<f64>,
    dec: &DecoderTable,
    grids: &GridSet,
    ctx: &QuadCtx,
    with_slope: bool,
) -> Result<DistortionPass> {
    distortion_pass_windowed(gx, dec, grids, ctx, with_slope, None)
}

/// As [`distortion_pass`], but optionally restricted to per-model column
/// ranges; cells outside a model's range are left at zero.
pub(crate) fn distortion_pass_windowed(
    gx: &Array2<f64>,
    dec: &DecoderTable,
    grids: &GridSet,
    ctx: &QuadCtx,
    with_slope: bool,
    ranges: Option<&[(usize, usize)]>,
) -> Result<DistortionPass> {
    if dec.z_grid() != &grids.z_grid {
        return Err(Error::invalid(
            "decoder z grid",
            "decoder table must share the quadrature z grid",
        ));
    }
    let k_count = gx.nrows();
    let nx = gx.ncols();
    let nz = grids.z_grid.len();
    let slopes = if with_slope { Some(dec.y_slopes()) } else { None };
    let xhat = dec.xhat();
    let (y_lo, y_hi) = (dec.y_grid().lo(), dec.y_grid().hi());
    let mut d = Array2::zeros((k_count, nx));
    let mut s = if with_slope {
        Some(Array2::zeros((k_count, nx)))
    } else {
        None
    };

    for k in 0..k_count {
        let (col_lo, col_hi) = ranges.map_or((0, nx), |r| r[k]);
        for i in col_lo..col_hi {
            let xi = ctx.x[i];
            let y0 = gx[[k, i]];
            let wz = ctx.wz_pz.row(i);
            let wz = wz.as_slice().expect("contiguous row");
            let mut acc_d = 0.0;
            let mut acc_s = 0.0;
            for (j, &wn) in ctx.wn_pn.iter().enumerate() {
                let y = y0 + grids.n_grid.values()[j];
                let (jy, ty) = dec.y_grid().locate_clamped(y);
                let r0 = xhat.row(jy);
                let r0 = r0.as_slice().expect("contiguous row");
                let r1 = xhat.row(jy + 1);
                let r1 = r1.as_slice().expect("contiguous row");
                match &slopes {
                    None => {
                        let mut inner = 0.0;
                        for m in 0..nz {
                            let w = r0[m] + ty * (r1[m] - r0[m]);
                            let e = xi - w;
                            inner += wz[m] * e * e;
                        }
                        acc_d += wn * inner;
                    }
                    Some(sl) => {
                        // Clamped evaluations are flat in y.
                        let clamped = y <= y_lo || y >= y_hi;
                        let sj = sl.row(jy);
                        let sj = sj.as_slice().expect("contiguous row");
                        let mut inner_d = 0.0;
                        let mut inner_s = 0.0;
                        for m in 0..nz {
                            let w = r0[m] + ty * (r1[m] - r0[m]);
                            let e = xi - w;
                            inner_d += wz[m] * e * e;
                            inner_s += wz[m] * e * sj[m];
                        }
                        acc_d += wn * inner_d;
                        if !clamped {
                            acc_s += wn * inner_s;
                        }
                    }
                }
            }
            d[[k, i]] = acc_d;
            if let Some(sm) = s.as_mut() {
                sm[[k, i]] = acc_s;
            }
        }
    }
    Ok(DistortionPass { d, s })
}

/// Per-point Lagrangian costs J_k(x_i) = D_k(x_i) + lambda * g_k(x_i)^2.
pub fn per_model_costs(
    enc: &StructuredEncoder,
    dec: &DecoderTable,
    model: &SourceChannelModel,
    grids: &GridSet,
    lambda: f64,
) -> Result<Array2<f64>> {
    let ctx = QuadCtx::new(model, grids)?;
    let (gx, _) = model_outputs(enc.into(), grids)?;
    let pass = distortion_pass(&gx, dec, grids, &ctx, false)?;
    let mut costs = pass.d;
    for k in 0..gx.nrows() {
        for i in 0..gx.ncols() {
            let g = gx[[k, i]];
            costs[[k, i]] += lambda * g * g;
        }
    }
    Ok(costs)
}

/// Association entropy H(K|X) in nats, with the convention 0 ln 0 = 0.
pub(crate) fn weighted_entropy(assoc: &Array2<f64>, ctx: &QuadCtx) -> f64 {
    let mut h = 0.0;
    for i in 0..assoc.ncols() {
        let mut col = 0.0;
        for k in 0..assoc.nrows() {
            let p = assoc[[k, i]];
            if p > 0.0 {
                col -= p * p.ln();
            }
        }
        h += ctx.wx[i] * ctx.fx[i] * col;
    }
    h
}

/// Full cost evaluation of a structured encoder against a decoder table.
pub fn evaluate_costs(
    enc: &StructuredEncoder,
    dec: &DecoderTable,
    model: &SourceChannelModel,
    grids: &GridSet,
    lambda: f64,
    temperature: f64,
) -> Result<CostReport> {
    let ctx = QuadCtx::new(model, grids)?;
    let (gx, assoc) = model_outputs(enc.into(), grids)?;
    let assoc = assoc.expect("structured encoder has associations");
    let pass = distortion_pass(&gx, dec, grids, &ctx, false)?;
    let mut distortion = 0.0;
    let mut power = 0.0;
    for i in 0..gx.ncols() {
        let wf = ctx.wx[i] * ctx.fx[i];
        let mut d_i = 0.0;
        let mut p_i = 0.0;
        for k in 0..gx.nrows() {
            let pk = assoc[[k, i]];
            let g = gx[[k, i]];
            d_i += pk * pass.d[[k, i]];
            p_i += pk * g * g;
        }
        distortion += wf * d_i;
        power += wf * p_i;
    }
    let entropy = weighted_entropy(&assoc, &ctx);
    Ok(CostReport::from_parts(
        distortion,
        power,
        entropy,
        lambda,
        temperature,
    ))
}

/// Cost evaluation of a deterministic tabulated encoder (entropy is zero).
pub fn evaluate_tabulated_costs(
    enc: &TabulatedEncoder,
    dec: &DecoderTable,
    model: &SourceChannelModel,
    grids: &GridSet,
    lambda: f64,
) -> Result<CostReport> {
    let ctx = QuadCtx::new(model, grids)?;
    let (gx, _) = model_outputs(enc.into(), grids)?;
    let pass = distortion_pass(&gx, dec, grids, &ctx, false)?;
    let mut distortion = 0.0;
    let mut power = 0.0;
    for i in 0..gx.ncols() {
        let wf = ctx.wx[i] * ctx.fx[i];
        let g = gx[[0, i]];
        distortion += wf * pass.d[[0, i]];
        power += wf * g * g;
    }
    Ok(CostReport::from_parts(distortion, power, 0.0, lambda, 0.0))
}

/// Gibbs association probabilities for the given per-point costs at
/// temperature T. Each column is a numerically stable softmax of
/// -J_k(x_i)/T; T = 0 returns the hard argmin with lowest-index tie-break.
pub fn gibbs_probs(costs: &Array2<f64>, temperature: f64) -> Result<Array2<f64>> {
    if !(temperature >= 0.0) {
        return Err(Error::invalid(
            "temperature",
            format!("must be non-negative, got {temperature}"),
        ));
    }
    let (k_count, n) = costs.dim();
    let mut probs = Array2::zeros((k_count, n));
    for i in 0..n {
        let mut min_cost = f64::INFINITY;
        let mut argmin = 0;
        for k in 0..k_count {
            if costs[[k, i]] < min_cost {
                min_cost = costs[[k, i]];
                argmin = k;
            }
        }
        if temperature == 0.0 {
            probs[[argmin, i]] = 1.0;
            continue;
        }
        let mut sum = 0.0;
        for k in 0..k_count {
            let e = (-(costs[[k, i]] - min_cost) / temperature).exp();
            probs[[k, i]] = e;
            sum += e;
        }
        for k in 0..k_count {
            probs[[k, i]] /= sum;
        }
    }
    Ok(probs)
}

/// Gradient of the Lagrangian functional with respect to the encoder table,
/// one value per grid point. This is the exact derivative of the discretized
/// cost: d/dg(x) of [D + lambda P] with the decoder held fixed,
///
/// grad(x) = 2 lambda f_X(x) g(x)
///         - 2 integral of w'(g(x)+n, z) [x - w(g(x)+n, z)] f_N(n) f_{X,Z}(x,z) dn dz,
///
/// with w' read from the decoder table's per-segment differences.
pub fn functional_gradient(
    enc: &TabulatedEncoder,
    dec: &DecoderTable,
    model: &SourceChannelModel,
    grids: &GridSet,
    lambda: f64,
) -> Result<Vec<f64>> {
    let ctx = QuadCtx::new(model, grids)?;
    let (gx, _) = model_outputs(enc.into(), grids)?;
    let pass = distortion_pass(&gx, dec, grids, &ctx, true)?;
    let slope = pass.s.expect("slope requested");
    let grad = (0..gx.ncols())
        .map(|i| {
            let g = gx[[0, i]];
            ctx.fx[i] * (2.0 * lambda * g - 2.0 * slope[[0, i]])
        })
        .collect();
    Ok(grad)
}

/// Free-energy gradient with respect to each local model's (a, b), with the
/// associations and decoder held fixed:
///
/// dF/d theta_k = integral of f_X(x) p(k|x) d[D_k(x) + lambda g_k(x)^2]/d theta_k dx.
pub fn affine_param_gradient(
    enc: &StructuredEncoder,
    dec: &DecoderTable,
    model: &SourceChannelModel,
    grids: &GridSet,
    lambda: f64,
) -> Result<Vec<(f64, f64)>> {
    let ctx = QuadCtx::new(model, grids)?;
    let (gx, assoc) = model_outputs(enc.into(), grids)?;
    let assoc = assoc.expect("structured encoder has associations");
    let pass = distortion_pass(&gx, dec, grids, &ctx, true)?;
    let slope = pass.s.expect("slope requested");
    let mut grads = Vec::with_capacity(gx.nrows());
    for k in 0..gx.nrows() {
        let mut da = 0.0;
        let mut db = 0.0;
        for i in 0..gx.ncols() {
            let weight = ctx.wx[i] * ctx.fx[i] * assoc[[k, i]];
            // d[D_k + lambda g_k^2]/dg, then chain rule through g_k = a x + b.
            let dj_dg = -2.0 * slope[[k, i]] + 2.0 * lambda * gx[[k, i]];
            da += weight * dj_dg * ctx.x[i];
            db += weight * dj_dg;
        }
        grads.push((da, db));
    }
    Ok(grads)
}

/// Association entropy of a structured encoder under the source density.
pub fn association_entropy(
    enc: &StructuredEncoder,
    model: &SourceChannelModel,
    grids: &GridSet,
) -> Result<f64> {
    let ctx = QuadCtx::new(model, grids)?;
    if enc.x_grid() != &grids.x_grid {
        return Err(Error::invalid("x_grid", "encoder grid differs from quadrature grid"));
    }
    Ok(weighted_entropy(enc.assoc(), &ctx))
}
