//! Nonlinear least squares: a damped Gauss-Newton core with
//! finite-difference Jacobians, plus the two fits the data pipeline needs
//! (the sqrt(N) normal-mode law per polarization channel, and the
//! full-spectrum population fit).

use std::collections::BTreeMap;

use crate::gpe::u0_empirical;
use crate::hamiltonian::{enumerate_basis, solve_at, Channel, Populations, SystemConfig};
use crate::{Error, Result};

/// One fit parameter with box bounds.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: f64,
    pub min: f64,
    pub max: f64,
}

impl Param {
    pub fn new(name: &str, value: f64, min: f64, max: f64) -> Self {
        Param {
            name: name.to_string(),
            value,
            min,
            max,
        }
    }

    pub fn free(name: &str, value: f64) -> Self {
        Param::new(name, value, f64::NEG_INFINITY, f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gradient_tol: 1e-9,
            step_tol: 1e-12,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// The normal matrix stayed singular even under heavy damping; the best
    /// point found so far is returned.
    SingularNormalMatrix,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Standard errors from the normal matrix and the residual variance.
    pub std_errors: Vec<f64>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub status: FitStatus,
}

impl FitResult {
    pub fn value_of(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Solve the symmetric positive-definite system A x = b by Cholesky.
fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Some(x)
}

fn clamp_params(params: &[Param], x: &mut [f64]) {
    for (xi, p) in x.iter_mut().zip(params) {
        *xi = xi.clamp(p.min, p.max);
    }
}

/// Central finite-difference Jacobian of the residual vector.
fn jacobian<F>(
    residual: &F,
    x: &[f64],
    params: &[Param],
    n_res: usize,
    scale: f64,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n_par = x.len();
    let mut jac = vec![vec![0.0f64; n_par]; n_res];
    for p in 0..n_par {
        let h = scale * x[p].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[p] = (x[p] + h).min(params[p].max);
        xm[p] = (x[p] - h).max(params[p].min);
        let span = xp[p] - xm[p];
        if span == 0.0 {
            continue;
        }
        let rp = residual(&xp)?;
        let rm = residual(&xm)?;
        for i in 0..n_res {
            jac[i][p] = (rp[i] - rm[i]) / span;
        }
    }
    Ok(jac)
}

/// Relative step used for the production Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;

/// Damped Gauss-Newton iteration with projected box bounds. The damped
/// objective decreases monotonically: steps are only accepted when the
/// weighted cost drops.
pub fn least_squares<F>(
    residual: F,
    params: &[Param],
    weights: Option<&[f64]>,
    options: &FitOptions,
) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if params.is_empty() {
        return Err(Error::fit("no parameters to fit"));
    }
    for p in params {
        if !(p.value >= p.min && p.value <= p.max) {
            return Err(Error::fit(format!(
                "initial value {} of {} violates its bounds [{}, {}]",
                p.value, p.name, p.min, p.max
            )));
        }
    }
    let mut x: Vec<f64> = params.iter().map(|p| p.value).collect();
    let r0 = residual(&x)?;
    let n_res = r0.len();
    if n_res < params.len() {
        return Err(Error::fit(format!(
            "{} observations cannot constrain {} parameters",
            n_res,
            params.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != n_res {
            return Err(Error::fit("weight vector length mismatch"));
        }
        if w.iter().any(|&wi| !(wi > 0.0)) {
            return Err(Error::fit("weights must be positive"));
        }
    }
    let wgt = |i: usize| weights.map(|w| w[i]).unwrap_or(1.0);
    let cost_of = |r: &[f64]| -> f64 { r.iter().enumerate().map(|(i, ri)| wgt(i) * ri * ri).sum() };

    let initial_cost = cost_of(&r0);
    let mut cost = initial_cost;
    let mut r = r0;
    let mut lambda = 1e-3;
    let mut status = FitStatus::MaxIterations;
    let mut iterations = 0;
    let n_par = params.len();

    'outer: for iter in 0..options.max_iterations {
        iterations = iter + 1;
        let jac = jacobian(&residual, &x, params, n_res, JACOBIAN_STEP)?;
        // Normal matrix and gradient.
        let mut a = vec![vec![0.0f64; n_par]; n_par];
        let mut g = vec![0.0f64; n_par];
        for i in 0..n_res {
            let w = wgt(i);
            for p in 0..n_par {
                g[p] += w * jac[i][p] * r[i];
                for q in p..n_par {
                    a[p][q] += w * jac[i][p] * jac[i][q];
                }
            }
        }
        for p in 0..n_par {
            for q in 0..p {
                a[p][q] = a[q][p];
            }
        }
        let grad_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if grad_inf < options.gradient_tol {
            status = FitStatus::Converged;
            break;
        }

        // Inner damping loop.
        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = a.clone();
            for p in 0..n_par {
                damped[p][p] += lambda * a[p][p].max(1e-30);
            }
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            match solve_spd(&damped, &rhs) {
                Some(step) => {
                    let mut x_trial = x.clone();
                    for p in 0..n_par {
                        x_trial[p] += step[p];
                    }
                    clamp_params(params, &mut x_trial);
                    let r_trial = residual(&x_trial)?;
                    let cost_trial = cost_of(&r_trial);
                    if cost_trial < cost {
                        let step_norm: f64 = x_trial
                            .iter()
                            .zip(&x)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        let x_norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        x = x_trial;
                        r = r_trial;
                        cost = cost_trial;
                        lambda = (lambda * 0.3).max(1e-14);
                        accepted = true;
                        if step_norm < options.step_tol * (x_norm + options.step_tol) {
                            status = FitStatus::Converged;
                            break 'outer;
                        }
                        break;
                    }
                    lambda *= 5.0;
                }
                None => {
                    lambda *= 10.0;
                }
            }
            if lambda > 1e14 {
                status = FitStatus::SingularNormalMatrix;
                break 'outer;
            }
        }
        if !accepted {
            // No downhill step found at any damping: treat as converged to
            // the achievable floor.
            status = FitStatus::Converged;
            break;
        }
    }

    // Parameter covariance from the undamped normal matrix at the optimum.
    let jac = jacobian(&residual, &x, params, n_res, JACOBIAN_STEP)?;
    let mut a = vec![vec![0.0f64; n_par]; n_par];
    for i in 0..n_res {
        let w = wgt(i);
        for p in 0..n_par {
            for q in p..n_par {
                a[p][q] += w * jac[i][p] * jac[i][q];
            }
        }
    }
    for p in 0..n_par {
        for q in 0..p {
            a[p][q] = a[q][p];
        }
    }
    let dof = (n_res - n_par).max(1) as f64;
    let s2 = cost / dof;
    let mut std_errors = vec![0.0f64; n_par];
    for p in 0..n_par {
        let mut e = vec![0.0f64; n_par];
        e[p] = 1.0;
        if let Some(col) = solve_spd(&a, &e) {
            if col[p] > 0.0 {
                std_errors[p] = (s2 * col[p]).sqrt();
            }
        }
    }

    Ok(FitResult {
        names: params.iter().map(|p| p.name.clone()).collect(),
        values: x,
        std_errors,
        initial_cost,
        final_cost: cost,
        iterations,
        status,
    })
}

/// Which closed form to fit to |Delta_p|(N).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqrtLawMode {
    /// |Delta_p| = A sqrt(N).
    PureSqrt,
    /// |Delta_p| = U0(N) g sqrt(N) + (U0(N) r g)^2 N / (2 Delta_t), g free.
    FullFormula,
}

/// Per-channel result of [`fit_sqrt_law`].
#[derive(Debug, Clone)]
pub struct SqrtLawFit {
    pub channel: Channel,
    /// Fitted coupling (FullFormula) or prefactor (PureSqrt), MHz.
    pub coupling_mhz: f64,
    pub coupling_std_mhz: f64,
    pub result: FitResult,
}

/// Fit the normal-mode law per channel to (N, |Delta_p|) data.
pub fn fit_sqrt_law(
    data: &[(f64, f64, Channel)],
    mode: SqrtLawMode,
    transverse_ratio: f64,
    transverse_offset_mhz: f64,
    options: &FitOptions,
) -> Result<Vec<SqrtLawFit>> {
    let mut fits = Vec::new();
    for channel in [Channel::SigmaPlus, Channel::SigmaMinus] {
        let points: Vec<(f64, f64)> = data
            .iter()
            .filter(|(_, _, c)| *c == channel)
            .map(|(n, dp, _)| (*n, *dp))
            .collect();
        if points.is_empty() {
            continue;
        }
        if points.len() < 3 {
            return Err(Error::fit(format!(
                "channel {} has {} points; need at least 3",
                channel.label(),
                points.len()
            )));
        }
        if points.iter().any(|(n, _)| !(*n > 0.0)) {
            return Err(Error::fit("atom numbers must be positive"));
        }
        let n_min = points.iter().map(|(n, _)| *n).fold(f64::INFINITY, f64::min);
        let n_max = points.iter().map(|(n, _)| *n).fold(0.0, f64::max);
        if n_max <= n_min {
            return Err(Error::fit(
                "degenerate atom-number range: all N equal, the law is unconstrained",
            ));
        }

        // Seed from the largest-N point assuming the pure square root.
        let (n_ref, dp_ref) = points
            .iter()
            .cloned()
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
        let model_points = points.clone();
        let (params, residual): (Vec<Param>, Box<dyn Fn(&[f64]) -> Result<Vec<f64>>>) = match mode {
            SqrtLawMode::PureSqrt => {
                let seed = dp_ref / n_ref.sqrt();
                (
                    vec![Param::new("A", seed, 0.0, f64::INFINITY)],
                    Box::new(move |x: &[f64]| {
                        Ok(model_points
                            .iter()
                            .map(|(n, dp)| x[0] * n.sqrt() - dp)
                            .collect())
                    }),
                )
            }
            SqrtLawMode::FullFormula => {
                let seed = dp_ref / (u0_empirical(n_ref)? * n_ref.sqrt());
                (
                    vec![Param::new("g", seed, 0.01, 1e3)],
                    Box::new(move |x: &[f64]| {
                        let g = x[0];
                        model_points
                            .iter()
                            .map(|(n, dp)| {
                                let u0 = u0_empirical(*n)?;
                                let model = u0 * g * n.sqrt()
                                    + (u0 * transverse_ratio * g).powi(2) * n
                                        / (2.0 * transverse_offset_mhz);
                                Ok(model - dp)
                            })
                            .collect()
                    }),
                )
            }
        };
        let result = least_squares(|x| residual(x), &params, None, options)?;
        fits.push(SqrtLawFit {
            channel,
            coupling_mhz: result.values[0],
            coupling_std_mhz: result.std_errors[0],
            result,
        });
    }
    if fits.is_empty() {
        return Err(Error::fit("no data points in either channel"));
    }
    Ok(fits)
}

/// Options for the full-spectrum fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumFitOptions {
    /// Measurement noise scale used for the ambiguity rule, MHz.
    pub noise_mhz: f64,
    /// Minimum channel photonic weight for an eigenstate to count as an
    /// observable branch.
    pub weight_floor: f64,
    pub fit: FitOptions,
}

impl Default for SpectrumFitOptions {
    fn default() -> Self {
        SpectrumFitOptions {
            noise_mhz: 25.0,
            weight_floor: 1e-4,
            fit: FitOptions::default(),
        }
    }
}

/// Result of [`fit_spectrum`]: populations, transverse coupling ratio and
/// any observations that never matched a model branch.
#[derive(Debug, Clone)]
pub struct SpectrumFit {
    pub result: FitResult,
    /// Fitted populations per ground state (F, mF, N).
    pub populations: Vec<(u32, i32, f64)>,
    pub population_std: Vec<(u32, i32, f64)>,
    pub transverse_ratio: f64,
    pub transverse_ratio_std: f64,
    /// Indices of observations excluded at the optimum (no model branch in
    /// their channel), reported rather than silently dropped.
    pub excluded_points: Vec<usize>,
}

/// Fit ground-state populations and the transverse coupling ratio to
/// measured (Delta_c, Delta_p, channel) resonance positions. Populations are
/// fitted in log space; the residual of each observation is its distance to
/// the nearest model branch of the matching channel, down-weighted by 1/2
/// when two branches lie within twice the noise scale.
pub fn fit_spectrum(
    measured: &[(f64, f64, Channel)],
    base: &SystemConfig,
    options: &SpectrumFitOptions,
) -> Result<SpectrumFit> {
    if measured.len() < 4 {
        return Err(Error::fit("need at least 4 spectrum points"));
    }
    let occupied = base.populations.occupied();
    if occupied.is_empty() {
        return Err(Error::fit("base configuration has no occupied states"));
    }

    // Unique cavity detunings, so one diagonalization serves every datum
    // taken at the same Delta_c.
    let mut unique: BTreeMap<i64, f64> = BTreeMap::new();
    for (dc, _, _) in measured {
        unique.insert((dc * 1e6).round() as i64, *dc);
    }
    let unique_dc: Vec<f64> = unique.values().cloned().collect();

    let mut params: Vec<Param> = occupied
        .iter()
        .map(|(state, n)| {
            Param::new(
                &format!("ln_n_{}_{}", state.f, state.m_f),
                n.ln(),
                (1.0f64).ln(),
                (1e7f64).ln(),
            )
        })
        .collect();
    params.push(Param::new(
        "r",
        base.geometry.transverse_coupling_ratio,
        0.0,
        5.0,
    ));

    let occupied_keys: Vec<(u32, i32)> = occupied.iter().map(|(s, _)| (s.f, s.m_f)).collect();
    let base_clone = base.clone();
    let measured_vec = measured.to_vec();
    let opt = *options;
    let unique_dc_clone = unique_dc.clone();

    // Residuals, plus the exclusion report when asked for.
    let evaluate = move |x: &[f64], excluded: Option<&mut Vec<usize>>| -> Result<Vec<f64>> {
        let mut config = base_clone.clone();
        let mut populations = Populations::zero();
        for (key, value) in occupied_keys.iter().zip(x) {
            populations.set(key.0, key.1, value.exp())?;
        }
        config.populations = populations;
        config.geometry.transverse_coupling_ratio = x[occupied_keys.len()];
        let basis = enumerate_basis(&config)?;

        let mut branch_table: BTreeMap<i64, (Vec<f64>, Vec<f64>, Vec<Channel>)> = BTreeMap::new();
        for &dc in &unique_dc_clone {
            let point = solve_at(&config, &basis, dc)?;
            let mut values = Vec::new();
            let mut weights = Vec::new();
            let mut channels = Vec::new();
            for (v, w) in point.values.iter().zip(&point.weights) {
                let channel = w.channel();
                if w.for_channel(channel) >= opt.weight_floor {
                    values.push(*v);
                    weights.push(w.for_channel(channel));
                    channels.push(channel);
                }
            }
            branch_table.insert((dc * 1e6).round() as i64, (values, weights, channels));
        }

        let mut excluded_local = Vec::new();
        let residuals: Vec<f64> = measured_vec
            .iter()
            .enumerate()
            .map(|(idx, (dc, dp, channel))| {
                let (values, _weights, channels) = &branch_table[&((dc * 1e6).round() as i64)];
                let mut distances: Vec<f64> = values
                    .iter()
                    .zip(channels)
                    .filter(|(_, c)| **c == *channel)
                    .map(|(v, _)| (v - dp).abs())
                    .collect();
                distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
                match distances.first() {
                    Some(&nearest) => {
                        // Ambiguous association: a second branch within twice
                        // the noise is down-weighted by 1/2 (as sqrt there,
                        // since the residual enters the cost squared).
                        let ambiguous = distances
                            .get(1)
                            .map(|&second| second - nearest < 2.0 * opt.noise_mhz)
                            .unwrap_or(false);
                        if ambiguous {
                            nearest * 0.5f64.sqrt()
                        } else {
                            nearest
                        }
                    }
                    None => {
                        excluded_local.push(idx);
                        0.0
                    }
                }
            })
            .collect();
        if let Some(out) = excluded {
            *out = excluded_local;
        }
        Ok(residuals)
    };

    let eval_for_fit = {
        let evaluate = &evaluate;
        move |x: &[f64]| evaluate(x, None)
    };
    let result = least_squares(eval_for_fit, &params, None, &options.fit)?;

    let mut excluded_points = Vec::new();
    evaluate(&result.values, Some(&mut excluded_points))?;

    let n_pop = occupied.len();
    let populations: Vec<(u32, i32, f64)> = occupied
        .iter()
        .zip(&result.values[..n_pop])
        .map(|((state, _), ln_n)| (state.f, state.m_f, ln_n.exp()))
        .collect();
    // sigma_N = N * sigma_lnN for the log-space parameters.
    let population_std: Vec<(u32, i32, f64)> = populations
        .iter()
        .zip(&result.std_errors[..n_pop])
        .map(|((f, m, n), s)| (*f, *m, n * s))
        .collect();

    Ok(SpectrumFit {
        transverse_ratio: result.values[n_pop],
        transverse_ratio_std: result.std_errors[n_pop],
        populations,
        population_std,
        excluded_points,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normal};
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_model_exact() {
        let xs: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x).collect();
        let residual = |p: &[f64]| -> Result<Vec<f64>> {
            Ok(xs.iter().zip(&ys).map(|(x, y)| p[0] * x - y).collect())
        };
        let result = least_squares(
            residual,
            &[Param::free("a", 0.3)],
            None,
            &FitOptions::default(),
        )
        .unwrap();
        assert!(result.status == FitStatus::Converged);
        assert_abs_diff_eq!(result.values[0], 2.5, epsilon = 1e-10);
        assert!(result.final_cost <= result.initial_cost);
    }

    #[test]
    fn sqrt_law_recovery_with_noise() {
        // y = g sqrt(N) with 1% noise over 12 points: g comes back within 1%
        // averaged over seeds.
        let g_true = 7.0;
        let ns: Vec<f64> = (0..12)
            .map(|i| 2500.0 * (80.0f64).powf(i as f64 / 11.0))
            .collect();
        let mut recovered = Vec::new();
        for seed in 0..20 {
            let mut rng = seeded(seed);
            let data: Vec<(f64, f64, Channel)> = ns
                .iter()
                .map(|&n| {
                    let y = g_true * n.sqrt() * (1.0 + 0.01 * standard_normal(&mut rng));
                    (n, y, Channel::SigmaPlus)
                })
                .collect();
            let fits = fit_sqrt_law(
                &data,
                SqrtLawMode::PureSqrt,
                1.2,
                18_500.0,
                &FitOptions::default(),
            )
            .unwrap();
            recovered.push(fits[0].coupling_mhz);
        }
        let mean = recovered.iter().sum::<f64>() / recovered.len() as f64;
        assert!((mean - g_true).abs() / g_true < 0.01, "mean {mean}");
    }

    #[test]
    fn full_formula_self_consistency() {
        // Data generated from the closed form itself recovers g exactly.
        let g_true = 14.4;
        let (r, dt) = (1.2, 18_500.0);
        let data: Vec<(f64, f64, Channel)> = (0..12)
            .map(|i| {
                let n = 2500.0 * (80.0f64).powf(i as f64 / 11.0);
                let u0 = u0_empirical(n).unwrap();
                let dp = u0 * g_true * n.sqrt() + (u0 * r * g_true).powi(2) * n / (2.0 * dt);
                (n, dp, Channel::SigmaMinus)
            })
            .collect();
        let fits = fit_sqrt_law(
            &data,
            SqrtLawMode::FullFormula,
            r,
            dt,
            &FitOptions::default(),
        )
        .unwrap();
        assert_eq!(fits[0].channel, Channel::SigmaMinus);
        assert_abs_diff_eq!(fits[0].coupling_mhz, g_true, epsilon = 1e-6);
    }

    #[test]
    fn pure_sqrt_on_curved_data_has_positive_curvature_residuals() {
        // The second-order transverse term bends the data upward: a pure
        // square-root fit must underestimate at both ends and overestimate in
        // the middle (positive curvature pattern in the residuals).
        let g_true = 14.4;
        let (r, dt) = (1.2, 18_500.0);
        let ns: Vec<f64> = (0..12)
            .map(|i| 2500.0 * (80.0f64).powf(i as f64 / 11.0))
            .collect();
        let data: Vec<(f64, f64, Channel)> = ns
            .iter()
            .map(|&n| {
                let u0 = u0_empirical(n).unwrap();
                let dp = u0 * g_true * n.sqrt() + (u0 * r * g_true).powi(2) * n / (2.0 * dt);
                (n, dp, Channel::SigmaPlus)
            })
            .collect();
        let fits =
            fit_sqrt_law(&data, SqrtLawMode::PureSqrt, r, dt, &FitOptions::default()).unwrap();
        let a = fits[0].coupling_mhz;
        // Regress (data - fit) on [1, s, s^2] with s = sqrt(N): the
        // transverse term leaves a positive quadratic coefficient.
        let resid: Vec<f64> = data.iter().map(|(n, dp, _)| dp - a * n.sqrt()).collect();
        let quad = least_squares(
            |p: &[f64]| {
                Ok(data
                    .iter()
                    .zip(&resid)
                    .map(|((n, _, _), res)| {
                        let s = n.sqrt();
                        p[0] + p[1] * s + p[2] * s * s - res
                    })
                    .collect())
            },
            &[
                Param::free("c0", 0.0),
                Param::free("c1", 0.0),
                Param::free("c2", 0.0),
            ],
            None,
            &FitOptions::default(),
        )
        .unwrap();
        assert!(
            quad.values[2] > 0.0,
            "curvature coefficient {}",
            quad.values[2]
        );
    }

    #[test]
    fn rosenbrock_valley() {
        // Classic bent-valley test: residuals (10(y - x^2), 1 - x).
        let residual =
            |p: &[f64]| -> Result<Vec<f64>> { Ok(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]) };
        let result = least_squares(
            residual,
            &[Param::free("x", -1.2), Param::free("y", 1.0)],
            None,
            &FitOptions {
                max_iterations: 200,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert_eq!(result.status, FitStatus::Converged);
        assert!(result.iterations <= 200);
        assert_abs_diff_eq!(result.values[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(result.values[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn jacobian_matches_half_step_reevaluation() {
        // The production Jacobian at the optimum agrees with a half-step
        // central re-evaluation to 1e-6 relative, entry by entry.
        let xs: Vec<f64> = (1..=8).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (0.7 * x).exp() + 0.3 * x).collect();
        let residual = |p: &[f64]| -> Result<Vec<f64>> {
            Ok(xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (p[0] * x).exp() + p[1] * x - y)
                .collect())
        };
        let params = [Param::free("k", 0.5), Param::free("b", 0.0)];
        let result = least_squares(residual, &params, None, &FitOptions::default()).unwrap();
        let x = result.values.clone();
        let at_opt = [Param::free("k", x[0]), Param::free("b", x[1])];
        let j1 = jacobian(&residual, &x, &at_opt, xs.len(), JACOBIAN_STEP).unwrap();
        let j2 = jacobian(&residual, &x, &at_opt, xs.len(), JACOBIAN_STEP / 2.0).unwrap();
        for (row1, row2) in j1.iter().zip(&j2) {
            for (a, b) in row1.iter().zip(row2) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn observation_order_is_immaterial() {
        let xs: Vec<f64> = (1..=14).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.3 * x + 0.2 * x * x).collect();
        let fit_with = |order: Vec<usize>| -> Vec<f64> {
            let residual = |p: &[f64]| -> Result<Vec<f64>> {
                Ok(order
                    .iter()
                    .map(|&i| p[0] * xs[i] + p[1] * xs[i] * xs[i] - ys[i])
                    .collect())
            };
            least_squares(
                residual,
                &[Param::free("a", 0.0), Param::free("b", 0.0)],
                None,
                &FitOptions::default(),
            )
            .unwrap()
            .values
        };
        let forward = fit_with((0..14).collect());
        let reversed = fit_with((0..14).rev().collect());
        for (a, b) in forward.iter().zip(&reversed) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn spectrum_fit_recovers_noiseless_data_exactly() {
        // Zero-noise branch positions from a known configuration: the fit
        // walks back to the generator parameters within optimizer tolerance.
        let mut truth_populations = Populations::zero();
        truth_populations.set(1, -1, 80_000.0).unwrap();
        truth_populations.set(2, -1, 1_500.0).unwrap();
        let truth = SystemConfig {
            populations: truth_populations,
            ..SystemConfig::default()
        };
        let basis = enumerate_basis(&truth).unwrap();
        let mut data = Vec::new();
        for i in 0..13 {
            let dc = -7500.0 + 875.0 * i as f64;
            let point = solve_at(&truth, &basis, dc).unwrap();
            for (value, weights) in point.values.iter().zip(&point.weights) {
                let channel = weights.channel();
                if weights.for_channel(channel) >= 0.05 {
                    data.push((dc, *value, channel));
                }
            }
        }
        let mut start_populations = Populations::zero();
        start_populations.set(1, -1, 60_000.0).unwrap();
        start_populations.set(2, -1, 900.0).unwrap();
        let mut start = SystemConfig {
            populations: start_populations,
            ..truth.clone()
        };
        start.geometry.transverse_coupling_ratio = 1.05;
        let fit = fit_spectrum(&data, &start, &SpectrumFitOptions::default()).unwrap();
        let n1 = fit
            .populations
            .iter()
            .find(|(f, m, _)| *f == 1 && *m == -1)
            .unwrap()
            .2;
        let n2 = fit
            .populations
            .iter()
            .find(|(f, m, _)| *f == 2 && *m == -1)
            .unwrap()
            .2;
        assert!((n1 - 80_000.0).abs() / 80_000.0 < 1e-3, "N1 {n1}");
        assert!((n2 - 1_500.0).abs() / 1_500.0 < 1e-2, "N2 {n2}");
        assert!(
            (fit.transverse_ratio - 1.2).abs() < 1e-2,
            "r {}",
            fit.transverse_ratio
        );
        assert!(fit.excluded_points.is_empty());
        assert!(fit.result.final_cost < 1e-4 * data.len() as f64);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let same_n: Vec<(f64, f64, Channel)> = (0..5)
            .map(|i| (1000.0, 100.0 + i as f64, Channel::SigmaPlus))
            .collect();
        assert!(fit_sqrt_law(
            &same_n,
            SqrtLawMode::PureSqrt,
            1.2,
            18_500.0,
            &FitOptions::default()
        )
        .is_err());
        let two: Vec<(f64, f64, Channel)> = vec![
            (1e3, 1.0, Channel::SigmaPlus),
            (2e3, 2.0, Channel::SigmaPlus),
        ];
        assert!(fit_sqrt_law(
            &two,
            SqrtLawMode::PureSqrt,
            1.2,
            18_500.0,
            &FitOptions::default()
        )
        .is_err());
    }
}
