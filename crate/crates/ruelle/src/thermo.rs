//! Pressure, entropy, and their directional derivatives.
//!
//! Pressure is the log of the leading transfer eigenvalue. Entropy is taken
//! relative to the a priori measure, `h(mu_f) = -∫ f dmu_f` for normalized
//! `f`: nonpositive in probability mode, and equal to the Kolmogorov-Sinai
//! entropy under counting weights on a finite alphabet. First derivatives are
//! exact integrals against the Gibbs measure; the second derivative of
//! pressure (the asymptotic variance) is computed by four independent
//! routes — a resolvent formula, a quadratic form, a finite-difference
//! stencil, and a Green-Kubo series — that must agree to near machine
//! precision on the discretized system.

use serde::Serialize;

use crate::fd;
use crate::funcspace::{inner_product, integrate};
use crate::transfer::{
    apply_transfer, eigfun_derivative, gibbs_measure, kernel_project, normalize_potential,
    require_normalized, solve_rpf, RpfOptions,
};
use crate::{Error, GibbsWeights, GridFunction, Result};

const KERNEL_TOL: f64 = 1e-8;
const MEAN_ZERO_TOL: f64 = 1e-10;
const PROJECTION_TOL: f64 = 1e-13;

/// `P(f) = log lambda_f`; the potential need not be normalized.
pub fn pressure(f: &GridFunction) -> Result<f64> {
    Ok(solve_rpf(f, &RpfOptions::default())?.log_lambda)
}

/// Entropy of the Gibbs measure of a normalized potential, evaluated through
/// depth-`depth` cylinder weights: `-∫ f dmu_f`.
pub fn entropy(f_norm: &GridFunction, depth: usize) -> Result<f64> {
    require_normalized(f_norm)?;
    if depth < f_norm.depth() {
        return Err(Error::DimensionMismatch(format!(
            "entropy needs depth >= {}, got {depth}",
            f_norm.depth()
        )));
    }
    let mu = gibbs_measure(f_norm, depth)?;
    Ok(-integrate(f_norm, &mu)?)
}

fn mu_for(f_norm: &GridFunction, others: &[&GridFunction]) -> Result<GibbsWeights> {
    let mut depth = f_norm.depth().max(1);
    for g in others {
        depth = depth.max(g.depth());
    }
    gibbs_measure(f_norm, depth)
}

/// `d/dt P(f + t g)|_0 = ∫ g dmu_f` for normalized `f`.
pub fn pressure_derivative(f_norm: &GridFunction, g: &GridFunction) -> Result<f64> {
    require_normalized(f_norm)?;
    let mu = mu_for(f_norm, &[g])?;
    integrate(g, &mu)
}

/// `d/dt lambda_{f + t g}|_0 = lambda_f ∫ g dmu_f`; `f` arbitrary.
pub fn eigenvalue_derivative(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let (f_norm, log_lambda) = normalize_potential(f, &RpfOptions::default())?;
    let mu = mu_for(&f_norm, &[g])?;
    Ok(log_lambda.exp() * integrate(g, &mu)?)
}

/// How to evaluate the second derivative of pressure along a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    /// `∫ g_c^2 dmu + 2 ∫ g_c u dmu` with `u` the eigenfunction derivative.
    Resolvent,
    /// `∫ (g_c + u - u∘sigma)^2 dmu`.
    QuadraticForm,
    /// 5-point stencil on `t -> P(f + t g)`.
    FiniteDifference,
    /// Truncated correlation series `∫ g_c^2 + 2 sum_j ∫ g_c L^j g_c`.
    GreenKubo,
}

/// Controls for the variance estimators.
#[derive(Debug, Clone, Copy)]
pub struct VarianceOptions {
    /// Resolvent series truncation tolerance.
    pub tol: f64,
    /// Step for the finite-difference stencil.
    pub fd_step: f64,
    /// Apply one Richardson extrapolation to the stencil.
    pub richardson: bool,
    pub gk_max_terms: usize,
    pub gk_term_tol: f64,
}

impl Default for VarianceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            fd_step: 1e-2,
            richardson: false,
            gk_max_terms: 200,
            gk_term_tol: 1e-13,
        }
    }
}

/// Per-method estimates of the asymptotic variance of a direction, with the
/// spread of the deterministic routes recorded rather than hidden.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub sigma2_resolvent: f64,
    pub sigma2_quadratic: f64,
    pub sigma2_fd: f64,
    pub sigma2_greenkubo: f64,
    pub greenkubo_terms: usize,
    pub fd_step: f64,
    /// Largest pairwise gap among the resolvent, quadratic-form, and
    /// Green-Kubo values.
    pub spread: f64,
}

fn centered(g: &GridFunction, mu: &GibbsWeights) -> Result<GridFunction> {
    Ok(g.add_scalar(-integrate(g, mu)?))
}

fn variance_resolvent(g_c: &GridFunction, u: &GridFunction, mu: &GibbsWeights) -> Result<f64> {
    Ok(inner_product(g_c, g_c, mu)? + 2.0 * inner_product(g_c, u, mu)?)
}

fn variance_quadratic(
    g_c: &GridFunction,
    u: &GridFunction,
    mu: &GibbsWeights,
) -> Result<f64> {
    let v = g_c.add(u)?.sub(&u.compose_shift(1)?)?;
    inner_product(&v, &v, mu)
}

fn variance_green_kubo(
    f_norm: &GridFunction,
    g_c: &GridFunction,
    mu: &GibbsWeights,
    opts: &VarianceOptions,
) -> Result<(f64, usize)> {
    let mut sigma2 = inner_product(g_c, g_c, mu)?;
    let mut h = g_c.clone();
    let mut terms = 0;
    for _ in 1..=opts.gk_max_terms {
        h = apply_transfer(f_norm, &h)?;
        let term = inner_product(g_c, &h, mu)?;
        terms += 1;
        sigma2 += 2.0 * term;
        if term.abs() < opts.gk_term_tol {
            break;
        }
    }
    Ok((sigma2, terms))
}

fn variance_fd(f_norm: &GridFunction, g: &GridFunction, opts: &VarianceOptions) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut p_at = |t: f64| -> Result<f64> {
        let p = pressure(&f_norm.add(&g.scale(t))?)?;
        worst = worst.max(p.abs());
        Ok(p)
    };
    let stencil = |p_at: &mut dyn FnMut(f64) -> Result<f64>, h: f64| -> Result<f64> {
        Ok(
            (-p_at(-2.0 * h)? + 16.0 * p_at(-h)? - 30.0 * p_at(0.0)? + 16.0 * p_at(h)?
                - p_at(2.0 * h)?)
                / (12.0 * h * h),
        )
    };
    let h = opts.fd_step;
    let d_h = stencil(&mut |t| p_at(t), h)?;
    let value = if opts.richardson {
        let d_h2 = stencil(&mut |t| p_at(t), h / 2.0)?;
        fd::richardson(d_h, d_h2, 4)
    } else {
        d_h
    };
    let noise = fd::second_stencil_noise(worst.max(1.0), h);
    if noise > 1e-6 * value.abs().max(f64::MIN_POSITIVE) {
        log::warn!(
            "finite-difference variance: stencil noise {noise:.2e} vs value {value:.2e}; \
             consider a larger step than {h:.2e}"
        );
    }
    Ok(value)
}

/// Second derivative of pressure along `g` at a normalized base point, by the
/// requested route. Methods other than `FiniteDifference` are deterministic
/// linear algebra on the discretized operator.
pub fn pressure_second_derivative(
    f_norm: &GridFunction,
    g: &GridFunction,
    method: VarianceMethod,
    opts: &VarianceOptions,
) -> Result<f64> {
    require_normalized(f_norm)?;
    let mu = mu_for(f_norm, &[g])?;
    let g_c = centered(g, &mu)?;
    match method {
        VarianceMethod::Resolvent => {
            let u = eigfun_derivative(f_norm, &g_c, opts.tol)?;
            variance_resolvent(&g_c, &u, &mu)
        }
        VarianceMethod::QuadraticForm => {
            let u = eigfun_derivative(f_norm, &g_c, opts.tol)?;
            variance_quadratic(&g_c, &u, &mu)
        }
        VarianceMethod::GreenKubo => Ok(variance_green_kubo(f_norm, &g_c, &mu, opts)?.0),
        VarianceMethod::FiniteDifference => variance_fd(f_norm, g, opts),
    }
}

/// All four variance routes on one direction.
pub fn variance_report(
    f_norm: &GridFunction,
    g: &GridFunction,
    opts: &VarianceOptions,
) -> Result<VarianceReport> {
    require_normalized(f_norm)?;
    let mu = mu_for(f_norm, &[g])?;
    let g_c = centered(g, &mu)?;
    let u = eigfun_derivative(f_norm, &g_c, opts.tol)?;
    let sigma2_resolvent = variance_resolvent(&g_c, &u, &mu)?;
    let sigma2_quadratic = variance_quadratic(&g_c, &u, &mu)?;
    let (sigma2_greenkubo, greenkubo_terms) = variance_green_kubo(f_norm, &g_c, &mu, opts)?;
    let sigma2_fd = variance_fd(f_norm, g, opts)?;
    let spread = [
        (sigma2_resolvent - sigma2_quadratic).abs(),
        (sigma2_resolvent - sigma2_greenkubo).abs(),
        (sigma2_quadratic - sigma2_greenkubo).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(VarianceReport {
        sigma2_resolvent,
        sigma2_quadratic,
        sigma2_fd,
        sigma2_greenkubo,
        greenkubo_terms,
        fd_step: opts.fd_step,
        spread,
    })
}

fn require_kernel(f_norm: &GridFunction, eta: &GridFunction) -> Result<()> {
    let viol = apply_transfer(f_norm, eta)?.sup_norm();
    if viol > KERNEL_TOL {
        return Err(Error::NotInKernel(viol));
    }
    Ok(())
}

/// First derivative of entropy along a kernel direction:
/// `d/dt h(mu_{f+t eta})|_0 = -∫ f eta dmu_f`.
///
/// The closed form matches the derivative of the full entropy path exactly
/// when the coboundary generator of `f` is orthogonal to `eta` (in
/// particular whenever `L_f f` is constant, as for symmetric two-state
/// chains, and for word-indexed Markov kernel directions); see
/// [`entropy_derivative_general`] for the projection form without that
/// caveat.
pub fn entropy_derivative(f_norm: &GridFunction, eta: &GridFunction) -> Result<f64> {
    require_normalized(f_norm)?;
    require_kernel(f_norm, eta)?;
    let mu = mu_for(f_norm, &[eta])?;
    Ok(-inner_product(f_norm, eta, &mu)?)
}

/// Closed-form second derivative of entropy along a kernel direction:
/// `-∫ (f + 1) eta^2 dmu_f`.
///
/// This treats the kernel at the base point as fixed along the path; the
/// finite-difference second derivative of the entropy path includes the
/// motion of the kernel and differs in general.
pub fn entropy_second_derivative(f_norm: &GridFunction, eta: &GridFunction) -> Result<f64> {
    require_normalized(f_norm)?;
    require_kernel(f_norm, eta)?;
    let mu = mu_for(f_norm, &[eta])?;
    let eta2 = eta.mul(eta)?;
    Ok(-(inner_product(f_norm, &eta2, &mu)? + integrate(&eta2, &mu)?))
}

/// First derivative of entropy along an arbitrary direction `g`, through the
/// kernel parts: `-∫ zeta eta dmu` with `zeta`, `eta` the kernel components
/// of `f` and `g`.
pub fn entropy_derivative_general(f_norm: &GridFunction, g: &GridFunction) -> Result<f64> {
    require_normalized(f_norm)?;
    let zeta = kernel_project(f_norm, f_norm, PROJECTION_TOL)?.kernel;
    let eta = kernel_project(f_norm, g, PROJECTION_TOL)?.kernel;
    let mu = mu_for(f_norm, &[&zeta, &eta])?;
    Ok(-inner_product(&zeta, &eta, &mu)?)
}

/// Derivative of `t -> h(mu_{f+tg}) + ∫ phi dmu_{f+tg}` at zero:
/// `∫ (xi - zeta) eta dmu` over the kernel parts of `phi`, `f`, `g`.
/// Requires `∫ g dmu = 0`.
pub fn functional_directional_derivative(
    f_norm: &GridFunction,
    g: &GridFunction,
    phi: &GridFunction,
) -> Result<f64> {
    require_normalized(f_norm)?;
    let mean = integrate(g, &mu_for(f_norm, &[g])?)?;
    if mean.abs() > MEAN_ZERO_TOL {
        return Err(Error::NonZeroMean(mean));
    }
    let zeta = kernel_project(f_norm, f_norm, PROJECTION_TOL)?.kernel;
    let eta = kernel_project(f_norm, g, PROJECTION_TOL)?.kernel;
    let xi = kernel_project(f_norm, phi, PROJECTION_TOL)?.kernel;
    let mu = mu_for(f_norm, &[&zeta, &eta, &xi])?;
    inner_product(&xi.sub(&zeta)?, &eta, &mu)
}

/// The unit kernel direction of steepest entropy increase,
/// `eta* = -zeta / ||zeta||` for `zeta` the kernel part of the potential.
/// Errors when the potential is coboundary to a constant (entropy is
/// critical there).
pub fn max_entropy_direction(f_norm: &GridFunction) -> Result<GridFunction> {
    require_normalized(f_norm)?;
    let zeta = kernel_project(f_norm, f_norm, PROJECTION_TOL)?.kernel;
    let mu = mu_for(f_norm, &[&zeta])?;
    let norm = inner_product(&zeta, &zeta, &mu)?.sqrt();
    if norm < 1e-10 {
        return Err(Error::NoAscentDirection);
    }
    Ok(zeta.scale(-1.0 / norm))
}

/// First-order response of `∫ phi dmu` to a kernel perturbation `eta`:
/// returns `∫ phi eta dmu`, and cross-checks it against the dual series
/// `sum_j ∫ eta L^j(phi_c) dmu`.
///
/// The two routes agree exactly when the coboundary generator of `phi` is
/// orthogonal to `eta` (always when `phi` is a combination of kernel
/// elements and constants); otherwise the series carries the response and
/// the mismatch is reported as an error.
pub fn linear_response(
    f_norm: &GridFunction,
    phi: &GridFunction,
    eta: &GridFunction,
) -> Result<f64> {
    require_normalized(f_norm)?;
    require_kernel(f_norm, eta)?;
    let mu = mu_for(f_norm, &[phi, eta])?;
    let direct = inner_product(phi, eta, &mu)?;

    let gap = solve_rpf(f_norm, &RpfOptions::default())?.gap_estimate;
    let cap = ((10.0 * (1e-14f64).ln() / gap.ln()).ceil() as usize).clamp(64, 2_000_000);
    let mut h = centered(phi, &mu)?;
    let mut series = inner_product(eta, &h, &mu)?;
    for step in 0..cap {
        h = apply_transfer(f_norm, &h)?;
        let term = inner_product(eta, &h, &mu)?;
        series += term;
        if h.sup_norm() < 1e-14 {
            break;
        }
        if step + 1 == cap && term.abs() > 1e-12 {
            return Err(Error::SeriesDivergence {
                terms: cap,
                increment: term.abs(),
            });
        }
    }
    if (series - direct).abs() > 1e-10 * direct.abs().max(1.0) {
        return Err(Error::ConsistencyCheck(format!(
            "linear response: series {series:.14e} vs inner product {direct:.14e}; \
             the coboundary part of phi is not orthogonal to eta"
        )));
    }
    Ok(direct)
}
