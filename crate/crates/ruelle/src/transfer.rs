//! The transfer operator and its spectral toolkit.
//!
//! For a potential `f` of depth `k` the operator
//! `(L_f w)(x) = ∫_M e^{f(ax)} w(ax) dnu(a)` acts exactly on tabulated
//! cylinder functions: it maps depth-`k` tables to depth-`k-1` tables, so at
//! any working depth `>= k` the operator is a sparse matrix with `N` nonzeros
//! per row and the leading eigendata can be computed by power iteration. The
//! dual acts on cylinder weights through the transpose of the same matrix,
//! and the depth-`k` weights of the eigenmeasure satisfy the transposed
//! eigenproblem exactly, so no truncation is introduced anywhere.

use serde::Serialize;

use crate::funcspace::integrate;
use crate::words::word_count;
use crate::{AprioriSpace, Error, GibbsWeights, GridFunction, Result};
use std::sync::Arc;

/// Potentials whose values exceed this spread (or cap) are applied with an
/// internal log-shift so that operator entries stay inside f64 range.
const SHIFT_THRESHOLD: f64 = 30.0;

/// Mean-zero tolerance for resolvent inputs.
const MEAN_ZERO_TOL: f64 = 1e-10;

/// Normalization check threshold for operations requiring `L_f 1 = 1`.
pub const NORMALIZED_TOL: f64 = 1e-8;

fn shift_for(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > SHIFT_THRESHOLD || max - min > SHIFT_THRESHOLD {
        max
    } else {
        0.0
    }
}

/// The transfer operator restricted to depth-`depth` tables, stored through
/// its per-column factors `value[c] = nu_{c1} e^{f(c) - log_shift}`.
///
/// Row `u` has the `N` nonzero columns `(a, u_1, .., u_{depth-1})`; the true
/// operator is `exp(log_shift)` times [`apply`](Self::apply).
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    space: Arc<AprioriSpace>,
    depth: usize,
    col_value: Vec<f64>,
    log_shift: f64,
}

impl TransferMatrix {
    /// Build the matrix at a working depth `>= max(f.depth, 1)`.
    pub fn new(f: &GridFunction, depth: usize) -> Result<Self> {
        let space = f.space();
        let n = space.len();
        if depth < f.depth().max(1) {
            return Err(Error::InvalidArgument(format!(
                "matrix depth {depth} below potential depth {}",
                f.depth()
            )));
        }
        let dim = word_count(n, depth)?;
        let log_shift = shift_for(f.values());
        let lead = dim / n; // n^(depth-1)
        let fstride = word_count(n, depth - f.depth())?;
        let mut col_value = Vec::with_capacity(dim);
        for c in 0..dim {
            let first = c / lead;
            let fval = f.values()[c / fstride];
            col_value.push(space.weight(first) * (fval - log_shift).exp());
        }
        Ok(Self {
            space: Arc::clone(space),
            depth,
            col_value,
            log_shift,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.col_value.len()
    }

    pub fn space(&self) -> &Arc<AprioriSpace> {
        &self.space
    }

    /// Log-shift applied to the stored entries (0 for moderate potentials).
    pub fn log_shift(&self) -> f64 {
        self.log_shift
    }

    /// Shifted forward application; the result is constant over the last
    /// coordinate by construction.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let n = self.space.len();
        let lead = self.dim() / n;
        let mut out = vec![0.0; self.dim()];
        for p in 0..lead {
            let mut acc = 0.0;
            for a in 0..n {
                let c = a * lead + p;
                acc += self.col_value[c] * w[c];
            }
            for b in 0..n {
                out[p * n + b] = acc;
            }
        }
        out
    }

    /// Shifted adjoint application on cylinder weights.
    pub fn apply_adjoint(&self, m: &[f64]) -> Vec<f64> {
        let n = self.space.len();
        let lead = self.dim() / n;
        let mut tail_sum = vec![0.0; lead];
        for (p, slot) in tail_sum.iter_mut().enumerate() {
            *slot = m[p * n..(p + 1) * n].iter().sum();
        }
        self.col_value
            .iter()
            .enumerate()
            .map(|(c, v)| v * tail_sum[c % lead])
            .collect()
    }

    /// Dense row-major copy of the *unshifted* operator, for cross-checks
    /// against direct linear algebra.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.space.len();
        let dim = self.dim();
        let lead = dim / n;
        let scale = self.log_shift.exp();
        let mut mat = vec![0.0; dim * dim];
        for u in 0..dim {
            let p = u / n;
            for a in 0..n {
                let c = a * lead + p;
                mat[u * dim + c] = scale * self.col_value[c];
            }
        }
        mat
    }

    /// Dense row-major matrix of the operator acting on depth-`(depth-1)`
    /// tables, whose spectrum is the spectrum of the full matrix without its
    /// structural kernel. Returns the matrix and its (row) dimension.
    ///
    /// The full matrix factors as embed-after-restrict, so the two share
    /// every nonzero eigenvalue; eliminating the `dim - dim/N` structural
    /// zeros keeps dense eigensolvers well-conditioned.
    pub fn dense_parent(&self) -> (Vec<f64>, usize) {
        let n = self.space.len();
        let lead = self.dim() / n; // N^(depth-1)
        let scale = self.log_shift.exp();
        let sub = lead / n.min(lead); // N^(depth-2), or 1 at depth 1
        let mut mat = vec![0.0; lead * lead];
        for u in 0..lead {
            for a in 0..n {
                let c = a * lead + u; // the word (a, u) of length `depth`
                let v = if lead == 1 { 0 } else { a * sub + u / n };
                mat[u * lead + v] += scale * self.col_value[c];
            }
        }
        (mat, lead)
    }
}

/// Leading eigendata of the transfer operator.
#[derive(Debug, Clone)]
pub struct RpfSolution {
    /// Leading eigenvalue (may overflow to infinity for extreme potentials;
    /// `log_lambda` is always finite).
    pub lambda: f64,
    /// `log(lambda)`, the pressure of the potential.
    pub log_lambda: f64,
    /// Positive eigenfunction of depth `k - 1`, scaled so that its integral
    /// against the eigenmeasure is one.
    pub eigfun: GridFunction,
    /// Depth-`k` cylinder weights of the dual eigenprobability.
    pub eigmeasure: GibbsWeights,
    /// Depth-`k` weights of the Gibbs measure (eigenfunction times
    /// eigenmeasure).
    pub gibbs: GibbsWeights,
    /// Relative sup-norm residual of the forward eigenproblem.
    pub residual: f64,
    /// Total forward plus adjoint iterations.
    pub iterations: usize,
    /// Estimated ratio of the second to the leading eigenvalue modulus,
    /// in (0, 1); drives iteration caps for resolvent series.
    pub gap_estimate: f64,
}

/// Summary of an [`RpfSolution`] without the tabulated data.
#[derive(Debug, Clone, Serialize)]
pub struct RpfSummary {
    pub lambda: f64,
    pub log_lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    pub gap_estimate: f64,
}

impl RpfSolution {
    pub fn summary(&self) -> RpfSummary {
        RpfSummary {
            lambda: self.lambda,
            log_lambda: self.log_lambda,
            residual: self.residual,
            iterations: self.iterations,
            gap_estimate: self.gap_estimate,
        }
    }
}

/// Power-iteration controls.
#[derive(Debug, Clone, Copy)]
pub struct RpfOptions {
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RpfOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 200_000,
        }
    }
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `L_f w` as a function of depth `max(f.depth, w.depth, 1) - 1`.
///
/// Both arguments may have any depths; the shallower one is embedded. The
/// operator integrates over the prepended symbol, so one coordinate of
/// dependence is always consumed.
pub fn apply_transfer(f: &GridFunction, w: &GridFunction) -> Result<GridFunction> {
    if !f.same_space(w) {
        return Err(Error::SpaceMismatch);
    }
    let space = f.space();
    let n = space.len();
    let k = f.depth().max(w.depth()).max(1);
    let fe = f.embed(k)?;
    let we = w.embed(k)?;
    let shift = shift_for(fe.values());
    let scale = shift.exp();
    let lead = fe.values().len() / n;
    let mut out = Vec::with_capacity(lead);
    for p in 0..lead {
        let mut acc = 0.0;
        for a in 0..n {
            let c = a * lead + p;
            acc += space.weight(a) * (fe.values()[c] - shift).exp() * we.values()[c];
        }
        out.push(scale * acc);
    }
    GridFunction::from_values(space, k - 1, out)
}

/// Sup-norm of `L_f 1 - 1`; zero exactly when `f` is normalized.
pub fn normalization_error(f: &GridFunction) -> Result<f64> {
    let one = GridFunction::constant(f.space(), 1.0);
    let lf1 = apply_transfer(f, &one)?;
    Ok(lf1
        .values()
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max))
}

pub(crate) fn require_normalized(f: &GridFunction) -> Result<()> {
    let err = normalization_error(f)?;
    if err > NORMALIZED_TOL {
        return Err(Error::NotNormalized(err));
    }
    Ok(())
}

/// Restrict a depth-`from` table known to be constant over trailing
/// coordinates to depth `to`.
fn restrict_values(values: &[f64], n: usize, from: usize, to: usize) -> Vec<f64> {
    let stride = word_count(n, from - to).expect("smaller than source");
    (0..values.len() / stride).map(|i| values[i * stride]).collect()
}

/// Deterministic probe vector for the deflated (second-eigenvalue) iteration.
fn probe(dim: usize) -> Vec<f64> {
    let mut state = 0x9e3779b97f4a7c15u64;
    (0..dim)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        })
        .collect()
}

/// Leading eigendata by forward power iteration for the eigenfunction and
/// adjoint iteration for the eigenmeasure, starting from the constant
/// function. The eigenfunction is rescaled so `∫ w drho = 1`, the Gibbs
/// weights are `w * rho`, and the spectral gap is estimated from a deflated
/// iterate.
pub fn solve_rpf(f: &GridFunction, opts: &RpfOptions) -> Result<RpfSolution> {
    let space = f.space();
    let n = space.len();
    let k = f.depth().max(1);
    let matrix = TransferMatrix::new(f, k)?;
    let dim = matrix.dim();

    // Forward iteration, sup-normalized.
    let mut v = vec![1.0; dim];
    let mut lambda_s = 1.0;
    let mut residual = f64::INFINITY;
    let mut fwd_iters = 0;
    for it in 1..=opts.max_iter {
        fwd_iters = it;
        let av = matrix.apply(&v);
        let lam = sup(&av);
        if !lam.is_finite() || lam <= 0.0 {
            return Err(Error::ConsistencyCheck(format!(
                "forward iterate degenerated (norm {lam})"
            )));
        }
        residual = av
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lam * b).abs())
            .fold(0.0, f64::max)
            / lam;
        lambda_s = lam;
        v = av.iter().map(|x| x / lam).collect();
        if residual <= opts.tol {
            break;
        }
    }
    if residual > opts.tol {
        return Err(Error::NonConvergence {
            residual,
            iterations: fwd_iters,
        });
    }
    if v.iter().any(|&x| !x.is_finite() || x <= 0.0) {
        return Err(Error::ConsistencyCheck(
            "eigenfunction lost positivity".into(),
        ));
    }

    // Adjoint iteration on depth-k weights, mass-normalized.
    let mut rho = vec![1.0 / dim as f64; dim];
    let mut adj_iters = 0;
    let mut delta = f64::INFINITY;
    for it in 1..=opts.max_iter {
        adj_iters = it;
        let am = matrix.apply_adjoint(&rho);
        let mass: f64 = am.iter().sum();
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::ConsistencyCheck(format!(
                "adjoint iterate degenerated (mass {mass})"
            )));
        }
        let next: Vec<f64> = am.iter().map(|x| x / mass).collect();
        delta = next
            .iter()
            .zip(&rho)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rho = next;
        if delta <= opts.tol {
            break;
        }
    }
    if delta > opts.tol {
        return Err(Error::NonConvergence {
            residual: delta,
            iterations: adj_iters,
        });
    }
    let mass: f64 = rho.iter().sum();
    for w in rho.iter_mut() {
        *w /= mass;
    }

    // Scale so that the eigenfunction integrates to one against rho.
    let weighted: f64 = v.iter().zip(&rho).map(|(a, b)| a * b).sum();
    let v_scaled: Vec<f64> = v.iter().map(|x| x / weighted).collect();

    // Gibbs weights w * rho, renormalized against rounding drift.
    let mut gibbs: Vec<f64> = v_scaled.iter().zip(&rho).map(|(a, b)| a * b).collect();
    let gsum: f64 = gibbs.iter().sum();
    for w in gibbs.iter_mut() {
        *w /= gsum;
    }

    // Deflated iteration for the modulus of the second eigenvalue.
    let mut d = probe(dim);
    let project = |d: &mut Vec<f64>| {
        let c: f64 = d.iter().zip(&rho).map(|(a, b)| a * b).sum();
        for (x, w) in d.iter_mut().zip(&v_scaled) {
            *x -= c * w;
        }
    };
    project(&mut d);
    let mut gap = 0.0f64;
    let mut prev = sup(&d);
    for _ in 0..48 {
        if prev < 1e-280 {
            gap = 0.0;
            break;
        }
        d = matrix.apply(&d);
        for x in d.iter_mut() {
            *x /= lambda_s;
        }
        project(&mut d);
        let norm = sup(&d);
        gap = norm / prev;
        prev = norm;
    }
    let gap = gap.clamp(1e-16, 1.0 - 1e-12);

    let log_lambda = lambda_s.ln() + matrix.log_shift();
    let eigfun_values = restrict_values(&v_scaled, n, k, k - 1);
    let eigfun = GridFunction::from_values(space, k - 1, eigfun_values)?;

    Ok(RpfSolution {
        lambda: log_lambda.exp(),
        log_lambda,
        eigfun,
        eigmeasure: GibbsWeights::from_weights(space, k, rho)?,
        gibbs: GibbsWeights::from_weights(space, k, gibbs)?,
        residual,
        iterations: fwd_iters + adj_iters,
        gap_estimate: gap,
    })
}

/// Normalize a potential: `N(f) = f + log w_f - log(w_f ∘ sigma) - log lambda_f`.
/// Returns the normalized potential (depth `max(f.depth, 1)`) and
/// `log lambda_f`.
pub fn normalize_potential(f: &GridFunction, opts: &RpfOptions) -> Result<(GridFunction, f64)> {
    let rpf = solve_rpf(f, opts)?;
    let log_w = rpf.eigfun.map(f64::ln)?;
    let normalized = f
        .add(&log_w)?
        .sub(&log_w.compose_shift(1)?)?
        .add_scalar(-rpf.log_lambda);
    Ok((normalized, rpf.log_lambda))
}

/// Depth-`depth` cylinder weights of the Gibbs measure of a normalized
/// potential: the fixed point of the dual operator at the potential's depth,
/// extended to deeper cylinders through the exact one-symbol conditional
/// `nu_a e^{f(a u)}`, or marginalized to shallower ones.
pub fn gibbs_measure(f_norm: &GridFunction, depth: usize) -> Result<GibbsWeights> {
    require_normalized(f_norm)?;
    let space = f_norm.space();
    let n = space.len();
    let k = f_norm.depth().max(1);
    let opts = RpfOptions::default();
    let matrix = TransferMatrix::new(f_norm, k)?;

    let dim = matrix.dim();
    let mut mu = vec![1.0 / dim as f64; dim];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let am = matrix.apply_adjoint(&mu);
        let mass: f64 = am.iter().sum();
        let next: Vec<f64> = am.iter().map(|x| x / mass).collect();
        let delta = next
            .iter()
            .zip(&mu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        mu = next;
        if delta <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            residual: f64::NAN,
            iterations: opts.max_iter,
        });
    }

    let mut current_depth = k;
    // Extend by prepending one symbol at a time.
    while current_depth < depth {
        let m = current_depth;
        let count = word_count(n, m + 1)?;
        let fstride = word_count(n, m + 1 - f_norm.depth())?;
        let block = mu.len();
        let mut next = vec![0.0; count];
        for a in 0..n {
            let wa = space.weight(a);
            for (i, &w) in mu.iter().enumerate() {
                let idx = a * block + i;
                next[idx] = wa * f_norm.values()[idx / fstride].exp() * w;
            }
        }
        let mass: f64 = next.iter().sum();
        for w in next.iter_mut() {
            *w /= mass;
        }
        mu = next;
        current_depth += 1;
    }
    let mut weights = GibbsWeights::from_weights(space, current_depth, mu)?;
    while weights.depth() > depth {
        weights = weights.marginalize_last()?;
    }
    Ok(weights)
}

/// `(I - L_f)^{-1} phi` on mean-zero functions, by the Neumann series
/// truncated when the increment sup-norm falls below `tol`. The result has
/// mean zero against the Gibbs measure.
pub fn resolvent_mean_zero(
    f_norm: &GridFunction,
    phi: &GridFunction,
    tol: f64,
) -> Result<GridFunction> {
    require_normalized(f_norm)?;
    if !f_norm.same_space(phi) {
        return Err(Error::SpaceMismatch);
    }
    let space = f_norm.space();
    let n = space.len();
    let k = f_norm.depth().max(1);
    let work_depth = phi.depth().max(k);
    let mu = gibbs_measure(f_norm, work_depth)?;

    let mean = integrate(phi, &mu)?;
    if mean.abs() > MEAN_ZERO_TOL {
        return Err(Error::NonZeroMean(mean));
    }

    let gap = solve_rpf(f_norm, &RpfOptions::default())?.gap_estimate;
    let cap = ((10.0 * tol.ln() / gap.ln()).ceil() as usize).clamp(64, 2_000_000);

    let matrix = TransferMatrix::new(f_norm, work_depth)?;
    let scale = matrix.log_shift().exp();
    // Remove the tiny residual mean so it cannot accumulate along the series.
    let phi_e = phi.embed(work_depth)?;
    let mut term: Vec<f64> = phi_e.values().iter().map(|v| v - mean).collect();
    let mut acc = term.clone();
    let mut increment = sup(&term);
    let mut steps = 0;
    while increment > tol {
        steps += 1;
        if steps > cap {
            return Err(Error::SeriesDivergence {
                terms: steps,
                increment,
            });
        }
        term = matrix.apply(&term);
        if scale != 1.0 {
            for x in term.iter_mut() {
                *x *= scale;
            }
        }
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
        increment = sup(&term);
    }

    // Project onto exact mu-mean zero.
    let drift: f64 = acc.iter().zip(mu.weights()).map(|(a, w)| a * w).sum();
    for x in acc.iter_mut() {
        *x -= drift;
    }
    let out_depth = phi.depth().max(k - 1);
    let values = restrict_values(&acc, n, work_depth, out_depth);
    GridFunction::from_values(space, out_depth, values)
}

/// The kernel/coboundary splitting of a function with respect to a
/// normalized potential.
#[derive(Debug, Clone)]
pub struct KernelProjection {
    /// The component annihilated by the transfer operator.
    pub kernel: GridFunction,
    /// Generator `w` of the coboundary part `w - w ∘ sigma`, mean zero.
    pub generator: GridFunction,
    /// The constant component, equal to the integral of the input.
    pub constant: f64,
}

/// Split `phi = xi + (w - w ∘ sigma + c)` with `L_f xi = 0`,
/// `w = (I - L_f)^{-1} (c - L_f phi)` and `c = ∫ phi dmu`.
pub fn kernel_project(
    f_norm: &GridFunction,
    phi: &GridFunction,
    tol: f64,
) -> Result<KernelProjection> {
    require_normalized(f_norm)?;
    let k = f_norm.depth().max(1);
    let mu = gibbs_measure(f_norm, phi.depth().max(k))?;
    let constant = integrate(phi, &mu)?;
    let l_phi = apply_transfer(f_norm, phi)?;
    let rhs = l_phi.scale(-1.0).add_scalar(constant);
    let generator = resolvent_mean_zero(f_norm, &rhs, tol)?;
    let kernel = phi
        .sub(&generator)?
        .add(&generator.compose_shift(1)?)?
        .add_scalar(-constant);
    Ok(KernelProjection {
        kernel,
        generator,
        constant,
    })
}

/// Directional derivative of the (normalized) eigenfunction: the mean-zero
/// solution `u` of `(L_f - I) u = ∫ g dmu - L_f g`, equal to
/// `sum_{j>=1} L_f^j (g - ∫ g dmu)`.
pub fn eigfun_derivative(f_norm: &GridFunction, g: &GridFunction, tol: f64) -> Result<GridFunction> {
    require_normalized(f_norm)?;
    let k = f_norm.depth().max(1);
    let mu = gibbs_measure(f_norm, g.depth().max(k))?;
    let mean = integrate(g, &mu)?;
    let rhs = apply_transfer(f_norm, g)?.add_scalar(-mean);
    resolvent_mean_zero(f_norm, &rhs, tol)
}

/// Sup-norm of `L_{f+g} w - L_f (w (1 + g + g^2/2))`, the second-order
/// operator Taylor remainder; scales as the cube of `g`.
pub fn taylor_remainder(f: &GridFunction, g: &GridFunction, w: &GridFunction) -> Result<f64> {
    let lhs = apply_transfer(&f.add(g)?, w)?;
    let quad = g
        .mul(g)?
        .scale(0.5)
        .add(g)?
        .add_scalar(1.0);
    let rhs = apply_transfer(f, &w.mul(&quad)?)?;
    Ok(lhs.sub(&rhs)?.sup_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::inner_product;

    fn d2() -> Arc<AprioriSpace> {
        AprioriSpace::finite_alphabet(2, None).unwrap()
    }

    #[test]
    fn transfer_of_one_probability_mode() {
        let s = d2();
        let f = GridFunction::constant(&s, 0.0);
        let one = GridFunction::constant(&s, 1.0);
        let out = apply_transfer(&f, &one).unwrap();
        assert_eq!(out.values(), &[1.0]);
    }

    #[test]
    fn transfer_depth1_average() {
        let s = d2();
        let f = GridFunction::from_values(&s, 1, vec![0.0, 3f64.ln()]).unwrap();
        let one = GridFunction::constant(&s, 1.0);
        let out = apply_transfer(&f, &one).unwrap();
        assert_eq!(out.depth(), 0);
        assert!((out.values()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_matches_apply_transfer() {
        let s = d2();
        let f = GridFunction::from_values(&s, 2, vec![0.3, -0.7, 1.1, 0.4]).unwrap();
        let w = GridFunction::from_values(&s, 2, vec![1.0, 2.0, -0.5, 0.25]).unwrap();
        let m = TransferMatrix::new(&f, 2).unwrap();
        let via_matrix = m.apply(w.values());
        let direct = apply_transfer(&f, &w).unwrap().embed(2).unwrap();
        for (a, b) in via_matrix.iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        // Row sums of the dense matrix at f = 0 are one (probability mode).
        let zero = GridFunction::constant(&s, 0.0);
        let mz = TransferMatrix::new(&zero, 2).unwrap();
        let dense = mz.dense();
        for u in 0..4 {
            let row: f64 = dense[u * 4..(u + 1) * 4].iter().sum();
            assert!((row - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dense_parent_matches_operator_action() {
        let s = d2();
        let f = GridFunction::from_values(&s, 2, vec![0.3, -0.7, 1.1, 0.4]).unwrap();
        let m = TransferMatrix::new(&f, 2).unwrap();
        let (c, rows) = m.dense_parent();
        assert_eq!(rows, 2);
        let w = GridFunction::from_values(&s, 1, vec![1.5, -0.5]).unwrap();
        let lw = apply_transfer(&f, &w).unwrap();
        for u in 0..rows {
            let direct: f64 = (0..rows).map(|v| c[u * rows + v] * w.values()[v]).sum();
            assert!((direct - lw.values()[u]).abs() < 1e-15);
        }
    }

    #[test]
    fn rpf_zero_potential() {
        let s = d2();
        let f = GridFunction::constant(&s, 0.0);
        let sol = solve_rpf(&f, &RpfOptions::default()).unwrap();
        assert!((sol.lambda - 1.0).abs() < 1e-14);
        assert!(sol.eigfun.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        // rho is the product of the a priori weights at depth 1.
        assert_eq!(sol.eigmeasure.depth(), 1);
        for (w, exp) in sol.eigmeasure.weights().iter().zip([0.5, 0.5]) {
            assert!((w - exp).abs() < 1e-13);
        }
    }

    #[test]
    fn rpf_depth1_closed_form() {
        let s = d2();
        let f = GridFunction::from_values(&s, 1, vec![0.0, 3f64.ln()]).unwrap();
        let sol = solve_rpf(&f, &RpfOptions::default()).unwrap();
        assert!((sol.lambda - 2.0).abs() < 1e-13);
        assert!(sol.eigfun.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn normalize_depth1() {
        let s = d2();
        let f = GridFunction::from_values(&s, 1, vec![0.0, 3f64.ln()]).unwrap();
        let (nf, log_lambda) = normalize_potential(&f, &RpfOptions::default()).unwrap();
        assert!((log_lambda - 2f64.ln()).abs() < 1e-13);
        assert!((nf.values()[0] + 2f64.ln()).abs() < 1e-12);
        assert!((nf.values()[1] - (3f64.ln() - 2f64.ln())).abs() < 1e-12);
        assert!(normalization_error(&nf).unwrap() < 1e-12);
    }

    #[test]
    fn normalize_constant_potential() {
        let s = d2();
        let f = GridFunction::constant(&s, 1.7);
        let (nf, log_lambda) = normalize_potential(&f, &RpfOptions::default()).unwrap();
        assert!((log_lambda - 1.7).abs() < 1e-13);
        assert!(nf.sup_norm() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let s = d2();
        let f = GridFunction::from_values(&s, 2, vec![0.4, -0.3, 0.9, 0.1]).unwrap();
        let (nf, _) = normalize_potential(&f, &RpfOptions::default()).unwrap();
        let (nff, log_lambda2) = normalize_potential(&nf, &RpfOptions::default()).unwrap();
        assert!(log_lambda2.abs() < 1e-12);
        assert!(nff.sub(&nf).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn gibbs_bernoulli() {
        let s = d2();
        let f = GridFunction::constant(&s, 0.0);
        let mu = gibbs_measure(&f, 2).unwrap();
        for w in mu.weights() {
            assert!((w - 0.25).abs() < 1e-13);
        }
        // Deepen then marginalize returns the shallow version.
        let mu3 = gibbs_measure(&f, 3).unwrap().marginalize_last().unwrap();
        for (a, b) in mu3.weights().iter().zip(mu.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resolvent_identities() {
        let s = d2();
        let f = GridFunction::constant(&s, 0.0); // normalized
        // phi = 0 -> 0
        let zero = GridFunction::constant(&s, 0.0);
        let u = resolvent_mean_zero(&f, &zero, 1e-12).unwrap();
        assert!(u.sup_norm() < 1e-12);
        // Kernel element: depth-1 (-1, 1) has L phi = 0, so the resolvent is
        // the identity on it.
        let phi = GridFunction::from_values(&s, 1, vec![-1.0, 1.0]).unwrap();
        let u = resolvent_mean_zero(&f, &phi, 1e-13).unwrap();
        assert!(u.sub(&phi).unwrap().sup_norm() < 1e-12);
        // Nonzero mean rejected.
        let bad = GridFunction::constant(&s, 0.5);
        assert!(matches!(
            resolvent_mean_zero(&f, &bad, 1e-12),
            Err(Error::NonZeroMean(_))
        ));
    }

    #[test]
    fn kernel_project_reassembles() -> crate::Result<()> {
        let s = d2();
        let f0 = GridFunction::from_values(&s, 2, vec![0.2, -0.4, 0.6, 0.1])?;
        let (f, _) = normalize_potential(&f0, &RpfOptions::default())?;
        let phi = GridFunction::from_values(&s, 2, vec![1.0, -0.3, 0.8, 0.2])?;
        let proj = kernel_project(&f, &phi, 1e-13)?;
        // L xi = 0
        let lxi = apply_transfer(&f, &proj.kernel)?;
        assert!(lxi.sup_norm() < 1e-10, "||L xi|| = {}", lxi.sup_norm());
        // Reassembly phi = xi + w - w∘sigma + c
        let rebuilt = proj
            .kernel
            .add(&proj.generator)?
            .sub(&proj.generator.compose_shift(1)?)?
            .add_scalar(proj.constant);
        assert!(rebuilt.sub(&phi)?.sup_norm() < 1e-10);
        // Kernel part has mu-mean zero.
        let mu = gibbs_measure(&f, proj.kernel.depth())?;
        let one = GridFunction::constant(&s, 1.0);
        assert!(inner_product(&proj.kernel, &one, &mu)?.abs() < 1e-10);
        Ok(())
    }

    #[test]
    fn kernel_project_pure_cases() {
        let s = d2();
        let f = GridFunction::constant(&s, 0.0);
        // phi in the kernel -> (phi, 0, 0)
        let eta = GridFunction::from_values(&s, 1, vec![-1.0, 1.0]).unwrap();
        let proj = kernel_project(&f, &eta, 1e-13).unwrap();
        assert!(proj.kernel.sub(&eta).unwrap().sup_norm() < 1e-11);
        assert!(proj.generator.sup_norm() < 1e-11);
        assert!(proj.constant.abs() < 1e-12);
        // Pure coboundary phi = v - v∘sigma + c -> (0, v - mean v, c)
        let v = GridFunction::from_values(&s, 1, vec![0.7, -0.2]).unwrap();
        let phi = v.sub(&v.compose_shift(1).unwrap()).unwrap().add_scalar(0.3);
        let proj = kernel_project(&f, &phi, 1e-13).unwrap();
        assert!(proj.kernel.sup_norm() < 1e-11);
        assert!((proj.constant - 0.3).abs() < 1e-12);
        let v_centered = v.add_scalar(-0.25); // mean of v under Bernoulli(1/2)
        assert!(proj.generator.sub(&v_centered).unwrap().sup_norm() < 1e-11);
    }

    #[test]
    fn eigfun_derivative_cases() {
        let s = d2();
        let f = GridFunction::constant(&s, 0.0);
        // Constant direction -> 0.
        let c = GridFunction::constant(&s, 2.0);
        assert!(eigfun_derivative(&f, &c, 1e-13).unwrap().sup_norm() < 1e-12);
        // Kernel direction -> 0 (constant, fixed to mean zero).
        let eta = GridFunction::from_values(&s, 1, vec![-1.0, 1.0]).unwrap();
        assert!(eigfun_derivative(&f, &eta, 1e-13).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn taylor_remainder_scalar_case() {
        let s = d2();
        let f = GridFunction::from_values(&s, 1, vec![0.1, -0.2]).unwrap();
        let w = GridFunction::from_values(&s, 1, vec![1.0, 2.0]).unwrap();
        // g = 0 -> 0
        let zero = GridFunction::constant(&s, 0.0);
        assert_eq!(taylor_remainder(&f, &zero, &w).unwrap(), 0.0);
        // Constant g = eps: remainder is |e^eps - (1 + eps + eps^2/2)| * ||L_f w||.
        let eps = 0.3;
        let g = GridFunction::constant(&s, eps);
        let lw = apply_transfer(&f, &w).unwrap().sup_norm();
        let expected = (eps.exp() - (1.0 + eps + eps * eps / 2.0)).abs() * lw;
        let got = taylor_remainder(&f, &g, &w).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn non_convergence_is_an_explicit_failure() {
        let s = AprioriSpace::circle(8).unwrap();
        let f = GridFunction::from_evaluator(&s, 2, |w| ((w[0] * 3 + w[1]) % 5) as f64 * 0.1)
            .unwrap();
        let opts = RpfOptions {
            tol: 1e-13,
            max_iter: 2,
        };
        match solve_rpf(&f, &opts) {
            Err(Error::NonConvergence { residual, iterations }) => {
                assert!(residual > 1e-13);
                assert!(iterations <= 2);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn extreme_range_potential_is_handled() {
        let s = d2();
        // Range far beyond exp overflow; log-lambda must stay finite and
        // close to the dominant value.
        let f = GridFunction::from_values(&s, 1, vec![0.0, 500.0]).unwrap();
        let sol = solve_rpf(&f, &RpfOptions::default()).unwrap();
        // lambda = (e^0 + e^500)/2 -> log lambda = 500 + log((e^-500 + 1)/2)
        assert!((sol.log_lambda - (500.0 - 2f64.ln())).abs() < 1e-9);
    }
}
