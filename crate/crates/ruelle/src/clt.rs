//! Monte Carlo verification of the central limit theorem for Birkhoff sums.
//!
//! The Gibbs measure of a normalized depth-`k` potential conditions the
//! first coordinate on the next `k - 1`: the weight of prepending symbol `a`
//! to a word `u` is exactly `nu_a e^{f(a u)}`, and these sum to one by
//! normalization. A stationary sample path is therefore generated backwards,
//! starting from the exact stationary marginal, and read left to right; no
//! burn-in is needed. Normalized Birkhoff window sums over non-overlapping
//! windows are then compared against the Gaussian with the asymptotic
//! variance through the Kolmogorov-Smirnov distance and moment generating
//! functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::funcspace::integrate;
use crate::thermo::{pressure_second_derivative, VarianceMethod, VarianceOptions};
use crate::transfer::{gibbs_measure, require_normalized};
use crate::words::word_count;
use crate::{Error, GridFunction, Result};

/// Variance below which a direction is reported as degenerate (coboundary to
/// a constant) instead of tested against a Gaussian.
pub const DEGENERATE_SIGMA2: f64 = 1e-10;

const MAX_SEQUENCE: usize = 1 << 31;

/// Draw a stationary sample path of the Gibbs measure, deterministically in
/// the seed (counter-based ChaCha stream). Symbols are node indices.
pub fn sample_gibbs(f_norm: &GridFunction, length: usize, seed: u64) -> Result<Vec<u16>> {
    require_normalized(f_norm)?;
    let space = f_norm.space();
    let n = space.len();
    if n > u16::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "sampler supports at most {} symbols, space has {n}",
            u16::MAX
        )));
    }
    let k = f_norm.depth().max(1);
    if length < k {
        return Err(Error::InvalidArgument(format!(
            "sequence length {length} must be at least the potential depth {k}"
        )));
    }
    if length > MAX_SEQUENCE {
        return Err(Error::InvalidArgument(format!(
            "sequence length {length} above cap {MAX_SEQUENCE}"
        )));
    }

    // Conditional cumulative tables: row p lists, over the prepended symbol
    // a, the cumulative weights nu_a e^{f(a p)} for the (k-1)-prefix p.
    let f = f_norm.embed(k)?;
    let lead = word_count(n, k - 1)?;
    let mut cumulative = vec![0.0f64; lead * n];
    for p in 0..lead {
        let mut acc = 0.0;
        for a in 0..n {
            acc += space.weight(a) * f.values()[a * lead + p].exp();
            cumulative[p * n + a] = acc;
        }
        let total = cumulative[p * n + n - 1];
        for slot in &mut cumulative[p * n..(p + 1) * n] {
            *slot /= total;
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut draw = |cdf: &[f64]| -> usize {
        let u: f64 = rng.gen();
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
    };

    let mut seq = vec![0u16; length];
    // Initial (k-1)-word from the exact stationary marginal, placed at the
    // right end of the sequence.
    let marginal = gibbs_measure(f_norm, k - 1)?;
    let mut cdf = Vec::with_capacity(marginal.weights().len());
    let mut acc = 0.0;
    for &w in marginal.weights() {
        acc += w;
        cdf.push(acc);
    }
    let mut prefix = draw(&cdf);
    {
        let mut idx = prefix;
        for pos in (length - (k - 1)..length).rev() {
            seq[pos] = (idx % n) as u16;
            idx /= n;
        }
    }

    // Prepend the remaining symbols.
    let tail_div = lead / n.min(lead); // n^(k-2) when k >= 2, else 1
    for pos in (0..length - (k - 1)).rev() {
        let a = draw(&cumulative[prefix * n..(prefix + 1) * n]);
        seq[pos] = a as u16;
        prefix = if k >= 2 {
            a * tail_div + prefix / n
        } else {
            0
        };
    }
    Ok(seq)
}

/// Normalized Birkhoff sums `(1/sqrt(n)) sum_{j<n} (g(sigma^j x) - beta')`
/// over `m` non-overlapping windows of stride `n`.
pub fn birkhoff_samples(
    g: &GridFunction,
    seq: &[u16],
    n_window: usize,
    m: usize,
    beta_prime: f64,
) -> Result<Vec<f64>> {
    if n_window == 0 || m == 0 {
        return Err(Error::InvalidArgument("need n >= 1 and m >= 1".into()));
    }
    let n = g.space().len();
    let depth = g.depth();
    let needed = m * n_window + depth;
    if seq.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "sequence of length {} too short: need {needed}",
            seq.len()
        )));
    }
    let tail = if depth > 0 {
        word_count(n, depth - 1)?
    } else {
        1
    };
    let scale = 1.0 / (n_window as f64).sqrt();
    let mut samples = Vec::with_capacity(m);
    for i in 0..m {
        let start = i * n_window;
        let mut idx = 0usize;
        for t in 0..depth {
            idx = idx * n + seq[start + t] as usize;
        }
        let mut sum = 0.0;
        for j in 0..n_window {
            sum += g.values()[idx] - beta_prime;
            if depth > 0 {
                idx = (idx % tail) * n + seq[start + j + depth] as usize;
            }
        }
        samples.push(sum * scale);
    }
    Ok(samples)
}

/// Monte Carlo estimate of the asymptotic variance: the mean of squared
/// normalized window sums.
pub fn asymptotic_variance_mc(
    f_norm: &GridFunction,
    g: &GridFunction,
    n_window: usize,
    m: usize,
    seed: u64,
) -> Result<f64> {
    let mu = gibbs_measure(f_norm, f_norm.depth().max(g.depth()).max(1))?;
    let beta_prime = integrate(g, &mu)?;
    let seq = sample_gibbs(f_norm, m * n_window + g.depth() + 8, seed)?;
    let samples = birkhoff_samples(g, &seq, n_window, m, beta_prime)?;
    Ok(samples.iter().map(|s| s * s).sum::<f64>() / m as f64)
}

/// One-sample Kolmogorov-Smirnov distance between the empirical law of the
/// samples and the centered Gaussian with variance `sigma2`.
pub fn ks_distance(samples: &[f64], sigma2: f64) -> Result<f64> {
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "ks distance needs a positive variance, got {sigma2}"
        )));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let normal = Normal::new(0.0, sigma2.sqrt())
        .map_err(|e| Error::InvalidArgument(format!("gaussian: {e}")))?;
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal.cdf(x);
        d = d.max(((i + 1) as f64 / m - cdf).abs());
        d = d.max((i as f64 / m - cdf).abs());
    }
    Ok(d)
}

/// Largest gap over the grid between the empirical moment generating
/// function and the Gaussian reference `exp(z^2 sigma2 / 2)`.
pub fn mgf_max_error(samples: &[f64], sigma2: f64, z_grid: &[f64]) -> Result<f64> {
    if z_grid.is_empty() {
        return Err(Error::InvalidArgument("empty z grid".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let m = samples.len() as f64;
    let mut worst = 0.0f64;
    for &z in z_grid {
        let empirical: f64 = samples.iter().map(|&x| (z * x).exp()).sum::<f64>() / m;
        let reference = (z * z * sigma2 / 2.0).exp();
        worst = worst.max((empirical - reference).abs());
    }
    Ok(worst)
}

/// Default grid of nine equispaced points in `[-1, 1]`; larger `|z|` makes
/// the empirical tails of `e^{zX}` too heavy at desk sample counts.
pub fn default_z_grid() -> Vec<f64> {
    (0..9).map(|i| -1.0 + 0.25 * i as f64).collect()
}

/// Controls for [`clt_report`].
#[derive(Debug, Clone, Serialize)]
pub struct CltOptions {
    /// Window length for the Birkhoff sums.
    pub n: usize,
    /// Number of windows (at least 1000).
    pub m: usize,
    pub seed: u64,
    pub z_grid: Vec<f64>,
    /// Number of histogram bins.
    pub bins: usize,
}

impl Default for CltOptions {
    fn default() -> Self {
        Self {
            n: 2000,
            m: 50_000,
            seed: 0,
            z_grid: default_z_grid(),
            bins: 60,
        }
    }
}

/// Equal-width histogram covering the sample range; counts sum to the
/// number of samples.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn build(samples: &[f64], bins: usize) -> Self {
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        let edges: Vec<f64> = (0..=bins)
            .map(|i| lo + span * i as f64 / bins as f64)
            .collect();
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let slot = (((x - lo) / span * bins as f64) as usize).min(bins - 1);
            counts[slot] += 1;
        }
        Self { edges, counts }
    }
}

/// Outcome of the distributional check of the central limit theorem.
#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub n: usize,
    pub m: usize,
    /// Variance of the reference Gaussian (resolvent route).
    pub sigma2_used: f64,
    /// Centering `∫ g dmu`.
    pub beta_prime: f64,
    /// `None` when the direction is degenerate.
    pub ks_distance: Option<f64>,
    pub mgf_max_abs_err: Option<f64>,
    /// Set when the variance is below [`DEGENERATE_SIGMA2`]; the limit law
    /// is a point mass and the Gaussian comparisons are skipped.
    pub degenerate: bool,
    pub seed: u64,
    pub histogram: Histogram,
}

/// Run the full pipeline: centering, deterministic variance, sampling,
/// window sums, KS and MGF comparisons.
pub fn clt_report(f_norm: &GridFunction, g: &GridFunction, opts: &CltOptions) -> Result<CltReport> {
    if opts.m < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 windows, got {}",
            opts.m
        )));
    }
    let mu = gibbs_measure(f_norm, f_norm.depth().max(g.depth()).max(1))?;
    let beta_prime = integrate(g, &mu)?;
    let sigma2 = pressure_second_derivative(
        f_norm,
        g,
        VarianceMethod::Resolvent,
        &VarianceOptions::default(),
    )?;
    let seq = sample_gibbs(f_norm, opts.m * opts.n + g.depth() + 8, opts.seed)?;
    let samples = birkhoff_samples(g, &seq, opts.n, opts.m, beta_prime)?;
    let histogram = Histogram::build(&samples, opts.bins.max(1));
    let degenerate = sigma2 < DEGENERATE_SIGMA2;
    let (ks, mgf) = if degenerate {
        (None, None)
    } else {
        (
            Some(ks_distance(&samples, sigma2)?),
            Some(mgf_max_error(&samples, sigma2, &opts.z_grid)?),
        )
    };
    Ok(CltReport {
        n: opts.n,
        m: opts.m,
        sigma2_used: sigma2,
        beta_prime,
        ks_distance: ks,
        mgf_max_abs_err: mgf,
        degenerate,
        seed: opts.seed,
        histogram,
    })
}
