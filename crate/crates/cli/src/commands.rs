//! Subcommand implementations. Each one resolves the config into workbench
//! objects, computes its results, and writes `report.json` plus CSV tables
//! into the output directory.

use std::path::Path;
use std::time::Instant;

use serde_json::json;

use ruelle::clt::{asymptotic_variance_mc, clt_report, CltOptions};
use ruelle::fd;
use ruelle::markovbasis::{complete_depth2_kernel, haar_e, kernel_a, words_up_to, Word};
use ruelle::thermo::{
    entropy, entropy_derivative, entropy_derivative_general, entropy_second_derivative,
    pressure, pressure_derivative, pressure_second_derivative, variance_report, VarianceMethod,
    VarianceOptions,
};
use ruelle::transfer::{
    apply_transfer, normalization_error, normalize_potential, solve_rpf, RpfOptions,
};
use ruelle::{inner_product, GridFunction};

use crate::config::ExperimentConfig;
use crate::report;
use crate::CliError;

pub struct Outcome {
    pub report_path: std::path::PathBuf,
}

fn rpf_options(cfg: &ExperimentConfig) -> RpfOptions {
    RpfOptions {
        tol: cfg.run.tol.min(1e-10),
        ..RpfOptions::default()
    }
}

fn variance_options(cfg: &ExperimentConfig) -> VarianceOptions {
    VarianceOptions {
        tol: cfg.run.tol,
        fd_step: cfg.run.fd_step,
        ..VarianceOptions::default()
    }
}

/// Resolve the configured potential and normalize it when needed; reports
/// carry the pressure that was subtracted.
fn normalized_potential(
    cfg: &ExperimentConfig,
    base_dir: &Path,
) -> Result<(GridFunction, f64, bool), CliError> {
    let f = cfg.potential(base_dir)?;
    let err = normalization_error(&f)?;
    if err <= 1e-8 {
        Ok((f, 0.0, false))
    } else {
        let (nf, log_lambda) = normalize_potential(&f, &rpf_options(cfg))?;
        Ok((nf, log_lambda, true))
    }
}

pub fn rpf(cfg: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let f = cfg.potential(base_dir)?;
    let sol = solve_rpf(&f, &rpf_options(cfg))?;
    report::write_grid_function(out, "eigfun.csv", &sol.eigfun)?;
    report::write_weights(out, "eigmeasure.csv", &sol.eigmeasure)?;
    report::write_weights(out, "gibbs.csv", &sol.gibbs)?;
    let results = json!({
        "lambda": sol.lambda,
        "log_lambda": sol.log_lambda,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "gap_estimate": sol.gap_estimate,
    });
    let path = report::write_report(out, "rpf", cfg, results, t0.elapsed().as_secs_f64())?;
    Ok(Outcome { report_path: path })
}

pub fn normalize(cfg: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let f = cfg.potential(base_dir)?;
    let (nf, log_lambda) = normalize_potential(&f, &rpf_options(cfg))?;
    let residual = normalization_error(&nf)?;
    report::write_grid_function(out, "normalized.csv", &nf)?;
    let results = json!({
        "log_lambda": log_lambda,
        "normalization_error": residual,
        "depth": nf.depth(),
    });
    let path = report::write_report(out, "normalize", cfg, results, t0.elapsed().as_secs_f64())?;
    Ok(Outcome { report_path: path })
}

pub fn pressure_curve(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out: &Path,
) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let f = cfg.potential(base_dir)?;
    let g = cfg.observable(base_dir)?;
    let grid = cfg
        .run
        .t_grid
        .clone()
        .unwrap_or_else(|| vec![-0.2, -0.1, 0.0, 0.1, 0.2]);
    let opts = rpf_options(cfg);
    let vopts = variance_options(cfg);
    let mut rows = Vec::new();
    let mut max_gap = 0.0f64;
    for &t in &grid {
        let base = f.add(&g.scale(t))?;
        let p = pressure(&base)?;
        let (nf, _) = normalize_potential(&base, &opts)?;
        let p_prime = pressure_derivative(&nf, &g)?;
        let p_prime_fd = fd::derivative_5pt(
            |s| pressure(&f.add(&g.scale(s)).unwrap()).unwrap(),
            t,
            1e-3,
        );
        let gap = (p_prime - p_prime_fd).abs();
        max_gap = max_gap.max(gap);
        if gap > 1e-8 {
            return Err(CliError::numerical(format!(
                "pressure-curve: analytic slope {p_prime} and stencil {p_prime_fd} disagree at t = {t}"
            )));
        }
        let p_second =
            pressure_second_derivative(&nf, &g, VarianceMethod::Resolvent, &vopts)?;
        rows.push(vec![
            format!("{t:.17e}"),
            format!("{p:.17e}"),
            format!("{p_prime:.17e}"),
            format!("{p_prime_fd:.17e}"),
            format!("{p_second:.17e}"),
        ]);
    }
    report::write_table(
        out,
        "pressure_curve.csv",
        &["t", "pressure", "p_prime", "p_prime_fd", "p_double_prime"],
        &rows,
    )?;
    let results = json!({
        "points": grid.len(),
        "max_slope_check_gap": max_gap,
    });
    let path = report::write_report(out, "pressure-curve", cfg, results, t0.elapsed().as_secs_f64())?;
    Ok(Outcome { report_path: path })
}

pub fn variance(cfg: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let (f, log_lambda, renormalized) = normalized_potential(cfg, base_dir)?;
    let g = cfg.observable(base_dir)?;
    let rep = variance_report(&f, &g, &variance_options(cfg))?;
    let mut results = serde_json::to_value(&rep).map_err(|e| CliError::io(e.to_string()))?;
    let table = results.as_object_mut().expect("report object");
    table.insert("renormalized_potential".into(), json!(renormalized));
    table.insert("log_lambda".into(), json!(log_lambda));
    if let Some(seed) = cfg.run.seed {
        let mc = asymptotic_variance_mc(&f, &g, cfg.run.n, cfg.run.m, seed)?;
        table.insert("sigma2_mc".into(), json!(mc));
        table.insert("mc_n".into(), json!(cfg.run.n));
        table.insert("mc_m".into(), json!(cfg.run.m));
        table.insert("mc_seed".into(), json!(seed));
    }
    let path = report::write_report(out, "variance", cfg, results, t0.elapsed().as_secs_f64())?;
    Ok(Outcome { report_path: path })
}

pub fn clt(cfg: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let (f, _, renormalized) = normalized_potential(cfg, base_dir)?;
    let g = cfg.observable(base_dir)?;
    let opts = CltOptions {
        n: cfg.run.n,
        m: cfg.run.m,
        seed: cfg.seed()?,
        z_grid: cfg.z_grid(),
        bins: cfg.run.bins,
    };
    let rep = clt_report(&f, &g, &opts)?;
    report::write_histogram(
        out,
        "histogram.csv",
        &rep.histogram,
        (!rep.degenerate).then_some(rep.sigma2_used),
    )?;
    let mut results = serde_json::to_value(&rep).map_err(|e| CliError::io(e.to_string()))?;
    results
        .as_object_mut()
        .expect("report object")
        .insert("renormalized_potential".into(), json!(renormalized));
    let path = report::write_report(out, "clt", cfg, results, t0.elapsed().as_secs_f64())?;
    Ok(Outcome { report_path: path })
}

pub fn entropy_derivatives(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    out: &Path,
) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let (f, _, _) = normalized_potential(cfg, base_dir)?;
    let g = cfg.observable(base_dir)?;
    let opts = rpf_options(cfg);

    let entropy_along = |t: f64| -> f64 {
        let pot = f.add(&g.scale(t)).unwrap();
        let (nf, _) = normalize_potential(&pot, &opts).unwrap();
        entropy(&nf, nf.depth().max(1)).unwrap()
    };

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut push = |name: &str, analytic: f64, numeric: f64| {
        rows.push(vec![
            name.to_string(),
            format!("{analytic:.17e}"),
            format!("{numeric:.17e}"),
            format!("{:.17e}", (analytic - numeric).abs()),
        ]);
    };

    // Entropy is exact at any depth covering the potential.
    let base_entropy = entropy(&f, f.depth().max(1))?;
    let d_general = entropy_derivative_general(&f, &g)?;
    let d_fd = fd::derivative_5pt(entropy_along, 0.0, 1e-3);
    push("entropy_derivative_general", d_general, d_fd);

    let p_prime = pressure_derivative(&f, &g)?;
    let p_prime_fd = fd::derivative_5pt(
        |t| pressure(&f.add(&g.scale(t)).unwrap()).unwrap(),
        0.0,
        1e-3,
    );
    push("pressure_derivative", p_prime, p_prime_fd);

    let in_kernel = apply_transfer(&f, &g)?.sup_norm() <= 1e-8;
    let mut kernel_rows = json!(null);
    if in_kernel {
        let d_closed = entropy_derivative(&f, &g)?;
        push("entropy_derivative", d_closed, d_fd);
        let d2_closed = entropy_second_derivative(&f, &g)?;
        let d2_fd = fd::second_derivative_5pt(entropy_along, 0.0, cfg.run.fd_step);
        push("entropy_second_derivative", d2_closed, d2_fd);
        kernel_rows = json!({
            "entropy_derivative": d_closed,
            "entropy_second_derivative": d2_closed,
            "entropy_second_derivative_fd": d2_fd,
        });
    }

    report::write_table(
        out,
        "derivatives.csv",
        &["quantity", "analytic", "fd", "abs_gap"],
        &rows,
    )?;
    let results = json!({
        "entropy": base_entropy,
        "entropy_derivative_general": d_general,
        "entropy_derivative_fd": d_fd,
        "pressure_derivative": p_prime,
        "direction_in_kernel": in_kernel,
        "kernel_forms": kernel_rows,
    });
    let path = report::write_report(
        out,
        "entropy-derivatives",
        cfg,
        results,
        t0.elapsed().as_secs_f64(),
    )?;
    Ok(Outcome { report_path: path })
}

pub fn basis(cfg: &ExperimentConfig, _base_dir: &Path, out: &Path) -> Result<Outcome, CliError> {
    let t0 = Instant::now();
    let spec = cfg
        .markov_spec()?
        .ok_or_else(|| CliError::validation("markov: section required for basis".into()))?;
    let f = spec.log_j_potential();
    let max_len = 3usize;
    let words = words_up_to(max_len);

    // Long-format table of both families.
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut add_rows = |family: &str, label: String, g: &GridFunction| {
        for (i, &v) in g.values().iter().enumerate() {
            if v != 0.0 {
                let cyl: String = {
                    let depth = g.depth();
                    let mut word = String::new();
                    let mut idx = i;
                    let mut digits = vec![0u8; depth];
                    for slot in digits.iter_mut().rev() {
                        *slot = (idx % 2) as u8;
                        idx /= 2;
                    }
                    for d in digits {
                        word.push(if d == 0 { '0' } else { '1' });
                    }
                    word
                };
                rows.push(vec![family.into(), label.clone(), cyl, format!("{v:.17e}")]);
            }
        }
    };

    let mut haar = vec![(String::from("(empty)"), haar_e(&spec, &Word::empty())?)];
    for w in &words {
        haar.push((w.to_string(), haar_e(&spec, w)?));
    }
    for (label, g) in &haar {
        add_rows("haar", label.clone(), g);
    }

    let mut kernel = Vec::new();
    for w in &words {
        kernel.push((w.to_string(), kernel_a(&spec, w)?));
    }
    let pair = complete_depth2_kernel(&spec)?;
    kernel.push(("completion-0".into(), pair[0].clone()));
    kernel.push(("completion-1".into(), pair[1].clone()));
    for (label, g) in &kernel {
        add_rows("kernel", label.clone(), g);
    }
    report::write_table(
        out,
        "basis.csv",
        &["family", "word", "cylinder", "value"],
        &rows,
    )?;

    // Gram deviations and annihilation residuals.
    let depth = max_len + 2;
    let mu = spec.gibbs_weights(depth)?;
    let gram_dev = |family: &[(String, GridFunction)]| -> Result<f64, CliError> {
        let mut worst = 0.0f64;
        for (i, (_, a)) in family.iter().enumerate() {
            for (j, (_, b)) in family.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner_product(a, b, &mu)? - expect).abs());
            }
        }
        Ok(worst)
    };
    let haar_dev = gram_dev(&haar)?;
    let kernel_dev = gram_dev(&kernel)?;
    let mut annihilation = 0.0f64;
    for (_, g) in &kernel {
        annihilation = annihilation.max(apply_transfer(&f, g)?.sup_norm());
    }

    let results = json!({
        "words": words.len(),
        "haar_gram_max_deviation": haar_dev,
        "kernel_gram_max_deviation": kernel_dev,
        "kernel_annihilation_max": annihilation,
        "stationary": spec.stationary(),
        "kernel_j": spec.kernel(),
    });
    let path = report::write_report(out, "basis", cfg, results, t0.elapsed().as_secs_f64())?;
    Ok(Outcome { report_path: path })
}

/// High-resolution quadrature reference for the pressure of the cosine
/// potential on the circle: `log((1/2pi) ∫ e^{cos theta} dtheta)`.
pub fn circle_cos_reference() -> f64 {
    let m = 1usize << 15;
    let mean: f64 = (0..m)
        .map(|i| (2.0 * std::f64::consts::PI * i as f64 / m as f64).cos().exp())
        .sum::<f64>()
        / m as f64;
    mean.ln()
}
