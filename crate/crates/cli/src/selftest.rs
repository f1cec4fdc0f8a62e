//! Built-in invariant battery: a condensed deterministic sweep over every
//! subsystem, printing one line per check. Any violation makes the process
//! exit nonzero. Output carries no timings, so two runs are byte-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

use ruelle::clt::{clt_report, sample_gibbs, CltOptions};
use ruelle::fd;
use ruelle::funcspace::integrate;
use ruelle::markovbasis::{
    coeff_directional_derivative, complete_depth2_kernel, haar_e, kernel_a, words_up_to,
    MarkovSpec, Word,
};
use ruelle::thermo::{
    entropy, entropy_derivative_general, linear_response, pressure, pressure_derivative,
    variance_report, VarianceOptions,
};
use ruelle::transfer::{
    apply_transfer, eigfun_derivative, gibbs_measure, kernel_project, normalization_error,
    normalize_potential, solve_rpf, taylor_remainder, RpfOptions,
};
use ruelle::{inner_product, AprioriSpace, GridFunction};

use crate::commands::circle_cos_reference;

struct Battery {
    checks: usize,
    failures: usize,
}

impl Battery {
    fn check(&mut self, name: &str, outcome: Result<(), String>) {
        self.checks += 1;
        match outcome {
            Ok(()) => println!("ok - {name}"),
            Err(msg) => {
                self.failures += 1;
                println!("FAIL - {name}: {msg}");
            }
        }
    }
}

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn random_function(
    space: &Arc<AprioriSpace>,
    depth: usize,
    rng: &mut ChaCha12Rng,
    scale: f64,
) -> GridFunction {
    GridFunction::from_evaluator(space, depth, |_| rng.gen_range(-scale..scale)).unwrap()
}

fn markov() -> MarkovSpec {
    MarkovSpec::new([[0.7, 0.3], [0.4, 0.6]]).unwrap()
}

fn chain_variance_oracle(p: [[f64; 2]; 2], g: [f64; 2]) -> f64 {
    let pi = [p[1][0] / (p[0][1] + p[1][0]), p[0][1] / (p[0][1] + p[1][0])];
    let mean = pi[0] * g[0] + pi[1] * g[1];
    let gc = [g[0] - mean, g[1] - mean];
    let mut sigma2 = pi[0] * gc[0] * gc[0] + pi[1] * gc[1] * gc[1];
    let mut pj = p;
    for _ in 1..1000 {
        let mut cov = 0.0;
        for i in 0..2 {
            for l in 0..2 {
                cov += pi[i] * gc[i] * (pj[i][l] - pi[l]) * gc[l];
            }
        }
        sigma2 += 2.0 * cov;
        if cov.abs() < 1e-17 {
            break;
        }
        let mut next = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                next[i][j] = pj[i][0] * p[0][j] + pj[i][1] * p[1][j];
            }
        }
        pj = next;
    }
    sigma2
}

/// Dominant eigenvalue of a positive 2x2 matrix in closed form.
fn dominant_2x2(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let disc = (m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[1][0];
    0.5 * (tr + disc.sqrt())
}

pub fn run() -> usize {
    let mut b = Battery { checks: 0, failures: 0 };
    let opts = RpfOptions::default();
    let d2 = AprioriSpace::finite_alphabet(2, None).unwrap();
    let spec = markov();
    let log_j = spec.log_j_potential();

    b.check("space invariants", {
        let circle = AprioriSpace::circle(64).unwrap();
        ensure(
            (circle.total_mass() - 1.0).abs() < 1e-12
                && (0..64).all(|i| circle.metric(i, i) == 0.0),
            "circle quadrature weights or metric broken".into(),
        )
    });

    b.check("rpf fixed point of the averaging operator", {
        let zero = GridFunction::constant(&d2, 0.0);
        let sol = solve_rpf(&zero, &opts).unwrap();
        ensure(
            (sol.lambda - 1.0).abs() < 1e-14 && sol.eigfun.sup_norm() - 1.0 < 1e-12,
            format!("lambda {}", sol.lambda),
        )
    });

    b.check("rpf markov eigendata and cylinder weights", {
        let sol = solve_rpf(&log_j, &opts).unwrap();
        let mu3 = gibbs_measure(&log_j, 3).unwrap();
        let exact = spec.gibbs_weights(3).unwrap();
        let worst = mu3
            .weights()
            .iter()
            .zip(exact.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        ensure(
            (sol.lambda - 1.0).abs() < 1e-12 && worst < 1e-12,
            format!("lambda gap {:.2e}, weight gap {worst:.2e}", (sol.lambda - 1.0).abs()),
        )
    });

    b.check("power iteration matches closed-form 2x2 eigenvalue", {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let f = random_function(&d2, 2, &mut rng, 1.0);
            let sol = solve_rpf(&f, &opts).unwrap();
            // Dense operator on depth-1 tables.
            let mut m = [[0.0; 2]; 2];
            for (u, row) in m.iter_mut().enumerate() {
                for (a, entry) in row.iter_mut().enumerate() {
                    *entry = 0.5 * f.values()[a * 2 + u].exp();
                }
            }
            worst = worst.max((sol.lambda - dominant_2x2(m)).abs());
        }
        ensure(worst < 1e-12, format!("gap {worst:.2e}"))
    });

    b.check("normalization produces a normalized potential", {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let f = random_function(&d2, 2, &mut rng, 1.0);
        let (nf, _) = normalize_potential(&f, &opts).unwrap();
        ensure(
            normalization_error(&nf).unwrap() < 1e-12,
            "||L1 - 1|| too large".into(),
        )
    });

    b.check("pressure is coboundary invariant", {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let f = random_function(&d2, 2, &mut rng, 1.0);
            let v = random_function(&d2, 2, &mut rng, 1.0);
            let c: f64 = rng.gen_range(-1.0..1.0);
            let shifted = f
                .add(&v)
                .unwrap()
                .sub(&v.compose_shift(1).unwrap())
                .unwrap()
                .add_scalar(c);
            worst =
                worst.max((pressure(&shifted).unwrap() - pressure(&f).unwrap() - c).abs());
        }
        ensure(worst < 1e-8, format!("gap {worst:.2e}"))
    });

    b.check("kernel projection reassembles and annihilates", {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let phi = random_function(&d2, 2, &mut rng, 1.0);
        let f0 = random_function(&d2, 2, &mut rng, 0.8);
        let (f, _) = normalize_potential(&f0, &opts).unwrap();
        let proj = kernel_project(&f, &phi, 1e-13).unwrap();
        let rebuilt = proj
            .kernel
            .add(&proj.generator)
            .unwrap()
            .sub(&proj.generator.compose_shift(1).unwrap())
            .unwrap()
            .add_scalar(proj.constant);
        let resid = apply_transfer(&f, &proj.kernel).unwrap().sup_norm();
        ensure(
            rebuilt.sub(&phi).unwrap().sup_norm() < 1e-10 && resid < 1e-10,
            format!("annihilation {resid:.2e}"),
        )
    });

    b.check("variance routes agree and match the chain oracle", {
        let pi1 = spec.stationary()[1];
        let g = GridFunction::from_values(spec.space(), 1, vec![-pi1, 1.0 - pi1]).unwrap();
        let rep = variance_report(&log_j, &g, &VarianceOptions::default()).unwrap();
        let oracle = chain_variance_oracle(*spec.transition(), [-pi1, 1.0 - pi1]);
        ensure(
            rep.spread < 1e-6
                && (rep.sigma2_resolvent - oracle).abs() < 1e-8
                && (rep.sigma2_fd - oracle).abs() < 1e-4,
            format!("spread {:.2e}", rep.spread),
        )
    });

    b.check("coboundary direction has zero variance", {
        let zero_pot = GridFunction::constant(&d2, 0.0);
        let v = GridFunction::from_values(&d2, 1, vec![0.6, -0.4]).unwrap();
        let g = v.sub(&v.compose_shift(1).unwrap()).unwrap().add_scalar(0.25);
        let rep = variance_report(&zero_pot, &g, &VarianceOptions::default()).unwrap();
        let worst = rep
            .sigma2_resolvent
            .abs()
            .max(rep.sigma2_quadratic.abs())
            .max(rep.sigma2_greenkubo.abs());
        ensure(worst < 1e-8, format!("worst {worst:.2e}"))
    });

    b.check("markov entropy matches the closed form", {
        let (p, pi) = (spec.transition(), spec.stationary());
        let mut expect = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                expect -= pi[i] * p[i][j] * (pi[i] * p[i][j] / pi[j]).ln();
            }
        }
        let h = entropy(&log_j, 3).unwrap();
        ensure((h - expect).abs() < 1e-12, format!("{h} vs {expect}"))
    });

    b.check("variational identity at the equilibrium", {
        let mu = gibbs_measure(&log_j, 2).unwrap();
        let total = entropy(&log_j, 2).unwrap() + integrate(&log_j, &mu).unwrap();
        ensure(total.abs() < 1e-12, format!("h + ∫f = {total:.2e}"))
    });

    b.check("entropy slope along a general direction matches its stencil", {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let g = random_function(spec.space(), 2, &mut rng, 1.0);
        let analytic = entropy_derivative_general(&log_j, &g).unwrap();
        let numeric = fd::derivative_5pt(
            |t| {
                let (nf, _) =
                    normalize_potential(&log_j.add(&g.scale(t)).unwrap(), &opts).unwrap();
                entropy(&nf, nf.depth().max(1)).unwrap()
            },
            0.0,
            1e-3,
        );
        ensure(
            (analytic - numeric).abs() < 1e-5 * analytic.abs().max(1e-2),
            format!("{analytic} vs {numeric}"),
        )
    });

    b.check("haar and kernel families are orthonormal and annihilated", {
        let words = words_up_to(3);
        let mu = spec.gibbs_weights(5).unwrap();
        let mut family = vec![haar_e(&spec, &Word::empty()).unwrap()];
        for w in &words {
            family.push(haar_e(&spec, w).unwrap());
        }
        let mut kernel = Vec::new();
        for w in &words {
            kernel.push(kernel_a(&spec, w).unwrap());
        }
        let pair = complete_depth2_kernel(&spec).unwrap();
        kernel.push(pair[0].clone());
        kernel.push(pair[1].clone());
        let mut worst = 0.0f64;
        for set in [&family, &kernel] {
            for (i, a) in set.iter().enumerate() {
                for (j, c) in set.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((inner_product(a, c, &mu).unwrap() - expect).abs());
                }
            }
        }
        let mut ann = 0.0f64;
        for g in &kernel {
            ann = ann.max(apply_transfer(&log_j, g).unwrap().sup_norm());
        }
        ensure(
            worst < 1e-12 && ann < 1e-12,
            format!("gram {worst:.2e} annihilation {ann:.2e}"),
        )
    });

    b.check("coefficient form of the directional derivative", {
        let words = words_up_to(2);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let eta = kernel_a(&spec, &Word::new(&[0]).unwrap())
            .unwrap()
            .scale(0.8)
            .add(&kernel_a(&spec, &Word::new(&[1, 0]).unwrap()).unwrap().scale(-0.3))
            .unwrap();
        let phi = random_function(spec.space(), 2, &mut rng, 1.0);
        // Internal cross-check against the direct integral is part of the call.
        match coeff_directional_derivative(&spec, &phi, &log_j, &eta, &words) {
            Ok(_) => Ok(()),
            Err(e) => Err(e.to_string()),
        }
    });

    b.check("operator taylor remainder has cubic order", {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let f = random_function(&d2, 2, &mut rng, 0.8);
        let g = random_function(&d2, 2, &mut rng, 1.0);
        let w = random_function(&d2, 2, &mut rng, 1.0).add_scalar(2.0);
        let eps = [1e-1, 1e-2, 1e-3];
        let rem: Vec<f64> = eps
            .iter()
            .map(|&e| taylor_remainder(&f, &g.scale(e), &w).unwrap())
            .collect();
        let slope = fd::log_log_slope(&eps, &rem);
        ensure((2.8..=3.2).contains(&slope), format!("slope {slope}"))
    });

    b.check("linear response series agrees with the inner product", {
        let eta = kernel_a(&spec, &Word::new(&[0]).unwrap()).unwrap();
        let phi = kernel_a(&spec, &Word::new(&[1, 0]).unwrap())
            .unwrap()
            .scale(0.6)
            .add_scalar(0.2);
        match linear_response(&log_j, &phi, &eta) {
            Ok(_) => Ok(()),
            Err(e) => Err(e.to_string()),
        }
    });

    b.check("eigenfunction derivative is flat along kernel directions", {
        let eta = kernel_a(&spec, &Word::new(&[1]).unwrap()).unwrap();
        let du = eigfun_derivative(&log_j, &eta, 1e-13).unwrap();
        let spread = du.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - du.values().iter().cloned().fold(f64::INFINITY, f64::min);
        ensure(spread <= 1e-9, format!("spread {spread:.2e}"))
    });

    b.check("eigenfunction derivative solves its defining equation", {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let g = random_function(spec.space(), 2, &mut rng, 1.0);
        let u = eigfun_derivative(&log_j, &g, 1e-12).unwrap();
        let mu = gibbs_measure(&log_j, 2).unwrap();
        let mean = integrate(&g, &mu).unwrap();
        let lhs = apply_transfer(&log_j, &u).unwrap().sub(&u).unwrap();
        let rhs = apply_transfer(&log_j, &g).unwrap().scale(-1.0).add_scalar(mean);
        let resid = lhs.sub(&rhs).unwrap().sup_norm();
        ensure(resid <= 1e-10, format!("residual {resid:.2e}"))
    });

    b.check("sampler reproduces two-symbol cylinder frequencies", {
        let l = 200_000;
        let seq = sample_gibbs(&log_j, l, 5).unwrap();
        let mut counts = [[0usize; 2]; 2];
        for w in seq.windows(2) {
            counts[w[0] as usize][w[1] as usize] += 1;
        }
        let total = (l - 1) as f64;
        let mut worst = 0.0f64;
        for (i, row) in counts.iter().enumerate() {
            for (j, &count) in row.iter().enumerate() {
                let expect = spec.stationary()[i] * spec.transition()[i][j];
                let se = (expect * (1.0 - expect) / total).sqrt();
                worst = worst.max((count as f64 / total - expect).abs() / se);
            }
        }
        ensure(worst < 5.0, format!("worst z-score {worst:.2}"))
    });

    b.check("clt reports are reproducible and close to gaussian", {
        let pi1 = spec.stationary()[1];
        let g = GridFunction::from_values(spec.space(), 1, vec![-pi1, 1.0 - pi1]).unwrap();
        let copts = CltOptions {
            n: 500,
            m: 4000,
            seed: 7,
            ..CltOptions::default()
        };
        let a = clt_report(&log_j, &g, &copts).unwrap();
        let c = clt_report(&log_j, &g, &copts).unwrap();
        let ks = a.ks_distance.unwrap();
        ensure(
            a.ks_distance == c.ks_distance
                && a.mgf_max_abs_err == c.mgf_max_abs_err
                && a.histogram.counts == c.histogram.counts
                && ks < 0.05,
            format!("ks {ks}"),
        )
    });

    b.check("pressure of the cosine potential on the circle", {
        let circle = AprioriSpace::circle(256).unwrap();
        let f = GridFunction::from_evaluator(&circle, 1, |w| circle.node(w[0])[0].cos()).unwrap();
        let p = pressure(&f).unwrap();
        let reference = circle_cos_reference();
        ensure(
            (p - reference).abs() < 1e-6,
            format!("{p} vs {reference}"),
        )
    });

    b.check("pressure slope matches its stencil", {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let f0 = random_function(&d2, 2, &mut rng, 0.8);
        let (f, _) = normalize_potential(&f0, &opts).unwrap();
        let g = random_function(&d2, 2, &mut rng, 1.0);
        let analytic = pressure_derivative(&f, &g).unwrap();
        let numeric = fd::derivative_5pt(
            |t| pressure(&f.add(&g.scale(t)).unwrap()).unwrap(),
            0.0,
            1e-3,
        );
        ensure(
            (analytic - numeric).abs() < 1e-6 * analytic.abs().max(1e-3),
            format!("{analytic} vs {numeric}"),
        )
    });

    println!("selftest: {} checks, {} failed", b.checks, b.failures);
    b.failures
}
