//! Monte-Carlo shell profile of the W^{1,p} integrability of `U = Du`.
//!
//! Shells are taken in the gradient variable `|Du(y)| = |Phi(y)|`, i.e. the
//! image-side radius of the change of variables behind the integrability
//! threshold. On those shells the integral pulls back through the forward
//! maps of the pipeline, so no inversion is needed: sample the parameter
//! annulus, weight by the forward Jacobian determinant, and read the Hessian
//! norm off the rotated graph. Shell k of `I_k(p)` then decays like
//! `2^(-k (3 + (2m-2)(1-p)))`; the fitted decay rate changes sign exactly at
//! the critical exponent `(2m+1)/(2m-2)`.

use rayon::prelude::*;

use crate::error::{Result, SlagError};
use crate::geometry::eig3_sym;
use crate::numerics::{sample_in_annulus, seeded_rng, Kahan};
use crate::report::VerificationReport;

use super::pipeline::SingularPipeline;

#[derive(Clone, Debug)]
pub struct SobolevOptions {
    pub n_shells: u32,
    pub samples_per_shell: u64,
    /// Exponents to profile; when empty a default grid around the critical
    /// exponent of the pipeline's m is used.
    pub p_list: Vec<f64>,
    pub seed: u64,
}

impl Default for SobolevOptions {
    fn default() -> Self {
        SobolevOptions {
            n_shells: 10,
            samples_per_shell: 1_000_000,
            p_list: Vec::new(),
            seed: 42,
        }
    }
}

pub fn critical_exponent(m: u32) -> f64 {
    (2.0 * m as f64 + 1.0) / (2.0 * m as f64 - 2.0)
}

pub fn default_p_list(m: u32) -> Vec<f64> {
    let p_star = critical_exponent(m);
    let mut list = vec![1.0, 1.5, 2.0, p_star - 0.1, p_star + 0.1];
    list.sort_by(|a, b| a.partial_cmp(b).unwrap());
    list.dedup();
    list
}

const CHUNK: u64 = 16_384;

struct ShellEstimate {
    /// One integral estimate and standard error per exponent.
    means: Vec<f64>,
    stderrs: Vec<f64>,
}

fn estimate_shell(
    pipe: &SingularPipeline,
    p_list: &[f64],
    r_lo: f64,
    r_hi: f64,
    xfactor: (f64, f64),
    samples: u64,
    seed: u64,
    stream_base: u64,
) -> Result<ShellEstimate> {
    // Enclose the gradient-shell preimage in a parameter annulus; for the
    // identity chart (theta = 0) the enclosure is exact and no sample is
    // rejected.
    let tau = pipe.tau;
    let (m1, m2) = xfactor;
    let x_lo = tau * r_lo / m2;
    let x_hi = tau * r_hi / m1;
    let vol = 4.0 / 3.0 * std::f64::consts::PI * (x_hi.powi(3) - x_lo.powi(3));
    let n_chunks = samples.div_ceil(CHUNK);
    let np = p_list.len();
    let partials: Result<Vec<(Vec<f64>, Vec<f64>, u64)>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = seeded_rng(seed, stream_base + chunk);
            let todo = CHUNK.min(samples - chunk * CHUNK);
            let mut sums = vec![Kahan::default(); np];
            let mut sq = vec![Kahan::default(); np];
            for _ in 0..todo {
                let x = sample_in_annulus(&mut rng, x_lo, x_hi);
                let (xt, _yt, jdet, h) = pipe.graph_sample(&x)?;
                let grad_radius = xt.norm() / tau;
                if grad_radius < r_lo || grad_radius > r_hi {
                    continue;
                }
                let e = eig3_sym(&h);
                let min_abs = e.lambda.iter().fold(f64::INFINITY, |a, l| a.min(l.abs()));
                let du_norm = 1.0 / min_abs;
                let weight = jdet.abs() / (tau * tau * tau);
                for (i, &p) in p_list.iter().enumerate() {
                    let v = du_norm.powf(p) * weight;
                    sums[i].add(v);
                    sq[i].add(v * v);
                }
            }
            Ok((
                sums.iter().map(Kahan::total).collect(),
                sq.iter().map(Kahan::total).collect(),
                todo,
            ))
        })
        .collect();
    let mut total = vec![Kahan::default(); np];
    let mut total_sq = vec![Kahan::default(); np];
    let mut n = 0u64;
    for (s, q, t) in partials? {
        for i in 0..np {
            total[i].add(s[i]);
            total_sq[i].add(q[i]);
        }
        n += t;
    }
    let mut means = Vec::with_capacity(np);
    let mut stderrs = Vec::with_capacity(np);
    for i in 0..np {
        let mean = total[i].total() / n as f64;
        let var = (total_sq[i].total() / n as f64 - mean * mean).max(0.0);
        means.push(vol * mean);
        stderrs.push(vol * (var / n as f64).sqrt());
    }
    Ok(ShellEstimate { means, stderrs })
}

/// Profile the shell integrals `I_k(p)` and verify the decay-rate law and
/// the critical-exponent sign flip.
pub fn sobolev_profile(pipe: &SingularPipeline, opts: &SobolevOptions) -> Result<VerificationReport> {
    let m = pipe.m();
    let p_list = if opts.p_list.is_empty() {
        default_p_list(m)
    } else {
        opts.p_list.clone()
    };
    let mut report = VerificationReport::new("sobolev-profile");
    report.samples.seed = opts.seed;
    report.samples.shells = opts.n_shells;
    report.samples.points = u64::from(opts.n_shells) * opts.samples_per_shell;
    report.param("m", m);
    report.param(
        "p_list",
        p_list
            .iter()
            .map(|p| format!("{p}"))
            .collect::<Vec<_>>()
            .join(","),
    );

    // Chart-factor enclosure |x~| / |x|, exact for the identity chart.
    let xfactor = if pipe.core.alpha == 0.0 {
        (1.0, 1.0)
    } else {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let dirs = crate::numerics::fibonacci_sphere(32);
        for &r in &crate::numerics::log_spaced(1e-4, 0.5, 12) {
            for d in &dirs {
                let x = [d[0] * r, d[1] * r, d[2] * r];
                let (xt, _, _, _) = pipe.graph_sample(&x)?;
                let ratio = xt.norm() / r;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        (lo * 0.98, hi * 1.02)
    };

    let np = p_list.len();
    let mut log2_i = vec![Vec::with_capacity(opts.n_shells as usize); np];
    let mut worst_rel_err = 0.0f64;
    for k in 1..=opts.n_shells {
        let r_hi = 0.5f64.powi(k as i32);
        let r_lo = 0.5 * r_hi;
        let est = estimate_shell(
            pipe,
            &p_list,
            r_lo,
            r_hi,
            xfactor,
            opts.samples_per_shell,
            opts.seed,
            u64::from(k) << 32,
        )?;
        for i in 0..np {
            if !(est.means[i] > 0.0) {
                return Err(SlagError::Verification(format!(
                    "empty shell estimate at k = {k}, p = {}",
                    p_list[i]
                )));
            }
            worst_rel_err = worst_rel_err.max(est.stderrs[i] / est.means[i]);
            log2_i[i].push(est.means[i].log2());
            report
                .table
                .push(vec![p_list[i], k as f64, est.means[i].log2()]);
        }
    }
    report.table_columns = vec!["p".into(), "shell".into(), "log2_I".into()];
    report.fit("worst_mc_relative_stderr", worst_rel_err);
    report.margin("mc_variance_below_5pct", 0.05 - worst_rel_err);

    // Decay rates: I_k ~ 2^(-k s(p)) with s(p) = 3 + (2m-2)(1-p).
    let ks: Vec<f64> = (1..=opts.n_shells).map(f64::from).collect();
    let mut rates = Vec::with_capacity(np);
    for i in 0..np {
        let fit = crate::numerics::fit_line(&ks, &log2_i[i]);
        rates.push(-fit.slope);
        report.fit(&format!("decay_rate_p_{}", p_list[i]), -fit.slope);
    }
    let predicted = |p: f64| 3.0 + (2.0 * m as f64 - 2.0) * (1.0 - p);
    for (i, &p) in p_list.iter().enumerate() {
        if [1.0, 1.5, 2.0].iter().any(|q| (q - p).abs() < 1e-12) {
            let want = predicted(p);
            report.margin(
                &format!("rate_matches_prediction_p_{p}"),
                0.05 * want.abs() - (rates[i] - want).abs(),
            );
        }
    }

    // Sign flip around the critical exponent.
    let p_star = critical_exponent(m);
    let below: Vec<usize> = (0..np).filter(|&i| p_list[i] < p_star).collect();
    let above: Vec<usize> = (0..np).filter(|&i| p_list[i] > p_star).collect();
    if let (Some(&b), Some(&a)) = (below.last(), above.first()) {
        report.margin("rate_positive_below_pstar", rates[b]);
        report.margin("rate_negative_above_pstar", -rates[a]);
    }
    // Fitted critical exponent from the linear rate law.
    let fit = crate::numerics::fit_line(&p_list, &rates);
    let p_star_fit = -fit.intercept / fit.slope;
    report.fit("p_star_fitted", p_star_fit);
    report.fit("p_star_expected", p_star);
    report.margin("p_star_within_0.05", 0.05 - (p_star_fit - p_star).abs());
    Ok(report)
}
