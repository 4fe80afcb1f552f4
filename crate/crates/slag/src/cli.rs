//! Command-line front end: reproducible pipelines, per-stage JSON reports,
//! and plot-data emission.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::pipeline::{
    build_singular_solution, build_smooth_family_set, family_set_report, FamilyParams,
    PipelineOptions,
};
use crate::analysis::properties::verify_exact_identities;
use crate::analysis::sobolev::{sobolev_profile, SobolevOptions};
use crate::analysis::weakform::{mss_from_potential, test_field_catalog, weak_residual_pipeline, WeakResidualOptions};
use crate::analysis::holder::{holder_exponent, HolderOptions};
use crate::analysis::SolutionHandle;
use crate::cksolve::{agreement_order, ck_solve, residual_order, CauchyData};
use crate::error::{Result, SlagError};
use crate::geometry::{check_graph_condition, rotate_graph, RotationAngles};
use crate::invert::{invert_point, InversionHypotheses};
use crate::mpoly::{parse_rat, rat_to_f64, Rat, TruncatedSeries};
use crate::report::{write_csv, VerificationReport};
use crate::seed::{build_components, SeedParams};

/// Flat run configuration; every field has a default and the fully defaulted
/// config reproduces the acceptance pipeline for m = 2, theta = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub m: u32,
    pub theta: f64,
    /// Seed amplitude as "num/den"; empty means the sign search chooses it.
    pub eps: String,
    /// Backward-rotation amplitudes of the smooth family, comma separated.
    pub family_eps: String,
    /// Truncation cap; 0 means the default 4m.
    pub cap: u32,
    pub seed: u64,
    pub shells: u32,
    pub directions: u32,
    pub graph_pairs: u64,
    pub sobolev_shells: u32,
    pub sobolev_samples: u64,
    pub weak_deltas: String,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m: 2,
            theta: 0.0,
            eps: String::new(),
            family_eps: "0.1,0.05,0.025".into(),
            cap: 0,
            seed: 42,
            shells: 40,
            directions: 64,
            graph_pairs: 10_000,
            sobolev_shells: 10,
            sobolev_samples: 1_000_000,
            weak_deltas: "0.1,0.05,0.02,0.01".into(),
            out_dir: "slag-out".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| SlagError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(SlagError::Config(format!("m must be >= 2, got {}", self.m)));
        }
        if !(self.theta.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(SlagError::Config("theta outside (-pi/2, pi/2)".into()));
        }
        Ok(())
    }

    fn pipeline_options(&self) -> Result<PipelineOptions> {
        let eps_seed = if self.eps.is_empty() {
            None
        } else {
            Some(parse_rat(&self.eps)?)
        };
        Ok(PipelineOptions {
            cap: if self.cap == 0 { None } else { Some(self.cap) },
            eps_seed,
            rng_seed: self.seed,
            gate_shells: self.shells.min(24),
            gate_directions: self.directions.min(48),
            graph_pairs: self.graph_pairs,
        })
    }

    fn family_eps_list(&self) -> Result<Vec<f64>> {
        parse_f64_list(&self.family_eps)
    }

    fn weak_delta_list(&self) -> Result<Vec<f64>> {
        parse_f64_list(&self.weak_deltas)
    }
}

pub fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| SlagError::Config(format!("bad number `{t}`: {e}")))
        })
        .collect()
}

#[derive(Parser, Debug)]
#[command(
    name = "slag",
    about = "Singular and near-singular potentials of the 3D special Lagrangian equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the seed polynomial bundle and write it as JSON.
    BuildSeed {
        #[arg(long)]
        m: u32,
        /// Amplitude "num/den"; defaults to 1/(40 m^2).
        #[arg(long)]
        eps: Option<String>,
        /// Truncation cap; defaults to 4m.
        #[arg(long)]
        cap: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the Cauchy problem from a seed bundle; writes the series and a
    /// residual/agreement report.
    Solve {
        #[arg(long)]
        seed: PathBuf,
        #[arg(long)]
        cap: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one verification suite.
    Verify {
        /// One of: 2.1, 2.2, 2.4, 3.x, holder, sobolev, mss, family.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "slag-out")]
        out: PathBuf,
    },
    /// Rotate a series-backed graph and check the distance expansion.
    Rotate {
        /// Map spec JSON: {"series": path, "radius": r, "rotations": [[b1,b2,b3], ...]}.
        #[arg(long, name = "in")]
        input: PathBuf,
        /// Angles "b1,b2,b3" of the rotation to apply.
        #[arg(long)]
        angles: String,
        #[arg(long, default_value_t = 10_000)]
        check_pairs: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
    },
    /// Invert the gradient map of a series potential at a probe target, or
    /// in batch from a CSV of targets.
    Invert {
        /// Series JSON of the potential f.
        #[arg(long)]
        f: PathBuf,
        /// Ellipticity constant "num/den".
        #[arg(long)]
        kappa: String,
        #[arg(long)]
        rho: f64,
        /// Probe target "y1,y2,y3".
        #[arg(long)]
        probe: Option<String>,
        /// Batch CSV of targets (three columns, no header).
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hoelder exponent suite for the singular solution.
    Holder {
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "slag-out")]
        out: PathBuf,
    },
    /// Sobolev shell profile for the singular solution.
    Sobolev {
        #[arg(long, default_value_t = 2)]
        m: u32,
        /// Exponents "p1,p2,..."; empty = default grid around the threshold.
        #[arg(long, default_value = "")]
        p_list: String,
        #[arg(long, default_value_t = 10)]
        shells: u32,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "slag-out")]
        out: PathBuf,
    },
    /// Weak minimal-surface-system residual for the singular solution.
    MssResidual {
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, default_value = "0.1,0.05,0.02,0.01")]
        deltas: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "slag-out")]
        out: PathBuf,
    },
    /// Smooth family across backward amplitudes.
    Family {
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value = "0.1,0.05,0.025")]
        eps: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "slag-out")]
        out: PathBuf,
    },
    /// Full default pipeline: every stage, one report per stage, a summary.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert stage reports into tidy CSV plot data.
    EmitPlots {
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize, Deserialize)]
struct MapSpec {
    series: PathBuf,
    radius: f64,
    #[serde(default)]
    rotations: Vec<[f64; 3]>,
}

fn read_series(path: &Path) -> Result<TruncatedSeries> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Execute a parsed command. Returns the process exit code.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildSeed { m, eps, cap, out } => {
            let eps = match eps {
                Some(e) => parse_rat(&e)?,
                None => SeedParams::default_eps(m),
            };
            let params = SeedParams::new(m, eps, SeedParams::default_eta())?;
            let cap = cap.unwrap_or(4 * m);
            let bundle = build_components(&params, cap)?;
            write_json(&out, &bundle)?;
            println!("seed bundle written to {}", out.display());
            Ok(())
        }
        Command::Solve { seed, cap, out } => {
            let text = std::fs::read_to_string(&seed)?;
            let bundle: crate::seed::SeedBundle = serde_json::from_str(&text)?;
            let cap = cap.unwrap_or(bundle.cap);
            let data = CauchyData::from_potential(&bundle.p);
            let u = ck_solve(&data, cap)?;
            write_json(&out, &u)?;
            let mut rep = VerificationReport::new("cauchy-solve");
            rep.param("cap", cap);
            rep.param("residual_order", residual_order(&u));
            rep.param("agreement_order_with_P", agreement_order(&u, &bundle.p));
            rep.require("residual_above_cap_minus_2", residual_order(&u).at_least(cap - 1));
            rep.require(
                "agreement_at_least_2m",
                agreement_order(&u, &bundle.p).at_least(2 * bundle.m),
            );
            let rep_path = out.with_extension("report.json");
            rep.write_json(&rep_path)?;
            println!(
                "solution written to {}; residual order {}, agreement {}",
                out.display(),
                residual_order(&u),
                agreement_order(&u, &bundle.p)
            );
            check_pass(&[rep])
        }
        Command::Verify {
            suite,
            m,
            theta,
            eps,
            seed,
            out,
        } => {
            let cfg = RunConfig {
                m,
                theta,
                seed,
                eps: eps.unwrap_or_default(),
                out_dir: out.display().to_string(),
                ..Default::default()
            };
            cfg.validate()?;
            let reports = run_suite(&cfg, &suite)?;
            std::fs::create_dir_all(&out)?;
            for rep in &reports {
                rep.write_json(&out.join(format!("{}.json", rep.id)))?;
                println!("{}: {}", rep.id, if rep.pass { "pass" } else { "FAIL" });
            }
            check_pass(&reports)
        }
        Command::Rotate {
            input,
            angles,
            check_pairs,
            seed,
            report,
        } => {
            let text = std::fs::read_to_string(&input)?;
            let spec: MapSpec = serde_json::from_str(&text)?;
            let series = read_series(&input.parent().unwrap_or(Path::new(".")).join(&spec.series))
                .or_else(|_| read_series(&spec.series))?;
            let handle = SolutionHandle::from_series(&series, spec.radius);
            let mut map = handle.graph();
            for b in &spec.rotations {
                map = rotate_graph(&map, RotationAngles::new(b[0], b[1], b[2])?);
            }
            let a = parse_f64_list(&angles)?;
            if a.len() != 3 {
                return Err(SlagError::Config("expected three angles".into()));
            }
            let map = rotate_graph(&map, RotationAngles::new(a[0], a[1], a[2])?);
            let rep = check_graph_condition(&map, check_pairs, seed)?;
            rep.write_json(&report)?;
            println!(
                "min expansion ratio^2 = {:.6}",
                rep.fitted_value("min_ratio_squared").unwrap_or(f64::NAN)
            );
            check_pass(&[rep])
        }
        Command::Invert {
            f,
            kappa,
            rho,
            probe,
            targets,
            out,
        } => {
            let series = read_series(&f)?;
            let handle = SolutionHandle::from_series(&series, rho * 2.0);
            let kappa = rat_to_f64(&parse_rat(&kappa)?);
            let hyp = InversionHypotheses::new(rho, kappa, 0.5)?;
            let mut batch: Vec<[f64; 3]> = Vec::new();
            if let Some(p) = probe {
                let v = parse_f64_list(&p)?;
                if v.len() != 3 {
                    return Err(SlagError::Config("probe needs three components".into()));
                }
                batch.push([v[0], v[1], v[2]]);
            }
            if let Some(path) = targets {
                for line in std::fs::read_to_string(&path)?.lines() {
                    let v = parse_f64_list(line)?;
                    if v.len() == 3 {
                        batch.push([v[0], v[1], v[2]]);
                    }
                }
            }
            let mut rows = Vec::new();
            for t in &batch {
                let x = invert_point(&handle, &hyp, t)?;
                let g = handle.grad(&x.to_array())?;
                let resid =
                    ((g[0] - t[0]).powi(2) + (g[1] - t[1]).powi(2) + (g[2] - t[2]).powi(2)).sqrt();
                println!(
                    "target ({:+.6e}, {:+.6e}, {:+.6e}) -> x ({:+.6e}, {:+.6e}, {:+.6e}), residual {:.3e}",
                    t[0], t[1], t[2], x.x1, x.x2, x.x3, resid
                );
                rows.push(vec![t[0], t[1], t[2], x.x1, x.x2, x.x3, resid]);
            }
            if let Some(path) = out {
                write_csv(
                    &path,
                    &[
                        "t1".into(),
                        "t2".into(),
                        "t3".into(),
                        "x1".into(),
                        "x2".into(),
                        "x3".into(),
                        "residual".into(),
                    ],
                    &rows,
                )?;
            }
            Ok(())
        }
        Command::Holder { m, theta, seed, out } => {
            let cfg = RunConfig {
                m,
                theta,
                seed,
                out_dir: out.display().to_string(),
                ..Default::default()
            };
            let reports = run_suite(&cfg, "holder")?;
            std::fs::create_dir_all(&out)?;
            for rep in &reports {
                rep.write_json(&out.join(format!("{}.json", rep.id)))?;
            }
            check_pass(&reports)
        }
        Command::Sobolev {
            m,
            p_list,
            shells,
            samples,
            seed,
            out,
        } => {
            let cfg = RunConfig {
                m,
                seed,
                sobolev_shells: shells,
                sobolev_samples: samples,
                out_dir: out.display().to_string(),
                ..Default::default()
            };
            let params = FamilyParams::singular(cfg.m, cfg.theta)?;
            let pipe = build_singular_solution(&params, &cfg.pipeline_options()?)?;
            let opts = SobolevOptions {
                n_shells: shells,
                samples_per_shell: samples,
                p_list: parse_f64_list(&p_list)?,
                seed,
            };
            let rep = sobolev_profile(&pipe, &opts)?;
            std::fs::create_dir_all(&out)?;
            rep.write_json(&out.join("sobolev-profile.json"))?;
            println!("sobolev profile: {}", if rep.pass { "pass" } else { "FAIL" });
            check_pass(&[rep])
        }
        Command::MssResidual { m, deltas, seed, out } => {
            let cfg = RunConfig {
                m,
                seed,
                weak_deltas: deltas,
                out_dir: out.display().to_string(),
                ..Default::default()
            };
            let reports = run_suite(&cfg, "mss")?;
            std::fs::create_dir_all(&out)?;
            for rep in &reports {
                rep.write_json(&out.join(format!("{}.json", rep.id)))?;
            }
            check_pass(&reports)
        }
        Command::Family {
            m,
            theta,
            eps,
            seed,
            out,
        } => {
            let cfg = RunConfig {
                m,
                theta,
                seed,
                family_eps: eps,
                out_dir: out.display().to_string(),
                ..Default::default()
            };
            let reports = run_suite(&cfg, "family")?;
            std::fs::create_dir_all(&out)?;
            for rep in &reports {
                rep.write_json(&out.join(format!("{}.json", rep.id)))?;
            }
            check_pass(&reports)
        }
        Command::Run { config, out } => {
            let mut cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            if let Some(dir) = out {
                cfg.out_dir = dir.display().to_string();
            }
            run_pipeline(&cfg)
        }
        Command::EmitPlots { reports, out } => emit_plotdata(&reports, &out),
    }
}

fn check_pass(reports: &[VerificationReport]) -> Result<()> {
    if reports.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(SlagError::Verification(
            reports
                .iter()
                .filter(|r| !r.pass)
                .map(|r| r.id.clone())
                .collect::<Vec<_>>()
                .join(", "),
        ))
    }
}

/// Run one named verification suite and return its reports.
pub fn run_suite(cfg: &RunConfig, suite: &str) -> Result<Vec<VerificationReport>> {
    let opts = cfg.pipeline_options()?;
    match suite {
        "2.1" => Ok(vec![verify_exact_identities()?]),
        "2.2" | "2.4" | "3.x" => {
            let params = FamilyParams::singular(cfg.m, cfg.theta)?;
            let pipe = build_singular_solution(&params, &opts)?;
            let want = match suite {
                "2.2" => "property-2.2",
                "2.4" => "property-2.4",
                _ => "property-3.x",
            };
            Ok(pipe
                .reports
                .iter()
                .filter(|r| r.id == want)
                .cloned()
                .collect())
        }
        "holder" => {
            let params = FamilyParams::singular(cfg.m, cfg.theta)?;
            let pipe = build_singular_solution(&params, &opts)?;
            let hopts = HolderOptions {
                seed: cfg.seed,
                ..Default::default()
            };
            Ok(vec![holder_exponent(&pipe, &hopts)?])
        }
        "sobolev" => {
            let params = FamilyParams::singular(cfg.m, cfg.theta)?;
            let pipe = build_singular_solution(&params, &opts)?;
            let sopts = SobolevOptions {
                n_shells: cfg.sobolev_shells,
                samples_per_shell: cfg.sobolev_samples,
                p_list: Vec::new(),
                seed: cfg.seed,
            };
            Ok(vec![sobolev_profile(&pipe, &sopts)?])
        }
        "mss" => {
            let params = FamilyParams::singular(cfg.m, cfg.theta)?;
            let pipe = build_singular_solution(&params, &opts)?;
            let deltas = cfg.weak_delta_list()?;
            let mut reports = vec![mss_from_potential(&pipe.solution).consistency(100, cfg.seed)?];
            for field in test_field_catalog() {
                reports.push(weak_residual_pipeline(
                    &pipe,
                    &field,
                    &deltas,
                    &WeakResidualOptions::default(),
                )?);
            }
            Ok(reports)
        }
        "family" => {
            let eps = cfg.family_eps_list()?;
            let members = build_smooth_family_set(cfg.m, cfg.theta, &eps, &opts)?;
            let mut reports: Vec<VerificationReport> = members
                .iter()
                .flat_map(|m| m.reports.clone())
                .collect();
            reports.push(family_set_report(&members, cfg.seed)?);
            Ok(reports)
        }
        other => Err(SlagError::Config(format!("unknown suite `{other}`"))),
    }
}

/// The full pipeline: build-seed, solve, verify 2.x, rotate, verify 3.x,
/// invert, holder, sobolev, mss, family. One JSON report per stage plus a
/// summary; timestamps live in a separate metadata file so report bytes are
/// reproducible.
pub fn run_pipeline(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out)?;
    let meta = serde_json::json!({
        "started_unix_ms": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
    });
    write_json(&out.join("meta.json"), &meta)?;

    let result = run_pipeline_stages(cfg, &out);
    if let Err(e) = &result {
        std::fs::write(out.join("FAILED"), format!("{e}\n"))?;
    }
    result
}

fn run_pipeline_stages(cfg: &RunConfig, out: &Path) -> Result<()> {
    let opts = cfg.pipeline_options()?;
    let mut summary: Vec<(String, bool)> = Vec::new();

    let exact = verify_exact_identities()?;
    exact.write_json(&out.join("exact-identities.json"))?;
    summary.push(("exact-identities".into(), exact.pass));
    if !exact.pass {
        write_summary(out, &summary)?;
        return Err(SlagError::Verification("exact-identities".into()));
    }

    let params = FamilyParams::singular(cfg.m, cfg.theta)?;
    let pipe = match build_singular_solution(&params, &opts) {
        Ok(p) => p,
        Err(e) => {
            summary.push((format!("pipeline: {e}"), false));
            write_summary(out, &summary)?;
            return Err(e);
        }
    };
    write_json(&out.join("seed.json"), &pipe.core.seed_bundle)?;
    write_json(&out.join("u.json"), &pipe.core.u_series)?;
    for rep in &pipe.reports {
        rep.write_json(&out.join(format!("{}.json", rep.id)))?;
        summary.push((rep.id.clone(), rep.pass));
    }

    let hopts = HolderOptions {
        seed: cfg.seed,
        ..Default::default()
    };
    let holder = holder_exponent(&pipe, &hopts)?;
    holder.write_json(&out.join("holder-exponent.json"))?;
    summary.push(("holder-exponent".into(), holder.pass));

    let sopts = SobolevOptions {
        n_shells: cfg.sobolev_shells,
        samples_per_shell: cfg.sobolev_samples,
        p_list: Vec::new(),
        seed: cfg.seed,
    };
    let sob = sobolev_profile(&pipe, &sopts)?;
    sob.write_json(&out.join("sobolev-profile.json"))?;
    summary.push(("sobolev-profile".into(), sob.pass));

    let deltas = cfg.weak_delta_list()?;
    let mss = mss_from_potential(&pipe.solution).consistency(100, cfg.seed)?;
    mss.write_json(&out.join("mss-consistency.json"))?;
    summary.push(("mss-consistency".into(), mss.pass));
    let mut weak_pass = true;
    for field in test_field_catalog() {
        let rep = weak_residual_pipeline(
            &pipe,
            &field,
            &deltas,
            &WeakResidualOptions::default(),
        )?;
        rep.write_json(&out.join(format!("{}.json", rep.id)))?;
        summary.push((rep.id.clone(), rep.pass));
        weak_pass &= rep.pass;
    }

    let eps_list = cfg.family_eps_list()?;
    let members = build_smooth_family_set(cfg.m, cfg.theta, &eps_list, &opts)?;
    for (i, member) in members.iter().enumerate() {
        for rep in &member.reports {
            rep.write_json(&out.join(format!("family-{i}-{}.json", rep.id)))?;
        }
    }
    let fam = family_set_report(&members, cfg.seed)?;
    fam.write_json(&out.join("smooth-family.json"))?;
    summary.push(("smooth-family".into(), fam.pass));

    write_summary(out, &summary)?;
    let all = summary.iter().all(|(_, p)| *p) && holder.pass && sob.pass && weak_pass;
    if all {
        Ok(())
    } else {
        Err(SlagError::Verification(
            summary
                .iter()
                .filter(|(_, p)| !p)
                .map(|(id, _)| id.clone())
                .collect::<Vec<_>>()
                .join(", "),
        ))
    }
}

fn write_summary(out: &Path, summary: &[(String, bool)]) -> Result<()> {
    let entries: Vec<serde_json::Value> = summary
        .iter()
        .map(|(id, pass)| serde_json::json!({ "stage": id, "pass": pass }))
        .collect();
    write_json(&out.join("summary.json"), &entries)
}

/// Convert every report with a table into its own CSV, plus one long-format
/// CSV across all reports.
pub fn emit_plotdata(reports_dir: &Path, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(reports_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let mut long_rows: Vec<Vec<f64>> = Vec::new();
    let mut long_meta: Vec<(String, String)> = Vec::new();
    let mut found = 0;
    for path in &names {
        let Ok(text) = std::fs::read_to_string(path) else {
            continue;
        };
        let Ok(rep) = serde_json::from_str::<VerificationReport>(&text) else {
            continue;
        };
        found += 1;
        if rep.table.is_empty() {
            continue;
        }
        let csv_path = out.join(format!("{}.csv", rep.id));
        write_csv(&csv_path, &rep.table_columns, &rep.table)?;
        for row in &rep.table {
            if row.len() < 2 {
                continue;
            }
            for (ci, v) in row.iter().enumerate().skip(1) {
                long_rows.push(vec![long_meta.len() as f64, row[0], *v]);
                long_meta.push((rep.id.clone(), rep.table_columns[ci].clone()));
            }
        }
    }
    if found == 0 {
        return Err(SlagError::Config(format!(
            "no reports found under {}",
            reports_dir.display()
        )));
    }
    // Long format: property, key, x, value.
    let mut text = String::from("property,key,x,value\n");
    for (row, (prop, key)) in long_rows.iter().zip(&long_meta) {
        text.push_str(&format!("{prop},{key},{:?},{:?}\n", row[1], row[2]));
    }
    std::fs::write(out.join("plotdata-long.csv"), text)?;
    Ok(())
}

/// Rational parameter helper shared by the binary.
pub fn parse_rat_arg(text: &str) -> Result<Rat> {
    parse_rat(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip_is_identity() {
        let cfg = RunConfig::default();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        let json2 = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"m": 3, "seed": 7}"#).unwrap();
        assert_eq!(cfg.m, 3);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sobolev_samples, RunConfig::default().sobolev_samples);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn f64_list_parsing() {
        assert_eq!(parse_f64_list("0.1, 0.05,0.02").unwrap(), vec![0.1, 0.05, 0.02]);
        assert!(parse_f64_list("a,b").is_err());
    }
}
