//! Subcommand implementations.

use crate::config::ExperimentConfig;
use crate::emit::{
    sig17, svg_polylines, write_artifact, write_manifest, CsvDoc, RunManifest,
};
use crate::{CliError, Format};
use nngf::dynamics::{classify_regime, Regime};
use nngf::fieldsim::{monte_carlo_experiment, sphere_grid, ExperimentSpec, FunctionalSamples};
use nngf::functionals::{hermite_expand, predict_limit, total_variance, LimitCase};
use nngf::inference::{
    fit_variance_rate, moments_summary, two_sample_stability, w1_to_gaussian, Abscissa,
};
use nngf::kernel::{verify_boundary_expansion, Kernel};
use nngf::spectral::{kappa_hat_moment, normalized_spectrum, power_spectrum_auto};
use serde::Serialize;
use std::path::Path;

const EXPANSION_Q_MAX: usize = 12;

/// Trim a probe value to at most 7 decimals without trailing zeros, so
/// exact values print exactly ("1", not "1.0000000").
fn probe_format(v: f64) -> String {
    let s = format!("{v:.7}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.into()
    }
}

#[derive(Serialize)]
struct BoundaryReport {
    gamma: f64,
    c: f64,
    r_squared: f64,
    degenerate: bool,
}

#[derive(Serialize)]
struct KernelReport {
    kprime1: f64,
    boundary: Option<BoundaryReport>,
    samples: Vec<(f64, f64)>,
}

pub fn cmd_kernel(
    kernel: &Kernel,
    probe: Option<f64>,
    format: Format,
    out: Option<&Path>,
) -> Result<bool, CliError> {
    if let Some(u) = probe {
        if !(-1.0..=1.0).contains(&u) {
            return Err(CliError::Validation(format!(
                "probe point {u} outside [-1, 1]"
            )));
        }
        println!("{}", probe_format(kernel.eval(u)));
        return Ok(true);
    }
    let samples: Vec<(f64, f64)> = (0..=40)
        .map(|i| {
            let u = -1.0 + i as f64 / 20.0;
            (u, kernel.eval(u))
        })
        .collect();
    let boundary = verify_boundary_expansion(kernel).ok().map(|f| BoundaryReport {
        gamma: f.gamma,
        c: f.c,
        r_squared: f.r_squared,
        degenerate: f.degenerate,
    });
    let report = KernelReport {
        kprime1: kernel.kprime1(),
        boundary,
        samples,
    };
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
        Format::Csv => {
            let mut doc = CsvDoc::new(&["u", "kappa"]);
            for &(u, v) in &report.samples {
                doc.push(vec![sig17(u), sig17(v)]);
            }
            emit_table(doc, out, "kernel.csv")?;
        }
    }
    Ok(true)
}

pub fn cmd_regime(kernel: &Kernel) -> Result<bool, CliError> {
    let report = classify_regime(kernel).map_err(CliError::validation)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(true)
}

fn emit_table(doc: CsvDoc, out: Option<&Path>, name: &str) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            let mut manifest = RunManifest::new(&[], 0, 0);
            write_artifact(dir, name, &doc.to_bytes(), &mut manifest)?;
            write_manifest(dir, &manifest)?;
        }
        None => print!("{}", String::from_utf8(doc.to_bytes()).unwrap()),
    }
    Ok(())
}

pub fn cmd_spectrum(
    kernel: &Kernel,
    d: usize,
    depths: &[usize],
    format: Format,
    out: Option<&Path>,
) -> Result<bool, CliError> {
    #[derive(Serialize)]
    struct Row {
        depth: usize,
        l: usize,
        c: f64,
        g: f64,
    }
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &depth in depths {
        let spectrum = power_spectrum_auto(kernel, depth, d).map_err(CliError::runtime)?;
        let normalized = normalized_spectrum(&spectrum).map_err(CliError::runtime)?;
        let mut pts = Vec::new();
        for (l, &c) in spectrum.c.iter().enumerate() {
            rows.push(Row {
                depth,
                l,
                c,
                g: normalized.g.get(l).copied().unwrap_or(0.0),
            });
            if c > 0.0 {
                pts.push((l as f64, c.log10()));
            }
        }
        series.push((format!("L={depth}"), pts));
    }
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&rows).unwrap()),
        Format::Csv => {
            let mut doc = CsvDoc::new(&["depth", "l", "c_l", "g_l"]);
            for r in &rows {
                doc.push(vec![
                    r.depth.to_string(),
                    r.l.to_string(),
                    sig17(r.c),
                    sig17(r.g),
                ]);
            }
            match out {
                Some(dir) => {
                    let mut manifest = RunManifest::new(&[], 0, 0);
                    write_artifact(dir, "spectrum.csv", &doc.to_bytes(), &mut manifest)?;
                    let svg = svg_polylines(&series, "l", "log10 C_l");
                    write_artifact(dir, "spectrum.svg", svg.as_bytes(), &mut manifest)?;
                    write_manifest(dir, &manifest)?;
                }
                None => print!("{}", String::from_utf8(doc.to_bytes()).unwrap()),
            }
        }
    }
    Ok(true)
}

pub fn cmd_moments(
    kernel: &Kernel,
    d: usize,
    depths: &[usize],
    qs: &[usize],
    format: Format,
    out: Option<&Path>,
) -> Result<bool, CliError> {
    if qs.iter().any(|&q| q == 0) {
        return Err(CliError::Validation("moment orders must be >= 1".into()));
    }
    #[derive(Serialize)]
    struct Row {
        depth: usize,
        q: usize,
        moment: f64,
        abs_moment: f64,
    }
    let mut rows = Vec::new();
    let mut series: Vec<(String, Vec<(f64, f64)>)> =
        qs.iter().map(|q| (format!("q={q}"), Vec::new())).collect();
    for &depth in depths {
        for (k, &q) in qs.iter().enumerate() {
            let (signed, abs) =
                kappa_hat_moment(kernel, depth, d, q).map_err(CliError::runtime)?;
            rows.push(Row {
                depth,
                q,
                moment: signed,
                abs_moment: abs,
            });
            if abs > 0.0 {
                series[k].1.push((depth as f64, abs.log10()));
            }
        }
    }
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&rows).unwrap()),
        Format::Csv => {
            let mut doc = CsvDoc::new(&["depth", "q", "moment", "abs_moment"]);
            for r in &rows {
                doc.push(vec![
                    r.depth.to_string(),
                    r.q.to_string(),
                    sig17(r.moment),
                    sig17(r.abs_moment),
                ]);
            }
            match out {
                Some(dir) => {
                    let mut manifest = RunManifest::new(&[], 0, 0);
                    write_artifact(dir, "moments.csv", &doc.to_bytes(), &mut manifest)?;
                    let svg = svg_polylines(&series, "L", "log10 |moment|");
                    write_artifact(dir, "moments.svg", svg.as_bytes(), &mut manifest)?;
                    write_manifest(dir, &manifest)?;
                }
                None => print!("{}", String::from_utf8(doc.to_bytes()).unwrap()),
            }
        }
    }
    Ok(true)
}

fn run_experiment(
    config: &ExperimentConfig,
    seed_override: Option<u64>,
    workers: usize,
) -> Result<Vec<FunctionalSamples>, CliError> {
    let kernel = config.kernel.build()?;
    let spec = ExperimentSpec {
        d: config.d,
        depths: config.depths.clone(),
        replicates: config.replicates,
        observable: config.observable,
        grid_kind: config.grid.kind,
        grid_n: config.grid.n,
        master_seed: seed_override.unwrap_or(config.seed),
        normalization: config.normalization,
    };
    nngf::par::with_workers(workers, || monte_carlo_experiment(&kernel, &spec))
        .map_err(CliError::runtime)
}

fn samples_csv(runs: &[FunctionalSamples]) -> CsvDoc {
    let mut doc = CsvDoc::new(&["depth", "replicate", "value"]);
    for run in runs {
        for (r, &v) in run.values.iter().enumerate() {
            doc.push(vec![run.depth.to_string(), r.to_string(), sig17(v)]);
        }
    }
    doc
}

pub fn cmd_simulate(
    config: &ExperimentConfig,
    config_bytes: &[u8],
    seed_override: Option<u64>,
    workers: usize,
    format: Format,
    out: Option<&Path>,
) -> Result<bool, CliError> {
    let runs = run_experiment(config, seed_override, workers)?;
    let seed = seed_override.unwrap_or(config.seed);
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&runs).unwrap()),
        Format::Csv => {
            let doc = samples_csv(&runs);
            match out {
                Some(dir) => {
                    let mut manifest = RunManifest::new(config_bytes, seed, workers);
                    for run in &runs {
                        manifest
                            .stage_seeds
                            .push(("simulate".into(), run.depth, seed));
                    }
                    write_artifact(dir, "samples.csv", &doc.to_bytes(), &mut manifest)?;
                    write_manifest(dir, &manifest)?;
                }
                None => print!("{}", String::from_utf8(doc.to_bytes()).unwrap()),
            }
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct Verdict {
    name: String,
    status: String,
    detail: String,
}

fn verdict(list: &mut Vec<Verdict>, name: &str, pass: bool, detail: String) {
    list.push(Verdict {
        name: name.into(),
        status: if pass { "PASS" } else { "FAIL" }.into(),
        detail,
    });
}

fn skip(list: &mut Vec<Verdict>, name: &str, detail: String) {
    list.push(Verdict {
        name: name.into(),
        status: "SKIP".into(),
        detail,
    });
}

/// Full pipeline: classify, predict the limit law, simulate, test. One
/// verdict per registered check; process exits nonzero if any fails.
pub fn cmd_experiment(
    config: &ExperimentConfig,
    config_bytes: &[u8],
    seed_override: Option<u64>,
    workers: usize,
    out: Option<&Path>,
) -> Result<bool, CliError> {
    let kernel = config.kernel.build()?;
    let tol = &config.tolerances;
    let report = classify_regime(&kernel).map_err(CliError::validation)?;
    let expansion = hermite_expand(config.observable, EXPANSION_Q_MAX);
    let prediction =
        predict_limit(&kernel, &report, &expansion, config.d).map_err(CliError::runtime)?;
    let runs = run_experiment(config, seed_override, workers)?;
    let seed = seed_override.unwrap_or(config.seed);
    let mut verdicts = Vec::new();

    // variance rate: empirical slope against the per-depth formula table
    if config.depths.len() >= 4 {
        let theory: Result<Vec<f64>, _> = config
            .depths
            .iter()
            .map(|&l| total_variance(&expansion, &kernel, l, config.d).map(|t| t.total))
            .collect();
        match theory {
            Ok(theory) => {
                let abscissa = match report.regime {
                    Regime::HighDisorder => Abscissa::Depth,
                    _ => Abscissa::LogDepth,
                };
                let emp_vars: Vec<f64> = runs.iter().map(|r| r.sample_variance).collect();
                let emp = fit_variance_rate(&config.depths, &emp_vars, abscissa)
                    .map_err(CliError::runtime)?;
                let thr = fit_variance_rate(&config.depths, &theory, abscissa)
                    .map_err(CliError::runtime)?;
                let slack =
                    emp.slope_half_width + thr.slope_half_width + tol.slope_rel_tol * thr.slope.abs();
                verdict(
                    &mut verdicts,
                    "variance-slope",
                    (emp.slope - thr.slope).abs() <= slack,
                    format!(
                        "empirical {:.4} vs formula {:.4} (slack {:.4})",
                        emp.slope, thr.slope, slack
                    ),
                );
            }
            Err(e) => skip(&mut verdicts, "variance-slope", format!("formula table: {e}")),
        }
    } else {
        skip(
            &mut verdicts,
            "variance-slope",
            "needs at least 4 depths".into(),
        );
    }

    // distance to the Gaussian target in the central cases
    let last = runs.last().expect("nonempty schedule");
    match prediction.case {
        LimitCase::Gaussian | LimitCase::Critical => {
            if last.values.len() >= 100 {
                let report = w1_to_gaussian(&last.standardized(), seed)
                    .map_err(CliError::runtime)?;
                verdict(
                    &mut verdicts,
                    "gaussian-distance",
                    report.w1 < tol.w1_max,
                    format!("W1 {:.4} at L={} (max {})", report.w1, last.depth, tol.w1_max),
                );
            } else {
                skip(
                    &mut verdicts,
                    "gaussian-distance",
                    "needs at least 100 replicates".into(),
                );
            }
        }
        _ => skip(
            &mut verdicts,
            "gaussian-distance",
            "non-Gaussian limit predicted".into(),
        ),
    }

    // cross-depth stability of the standardized law
    if runs.len() >= 2 && config.replicates >= 200 {
        let a = &runs[runs.len() - 2];
        let b = &runs[runs.len() - 1];
        let (stat, p) = two_sample_stability(&a.standardized(), &b.standardized())
            .map_err(CliError::runtime)?;
        verdict(
            &mut verdicts,
            "stability",
            p > tol.ks_p_min,
            format!(
                "KS {:.4}, p {:.4} between L={} and L={}",
                stat, p, a.depth, b.depth
            ),
        );
    } else {
        skip(
            &mut verdicts,
            "stability",
            "needs 2 depths and 200 replicates".into(),
        );
    }

    // non-central case: skewness must separate from zero and match the
    // spectral prediction when one is available
    if let LimitCase::NonCentral {
        sign,
        variance,
        third_cumulant,
        ..
    } = prediction.case
    {
        if last.values.len() >= 100 {
            let m = moments_summary(&last.values).map_err(CliError::runtime)?;
            let separated = m.skewness.abs() > tol.skew_se_min * m.se_skewness;
            let matched = match (variance, third_cumulant) {
                (Some(v), Some(c3)) if v > 0.0 => {
                    let predicted = sign * c3 / v.powf(1.5);
                    (m.skewness - predicted).abs() < tol.sigma * m.se_skewness
                }
                _ => true,
            };
            verdict(
                &mut verdicts,
                "skewness",
                separated && matched,
                format!("skewness {:.4} ± {:.4}", m.skewness, m.se_skewness),
            );
        } else {
            skip(&mut verdicts, "skewness", "needs 100 replicates".into());
        }
    }

    for v in &verdicts {
        println!("{} {}: {}", v.status, v.name, v.detail);
    }

    if let Some(dir) = out {
        let mut manifest = RunManifest::new(config_bytes, seed, workers);
        for run in &runs {
            manifest.stage_seeds.push(("simulate".into(), run.depth, seed));
        }
        let doc = samples_csv(&runs);
        write_artifact(dir, "samples.csv", &doc.to_bytes(), &mut manifest)?;
        #[derive(Serialize)]
        struct Report<'a> {
            regime: &'a nngf::dynamics::RegimeReport,
            prediction: &'a nngf::functionals::LimitPrediction,
            verdicts: &'a [Verdict],
        }
        let report_json = serde_json::to_vec_pretty(&Report {
            regime: &report,
            prediction: &prediction,
            verdicts: &verdicts,
        })
        .unwrap();
        write_artifact(dir, "report.json", &report_json, &mut manifest)?;
        let pts: Vec<(f64, f64)> = runs
            .iter()
            .filter(|r| r.sample_variance > 0.0)
            .map(|r| (r.depth as f64, r.sample_variance.log10()))
            .collect();
        let svg = svg_polylines(&[("empirical Var".into(), pts)], "L", "log10 Var");
        write_artifact(dir, "variance.svg", svg.as_bytes(), &mut manifest)?;
        write_manifest(dir, &manifest)?;
    }
    Ok(verdicts.iter().all(|v| v.status != "FAIL"))
}

/// Fast self-checks on a config: classification, spectral mass, grid
/// weights, and worker-count determinism of the simulated CSV payload.
pub fn cmd_verify(
    config: &ExperimentConfig,
    seed_override: Option<u64>,
) -> Result<bool, CliError> {
    let kernel = config.kernel.build()?;
    let mut verdicts = Vec::new();

    match classify_regime(&kernel) {
        Ok(r) => verdict(
            &mut verdicts,
            "regime",
            true,
            serde_json::to_string(&r.regime).unwrap(),
        ),
        Err(e) => verdict(&mut verdicts, "regime", false, e.to_string()),
    }

    for &depth in &config.depths {
        match power_spectrum_auto(&kernel, depth, config.d)
            .and_then(|s| normalized_spectrum(&s))
        {
            Ok(n) => {
                let mass = n.total_mass();
                // the raw-spectrum tail is ≤ 1e-8; normalization divides
                // it by 1-C_0, so the acceptable deficit grows with depth
                let tol = 1e-6 + 1e-6 / n.one_minus_c0;
                verdict(
                    &mut verdicts,
                    "spectral-mass",
                    (mass - 1.0).abs() < tol,
                    format!("L={depth}: normalized mass {mass:.9} (tol {tol:.2e})"),
                );
            }
            Err(e) => verdict(
                &mut verdicts,
                "spectral-mass",
                false,
                format!("L={depth}: {e}"),
            ),
        }
    }

    match sphere_grid(config.d, config.grid.n, config.grid.kind, config.seed) {
        Ok(g) => {
            let total: f64 = g.weights.iter().sum();
            let omega = nngf::spectral::omega_d(config.d);
            verdict(
                &mut verdicts,
                "grid-weights",
                (total - omega).abs() < 1e-8 * omega,
                format!("sum {total:.9} vs surface area {omega:.9}"),
            );
        }
        Err(e) => verdict(&mut verdicts, "grid-weights", false, e.to_string()),
    }

    let a = run_experiment(config, seed_override, 1)?;
    let b = run_experiment(config, seed_override, 4)?;
    let bytes_a = samples_csv(&a).to_bytes();
    let bytes_b = samples_csv(&b).to_bytes();
    verdict(
        &mut verdicts,
        "determinism",
        bytes_a == bytes_b,
        format!(
            "CSV payload {} across worker counts 1 and 4 ({} bytes)",
            if bytes_a == bytes_b {
                "identical"
            } else {
                "DIFFERS"
            },
            bytes_a.len()
        ),
    );

    for v in &verdicts {
        println!("{} {}: {}", v.status, v.name, v.detail);
    }
    Ok(verdicts.iter().all(|v| v.status != "FAIL"))
}
