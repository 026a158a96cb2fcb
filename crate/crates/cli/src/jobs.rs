//! Maps each command onto library calls and renders CSV and JSON bodies.

use mvsde::critical::{
    check_c2fg, check_vainilla, construct_multiwell, phase_diagram_with, sigma_c, sigma_c_upper_estimate, sigma_r,
    sigma_star_curve,
};
use mvsde::model::{audit_assumptions, find_theta_star, Model};
use mvsde::particle::{stationary_mean_estimate, SimulationParams};
use mvsde::selfconsistency::find_roots_with;
use serde_json::{json, Value};

use crate::config::{Command, JobConfig};

/// Rendered outputs of one job, before headers are attached.
pub struct Artifact {
    pub csv: String,
    pub json: Value,
}

fn csv_rows(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = format!("{header}\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(cfg: &JobConfig) -> mvsde::Result<Artifact> {
    let model = Model::new(cfg.model.clone())?;
    match cfg.command {
        Command::Audit => {
            let report = audit_assumptions(&model, cfg.regime);
            let csv = csv_rows(
                "id,section,verdict,witness,notes",
                report.entries.iter().map(|e| {
                    format!(
                        "{},{},{:?},{},\"{}\"",
                        e.id,
                        e.section,
                        e.verdict,
                        opt(e.witness),
                        e.notes.replace('"', "'")
                    )
                }),
            );
            Ok(Artifact {
                csv,
                json: json!({ "all_hold": report.all_hold(), "report": report }),
            })
        }
        Command::Roots => {
            let sigma = cfg.sigma.unwrap_or_default();
            let report = find_roots_with(&model, sigma, cfg.root_scan)?;
            let csv = csv_rows(
                "m,residual,slope,crossing",
                report
                    .roots
                    .iter()
                    .map(|r| format!("{},{},{},{:?}", r.m, r.residual, r.slope, r.crossing)),
            );
            Ok(Artifact {
                csv,
                json: json!({ "report": report }),
            })
        }
        Command::PhaseDiagram => {
            let grid = cfg.sigma_grid.clone().unwrap_or_default();
            let diagram = phase_diagram_with(&model, &grid, cfg.root_scan)?;
            Ok(Artifact {
                csv: diagram.to_csv(),
                json: json!({ "counts": diagram.counts(), "diagram": diagram }),
            })
        }
        Command::Critical => {
            let res = sigma_c(&model, (cfg.bracket[0], cfg.bracket[1]))?;
            let csv = csv_rows(
                "sigma_c,d_at_root,d_slope,iterations,bracket_lo,bracket_hi",
                [format!(
                    "{},{},{},{},{},{}",
                    opt(res.sigma_c),
                    res.d_at_root,
                    res.d_at_root_slope,
                    res.iterations,
                    res.bracket.0,
                    res.bracket.1
                )],
            );
            Ok(Artifact {
                csv,
                json: json!({ "result": res }),
            })
        }
        Command::CriticalCurve => {
            let thetas = cfg.theta_grid.clone().unwrap_or_default();
            let curve = sigma_star_curve(&model, &thetas)?;
            Ok(Artifact {
                csv: curve.to_csv(),
                json: json!({ "curve": curve }),
            })
        }
        Command::SigmaR => {
            let res = sigma_r(&model, (cfg.bracket[0], cfg.bracket[1]))?;
            let csv = csv_rows(
                "sigma_r,sign_change,h_lo,h_hi,iterations",
                [format!(
                    "{},{},{},{},{}",
                    res.sigma_r, res.sign_change, res.h_lo, res.h_hi, res.iterations
                )],
            );
            Ok(Artifact {
                csv,
                json: json!({ "result": res }),
            })
        }
        Command::MultiwellCheck => multiwell_check(cfg, model),
        Command::Simulate => {
            let sim = cfg.simulation.clone().unwrap_or_else(|| unreachable!("validated"));
            let params = SimulationParams {
                n: sim.n,
                dt: sim.dt,
                t_burn: sim.t_burn,
                t_sample: sim.t_sample,
                seed: sim.seed,
                antithetic: sim.antithetic,
            };
            let est = stationary_mean_estimate(&model, sim.sigma, sim.init, params)?;
            let trace = &est.ensemble.mean_trace;
            let last = trace.len().saturating_sub(1);
            let csv = csv_rows(
                "t,mean,stderr",
                trace
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % sim.trace_stride == 0 || *i == last)
                    .map(|(_, p)| format!("{},{},{}", p.t, p.mean, p.stderr)),
            );
            Ok(Artifact {
                csv,
                json: json!({
                    "mean": est.mean,
                    "stderr": est.stderr,
                    "batch_means": est.batch_means,
                    "steps": est.ensemble.steps,
                    "final_time": est.ensemble.time,
                }),
            })
        }
    }
}

fn multiwell_check(cfg: &JobConfig, model: Model) -> mvsde::Result<Artifact> {
    let mw = cfg.multiwell.clone().unwrap_or(crate::config::Multiwell {
        construct: None,
        theta: None,
        theta_margin: None,
        c2fg_resolution: 2000,
    });
    let built = match &mw.construct {
        Some(c) => construct_multiwell(&model, c.x1, c.x2, &c.options)?,
        None => model,
    };
    let theta = match (mw.theta, mw.theta_margin) {
        (Some(t), _) => t,
        (None, Some(margin)) => find_theta_star(&built, 0.0, 1e4)?.theta + margin,
        (None, None) => built.theta(),
    };
    let checked = built.with_theta(theta)?;
    let grid = cfg.sigma_grid.clone().unwrap_or_default();
    let c2fg = check_c2fg(&checked, mw.c2fg_resolution)?;
    let vainilla = check_vainilla(&checked, &grid, theta)?;
    let upper = sigma_c_upper_estimate(&checked)?;
    let csv = csv_rows(
        "sigma,ii1,ii2,ii1_holds,ii2_holds",
        vainilla
            .rows
            .iter()
            .map(|r| format!("{},{},{},{},{}", r.sigma, r.ii1, r.ii2, r.ii1_holds, r.ii2_holds)),
    );
    Ok(Artifact {
        csv,
        json: json!({
            "model": checked.spec(),
            "theta": theta,
            "c2fg": c2fg,
            "c2fg_holds": c2fg.holds(),
            "vainilla": vainilla,
            "vainilla_min_margin": vainilla.min_margin(),
            "upper": upper,
            "bound_holds": upper.scan_estimate <= upper.bound + 1e-3,
        }),
    })
}
