//! The named experiments. Each one runs its sweep points on the current
//! rayon pool, writes its files and reports which runs failed.

use anyhow::Result;
use crossdiff_core::analysis::{
    det_sym_diffusion, detect_case, difference_norm, epsilon_star, fit_order, l2_distance, mass_total,
    max_relative_mass_drift, min_det_sym, observed_order, w_norm, NormReport,
};
use crossdiff_core::certificates::{stability_gammas, ConstantsLedger};
use crossdiff_core::linearized::{picard_solve, PicardReport};
use crossdiff_core::models::entropy;
use crossdiff_core::scenarios::initial_state;
use crossdiff_core::{integrate, steady_state, Family, Grid, ModelSpec, StateField, SteadyState, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, Experiment, Resolved};
use crate::output::{num, opt, Chart, OutputDir};

/// Status of one sweep point, as recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub label: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RunRecord {
    fn ok(label: String) -> Self {
        Self { label, ok: true, failure: None }
    }

    fn failed(label: String, why: String) -> Self {
        Self { label, ok: false, failure: Some(why) }
    }
}

struct Setup {
    family: Family,
    epsilon: f64,
    model: ModelSpec,
    u0: StateField,
}

impl Setup {
    fn label(&self) -> String {
        format!("{}_eps_{}", self.family, num(self.epsilon))
    }
}

fn setups(cfg: &Resolved, cells: usize) -> Result<Vec<Setup>, ConfigError> {
    let grid = Grid::new(cells).map_err(|e| ConfigError(e.to_string()))?;
    let u0 = initial_state(grid, &cfg.profiles()).map_err(|e| ConfigError(format!("initial data: {e}")))?;
    let mut out = Vec::new();
    for eps in &cfg.epsilon {
        for name in &cfg.families {
            let family = cfg.family(name)?;
            out.push(Setup { family, epsilon: *eps, model: cfg.model(family, *eps)?, u0: u0.clone() });
        }
    }
    Ok(out)
}

pub fn run(cfg: &Resolved, out: &mut OutputDir) -> Result<Vec<RunRecord>> {
    match cfg.experiment {
        Experiment::Fig1 | Experiment::Sweep | Experiment::Fig3 => trajectories(cfg, out),
        Experiment::Fig2 => steady_states(cfg, out),
        Experiment::Fig5 | Experiment::Compare => comparison(cfg, out),
        Experiment::Picard => picard(cfg, out),
        Experiment::Constants => constants(cfg, out),
        Experiment::Convergence => convergence(cfg, out),
    }
}

fn failure_text(traj: &Trajectory) -> Option<String> {
    traj.failure.as_ref().map(|f| format!("{} at t = {}", f.reason, f.time))
}

fn norm_cells(n: Option<&NormReport>) -> [String; 3] {
    [opt(n.map(|n| n.w_norm)), opt(n.map(|n| n.l2_part)), opt(n.map(|n| n.sup_part))]
}

/// Time-dependent runs, one per family and epsilon (fig1, fig3, sweep).
fn trajectories(cfg: &Resolved, out: &mut OutputDir) -> Result<Vec<RunRecord>> {
    let opts = cfg.solver_options()?;
    let runs = setups(cfg, cfg.cells)?;
    let trajs: Vec<crossdiff_core::Result<Trajectory>> =
        runs.par_iter().map(|s| integrate(&s.model, &s.u0, cfg.horizon, cfg.samples, &opts)).collect();

    let fig3 = cfg.experiment == Experiment::Fig3;
    let mut header = vec![
        "family",
        "epsilon",
        "status",
        "failure_time",
        "steps",
        "w_norm",
        "l2_part",
        "sup_part",
        "min_det_sym",
        "min_det_sym_t",
        "min_det_sym_x",
        "mass_drift",
        "entropy_start",
        "entropy_end",
    ];
    if fig3 {
        header.extend(["u_star_stated", "epsilon_star_stated", "u_star_measured", "epsilon_star_measured"]);
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut norms_by_family: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut finals = Vec::new();
    for (s, traj) in runs.iter().zip(trajs) {
        let label = s.label();
        let traj = match traj {
            Ok(t) => t,
            Err(e) => {
                records.push(RunRecord::failed(label, e.to_string()));
                continue;
            }
        };
        out.trajectory(&format!("runs/{label}.csv"), &traj)?;
        let norm = w_norm(&traj).ok();
        let det = (s.model.species() == 2).then(|| min_det_sym(&s.model, &traj).ok()).flatten();
        let h_start = entropy(&s.model, &traj.states[0]).ok();
        let h_end = entropy(&s.model, traj.final_state()).ok();
        let mut row = vec![
            s.family.to_string(),
            num(s.epsilon),
            if traj.is_complete() { "ok".into() } else { "failed".into() },
            opt(traj.failure.as_ref().map(|f| f.time)),
            traj.stats.steps.to_string(),
        ];
        row.extend(norm_cells(norm.as_ref()));
        row.extend([
            opt(det.map(|d| d.value)),
            opt(det.map(|d| d.time)),
            opt(det.map(|d| d.x)),
            num(max_relative_mass_drift(&traj)),
            opt(h_start),
            opt(h_end),
        ]);
        if fig3 {
            let measured = s.u0.values().iter().cloned().fold(f64::MIN, f64::max);
            let threshold = |u: f64| {
                detect_case(s.model.params())
                    .and_then(|c| epsilon_star(c, s.model.params(), u).ok())
                    .map(|r| r.epsilon_star)
            };
            row.extend([num(cfg.u_star), opt(threshold(cfg.u_star)), num(measured), opt(threshold(measured))]);
        }
        rows.push(row);
        if let Some(n) = &norm {
            let name = s.family.to_string();
            match norms_by_family.iter_mut().find(|(f, _)| *f == name) {
                Some((_, pts)) => pts.push((s.epsilon, n.w_norm)),
                None => norms_by_family.push((name, vec![(s.epsilon, n.w_norm)])),
            }
        }
        match failure_text(&traj) {
            Some(why) => records.push(RunRecord::failed(label.clone(), why)),
            None => records.push(RunRecord::ok(label.clone())),
        }
        finals.push((label, traj.final_state().clone()));
    }
    out.csv("summary.csv", &header, &rows)?;

    for (label, state) in &finals {
        write_profile(out, &format!("series/{label}_final.dat"), state)?;
    }
    for (family, pts) in &norms_by_family {
        let data: Vec<Vec<f64>> = pts.iter().map(|(e, w)| vec![*e, *w]).collect();
        out.series(&format!("series/{family}_w_norm.dat"), &["epsilon", "w_norm"], &data)?;
    }
    if fig3 {
        det_sym_curve(cfg, out)?;
    }
    if cfg.svg {
        let mut chart = Chart::new("final profiles", "x", "u");
        for (label, state) in &finals {
            let xs = state.grid().midpoints();
            for i in 0..state.species() {
                chart = chart.with(&format!("{label} u_{}", i + 1), xs.iter().cloned().zip(state.profile(i)).collect());
            }
        }
        out.svg("plots/final_profiles.svg", &chart)?;
        if norms_by_family.iter().any(|(_, p)| p.len() > 1) {
            let mut chart = Chart::new("trajectory norm", "epsilon", "W norm");
            chart.log_y = true;
            for (family, pts) in &norms_by_family {
                chart = chart.with(family, pts.clone());
            }
            out.svg("plots/w_norm.svg", &chart)?;
        }
    }
    if fig3 {
        // blow-up is the expected outcome here, so failures are data
        return Ok(records.into_iter().map(|r| RunRecord { ok: true, ..r }).collect());
    }
    Ok(records)
}

fn write_profile(out: &mut OutputDir, relative: &str, state: &StateField) -> Result<()> {
    let mut columns = vec!["x".to_string()];
    columns.extend((1..=state.species()).map(|i| format!("u_{i}")));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let data: Vec<Vec<f64>> = (0..state.grid().cells())
        .map(|n| {
            let mut p = vec![state.grid().midpoint(n)];
            p.extend((0..state.species()).map(|i| state.get(i, n)));
            p
        })
        .collect();
    out.series(relative, &cols, &data)
}

/// `det(Sym(D))` at `u1 = u2 = u*` over epsilon, for every two-species family.
fn det_sym_curve(cfg: &Resolved, out: &mut OutputDir) -> Result<()> {
    let top = cfg.epsilon.iter().cloned().fold(0.0, f64::max).max(1e-3);
    for name in &cfg.families {
        let family = cfg.family(name)?;
        let mut data = Vec::new();
        for k in 0..=100 {
            let eps = top * k as f64 / 100.0;
            let model = cfg.model(family, eps)?;
            if let Ok(d) = det_sym_diffusion(&model, &[cfg.u_star, cfg.u_star]) {
                data.push(vec![eps, d]);
            }
        }
        if !data.is_empty() {
            out.series(&format!("series/{family}_det_sym.dat"), &["epsilon", "det_sym"], &data)?;
            if cfg.svg {
                let chart = Chart::new("det Sym(D) at u*", "epsilon", "det")
                    .with(family.name(), data.iter().map(|p| (p[0], p[1])).collect());
                out.svg(&format!("plots/{family}_det_sym.svg"), &chart)?;
            }
        }
    }
    Ok(())
}

fn steady_states(cfg: &Resolved, out: &mut OutputDir) -> Result<Vec<RunRecord>> {
    let opts = cfg.solver_options()?;
    let runs = setups(cfg, cfg.cells)?;
    let results: Vec<crossdiff_core::Result<SteadyState>> =
        runs.par_iter().map(|s| steady_state(&s.model, &s.u0, &opts)).collect();
    let m = cfg.diffusivity.len();
    let mut header: Vec<String> =
        ["family", "epsilon", "converged", "time", "residual"].iter().map(|s| s.to_string()).collect();
    for i in 1..=m {
        header.extend([format!("max_u_{i}"), format!("min_u_{i}"), format!("mass_{i}")]);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut chart = Chart::new("steady states", "x", "u");
    for (s, result) in runs.iter().zip(results) {
        let label = s.label();
        let ss = match result {
            Ok(ss) => ss,
            Err(e) => {
                records.push(RunRecord::failed(label, e.to_string()));
                continue;
            }
        };
        out.states(&format!("runs/{label}.csv"), std::slice::from_ref(&ss.state))?;
        write_profile(out, &format!("series/{label}_steady.dat"), &ss.state)?;
        let mut row =
            vec![s.family.to_string(), num(s.epsilon), ss.converged.to_string(), num(ss.time), num(ss.residual)];
        let masses = mass_total(&ss.state);
        for (i, mass) in masses.iter().enumerate() {
            let p = ss.state.profile(i);
            row.extend([
                num(p.iter().cloned().fold(f64::MIN, f64::max)),
                num(p.iter().cloned().fold(f64::MAX, f64::min)),
                num(*mass),
            ]);
        }
        rows.push(row);
        let xs = ss.state.grid().midpoints();
        for i in 0..m {
            chart = chart.with(&format!("{label} u_{}", i + 1), xs.iter().cloned().zip(ss.state.profile(i)).collect());
        }
        records.push(if ss.converged {
            RunRecord::ok(label)
        } else {
            RunRecord::failed(label, format!("residual {} after t = {}", ss.residual, ss.time))
        });
    }
    out.csv("summary.csv", &header, &rows)?;
    if cfg.svg {
        out.svg("plots/steady_states.svg", &chart)?;
    }
    Ok(records)
}

/// Gaps between consecutive families in the configured list, fitted against epsilon.
fn comparison(cfg: &Resolved, out: &mut OutputDir) -> Result<Vec<RunRecord>> {
    let opts = cfg.solver_options()?;
    let runs = setups(cfg, cfg.cells)?;
    let trajs: Vec<crossdiff_core::Result<Trajectory>> =
        runs.par_iter().map(|s| integrate(&s.model, &s.u0, cfg.horizon, cfg.samples, &opts)).collect();
    let mut records = Vec::new();
    let mut complete = Vec::new();
    for (s, traj) in runs.iter().zip(trajs) {
        let label = s.label();
        match traj {
            Ok(t) => {
                out.trajectory(&format!("runs/{label}.csv"), &t)?;
                match failure_text(&t) {
                    Some(why) => records.push(RunRecord::failed(label, why)),
                    None => records.push(RunRecord::ok(label)),
                }
                complete.push((s, t));
            }
            Err(e) => records.push(RunRecord::failed(label, e.to_string())),
        }
    }
    let mut rows = Vec::new();
    let mut gaps: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for pair in cfg.families.windows(2) {
        let name = format!("{}-{}", pair[0], pair[1]);
        let mut pts = Vec::new();
        for eps in &cfg.epsilon {
            let find =
                |f: &str| complete.iter().find(|(s, t)| s.epsilon == *eps && s.family.name() == f && t.is_complete());
            if let (Some((_, a)), Some((_, b))) = (find(&pair[0]), find(&pair[1])) {
                let n = difference_norm(a, b)?;
                let mut row = vec![num(*eps), name.clone()];
                row.extend(norm_cells(Some(&n)));
                rows.push(row);
                pts.push((*eps, n.w_norm));
            }
        }
        gaps.push((name, pts));
    }
    out.csv("summary.csv", &["epsilon", "pair", "w_norm", "l2_part", "sup_part"], &rows)?;
    let mut slope_rows = Vec::new();
    for (name, pts) in &gaps {
        let data: Vec<Vec<f64>> = pts.iter().map(|(e, g)| vec![*e, *g]).collect();
        out.series(&format!("series/gap_{name}.dat"), &["epsilon", "w_norm"], &data)?;
        if let Ok(fit) = fit_order(pts) {
            slope_rows.push(vec![name.clone(), num(fit.slope), num(fit.intercept), num(fit.residual)]);
        }
    }
    out.csv("slopes.csv", &["pair", "slope", "intercept", "residual"], &slope_rows)?;
    if cfg.svg {
        let mut chart = Chart::new("model gaps", "epsilon", "W norm of difference").loglog();
        for (name, pts) in &gaps {
            chart = chart.with(name, pts.clone());
        }
        out.svg("plots/gaps.svg", &chart)?;
    }
    Ok(records)
}

fn picard(cfg: &Resolved, out: &mut OutputDir) -> Result<Vec<RunRecord>> {
    let opts = cfg.solver_options()?;
    let runs = setups(cfg, cfg.cells)?;
    let tol = cfg.picard.tol.unwrap_or(1e-4);
    let max_iters = cfg.picard.max_iters.unwrap_or(30);
    type PicardRun = (crossdiff_core::Result<PicardReport>, crossdiff_core::Result<Trajectory>);
    let results: Vec<PicardRun> = runs
        .par_iter()
        .map(|s| {
            (
                picard_solve(&s.model, &s.u0, cfg.horizon, cfg.samples, &opts, max_iters, tol),
                integrate(&s.model, &s.u0, cfg.horizon, cfg.samples, &opts),
            )
        })
        .collect();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut means: Vec<(f64, f64)> = Vec::new();
    let mut chart = Chart::new("Picard differences", "iteration", "W norm").loglog();
    chart.log_x = false;
    for (s, (report, direct)) in runs.iter().zip(results) {
        let label = s.label();
        let report = match report {
            Ok(r) => r,
            Err(e) => {
                records.push(RunRecord::failed(label, e.to_string()));
                continue;
            }
        };
        let iter_rows: Vec<Vec<String>> = report
            .diffs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let ratio = (k > 0 && report.diffs[k - 1] > 0.0).then(|| d / report.diffs[k - 1]);
                vec![(k + 1).to_string(), num(*d), opt(ratio)]
            })
            .collect();
        out.csv(&format!("runs/{label}_iterations.csv"), &["iteration", "diff", "ratio"], &iter_rows)?;
        let data: Vec<Vec<f64>> = report.diffs.iter().enumerate().map(|(k, d)| vec![(k + 1) as f64, *d]).collect();
        out.series(&format!("series/{label}_diffs.dat"), &["iteration", "diff"], &data)?;
        chart = chart.with(&label, data.iter().map(|p| (p[0], p[1])).collect());
        let mean = report.mean_ratio(10.0 * tol);
        let agreement = match &direct {
            Ok(d) if d.is_complete() => difference_norm(report.final_iterate(), d).ok().map(|n| n.w_norm),
            _ => None,
        };
        rows.push(vec![
            s.family.to_string(),
            num(s.epsilon),
            report.diffs.len().to_string(),
            report.converged.to_string(),
            opt(mean),
            opt(agreement),
        ]);
        if let Some(m) = mean {
            means.push((s.epsilon, m));
        }
        records.push(if report.converged {
            RunRecord::ok(label)
        } else {
            RunRecord::failed(label, format!("no convergence to {tol} in {max_iters} iterations"))
        });
    }
    out.csv("summary.csv", &["family", "epsilon", "iterations", "converged", "mean_ratio", "agreement_w"], &rows)?;
    let slope_rows: Vec<Vec<String>> = fit_order(&means)
        .ok()
        .map(|f| vec![vec!["mean_ratio".into(), num(f.slope), num(f.intercept), num(f.residual)]])
        .unwrap_or_default();
    out.csv("slopes.csv", &["quantity", "slope", "intercept", "residual"], &slope_rows)?;
    if cfg.svg {
        out.svg("plots/picard_diffs.svg", &chart)?;
    }
    Ok(records)
}

fn constants(cfg: &Resolved, out: &mut OutputDir) -> Result<Vec<RunRecord>> {
    let ledger =
        ConstantsLedger::new(cfg.envelope()?, cfg.constants_input()?).map_err(|e| ConfigError(e.to_string()))?;
    let radius = cfg.constants.radius.unwrap_or(1.0);
    let mut rows = ledger.rows(radius);
    if let Some(n0) = cfg.constants.norm_u0 {
        let g = stability_gammas(&ledger.k, n0, cfg.constants.norm_u0_tilde.unwrap_or(n0));
        rows.extend([
            ("Y0".to_string(), g.y0),
            ("Y1".to_string(), g.y1),
            ("Gamma1".to_string(), g.gamma1),
            ("Gamma2".to_string(), g.gamma2),
            ("eps0(Y1)".to_string(), g.epsilon0),
        ]);
    }
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    for (name, value) in &rows {
        println!("{name:<width$}  {}", num(*value));
    }
    let csv_rows: Vec<Vec<String>> = rows.iter().map(|(n, v)| vec![n.clone(), num(*v)]).collect();
    out.csv("constants.csv", &["name", "value"], &csv_rows)?;
    Ok(vec![RunRecord::ok("constants".into())])
}

/// Self-convergence in space: every level is compared with the finest one, averaged down.
fn convergence(cfg: &Resolved, out: &mut OutputDir) -> Result<Vec<RunRecord>> {
    let opts = cfg.solver_options()?;
    let mut levels = cfg.refinements.clone();
    levels.sort_unstable();
    levels.dedup();
    let finest = *levels.last().expect("validated");
    if let Some(j) = levels.iter().find(|j| !finest.is_multiple_of(**j)) {
        return Err(ConfigError(format!("refinement {j} does not divide the finest level {finest}")).into());
    }
    let mut per_level = Vec::new();
    for j in &levels {
        per_level.push(setups(cfg, *j)?);
    }
    let tasks: Vec<(usize, usize)> =
        (0..levels.len()).flat_map(|l| (0..per_level[l].len()).map(move |k| (l, k))).collect();
    let finals: Vec<crossdiff_core::Result<Trajectory>> = tasks
        .par_iter()
        .map(|(l, k)| {
            let s = &per_level[*l][*k];
            integrate(&s.model, &s.u0, cfg.horizon, cfg.samples, &opts)
        })
        .collect();
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut chart = Chart::new("self-convergence", "dx", "L2 error").loglog();
    let points = per_level[0].len();
    for k in 0..points {
        let label = per_level[0][k].label();
        let mut states = Vec::new();
        let mut failed = None;
        for l in 0..levels.len() {
            let idx = tasks.iter().position(|t| *t == (l, k)).expect("task exists");
            match &finals[idx] {
                Ok(t) if t.is_complete() => states.push(t.final_state().clone()),
                Ok(t) => failed = failure_text(t),
                Err(e) => failed = Some(e.to_string()),
            }
        }
        if let Some(why) = failed {
            records.push(RunRecord::failed(label, why));
            continue;
        }
        let reference = states.last().expect("finest level");
        let mut errs = Vec::new();
        for (l, j) in levels[..levels.len() - 1].iter().enumerate() {
            let err = l2_distance(&states[l], &reference.coarsened(finest / j)?)?;
            errs.push((Grid::new(*j)?.dx(), err));
        }
        for (l, (dx, err)) in errs.iter().enumerate() {
            let order = (l > 0).then(|| observed_order(errs[l - 1].1, *err, errs[l - 1].0 / dx));
            rows.push(vec![label.clone(), levels[l].to_string(), num(*dx), num(*err), opt(order)]);
        }
        let data: Vec<Vec<f64>> = errs.iter().map(|(d, e)| vec![*d, *e]).collect();
        out.series(&format!("series/{label}_errors.dat"), &["dx", "error"], &data)?;
        chart = chart.with(&label, errs.clone());
        records.push(RunRecord::ok(label));
    }
    out.csv("summary.csv", &["run", "cells", "dx", "error", "order"], &rows)?;
    if cfg.svg {
        out.svg("plots/convergence.svg", &chart)?;
    }
    Ok(records)
}
