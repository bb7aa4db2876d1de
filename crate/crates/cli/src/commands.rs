use serde_json::{json, Value};

use cpt_squeeze::meanfield::propagate_mean;
use cpt_squeeze::model::to_db;
use cpt_squeeze::optimize::{best_ratio, log_axis, setting_spread_db, ScanPoint};
use cpt_squeeze::spectra::{spectrum_asymmetry, spectrum_from_run};
use cpt_squeeze::{
    analytic_factors, default_grid, detuning_setting_compare, optimize_over_detuning, optimize_over_rabi,
    ratio_scan, response_coefficients, squeeze, sweep_map, validate_params, DetuningSetting, ScanGrid,
    ScanResult, SystemParams, C64,
};

use crate::config::{RunConfig, RATIOS_KEY};
use crate::output::{Cell, Report, Table};
use crate::CliError;

pub const DEFAULT_RATIOS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

pub fn params(cfg: &RunConfig) -> Result<SystemParams, CliError> {
    Ok(validate_params(&cfg.raw_params())?)
}

/// Fills keys the command sweeps over, so that validation does not demand them.
pub fn fill_defaults(cfg: &mut RunConfig, defaults: &[(&str, &str)]) {
    for (k, v) in defaults {
        if !cfg.contains(k) {
            cfg.set(k, v).expect("defaults are valid");
        }
    }
}

pub fn scan_grid(cfg: &RunConfig, axis: &str, base: ScanGrid) -> ScanGrid {
    ScanGrid {
        min: cfg.real(&format!("{axis}_min")).unwrap_or(base.min),
        max: cfg.real(&format!("{axis}_max")).unwrap_or(base.max),
        points: cfg.count(&format!("{axis}_points")).unwrap_or(base.points),
        tolerance: base.tolerance,
    }
}

pub fn linear_axis(min: f64, max: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if !(min.is_finite() && max.is_finite() && max > min && points >= 2) {
        return Err(CliError::Physics(format!(
            "axis needs min < max and at least 2 points, got [{min}, {max}] with {points}"
        )));
    }
    let n = (points - 1) as f64;
    Ok((0..points)
        .map(|k| if k + 1 == points { max } else { min + (max - min) * k as f64 / n })
        .collect())
}

/// Linear axis from `<axis>_min/_max/_points`, with fallbacks.
pub fn config_axis(cfg: &RunConfig, axis: &str, min: f64, max: f64, points: usize) -> Result<Vec<f64>, CliError> {
    linear_axis(
        cfg.real(&format!("{axis}_min")).unwrap_or(min),
        cfg.real(&format!("{axis}_max")).unwrap_or(max),
        cfg.count(&format!("{axis}_points")).unwrap_or(points),
    )
}

fn echo(p: &SystemParams) -> Value {
    serde_json::to_value(p).expect("params serialize")
}

fn db_cell(v: Option<f64>) -> Cell {
    Cell::opt(v.map(to_db))
}

pub const POINT_COLUMNS: [&str; 6] = [
    "variance",
    "variance_db",
    "theta_opt",
    "transmission_p",
    "transmission_c",
    "error",
];

/// Single evaluation as table cells matching [`POINT_COLUMNS`].
pub fn point_cells(p: Result<SystemParams, cpt_squeeze::Error>) -> (Vec<Cell>, Option<f64>) {
    match p.and_then(|p| squeeze(&p)) {
        Ok(run) => {
            let r = run.result;
            (
                vec![
                    Cell::Num(r.variance),
                    Cell::Num(r.variance_db),
                    Cell::Num(r.theta_opt),
                    Cell::Num(r.transmission_p),
                    Cell::Num(r.transmission_c),
                    Cell::Empty,
                ],
                Some(r.variance),
            )
        }
        Err(e) => (
            vec![
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::text(e.to_string()),
            ],
            None,
        ),
    }
}

fn scan_point_cells(p: &ScanPoint) -> Vec<Cell> {
    vec![
        Cell::Num(p.x),
        Cell::opt(p.variance),
        db_cell(p.variance),
        Cell::opt(p.transmission_p),
        Cell::opt(p.transmission_c),
        p.error.clone().map_or(Cell::Empty, Cell::Text),
    ]
}

fn scan_table(scan: &ScanResult) -> Table {
    let mut t = Table::new(vec![
        scan.axis,
        "variance",
        "variance_db",
        "transmission_p",
        "transmission_c",
        "error",
        "stage",
    ]);
    for (stage, pts) in [("grid", &scan.points), ("refine", &scan.refinement)] {
        for p in pts {
            let mut row = scan_point_cells(p);
            row.push(Cell::text(stage));
            t.push(row);
        }
    }
    t
}

fn scan_outputs(scan: &ScanResult) -> Value {
    json!({
        "best": scan.best,
        "bracket": [scan.bracket.0, scan.bracket.1],
        "interior_optimum": scan.interior_optimum,
        "failures": scan.failures().map(|(x, e)| json!({"x": x, "error": e})).collect::<Vec<_>>(),
    })
}

fn scan_summary(name: &str, scan: &ScanResult) -> String {
    let b = &scan.best;
    format!(
        "{name}: V = {:.3} dB ({:.6}) at {} = {:.6}, Tp = {:.4}, Tc = {:.4}{}",
        to_db(scan.min_variance()),
        scan.min_variance(),
        scan.axis,
        scan.arg_min(),
        b.transmission_p.unwrap_or(f64::NAN),
        b.transmission_c.unwrap_or(f64::NAN),
        if scan.interior_optimum { "" } else { " (optimum on the grid edge)" }
    )
}

pub fn steady(cfg: &mut RunConfig) -> Result<Report, CliError> {
    fill_defaults(cfg, &[("alpha", "0")]);
    let p = params(cfg)?;
    let b = response_coefficients(&p, p.omega_p0(), p.omega_c0())?;
    let names = [
        "sigma31", "sigma32", "sigma21", "sigma11", "sigma22", "sigma33", "sigma12", "sigma23", "sigma13",
    ];
    let mut t = Table::new(vec!["quantity", "re", "im"]);
    let mut push = |name: &str, z: C64| t.push(vec![Cell::text(name), Cell::Num(z.re), Cell::Num(z.im)]);
    for (name, z) in names.iter().zip(b.state.x) {
        push(name, z);
    }
    let c = b.coeffs;
    for (name, z) in ["a1", "b1", "c1", "d1", "a2", "b2", "c2", "d2"].iter().zip(c.row1().into_iter().chain(c.row2())) {
        push(name, z);
    }
    let s = b.state;
    Ok(Report {
        command: "steady".into(),
        table: t,
        params: echo(&p),
        grid_settings: json!({}),
        outputs: json!({ "state": s, "coefficients": c }),
        summary: format!(
            "steady: populations {:.6} {:.6} {:.6}, |sigma12| = {:.6}",
            s.s11().re,
            s.s22().re,
            s.s33().re,
            s.s12().norm()
        ),
    })
}

pub fn propagate(cfg: &mut RunConfig) -> Result<Report, CliError> {
    let p = params(cfg)?;
    let mf = propagate_mean(&p)?;
    let (tp, tc) = cpt_squeeze::transmission(&mf.profile)?;
    let mut t = Table::new(vec!["xi", "re_omega_p", "im_omega_p", "re_omega_c", "im_omega_c"]);
    let prof = &mf.profile;
    for k in 0..prof.len() {
        t.push(vec![
            Cell::Num(prof.xi[k]),
            Cell::Num(prof.omega_p[k].re),
            Cell::Num(prof.omega_p[k].im),
            Cell::Num(prof.omega_c[k].re),
            Cell::Num(prof.omega_c[k].im),
        ]);
    }
    Ok(Report {
        command: "propagate".into(),
        table: t,
        params: echo(&p),
        grid_settings: json!({ "xi_steps": mf.xi_steps }),
        outputs: json!({
            "transmission_p": tp,
            "transmission_c": tc,
            "refinement_change": mf.refinement_change,
        }),
        summary: format!("propagate: Tp = {tp:.6}, Tc = {tc:.6} on {} steps", mf.xi_steps),
    })
}

pub fn squeeze_cmd(cfg: &mut RunConfig) -> Result<Report, CliError> {
    let p = params(cfg)?;
    let run = squeeze(&p)?;
    let r = &run.result;
    let mut t = Table::new(vec!["variance", "variance_db", "theta_opt", "transmission_p", "transmission_c"]);
    t.push(vec![
        Cell::Num(r.variance),
        Cell::Num(r.variance_db),
        Cell::Num(r.theta_opt),
        Cell::Num(r.transmission_p),
        Cell::Num(r.transmission_c),
    ]);
    let analytic = (p.omega_p0() == p.omega_c0() && p.omega_p0().im == 0.0 && p.omega_p0().re > 0.0)
        .then(|| analytic_factors(p.alpha(), p.omega_p0().re, p.delta()).ok())
        .flatten();
    Ok(Report {
        command: "squeeze".into(),
        table: t,
        params: echo(&p),
        grid_settings: json!({ "xi_steps": run.mean.xi_steps }),
        outputs: json!({
            "result": r,
            "correlations": run.correlations,
            "min_photon_number": run.min_photon_number,
            "refinement_change": run.mean.refinement_change,
            "analytic": analytic,
        }),
        summary: format!(
            "squeeze: V = {:.3} dB ({:.6}), theta = {:.4}, Tp = {:.4}, Tc = {:.4}",
            r.variance_db, r.variance, r.theta_opt, r.transmission_p, r.transmission_c
        ),
    })
}

pub fn optimize_rabi(cfg: &mut RunConfig) -> Result<Report, CliError> {
    fill_defaults(cfg, &[("omega", "1")]);
    let p = params(cfg)?;
    let grid = scan_grid(cfg, "omega", ScanGrid::rabi());
    let scan = optimize_over_rabi(&p, grid)?;
    Ok(Report {
        command: "optimize-rabi".into(),
        table: scan_table(&scan),
        params: echo(&p),
        grid_settings: json!({ "omega": grid }),
        outputs: scan_outputs(&scan),
        summary: scan_summary("optimize-rabi", &scan),
    })
}

pub fn optimize_detuning(cfg: &mut RunConfig) -> Result<Report, CliError> {
    fill_defaults(cfg, &[("delta", "0")]);
    let p = params(cfg)?;
    let grid = scan_grid(cfg, "delta", ScanGrid::detuning());
    let scan = optimize_over_detuning(&p, cfg.setting(), grid)?;
    Ok(Report {
        command: "optimize-detuning".into(),
        table: scan_table(&scan),
        params: echo(&p),
        grid_settings: json!({ "delta": grid, "setting": cfg.setting() }),
        outputs: scan_outputs(&scan),
        summary: scan_summary("optimize-detuning", &scan),
    })
}

pub fn sweep(cfg: &mut RunConfig) -> Result<Report, CliError> {
    fill_defaults(cfg, &[("omega", "1"), ("delta", "0")]);
    let p = params(cfg)?;
    let omegas = config_axis(cfg, "omega", 0.2, 3.0, 15)?;
    let deltas = config_axis(cfg, "delta", 0.005, 0.05, 10)?;
    let map = sweep_map(&p, &omegas, &deltas, cfg.setting())?;
    let mut t = Table::new(vec![
        "omega",
        "delta",
        "variance",
        "variance_db",
        "transmission_p",
        "transmission_c",
        "error",
    ]);
    for (omega, row) in map.omega.iter().zip(&map.cells) {
        for cell in row {
            let mut r = vec![Cell::Num(*omega)];
            r.extend(scan_point_cells(cell));
            t.push(r);
        }
    }
    let best = map.arg_min().map(|(i, j)| (map.omega[i], map.delta[j], &map.cells[i][j]));
    let failed = map.cells.iter().flatten().filter(|c| c.error.is_some()).count();
    let summary = match best {
        Some((o, d, c)) => format!(
            "sweep: {} cells, {failed} failed, best V = {:.3} dB at omega = {o}, delta = {d}",
            omegas.len() * deltas.len(),
            to_db(c.variance.unwrap_or(f64::NAN))
        ),
        None => format!("sweep: all {} cells failed", omegas.len() * deltas.len()),
    };
    Ok(Report {
        command: "sweep".into(),
        table: t,
        params: echo(&p),
        grid_settings: json!({ "omega": omegas, "delta": deltas, "setting": cfg.setting() }),
        outputs: json!({
            "best": best.map(|(o, d, c)| json!({"omega": o, "delta": d, "point": c})),
            "failed_cells": failed,
        }),
        summary,
    })
}

/// Spectrum of `p` at its optimal angle. The grid comes from `w_*` keys when
/// given, otherwise from [`default_grid`].
pub fn spectrum_report(command: &str, cfg: &RunConfig, p: &SystemParams) -> Result<Report, CliError> {
    let run = squeeze(p)?;
    let grid = if ["w_min", "w_max", "w_points"].iter().any(|k| cfg.contains(k)) {
        let d = default_grid(p);
        config_axis(cfg, "w", 0.0, d[d.len() - 1], d.len())?
    } else {
        default_grid(p)
    };
    let spec = spectrum_from_run(p, &run, &grid)?;
    let asymmetry = spectrum_asymmetry(p, &run, &grid).ok();
    let mut t = Table::new(vec!["omega", "s", "s_db"]);
    for (w, s) in spec.omega.iter().zip(&spec.s) {
        t.push(vec![Cell::Num(*w), Cell::Num(*s), Cell::Num(to_db(*s))]);
    }
    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.5}"));
    Ok(Report {
        command: command.into(),
        table: t,
        params: echo(p),
        grid_settings: json!({ "w": grid, "xi_steps": run.mean.xi_steps }),
        outputs: json!({
            "variance": run.result.variance,
            "theta_used": spec.theta_used,
            "bandwidth": spec.bandwidth,
            "half_depth_width": spec.half_depth_width,
            "period": spec.period,
            "failures": spec.failures,
            "asymmetry": asymmetry,
        }),
        summary: format!(
            "{command}: S(0) = {:.3} dB, bandwidth = {}, period = {}, {} of {} points",
            to_db(spec.s.first().copied().unwrap_or(f64::NAN)),
            fmt(spec.bandwidth),
            fmt(spec.period),
            spec.s.len(),
            grid.len()
        ),
    })
}

pub fn spectrum(cfg: &mut RunConfig) -> Result<Report, CliError> {
    let p = params(cfg)?;
    spectrum_report("spectrum", cfg, &p)
}

pub fn ratio_scan_cmd(cfg: &mut RunConfig) -> Result<Report, CliError> {
    fill_defaults(cfg, &[("omega", "1"), ("delta", "0")]);
    let p = params(cfg)?;
    let omega_c = p.omega_c0().re;
    let ratios = cfg.list(RATIOS_KEY).unwrap_or(DEFAULT_RATIOS.to_vec());
    let grid = scan_grid(cfg, "delta", ScanGrid::detuning());
    let rows = ratio_scan(&p, omega_c, &ratios, grid)?;
    let mut t = Table::new(vec![
        "ratio",
        "delta",
        "variance",
        "variance_db",
        "transmission_p",
        "transmission_c",
        "error",
        "stage",
    ]);
    for r in &rows {
        for row in scan_table(&r.scan).rows {
            let mut cells = vec![Cell::Num(r.ratio)];
            cells.extend(row);
            t.push(cells);
        }
    }
    let best = best_ratio(&rows);
    Ok(Report {
        command: "ratio-scan".into(),
        table: t,
        params: echo(&p),
        grid_settings: json!({ "delta": grid, "ratios": ratios, "omega_c": omega_c }),
        outputs: json!({
            "best_ratio": best,
            "optima": rows.iter().map(|r| json!({"ratio": r.ratio, "scan": scan_outputs(&r.scan)})).collect::<Vec<_>>(),
        }),
        summary: format!(
            "ratio-scan: best ratio {}; {}",
            best.map_or("n/a".into(), |r| r.to_string()),
            rows.iter()
                .map(|r| format!("r = {}: {:.2} dB", r.ratio, to_db(r.scan.min_variance())))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })
}

pub fn compare_settings(cfg: &mut RunConfig) -> Result<Report, CliError> {
    fill_defaults(cfg, &[("omega", "1")]);
    let p = params(cfg)?;
    let grid = scan_grid(cfg, "omega", ScanGrid::rabi());
    let rows = detuning_setting_compare(&p, grid)?;
    let spread = setting_spread_db(&rows);
    let mut t = Table::new(vec![
        "setting",
        "omega",
        "variance",
        "variance_db",
        "transmission_p",
        "transmission_c",
        "error",
        "stage",
    ]);
    for r in &rows {
        for row in scan_table(&r.scan).rows {
            let mut cells = vec![Cell::text(r.setting.name())];
            cells.extend(row);
            t.push(cells);
        }
    }
    let sign_asymmetry = cpt_squeeze::optimize::detuning_sign_asymmetry(&p).ok();
    Ok(Report {
        command: "compare-settings".into(),
        table: t,
        params: echo(&p),
        grid_settings: json!({ "omega": grid, "settings": DetuningSetting::ALL }),
        outputs: json!({
            "spread_db": spread,
            "detuning_sign_asymmetry": sign_asymmetry,
            "optima": rows.iter().map(|r| json!({"setting": r.setting, "scan": scan_outputs(&r.scan)})).collect::<Vec<_>>(),
        }),
        summary: format!(
            "compare-settings: spread {spread:.3} dB; {}",
            rows.iter()
                .map(|r| format!("{}: {:.2} dB", r.setting, to_db(r.scan.min_variance())))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })
}

/// Log axis used by the figure-3 optimisation sweeps.
pub fn config_log_axis(cfg: &RunConfig, axis: &str, min: f64, max: f64, points: usize) -> Result<Vec<f64>, CliError> {
    Ok(log_axis(
        cfg.real(&format!("{axis}_min")).unwrap_or(min),
        cfg.real(&format!("{axis}_max")).unwrap_or(max),
        cfg.count(&format!("{axis}_points")).unwrap_or(points),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_axis_endpoints() {
        let a = linear_axis(0.1, 0.3, 3).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a[0], 0.1);
        assert_eq!(a[2], 0.3);
        assert!((a[1] - 0.2).abs() < 1e-15);
        assert!(linear_axis(1.0, 1.0, 3).is_err());
        assert!(linear_axis(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn grid_overrides() {
        let cfg = RunConfig::from_key_values("omega_min = 0.5\nomega_points = 7").unwrap();
        let g = scan_grid(&cfg, "omega", ScanGrid::rabi());
        assert_eq!((g.min, g.max, g.points), (0.5, 4.0, 7));
    }

    #[test]
    fn defaults_do_not_override() {
        let mut cfg = RunConfig::from_key_values("omega = 2").unwrap();
        fill_defaults(&mut cfg, &[("omega", "1"), ("delta", "0")]);
        assert_eq!(cfg.real("omega"), Some(2.0));
        assert_eq!(cfg.real("delta"), Some(0.0));
    }

    #[test]
    fn squeeze_report_shape() {
        let mut cfg = RunConfig::from_key_values("alpha = 100\nomega = 1\ndelta = 0.03\nxi_steps = 100").unwrap();
        let r = squeeze_cmd(&mut cfg).unwrap();
        assert_eq!(r.table.rows.len(), 1);
        for key in ["variance", "variance_db", "theta_opt", "transmission_p", "transmission_c"] {
            assert!(r.outputs["result"].get(key).is_some(), "{key}");
        }
        assert!(r.outputs["analytic"].is_object());
    }

    #[test]
    fn steady_needs_no_depth() {
        let mut cfg = RunConfig::from_key_values("omega = 1\ndelta = 0").unwrap();
        let r = steady(&mut cfg).unwrap();
        assert_eq!(r.table.rows.len(), 17);
        // the dark state at two-photon resonance has half the population in each ground state
        assert!(r.summary.starts_with("steady: populations 0.500000 0.500000 0.000000"));
    }
}
