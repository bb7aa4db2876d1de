//! Fixed parameter sets behind each reproducible figure. Only grid keys and
//! `xi_steps` may be adjusted; the physics is pinned by the figure id.

use serde_json::json;

use cpt_squeeze::model::to_db;
use cpt_squeeze::{optimize_over_detuning, optimize_over_rabi, DetuningSetting, ScanGrid, SystemParams, C64};

use crate::commands::{config_axis, config_log_axis, point_cells, scan_grid, spectrum_report, POINT_COLUMNS};
use crate::config::{RunConfig, GRID_KEYS};
use crate::output::{Cell, Report, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureId {
    #[value(name = "2a")]
    F2a,
    #[value(name = "2b")]
    F2b,
    #[value(name = "3a")]
    F3a,
    #[value(name = "3b")]
    F3b,
    #[value(name = "3c")]
    F3c,
    #[value(name = "3d")]
    F3d,
    #[value(name = "4a")]
    F4a,
    #[value(name = "4b")]
    F4b,
    #[value(name = "4c")]
    F4c,
    #[value(name = "4d")]
    F4d,
    #[value(name = "s1")]
    S1,
    #[value(name = "s2")]
    S2,
}

impl FigureId {
    pub fn name(self) -> &'static str {
        use FigureId::*;
        match self {
            F2a => "2a",
            F2b => "2b",
            F3a => "3a",
            F3b => "3b",
            F3c => "3c",
            F3d => "3d",
            F4a => "4a",
            F4b => "4b",
            F4c => "4c",
            F4d => "4d",
            S1 => "s1",
            S2 => "s2",
        }
    }

    /// (α, Ω, δ) of the four spectra.
    pub fn spectrum_set(self) -> Option<(f64, f64, f64)> {
        match self {
            FigureId::F4a => Some((1000.0, 1.0, 0.01)),
            FigureId::F4b => Some((1000.0, 1.4, 0.019)),
            FigureId::F4c => Some((300.0, 1.0, 0.019)),
            FigureId::F4d => Some((300.0, 1.4, 0.043)),
            _ => None,
        }
    }
}

pub const FIGURE_ODS: [f64; 4] = [100.0, 300.0, 1000.0, 3000.0];
const SUPPLEMENT_RATIOS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

fn check_keys(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.keys().find(|k| *k != "xi_steps" && !GRID_KEYS.contains(k)) {
        Some(k) => Err(CliError::Usage(format!(
            "`{k}` is fixed by the figure; only grid keys and xi_steps can be changed"
        ))),
        None => Ok(()),
    }
}

fn base(cfg: &RunConfig, alpha: f64, omega: f64, delta: f64) -> Result<SystemParams, CliError> {
    let p = SystemParams::new(alpha, omega, delta)?;
    Ok(match cfg.count("xi_steps") {
        Some(n) => p.with_xi_steps(n)?,
        None => p,
    })
}

fn curve_header(first: &[&'static str]) -> Table {
    let mut h = first.to_vec();
    h.extend(POINT_COLUMNS);
    Table::new(h)
}

fn min_summary(label: &str, best: Option<(f64, f64)>, axis: &str) -> String {
    match best {
        Some((x, v)) => format!("{label}: lowest V = {:.3} dB at {axis} = {x:.6}", to_db(v)),
        None => format!("{label}: every point failed"),
    }
}

fn track(best: &mut Option<(f64, f64)>, x: f64, v: Option<f64>) {
    if let Some(v) = v {
        if best.is_none_or(|(_, b)| v < b) {
            *best = Some((x, v));
        }
    }
}

pub fn figure(id: FigureId, cfg: &RunConfig) -> Result<Report, CliError> {
    check_keys(cfg)?;
    let label = format!("figure {}", id.name());
    let command = format!("figure-{}", id.name());
    use FigureId::*;
    match id {
        F2a => {
            let p = base(cfg, 1000.0, 1.0, 0.02)?;
            let omegas = config_axis(cfg, "omega", 0.2, 4.0, 39)?;
            let mut t = curve_header(&["omega"]);
            let mut best = None;
            for &o in &omegas {
                let (cells, v) = point_cells(p.with_omega(o));
                track(&mut best, o, v);
                t.push([vec![Cell::Num(o)], cells].concat());
            }
            Ok(Report {
                command,
                table: t,
                params: json!(p),
                grid_settings: json!({ "omega": omegas }),
                outputs: json!({ "lowest": best }),
                summary: min_summary(&label, best, "omega"),
            })
        }
        F2b => {
            let p = base(cfg, 1000.0, 1.0, 0.01)?;
            let deltas = config_axis(cfg, "delta", 0.001, 0.05, 50)?;
            let mut t = curve_header(&["delta"]);
            let mut best = None;
            for &d in &deltas {
                let (cells, v) = point_cells(p.with_detuning(d, DetuningSetting::Symmetric));
                track(&mut best, d, v);
                t.push([vec![Cell::Num(d)], cells].concat());
            }
            Ok(Report {
                command,
                table: t,
                params: json!(p),
                grid_settings: json!({ "delta": deltas }),
                outputs: json!({ "lowest": best }),
                summary: min_summary(&label, best, "delta"),
            })
        }
        F3a | F3c => {
            // V optimised over Ω as a function of δ; 3a plots the variance and
            // 3c the optimal Ω, so both come from the same table.
            let deltas = config_log_axis(cfg, "delta", 0.005, 0.1, 8)?;
            let grid = scan_grid(cfg, "omega", ScanGrid::rabi());
            let mut t = Table::new(vec![
                "alpha",
                "delta",
                "v_opt",
                "v_opt_db",
                "omega_opt",
                "transmission_p",
                "transmission_c",
                "interior_optimum",
                "error",
            ]);
            for alpha in FIGURE_ODS {
                for &d in &deltas {
                    let p = base(cfg, alpha, 1.0, d)?;
                    t.push(optimum_row(alpha, d, optimize_over_rabi(&p, grid)));
                }
            }
            Ok(Report {
                command,
                table: t,
                params: json!({ "alpha": FIGURE_ODS, "setting": DetuningSetting::Symmetric }),
                grid_settings: json!({ "delta": deltas, "omega": grid }),
                outputs: json!({}),
                summary: format!("{label}: {} optimisations over omega", FIGURE_ODS.len() * deltas.len()),
            })
        }
        F3b | F3d => {
            let omegas = config_log_axis(cfg, "omega", 0.5, 2.0, 7)?;
            let grid = scan_grid(cfg, "delta", ScanGrid::detuning());
            let mut t = Table::new(vec![
                "alpha",
                "omega",
                "v_opt",
                "v_opt_db",
                "delta_opt",
                "transmission_p",
                "transmission_c",
                "interior_optimum",
                "error",
            ]);
            for alpha in FIGURE_ODS {
                for &o in &omegas {
                    let p = base(cfg, alpha, o, 0.0)?;
                    t.push(optimum_row(
                        alpha,
                        o,
                        optimize_over_detuning(&p, DetuningSetting::Symmetric, grid),
                    ));
                }
            }
            Ok(Report {
                command,
                table: t,
                params: json!({ "alpha": FIGURE_ODS, "setting": DetuningSetting::Symmetric }),
                grid_settings: json!({ "omega": omegas, "delta": grid }),
                outputs: json!({}),
                summary: format!("{label}: {} optimisations over delta", FIGURE_ODS.len() * omegas.len()),
            })
        }
        F4a | F4b | F4c | F4d => {
            let (alpha, omega, delta) = id.spectrum_set().expect("spectrum figure");
            let p = base(cfg, alpha, omega, delta)?;
            spectrum_report(&command, cfg, &p)
        }
        S1 => {
            let p = base(cfg, 1000.0, 1.0, 0.02)?;
            let omegas = config_axis(cfg, "omega", 0.2, 4.0, 39)?;
            let mut t = curve_header(&["setting", "omega"]);
            let mut lowest = serde_json::Map::new();
            for setting in DetuningSetting::ALL {
                let p = p.with_detuning(0.02, setting)?;
                let mut best = None;
                for &o in &omegas {
                    let (cells, v) = point_cells(p.with_omega(o));
                    track(&mut best, o, v);
                    t.push([vec![Cell::text(setting.name()), Cell::Num(o)], cells].concat());
                }
                lowest.insert(setting.name().into(), json!(best));
            }
            Ok(Report {
                command,
                table: t,
                params: json!(p),
                grid_settings: json!({ "omega": omegas, "settings": DetuningSetting::ALL }),
                outputs: json!({ "lowest": lowest }),
                summary: format!("{label}: {} curves of {} points", DetuningSetting::ALL.len(), omegas.len()),
            })
        }
        S2 => {
            let p = base(cfg, 1000.0, 1.0, 0.01)?;
            let deltas = config_axis(cfg, "delta", 0.001, 0.05, 50)?;
            let mut t = curve_header(&["ratio", "delta"]);
            let mut lowest = vec![];
            for r in SUPPLEMENT_RATIOS {
                let p = p.with_fields(C64::from(r), C64::from(1.0))?;
                let mut best = None;
                for &d in &deltas {
                    let (cells, v) = point_cells(p.with_detuning(d, DetuningSetting::Symmetric));
                    track(&mut best, d, v);
                    t.push([vec![Cell::Num(r), Cell::Num(d)], cells].concat());
                }
                lowest.push(json!({ "ratio": r, "lowest": best }));
            }
            Ok(Report {
                command,
                table: t,
                params: json!(p),
                grid_settings: json!({ "delta": deltas, "ratios": SUPPLEMENT_RATIOS, "omega_c": 1.0 }),
                outputs: json!({ "lowest": lowest }),
                summary: format!("{label}: {} curves of {} points", SUPPLEMENT_RATIOS.len(), deltas.len()),
            })
        }
    }
}

fn optimum_row(alpha: f64, x: f64, scan: cpt_squeeze::Result<cpt_squeeze::ScanResult>) -> Vec<Cell> {
    match scan {
        Ok(s) => vec![
            Cell::Num(alpha),
            Cell::Num(x),
            Cell::Num(s.min_variance()),
            Cell::Num(to_db(s.min_variance())),
            Cell::Num(s.arg_min()),
            Cell::opt(s.best.transmission_p),
            Cell::opt(s.best.transmission_c),
            Cell::text(s.interior_optimum.to_string()),
            Cell::Empty,
        ],
        Err(e) => {
            let mut row = vec![Cell::Num(alpha), Cell::Num(x)];
            row.extend(std::iter::repeat_n(Cell::Empty, 6));
            row.push(Cell::text(e.to_string()));
            row
        }
    }
}
