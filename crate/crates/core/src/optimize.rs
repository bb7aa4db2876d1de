//! Parameter studies over the full propagation model.
//!
//! One-dimensional optimisations use a logarithmic coarse grid followed by a
//! golden-section search between the neighbours of the best coarse cell. Cells
//! whose propagation fails are kept in the table with their error and never
//! win the arg-min.

use serde::Serialize;

use crate::analytic::golden_section;
use crate::correlations::squeeze;
use crate::error::{Error, Result};
use crate::model::{DetuningSetting, SqueezingResult, SystemParams, C64};

/// Coarse grid and refinement tolerance of a one-dimensional scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub tolerance: f64,
}

impl ScanGrid {
    pub const fn rabi() -> Self {
        ScanGrid {
            min: 0.1,
            max: 4.0,
            points: 25,
            tolerance: 1e-3,
        }
    }

    pub const fn detuning() -> Self {
        ScanGrid {
            min: 1e-4,
            max: 0.3,
            points: 25,
            tolerance: 1e-5,
        }
    }

    /// Logarithmically spaced nodes, endpoints included exactly.
    pub fn nodes(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max > self.min && self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "scan range must satisfy 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.points < 2 {
            return Err(Error::InvalidParams("scan needs at least 2 points".into()));
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        let n = self.points - 1;
        Ok((0..=n)
            .map(|k| match k {
                0 => self.min,
                k if k == n => self.max,
                k => (a + (b - a) * k as f64 / n as f64).exp(),
            })
            .collect())
    }
}

/// One evaluated parameter value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub x: f64,
    pub variance: Option<f64>,
    pub transmission_p: Option<f64>,
    pub transmission_c: Option<f64>,
    pub error: Option<String>,
}

impl ScanPoint {
    fn evaluate(x: f64, params: Result<SystemParams>) -> Self {
        match params.and_then(|p| squeeze(&p)) {
            Ok(run) => ScanPoint::from_result(x, &run.result),
            Err(e) => ScanPoint {
                x,
                variance: None,
                transmission_p: None,
                transmission_c: None,
                error: Some(e.to_string()),
            },
        }
    }

    fn from_result(x: f64, r: &SqueezingResult) -> Self {
        ScanPoint {
            x,
            variance: Some(r.variance),
            transmission_p: Some(r.transmission_p),
            transmission_c: Some(r.transmission_c),
            error: None,
        }
    }

    fn objective(&self) -> f64 {
        self.variance.unwrap_or(f64::INFINITY)
    }
}

/// Outcome of a one-dimensional optimisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    /// "omega" or "delta".
    pub axis: &'static str,
    pub grid: ScanGrid,
    pub points: Vec<ScanPoint>,
    /// Evaluations made during refinement, in order.
    pub refinement: Vec<ScanPoint>,
    pub bracket: (f64, f64),
    /// Best point overall.
    pub best: ScanPoint,
    /// True when the best coarse cell lies strictly below both neighbours.
    pub interior_optimum: bool,
}

impl ScanResult {
    pub fn arg_min(&self) -> f64 {
        self.best.x
    }

    pub fn min_variance(&self) -> f64 {
        self.best.objective()
    }

    /// Coarse cells that failed, with their errors.
    pub fn failures(&self) -> impl Iterator<Item = (f64, &str)> {
        self.points
            .iter()
            .filter_map(|p| p.error.as_deref().map(|e| (p.x, e)))
    }
}

fn better(a: &ScanPoint, b: &ScanPoint) -> bool {
    let (fa, fb) = (a.objective(), b.objective());
    fa < fb || (fa == fb && a.x < b.x)
}

/// Coarse scan plus refinement of `eval` over `grid`.
fn scan_1d<F>(axis: &'static str, grid: ScanGrid, mut eval: F) -> Result<ScanResult>
where
    F: FnMut(f64) -> ScanPoint,
{
    let nodes = grid.nodes()?;
    let points: Vec<ScanPoint> = nodes.iter().map(|&x| eval(x)).collect();
    let mut ibest = 0;
    for (i, p) in points.iter().enumerate() {
        if better(p, &points[ibest]) {
            ibest = i;
        }
    }
    let coarse_best = points[ibest].clone();
    if coarse_best.variance.is_none() {
        return Err(Error::NonConvergence(format!(
            "every {axis} grid point failed; first error: {}",
            points[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    let lo = ibest.saturating_sub(1);
    let hi = (ibest + 1).min(points.len() - 1);
    let interior_optimum = ibest > 0
        && ibest + 1 < points.len()
        && coarse_best.objective() < points[lo].objective()
        && coarse_best.objective() < points[hi].objective();
    let bracket = (nodes[lo], nodes[hi]);

    let mut refinement = Vec::new();
    golden_section(
        |x| {
            let p = eval(x);
            let f = p.objective();
            refinement.push(p);
            f
        },
        bracket.0,
        bracket.1,
        grid.tolerance,
    );
    let mut best = coarse_best;
    for p in &refinement {
        if better(p, &best) {
            best = p.clone();
        }
    }
    Ok(ScanResult {
        axis,
        grid,
        points,
        refinement,
        bracket,
        best,
        interior_optimum,
    })
}

/// Minimises the output variance over the common input Rabi frequency
/// Ωp0 = Ωc0 = Ω, keeping the detunings of `base`.
pub fn optimize_over_rabi(base: &SystemParams, grid: ScanGrid) -> Result<ScanResult> {
    if base.delta() == 0.0 {
        return Err(Error::InvalidParams(
            "delta = 0 keeps the medium in its transparent dark state (V = 1 for every Rabi \
             frequency), so there is no optimum to find"
                .into(),
        ));
    }
    scan_1d("omega", grid, |omega| ScanPoint::evaluate(omega, base.with_omega(omega)))
}

/// Minimises the output variance over δ ≥ 0 split according to `setting`,
/// keeping the input fields of `base`.
pub fn optimize_over_detuning(base: &SystemParams, setting: DetuningSetting, grid: ScanGrid) -> Result<ScanResult> {
    base.require_input_field()?;
    scan_1d("delta", grid, |delta| {
        ScanPoint::evaluate(delta, base.with_detuning(delta, setting))
    })
}

/// Dense (Ω, δ) map. Cells are independent; failures stay in their cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMap {
    pub omega: Vec<f64>,
    pub delta: Vec<f64>,
    /// `cells[i][j]` is at `omega[i]`, `delta[j]`; the point's `x` is δ.
    pub cells: Vec<Vec<ScanPoint>>,
}

impl SweepMap {
    /// Best successful cell as `(i, j)`, ties going to smaller Ω then smaller δ.
    pub fn arg_min(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if let Some(v) = c.variance {
                    if best.is_none_or(|(_, _, b)| v < b) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    }
}

fn check_axis(name: &str, v: &[f64]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::InvalidParams(format!("{name} axis needs at least 2 values")));
    }
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams(format!(
            "{name} axis must be positive and strictly increasing"
        )));
    }
    Ok(())
}

pub fn sweep_map(base: &SystemParams, omegas: &[f64], deltas: &[f64], setting: DetuningSetting) -> Result<SweepMap> {
    check_axis("omega", omegas)?;
    check_axis("delta", deltas)?;
    let cells = omegas
        .iter()
        .map(|&omega| {
            deltas
                .iter()
                .map(|&delta| {
                    let p = base.with_omega(omega).and_then(|p| p.with_detuning(delta, setting));
                    ScanPoint::evaluate(delta, p)
                })
                .collect()
        })
        .collect();
    Ok(SweepMap {
        omega: omegas.to_vec(),
        delta: deltas.to_vec(),
        cells,
    })
}

/// Logarithmic axis helper for sweeps.
pub fn log_axis(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    ScanGrid {
        min,
        max,
        points,
        tolerance: 0.0,
    }
    .nodes()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioResult {
    pub ratio: f64,
    pub scan: ScanResult,
}

/// For each Ωp0/Ωc0 ratio, the detuning scan at fixed coupling Rabi frequency
/// with the symmetric split.
pub fn ratio_scan(base: &SystemParams, omega_c: f64, ratios: &[f64], grid: ScanGrid) -> Result<Vec<RatioResult>> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidParams("ratios must be positive".into()));
    }
    ratios
        .iter()
        .map(|&ratio| {
            let p = base.with_fields(C64::from(ratio * omega_c), C64::from(omega_c))?;
            Ok(RatioResult {
                ratio,
                scan: optimize_over_detuning(&p, DetuningSetting::Symmetric, grid)?,
            })
        })
        .collect()
}

/// Ratio with the lowest optimised variance (smaller ratio on ties).
pub fn best_ratio(results: &[RatioResult]) -> Option<f64> {
    results
        .iter()
        .filter(|r| r.scan.min_variance().is_finite())
        .fold(None::<&RatioResult>, |acc, r| match acc {
            Some(a) if (a.scan.min_variance(), a.ratio) <= (r.scan.min_variance(), r.ratio) => Some(a),
            _ => Some(r),
        })
        .map(|r| r.ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingComparison {
    pub setting: DetuningSetting,
    pub scan: ScanResult,
}

/// Rabi-frequency optimisation for each named detuning split at the δ of `base`.
pub fn detuning_setting_compare(base: &SystemParams, grid: ScanGrid) -> Result<Vec<SettingComparison>> {
    DetuningSetting::ALL
        .iter()
        .map(|&setting| {
            let p = base.with_detuning(base.delta(), setting)?;
            Ok(SettingComparison {
                setting,
                scan: optimize_over_rabi(&p, grid)?,
            })
        })
        .collect()
}

/// Largest pairwise spread of the optimised variances, in dB.
pub fn setting_spread_db(rows: &[SettingComparison]) -> f64 {
    let db: Vec<f64> = rows.iter().map(|r| crate::model::to_db(r.scan.min_variance())).collect();
    let max = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = db.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Diagnostic: |V(δ) − V(−δ)| with the detuning split of `params` mirrored.
/// Not expected to vanish in general.
pub fn detuning_sign_asymmetry(params: &SystemParams) -> Result<f64> {
    let v = squeeze(params)?.result.variance;
    let mirrored = params.with_explicit_detunings(-params.delta_p(), -params.delta_c())?;
    let w = squeeze(&mirrored)?.result.variance;
    Ok((v - w).abs())
}
