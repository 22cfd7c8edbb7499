use deltaqi::energy::{beta_coefficient, eta_components_with, eta_tolerances, log_grid, DensityProfile};
use deltaqi::modes::validate_mode;
use deltaqi::numerics::Tolerances;
use deltaqi::oracle::{
    default_n_max, extrapolate_inverse_length, finite_box_density, fit_inverse_length, jump_consistency, Extrapolation,
    FiniteBoxRun, JumpReport,
};
use deltaqi::qi::{critical_tau, violation_report_for_profile, BoundKind, QiReport};
use deltaqi::{BoxSpec, PotentialSpec};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig, SweepAxis};

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<bool>> for Cell {
    fn from(v: Option<bool>) -> Self {
        v.map_or(Cell::Missing, Cell::Bool)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// A pass/fail invariant evaluated during the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold }
    }

    fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value > threshold }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: RunConfig,
    pub results: Value,
    /// Scalar summary lines, written as CSV comments.
    pub summary: Vec<(&'static str, Value)>,
    pub table: Table,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Conversion into units of `a` when `--normalize-a` is set.
#[derive(Debug, Clone, Copy)]
struct Units {
    length: f64,
    inv_length: f64,
    density: f64,
}

impl Units {
    fn of(cfg: &RunConfig) -> Self {
        if cfg.normalize_a {
            Self { length: 1.0 / cfg.a, inv_length: cfg.a, density: cfg.a * cfg.a }
        } else {
            Self { length: 1.0, inv_length: 1.0, density: 1.0 }
        }
    }
}

fn potential(cfg: &RunConfig) -> deltaqi::Result<PotentialSpec> {
    PotentialSpec::from_coupling(cfg.coupling, cfg.a)
}

fn tolerances(cfg: &RunConfig) -> Tolerances {
    cfg.tolerances.unwrap_or_else(eta_tolerances)
}

/// Continuum profile without the positivity gate, so a failure can be
/// reported as a check instead of an error.
fn profile(pot: &PotentialSpec, tol: &Tolerances) -> deltaqi::Result<DensityProfile> {
    let eta = eta_components_with(pot, tol)?;
    let region1_value = eta.sum();
    Ok(DensityProfile {
        eta1: eta.eta1,
        eta2: eta.eta2,
        region1_value,
        beta: beta_coefficient(pot)?,
        // `0 - x` rather than `-x` keeps the free case at +0
        eta: 0.0 - region1_value,
        a: pot.a(),
        pot: Some(*pot),
    })
}

fn positivity_check(p: &DensityProfile) -> Check {
    if p.pot.is_some_and(|pot| pot.is_free()) {
        Check::below("total_energy_zero_when_free", p.total_energy().abs(), 0.0)
    } else {
        Check::above("total_energy_positive", p.total_energy(), 0.0)
    }
}

#[derive(Serialize)]
struct ProfileOut {
    coupling: f64,
    lambda: f64,
    eta1: f64,
    eta2: f64,
    region1_value: f64,
    eta: f64,
    beta: f64,
    total_energy: f64,
}

impl ProfileOut {
    fn new(p: &DensityProfile, pot: &PotentialSpec, u: Units) -> Self {
        Self {
            coupling: pot.coupling(),
            lambda: pot.lambda() * u.inv_length,
            eta1: p.eta1 * u.density,
            eta2: p.eta2 * u.density,
            region1_value: p.region1_value * u.density,
            eta: p.eta * u.density,
            beta: p.beta * u.inv_length,
            total_energy: p.total_energy() * u.inv_length,
        }
    }

    const COLUMNS: [&'static str; 8] = ["coupling", "lambda", "eta1", "eta2", "region1_value", "eta", "beta", "total_energy"];

    fn row(&self) -> Vec<Cell> {
        [self.coupling, self.lambda, self.eta1, self.eta2, self.region1_value, self.eta, self.beta, self.total_energy]
            .into_iter()
            .map(Cell::from)
            .collect()
    }
}

#[derive(Serialize)]
struct QiOut {
    tau: f64,
    lhs: f64,
    bound_paper: Option<f64>,
    bound_quadrature: f64,
    violated_vs_paper: Option<bool>,
    violated_vs_quadrature: bool,
    ratio: f64,
    paper_to_quadrature: Option<f64>,
}

impl QiOut {
    fn new(r: &QiReport, u: Units) -> Self {
        Self {
            tau: r.tau_or_scale * u.length,
            lhs: r.lhs * u.density,
            bound_paper: r.bound_paper.map(|b| b * u.density),
            bound_quadrature: r.bound_quadrature * u.density,
            violated_vs_paper: r.violated_vs_paper,
            violated_vs_quadrature: r.violated_vs_quadrature,
            ratio: r.ratio,
            paper_to_quadrature: r.paper_to_quadrature,
        }
    }

    const COLUMNS: [&'static str; 8] = [
        "tau",
        "lhs",
        "bound_paper",
        "bound_quadrature",
        "violated_vs_paper",
        "violated_vs_quadrature",
        "ratio",
        "paper_to_quadrature",
    ];

    fn row(&self) -> Vec<Cell> {
        vec![
            self.tau.into(),
            self.lhs.into(),
            self.bound_paper.into(),
            self.bound_quadrature.into(),
            self.violated_vs_paper.into(),
            self.violated_vs_quadrature.into(),
            self.ratio.into(),
            self.paper_to_quadrature.into(),
        ]
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

pub fn run(cfg: &RunConfig) -> deltaqi::Result<Report> {
    match cfg.command {
        Command::Density => density(cfg),
        Command::Qi => qi(cfg),
        Command::Sweep => sweep(cfg),
        Command::Oracle => oracle(cfg),
        Command::Modes => modes(cfg),
    }
}

fn density(cfg: &RunConfig) -> deltaqi::Result<Report> {
    let u = Units::of(cfg);
    let pot = potential(cfg)?;
    let p = profile(&pot, &tolerances(cfg))?;
    let out = ProfileOut::new(&p, &pot, u);
    let checks = vec![positivity_check(&p), Check::below("region1_nonpositive", p.region1_value, 0.0)];
    Ok(Report {
        config: cfg.clone(),
        results: to_value(&out),
        summary: Vec::new(),
        table: Table { columns: ProfileOut::COLUMNS.to_vec(), rows: vec![out.row()] },
        checks,
    })
}

/// Per-width reports plus the lhs bracket check `region1_value ≤ lhs ≤ 0`.
fn qi_rows(p: &DensityProfile, taus: &[f64], u: Units) -> deltaqi::Result<(Vec<QiOut>, Vec<Check>)> {
    let reports = taus.par_iter().map(|&t| violation_report_for_profile(p, t)).collect::<deltaqi::Result<Vec<_>>>()?;
    let worst = reports
        .iter()
        .map(|r| (r.lhs.max(0.0)).max(p.region1_value - r.lhs))
        .fold(0.0, f64::max);
    let checks = vec![Check::below("lhs_within_region1_bracket", worst, 0.0)];
    Ok((reports.iter().map(|r| QiOut::new(r, u)).collect(), checks))
}

fn qi_summary(p: &DensityProfile, u: Units) -> deltaqi::Result<Vec<(&'static str, Value)>> {
    let paper = critical_tau(p, BoundKind::Paper)?.map(|t| t * u.length);
    let quad = critical_tau(p, BoundKind::Quadrature)?.map(|t| t * u.length);
    Ok(vec![("critical_tau_paper", json!(paper)), ("critical_tau_quadrature", json!(quad))])
}

fn qi(cfg: &RunConfig) -> deltaqi::Result<Report> {
    let u = Units::of(cfg);
    let pot = potential(cfg)?;
    let p = profile(&pot, &tolerances(cfg))?;
    let (rows, mut checks) = qi_rows(&p, &cfg.tau, u)?;
    checks.insert(0, positivity_check(&p));
    let summary = qi_summary(&p, u)?;
    let mut results = json!({
        "profile": ProfileOut::new(&p, &pot, u),
        "reports": rows,
    });
    for (k, v) in &summary {
        results[*k] = v.clone();
    }
    Ok(Report {
        config: cfg.clone(),
        results,
        summary,
        table: Table { columns: QiOut::COLUMNS.to_vec(), rows: rows.iter().map(QiOut::row).collect() },
        checks,
    })
}

fn sweep(cfg: &RunConfig) -> deltaqi::Result<Report> {
    let u = Units::of(cfg);
    let tol = tolerances(cfg);
    let grid = || log_grid(cfg.grid_min.unwrap_or(0.0), cfg.grid_max.unwrap_or(0.0), cfg.grid_points.unwrap_or(0));
    match cfg.sweep_over.unwrap_or(SweepAxis::Coupling) {
        SweepAxis::Coupling => {
            let couplings = grid()?;
            let profiles = couplings
                .par_iter()
                .map(|&c| {
                    let pot = PotentialSpec::from_coupling(c, cfg.a)?;
                    Ok((pot, profile(&pot, &tol)?))
                })
                .collect::<deltaqi::Result<Vec<_>>>()?;
            let rows: Vec<ProfileOut> = profiles.iter().map(|(pot, p)| ProfileOut::new(p, pot, u)).collect();
            let worst = profiles.iter().map(|(_, p)| p.total_energy()).fold(f64::INFINITY, f64::min);
            Ok(Report {
                config: cfg.clone(),
                results: json!({ "rows": rows }),
                summary: Vec::new(),
                table: Table { columns: ProfileOut::COLUMNS.to_vec(), rows: rows.iter().map(ProfileOut::row).collect() },
                checks: vec![Check::above("min_total_energy_positive", worst, 0.0)],
            })
        }
        SweepAxis::Tau => {
            let taus = if cfg.tau.is_empty() { grid()? } else { cfg.tau.clone() };
            let pot = potential(cfg)?;
            let p = profile(&pot, &tol)?;
            let (rows, mut checks) = qi_rows(&p, &taus, u)?;
            checks.insert(0, positivity_check(&p));
            let summary = qi_summary(&p, u)?;
            let mut results = json!({
                "profile": ProfileOut::new(&p, &pot, u),
                "rows": rows,
            });
            for (k, v) in &summary {
                results[*k] = v.clone();
            }
            Ok(Report {
                config: cfg.clone(),
                results,
                summary,
                table: Table { columns: QiOut::COLUMNS.to_vec(), rows: rows.iter().map(QiOut::row).collect() },
                checks,
            })
        }
    }
}

#[derive(Serialize)]
struct OracleRow {
    length: f64,
    n_max: usize,
    region1_value: f64,
    region2_value: f64,
    total_jump: f64,
    density_difference: f64,
    jump_gap: f64,
    max_relative_mismatch: f64,
    low_mode_mismatch: f64,
}

/// Modes per parity entering the per-mode jump check; the highest modes lose
/// a few digits to rounding in the phase.
const LOW_MODES: usize = 50;

fn low_mode_mismatch(jr: &JumpReport) -> f64 {
    jr.per_mode
        .iter()
        .filter(|e| e.n <= LOW_MODES && e.delta_t_closed != 0.0)
        .map(|e| ((e.delta_t_direct - e.delta_t_closed) / e.delta_t_closed).abs())
        .fold(0.0, f64::max)
}

/// Region-II sample point, midway between the barrier and `x = a`.
const REGION2_X: f64 = 0.75;

fn oracle(cfg: &RunConfig) -> deltaqi::Result<Report> {
    let u = Units::of(cfg);
    let pot = potential(cfg)?;
    let continuum = profile(&pot, &tolerances(cfg))?;
    let rows = cfg
        .lengths
        .iter()
        .map(|&len| {
            let bx = BoxSpec::new(len, &pot)?;
            let n_max = cfg.n_max.unwrap_or_else(|| default_n_max(&pot, &bx));
            let run = FiniteBoxRun::new(&pot, &bx, n_max)?;
            let jr = jump_consistency(&run)?;
            Ok(OracleRow {
                length: len * u.length,
                n_max,
                region1_value: finite_box_density(&run, 0.0)? * u.density,
                region2_value: finite_box_density(&run, REGION2_X * cfg.a)? * u.density,
                total_jump: jr.total_jump * u.density,
                density_difference: jr.density_difference * u.density,
                jump_gap: (jr.total_jump - jr.density_difference).abs() * u.density,
                max_relative_mismatch: jr.max_relative_mismatch,
                low_mode_mismatch: low_mode_mismatch(&jr),
            })
        })
        .collect::<deltaqi::Result<Vec<_>>>()?;

    let lengths: Vec<f64> = rows.iter().map(|r| r.length).collect();
    let region1: Vec<f64> = rows.iter().map(|r| r.region1_value).collect();
    let region2: Vec<f64> = rows.iter().map(|r| r.region2_value).collect();
    let mut distinct = lengths.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let extrapolation: Option<Extrapolation> =
        if distinct.len() >= 3 { Some(extrapolate_inverse_length(&lengths, &region1)?) } else { None };
    let region2_coefficient = fit_inverse_length(&lengths, &region2);

    let eta_sum = continuum.region1_value * u.density;
    let beta = continuum.beta * u.inv_length;
    let mut checks = Vec::new();
    if let Some(ex) = &extrapolation {
        let rel = if eta_sum == 0.0 { ex.limit.abs() } else { ((ex.limit - eta_sum) / eta_sum).abs() };
        checks.push(Check::below("extrapolated_region1_relative_error", rel, 0.01));
    }
    let worst_mismatch = rows.iter().map(|r| r.low_mode_mismatch).fold(0.0, f64::max);
    checks.push(Check::below("low_mode_jump_relative_mismatch", worst_mismatch, 1e-12));
    let worst_gap = rows
        .iter()
        .map(|r| r.jump_gap / r.density_difference.abs().max(1.0))
        .fold(0.0, f64::max);
    checks.push(Check::below("total_jump_gap", worst_gap, 1e-12));

    let summary = vec![
        ("continuum_region1_value", json!(eta_sum)),
        ("beta", json!(beta)),
        ("extrapolated_region1_value", json!(extrapolation.as_ref().map(|e| e.limit))),
        ("region2_inverse_length_coefficient", json!(region2_coefficient)),
    ];
    let mut results = json!({
        "rows": rows,
        "extrapolation": extrapolation,
        "region2_x": REGION2_X * cfg.a * u.length,
    });
    for (k, v) in &summary {
        results[*k] = v.clone();
    }
    let table = Table {
        columns: vec![
            "L",
            "n_max",
            "region1_value",
            "region2_value",
            "total_jump",
            "density_difference",
            "jump_gap",
            "max_relative_mismatch",
            "low_mode_mismatch",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.length.into(),
                    r.n_max.into(),
                    r.region1_value.into(),
                    r.region2_value.into(),
                    r.total_jump.into(),
                    r.density_difference.into(),
                    r.jump_gap.into(),
                    r.max_relative_mismatch.into(),
                    r.low_mode_mismatch.into(),
                ]
            })
            .collect(),
    };
    Ok(Report { config: cfg.clone(), results, summary, table, checks })
}

#[derive(Serialize)]
struct ModeRow {
    j: u8,
    n: usize,
    omega0: f64,
    omega: f64,
    amplitude: f64,
    phase: f64,
    norm_b: f64,
    norm_n: f64,
    norm_residual: f64,
    continuity_residual: f64,
    jump_residual_left: f64,
    jump_residual_right: f64,
    boundary_residual: f64,
}

/// Residual tolerance for every mode in the table.
const MODE_RESIDUAL_LIMIT: f64 = 1e-10;

fn modes(cfg: &RunConfig) -> deltaqi::Result<Report> {
    let u = Units::of(cfg);
    let pot = potential(cfg)?;
    let bx = BoxSpec::new(cfg.lengths[0], &pot)?;
    let run = FiniteBoxRun::new(&pot, &bx, cfg.n_max.unwrap_or(20))?;
    let rows = run
        .modes
        .par_iter()
        .map(|m| {
            let r = validate_mode(m, &pot, &bx)?;
            Ok(ModeRow {
                j: m.parity.index(),
                n: m.index,
                omega0: m.omega0 * u.inv_length,
                omega: m.omega * u.inv_length,
                amplitude: m.amplitude,
                phase: m.phase,
                norm_b: m.norm_b * u.length,
                norm_n: m.norm_n,
                norm_residual: r.norm_residual,
                continuity_residual: r.continuity_residual,
                jump_residual_left: r.jump_residual_left,
                jump_residual_right: r.jump_residual_right,
                boundary_residual: r.boundary_residual,
            })
        })
        .collect::<deltaqi::Result<Vec<_>>>()?;
    let worst = rows
        .iter()
        .map(|r| r.norm_residual.max(r.continuity_residual).max(r.jump_residual_left).max(r.jump_residual_right))
        .fold(0.0, f64::max);
    let table = Table {
        columns: vec![
            "j",
            "n",
            "omega0",
            "omega",
            "amplitude",
            "phase",
            "norm_b",
            "norm_n",
            "norm_residual",
            "continuity_residual",
            "jump_residual_left",
            "jump_residual_right",
            "boundary_residual",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Int(r.j as u64),
                    r.n.into(),
                    r.omega0.into(),
                    r.omega.into(),
                    r.amplitude.into(),
                    r.phase.into(),
                    r.norm_b.into(),
                    r.norm_n.into(),
                    r.norm_residual.into(),
                    r.continuity_residual.into(),
                    r.jump_residual_left.into(),
                    r.jump_residual_right.into(),
                    r.boundary_residual.into(),
                ]
            })
            .collect(),
    };
    Ok(Report {
        config: cfg.clone(),
        results: json!({ "modes": rows, "length": bx.length() * u.length }),
        summary: Vec::new(),
        table,
        checks: vec![Check::below("max_mode_residual", worst, MODE_RESIDUAL_LIMIT)],
    })
}
