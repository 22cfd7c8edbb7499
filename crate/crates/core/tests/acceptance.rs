//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use deltaqi::energy::{beta_coefficient, default_spectral_start, density_profile, eta_components, region1_density_spectral, DensityProfile};
use deltaqi::oracle::{
    continuum_extrapolate, fit_inverse_length, fit_power_law, finite_box_density, integrated_energy, jump_consistency,
    shooting_extrapolated, sorted_frequencies, FiniteBoxRun, NMaxRule,
};
use deltaqi::qi::{qi_bound, violation_report_for_profile, violation_report_with, SamplingFunction};
use deltaqi::{BoxSpec, PotentialSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_time(elapsed: Duration, limit_s: f64, o: Outcome) -> Outcome {
    let t = elapsed.as_secs_f64();
    Outcome { pass: o.pass && t < limit_s, detail: format!("{} [{t:.2}s < {limit_s}s]", o.detail) }
}

fn pot(c: f64) -> PotentialSpec {
    PotentialSpec::from_coupling(c, 1.0).expect("valid potential")
}

fn dirichlet_limit() -> Result<Outcome, String> {
    let start = Instant::now();
    let sum = eta_components(&pot(1e6)).map_err(|e| e.to_string())?.sum();
    let target = -PI / 24.0;
    let rel = ((sum - target) / target).abs();
    Ok(within_time(start.elapsed(), 5.0, check(rel < 1e-3, format!("eta1+eta2 = {sum:.10} vs {target:.10}, rel {rel:.2e} < 1e-3"))))
}

fn violation() -> Result<Outcome, String> {
    let start = Instant::now();
    let plates = DensityProfile::dirichlet(1.0).map_err(|e| e.to_string())?;
    let r10 = violation_report_for_profile(&plates, 10.0).map_err(|e| e.to_string())?;
    let r100 = violation_report_for_profile(&plates, 100.0).map_err(|e| e.to_string())?;
    let bp = r10.bound_paper.unwrap_or(f64::NAN);
    let lhs_ok = ((r10.lhs + 4.163e-3) / 4.163e-3).abs() < 1e-3;
    let bound_ok = ((bp + 1.326e-4) / 1.326e-4).abs() < 1e-3;
    let verdicts = r10.violated_vs_paper == Some(true) && r10.violated_vs_quadrature;
    let growth = r100.ratio / r10.ratio;
    let growth_ok = (growth / 10.0 - 1.0).abs() < 0.05;
    Ok(within_time(
        start.elapsed(),
        1.0,
        check(
            lhs_ok && bound_ok && verdicts && growth_ok,
            format!(
                "lhs {:.5e}, bound_paper {bp:.5e}, bound_quadrature {:.5e}, violated paper={:?} quadrature={}, ratio(100)/ratio(10) = {growth:.4}",
                r10.lhs, r10.bound_quadrature, r10.violated_vs_paper, r10.violated_vs_quadrature
            ),
        ),
    ))
}

const LENGTHS: [f64; 3] = [50.0, 100.0, 200.0];

fn oracle_equivalence() -> Result<Outcome, String> {
    let start = Instant::now();
    let p = pot(1.0);
    let ex = continuum_extrapolate(&p, &LENGTHS, 0.0, NMaxRule::default()).map_err(|e| e.to_string())?;
    let target = eta_components(&p).map_err(|e| e.to_string())?.sum();
    let rel = ((ex.limit - target) / target).abs();
    Ok(within_time(
        start.elapsed(),
        60.0,
        check(rel < 0.01, format!("finite-box values {:?}, 1/L limit {:.6} vs {target:.6}, rel {rel:.2e} < 1e-2", ex.values, ex.limit)),
    ))
}

fn region_two_decay() -> Result<Outcome, String> {
    let start = Instant::now();
    let p = pot(1.0);
    let values = LENGTHS
        .iter()
        .map(|&len| {
            let bx = BoxSpec::new(len, &p)?;
            let run = FiniteBoxRun::with_default_truncation(&p, &bx)?;
            finite_box_density(&run, 0.75)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let beta = beta_coefficient(&p).map_err(|e| e.to_string())?;
    let (exponent, power_coeff) = fit_power_law(&LENGTHS, &values);
    let coeff = fit_inverse_length(&LENGTHS, &values);
    let exp_ok = (exponent + 1.0).abs() < 0.1;
    let coeff_ok = ((coeff - beta) / beta).abs() < 0.1;
    Ok(within_time(
        start.elapsed(),
        60.0,
        check(
            exp_ok && coeff_ok,
            format!(
                "T(0.75a) = {values:?}, exponent {exponent:.4}, beta/L coefficient {coeff:.5} vs beta {beta:.5} (power-law prefactor {power_coeff:.5})"
            ),
        ),
    ))
}

fn jump_identity() -> Result<Outcome, String> {
    let p = pot(1.0);
    let bx = BoxSpec::new(100.0, &p).map_err(|e| e.to_string())?;
    let low = FiniteBoxRun::new(&p, &bx, 50).map_err(|e| e.to_string())?;
    let jr = jump_consistency(&low).map_err(|e| e.to_string())?;
    let per_mode_ok = jr
        .per_mode
        .iter()
        .all(|e| (e.delta_t_direct - e.delta_t_closed).abs() <= 1e-12 * e.delta_t_closed.abs() + 1e-16);
    let full = FiniteBoxRun::with_default_truncation(&p, &bx).map_err(|e| e.to_string())?;
    let jf = jump_consistency(&full).map_err(|e| e.to_string())?;
    let gap = (jf.total_jump - jf.density_difference).abs();
    Ok(check(
        per_mode_ok && gap < 1e-13,
        format!(
            "{} modes, max relative route mismatch {:.2e}; total jump {:.12} vs region difference {:.12}, gap {gap:.2e} < 1e-13",
            jr.per_mode.len(),
            jr.max_relative_mismatch,
            jf.total_jump,
            jf.density_difference
        ),
    ))
}

fn mode_validity() -> Result<Outcome, String> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (c, len, n) in [(0.5, 100.0, 300), (1.0, 100.0, 300), (5.0, 100.0, 300), (50.0, 20.0, 200)] {
        let p = pot(c);
        let bx = BoxSpec::new(len, &p).map_err(|e| e.to_string())?;
        let run = FiniteBoxRun::new(&p, &bx, n).map_err(|e| e.to_string())?;
        let r = run.validate_all().map_err(|e| e.to_string())?;
        let m = r.norm_residual.max(r.continuity_residual).max(r.jump_residual_left).max(r.jump_residual_right);
        worst = worst.max(m);
        count += run.modes.len();
    }
    Ok(check(worst < 1e-10, format!("{count} modes, worst norm/continuity/jump residual {worst:.2e} < 1e-10")))
}

fn spectral_cross_check() -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [0.5, 1.0, 5.0] {
        let p = pot(c);
        let s = region1_density_spectral(&p, default_spectral_start(&p)).map_err(|e| e.to_string())?.value;
        let e = eta_components(&p).map_err(|e| e.to_string())?.sum();
        let rel = ((s - e) / e).abs();
        pass &= rel < 0.01;
        parts.push(format!("coupling {c}: {s:.6} vs {e:.6} ({rel:.1e})"));
    }
    Ok(check(pass, parts.join(", ")))
}

fn bound_quadrature() -> Result<Outcome, String> {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for tau in [0.1, 1.0, 10.0] {
        let b = qi_bound(&SamplingFunction::lorentzian(tau).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let target = -1.0 / (48.0 * PI * tau * tau);
        worst = worst.max(((b.bound_quadrature - target) / target).abs());
    }
    let mut worst_g: f64 = 0.0;
    for sigma in [0.1, 1.0, 10.0] {
        let b = qi_bound(&SamplingFunction::gaussian(sigma).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let target = -1.0 / (24.0 * PI * sigma * sigma);
        worst_g = worst_g.max(((b.bound_quadrature - target) / target).abs());
    }
    let plates = DensityProfile::dirichlet(1.0).map_err(|e| e.to_string())?;
    let rep = violation_report_with(&plates, &SamplingFunction::lorentzian(1.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let factor = rep.paper_to_quadrature.unwrap_or(f64::NAN);
    pass &= worst < 1e-8 && worst_g < 1e-8 && (factor - 2.0).abs() < 1e-8;
    Ok(check(
        pass,
        format!("lorentzian rel err {worst:.1e}, gaussian rel err {worst_g:.1e}, reported paper/quadrature factor {factor:.10}"),
    ))
}

fn shooting() -> Result<Outcome, String> {
    let start = Instant::now();
    let p = pot(1.0);
    let bx = BoxSpec::new(20.0, &p).map_err(|e| e.to_string())?;
    let ext = shooting_extrapolated(&p, &bx, [1.0 / 200.0, 1.0 / 400.0, 1.0 / 800.0], 10).map_err(|e| e.to_string())?;
    let run = FiniteBoxRun::new(&p, &bx, 10).map_err(|e| e.to_string())?;
    let exact = sorted_frequencies(&run.modes);
    let worst = ext.iter().zip(&exact).map(|(s, e)| ((s - e) / e).abs()).fold(0.0, f64::max);
    Ok(within_time(start.elapsed(), 120.0, check(worst < 1e-6, format!("10 lowest modes, worst relative error {worst:.2e} < 1e-6"))))
}

fn positivity() -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [0.5, 1.0, 5.0, 50.0] {
        let prof = density_profile(&pot(c)).map_err(|e| e.to_string())?;
        pass &= prof.total_energy() > 0.0;
        parts.push(format!("{:.5}", prof.total_energy()));
    }
    let p = pot(1.0);
    let bx = BoxSpec::new(100.0, &p).map_err(|e| e.to_string())?;
    let run = FiniteBoxRun::with_default_truncation(&p, &bx).map_err(|e| e.to_string())?;
    let e = integrated_energy(&run).map_err(|e| e.to_string())?;
    pass &= e >= 0.0;
    Ok(check(pass, format!("beta - eta*a = [{}], finite-box energy (L=100a) {e:.5}", parts.join(", "))))
}

type Criterion = fn() -> Result<Outcome, String>;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("dirichlet limit", dirichlet_limit),
        ("violation reproduction", violation),
        ("oracle equivalence", oracle_equivalence),
        ("region II decay", region_two_decay),
        ("jump consistency", jump_identity),
        ("mode validity", mode_validity),
        ("spectral cross-check", spectral_cross_check),
        ("bound quadrature", bound_quadrature),
        ("independent eigensolver", shooting),
        ("positivity", positivity),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = f().unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e}") });
        if !outcome.pass {
            failures += 1;
        }
        println!("criterion {:>2} {:<24} {}  {}", i + 1, name, if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failures, failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
