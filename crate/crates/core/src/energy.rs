//! Renormalized kinetic energy density in the continuum limit `L → ∞`.
//!
//! Between the barriers the density is the constant `η₁ + η₂ < 0`. Outside
//! it vanishes like `β/L`, and the total energy `β − ηa` is positive.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modes::{norm_deficit, scattering_reduced, Parity, PotentialSpec};
use crate::numerics::{average_oscillatory, integrate, integrate_chunked, Domain, QuadratureResult, Tail, Tolerances};

/// Quadrature settings for the rotated-contour integrals.
pub fn eta_tolerances() -> Tolerances {
    Tolerances { rel_tol: 1e-13, abs_tol: 1e-300, max_iter: 400 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaComponents {
    pub eta1: f64,
    pub eta2: f64,
}

impl EtaComponents {
    pub fn sum(&self) -> f64 {
        self.eta1 + self.eta2
    }
}

/// `η₁` and `η₂` from the imaginary-axis integrals
///
/// ```text
/// η₁ = −(Λ/πa²) ∫ y e^{−y} / (y e^{y} + Λ sinh y) dy
/// η₂ = +(Λ/πa²) ∫ y e^{−y} / (y e^{y} + Λ cosh y) dy
/// ```
///
/// rewritten with `e^{−2y}` so that nothing overflows.
pub fn eta_components(pot: &PotentialSpec) -> Result<EtaComponents> {
    eta_components_with(pot, &eta_tolerances())
}

pub fn eta_components_with(pot: &PotentialSpec, tol: &Tolerances) -> Result<EtaComponents> {
    tol.validate()?;
    let big = pot.coupling();
    if big == 0.0 {
        return Ok(EtaComponents { eta1: 0.0, eta2: 0.0 });
    }
    let pre = big / (PI * pot.a() * pot.a());
    let domain = Domain::half_line(0.0, 0.5, Tail::Exponential);

    // y e^{−2y} / (y + Λ(1 − e^{−2y})/2) with the y cancelled
    let odd = |y: f64| {
        let g = if y == 0.0 { 1.0 } else { -(-2.0 * y).exp_m1() / (2.0 * y) };
        (-2.0 * y).exp() / (1.0 + big * g)
    };
    let even = |y: f64| {
        let e = (-2.0 * y).exp();
        y * e / (y + 0.5 * big * (1.0 + e))
    };
    let i1 = integrate(odd, domain, tol)?.value;
    let i2 = integrate(even, domain, tol)?.value;
    let out = EtaComponents { eta1: -pre * i1, eta2: pre * i2 };
    if !(out.eta1 <= 0.0 && out.eta2 >= 0.0 && out.sum() <= 0.0) {
        return Err(Error::InvariantViolation(format!(
            "eta signs: eta1={} eta2={} at coupling {}",
            out.eta1, out.eta2, big
        )));
    }
    Ok(out)
}

/// `(A₁² − 1) + (A₂² − 1)` at reduced frequency `Ω`.
fn amplitude_excess(big_omega: f64, coupling: f64) -> f64 {
    scattering_reduced(Parity::Odd, big_omega, coupling).amplitude_sq_minus_one
        + scattering_reduced(Parity::Even, big_omega, coupling).amplitude_sq_minus_one
}

/// Upper end (in `Ω`) of the averaging window for the spectral route.
fn spectral_window(coupling: f64) -> f64 {
    (400.0 * coupling).clamp(2000.0, 40_000.0)
}

/// Region-I density from the real-frequency integral
/// `(1/4π) ∫ (A₁² + A₂² − 2) ω dω`.
///
/// The integrand does not decay; it converges only in the mean with period
/// `2π/a`. The range up to `omega_start` (rounded up to a whole period) is
/// integrated directly; beyond it the cumulative integral is averaged over
/// whole periods.
pub fn region1_density_spectral(pot: &PotentialSpec, omega_start: f64) -> Result<QuadratureResult> {
    let a = pot.a();
    if !(omega_start >= 20.0 / a) || !omega_start.is_finite() {
        return Err(Error::param("omega_start", omega_start, "must be at least 20/a"));
    }
    let big = pot.coupling();
    if big == 0.0 {
        return Ok(QuadratureResult { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }
    let tol = Tolerances { rel_tol: 1e-10, abs_tol: 1e-12, max_iter: 200 };
    // in Ω = ωa/2 the integral is (1/πa²) ∫ (A₁² + A₂² − 2) Ω dΩ
    let f = |w: f64| amplitude_excess(w, big) * w;
    let start = (0.5 * omega_start * a / PI).ceil() * PI;
    let head = integrate_chunked(f, 0.0, start, PI, &tol)?;
    let end = spectral_window(big).max(2.0 * start);
    let cycles = ((end - start) / PI).round() as usize;
    let tail = average_oscillatory(f, start, PI, cycles, &tol)?;
    let scale = 1.0 / (PI * a * a);
    Ok(QuadratureResult {
        value: scale * (head.value + tail.value),
        error_estimate: scale * (head.error_estimate + tail.error_estimate),
        evaluations: head.evaluations + tail.evaluations,
    })
}

/// Default starting frequency for the spectral tail: `Ω = 10π`.
pub fn default_spectral_start(pot: &PotentialSpec) -> f64 {
    20.0 * PI / pot.a()
}

/// `β`, the coefficient of the `1/L` region-II density.
///
/// Summing the finite-box shifts `ω − ω₀ = −2δ/L` and `N² − 1 ≈ B/L` gives
/// `β = (1/4π) ∫ Σⱼ (ω Bⱼ − 2δⱼ) dω`. Because `Bⱼ = −2 dδⱼ/dω` the
/// integrand is the total derivative `−2 d(ω Σδ)/dω`, so
/// `β = lim (1/4π)·(−2W Σδ(W))` as `W → ∞`. The limit is taken at a
/// frequency where `δ₁` vanishes exactly, `Ω = mπ` with `Ω ≳ 10⁶ max(1, Λ)`.
pub fn beta_coefficient(pot: &PotentialSpec) -> Result<f64> {
    let big = pot.coupling();
    if big == 0.0 {
        return Ok(0.0);
    }
    let big_omega = (1e6 * big.max(1.0) / PI).ceil() * PI;
    Ok(beta_boundary_term(pot, big_omega))
}

/// `−(1/4π)·2W·Σδ(W)` at `W = 2Ω/a`.
fn beta_boundary_term(pot: &PotentialSpec, big_omega: f64) -> f64 {
    let big = pot.coupling();
    let sum = scattering_reduced(Parity::Odd, big_omega, big).phase + scattering_reduced(Parity::Even, big_omega, big).phase;
    let w = 2.0 * big_omega / pot.a();
    -2.0 * w * sum / (4.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaQuadrature {
    /// `(1/4π) ∫₀^W Σ (ω Bⱼ − 2δⱼ) dω` by quadrature.
    pub head: f64,
    /// The same integral from the boundary term `−(1/4π)·2WΣδ(W)`.
    pub boundary: f64,
    /// `head` plus the exact remainder `β − boundary`.
    pub value: f64,
    pub error_estimate: f64,
}

/// Direct quadrature of the `β` integrand up to `Ω = mπ` (rounded up from
/// `big_omega_cut`), used to check the boundary-limit evaluation.
pub fn beta_quadrature(pot: &PotentialSpec, big_omega_cut: f64) -> Result<BetaQuadrature> {
    let big = pot.coupling();
    let a = pot.a();
    if big == 0.0 {
        return Ok(BetaQuadrature { head: 0.0, boundary: 0.0, value: 0.0, error_estimate: 0.0 });
    }
    if !(big_omega_cut > 0.0) || !big_omega_cut.is_finite() {
        return Err(Error::param("omega_cut", big_omega_cut, "must be finite and positive"));
    }
    let cut = (big_omega_cut / PI).ceil().max(1.0) * PI;
    let integrand = |w: f64| {
        let mut total = 0.0;
        for p in Parity::BOTH {
            let b = norm_deficit(p, w, pot).unwrap_or(f64::NAN);
            let d = scattering_reduced(p, 0.5 * w * a, big).phase;
            total += w * b - 2.0 * d;
        }
        total
    };
    let tol = Tolerances { rel_tol: 1e-12, abs_tol: 1e-13, max_iter: 200 };
    let w_cut = 2.0 * cut / a;
    let head = integrate_chunked(integrand, 0.0, w_cut, 2.0 * PI / a, &tol)?;
    let boundary = beta_boundary_term(pot, cut);
    let beta = beta_coefficient(pot)?;
    let head_value = head.value / (4.0 * PI);
    Ok(BetaQuadrature {
        head: head_value,
        boundary,
        value: head_value + (beta - boundary),
        error_estimate: head.error_estimate / (4.0 * PI),
    })
}

/// The integral `(1/4π) ∫ Σⱼ ω (Bⱼ + 2 dδⱼ/dω) dω` with a central-difference
/// derivative. Its integrand vanishes identically, so the result is zero up
/// to differencing error; kept as a numerical check of `Bⱼ = −2 dδⱼ/dω`.
pub fn beta_printed_integral(pot: &PotentialSpec, big_omega_cut: f64) -> Result<QuadratureResult> {
    let big = pot.coupling();
    let a = pot.a();
    if big == 0.0 {
        return Ok(QuadratureResult { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }
    let integrand = |w: f64| {
        let mut total = 0.0;
        for p in Parity::BOTH {
            let b = norm_deficit(p, w, pot).unwrap_or(f64::NAN);
            total += w * (b + 2.0 * phase_derivative(p, w, pot));
        }
        total
    };
    let tol = Tolerances { rel_tol: 1e-6, abs_tol: 1e-8, max_iter: 200 };
    let w_cut = 2.0 * big_omega_cut / a;
    let r = integrate_chunked(integrand, 0.0, w_cut, 2.0 * PI / a, &tol)?;
    Ok(QuadratureResult { value: r.value / (4.0 * PI), error_estimate: r.error_estimate / (4.0 * PI), evaluations: r.evaluations })
}

/// `dδⱼ/dω` by central difference with step `10⁻⁶·max(1, ω)`.
pub fn phase_derivative(parity: Parity, omega: f64, pot: &PotentialSpec) -> f64 {
    let h = 1e-6 * omega.max(1.0);
    let lo = (omega - h).max(0.5 * omega);
    let hi = omega + h;
    let d = |w: f64| scattering_reduced(parity, 0.5 * w * pot.a(), pot.coupling()).phase;
    (d(hi) - d(lo)) / (hi - lo)
}

/// Continuum density profile: constant `η₁ + η₂` between the barriers,
/// zero outside, with the `1/L` coefficient `β` retained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityProfile {
    pub eta1: f64,
    pub eta2: f64,
    pub region1_value: f64,
    pub beta: f64,
    /// `η = −(η₁ + η₂) ≥ 0`.
    pub eta: f64,
    pub a: f64,
    pub pot: Option<PotentialSpec>,
}

impl DensityProfile {
    /// Profile from a given `η` and separation, without a potential. Used
    /// for the Dirichlet-plate surrogate `η = π/24a²`.
    pub fn from_eta(eta: f64, a: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::param("eta", eta, "must be finite and non-negative"));
        }
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::param("a", a, "must be finite and positive"));
        }
        Ok(Self { eta1: f64::NAN, eta2: f64::NAN, region1_value: -eta, beta: f64::INFINITY, eta, a, pot: None })
    }

    /// Perfectly reflecting plates at separation `a`: `η = π/(24a²)`.
    pub fn dirichlet(a: f64) -> Result<Self> {
        let mut p = Self::from_eta(PI / (24.0 * a * a), a)?;
        p.eta1 = -PI / (12.0 * a * a);
        p.eta2 = PI / (24.0 * a * a);
        Ok(p)
    }

    /// `T₀₀(x)`: `η₁ + η₂` for `|x| < a/2`, zero for `|x| > a/2`. At the
    /// barrier itself the density is undefined.
    pub fn t00(&self, x: f64) -> Result<f64> {
        let edge = 0.5 * self.a;
        if x.abs() == edge {
            return Err(Error::SingularPoint { x });
        }
        Ok(if x.abs() < edge { self.region1_value } else { 0.0 })
    }

    /// `β − ηa`.
    pub fn total_energy(&self) -> f64 {
        self.beta - self.eta * self.a
    }
}

pub fn density_profile(pot: &PotentialSpec) -> Result<DensityProfile> {
    density_profile_with(pot, &eta_tolerances())
}

/// As `density_profile`, with explicit quadrature tolerances for `η₁, η₂`.
pub fn density_profile_with(pot: &PotentialSpec, tol: &Tolerances) -> Result<DensityProfile> {
    let eta = eta_components_with(pot, tol)?;
    let beta = beta_coefficient(pot)?;
    let region1_value = eta.eta1 + eta.eta2;
    let profile = DensityProfile {
        eta1: eta.eta1,
        eta2: eta.eta2,
        region1_value,
        beta,
        eta: -region1_value,
        a: pot.a(),
        pot: Some(*pot),
    };
    if pot.coupling() > 0.0 && !(profile.total_energy() > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "total energy beta - eta*a = {} is not positive",
            profile.total_energy()
        )));
    }
    Ok(profile)
}

/// Logarithmic grid of `n` couplings between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || !hi.is_finite() {
        return Err(Error::param("grid", lo, "needs 0 < lo < hi"));
    }
    if n < 2 {
        return Err(Error::param("points", n as f64, "need at least 2 grid points"));
    }
    let (l0, l1) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                10f64.powf(l0 + (l1 - l0) * i as f64 / (n - 1) as f64)
            }
        })
        .collect())
}

/// Default coupling sweep: 25 points from `Λ = 0.01` to `10³`.
pub fn default_coupling_grid() -> Vec<f64> {
    log_grid(0.01, 1e3, 25).expect("static grid is valid")
}

/// Density profiles across couplings at fixed `a`, in input order.
pub fn sweep_couplings(couplings: &[f64], a: f64) -> Result<Vec<DensityProfile>> {
    couplings
        .par_iter()
        .map(|&c| density_profile(&PotentialSpec::from_coupling(c, a)?))
        .collect()
}
