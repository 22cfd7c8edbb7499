//! Spatial quantum inequality: sampling functions, the lower bound
//! `−(1/24π) ∫ ρ′²/ρ dx`, and the weighted average of the density profile.

use std::f64::consts::PI;

use serde::Serialize;

use crate::energy::{density_profile, DensityProfile};
use crate::error::{Error, Result};
use crate::modes::PotentialSpec;
use crate::numerics::{integrate, root_tolerances, solve_root, Domain, Tail, Tolerances};

fn qi_tolerances() -> Tolerances {
    Tolerances { rel_tol: 1e-12, abs_tol: 1e-300, max_iter: 400 }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplingFunction {
    /// `ρ(x) = τ / (π(x² + τ²))`.
    Lorentzian { tau: f64 },
    /// Centred normal density of width `σ`.
    Gaussian { sigma: f64 },
    /// Piecewise-linear density through `(x, ρ)` nodes, renormalized to unit
    /// area; zero outside the grid.
    Tabulated { xs: Vec<f64>, rho: Vec<f64>, drho: Vec<f64> },
}

impl SamplingFunction {
    pub fn lorentzian(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidScale { value: tau });
        }
        Ok(SamplingFunction::Lorentzian { tau })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidScale { value: sigma });
        }
        Ok(SamplingFunction::Gaussian { sigma })
    }

    /// Grid must be strictly increasing with non-negative values and positive
    /// trapezoidal area. Derivatives are centred differences at interior
    /// nodes and one-sided at the ends.
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::param("grid", points.len() as f64, "need at least 2 nodes"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::param("grid", w[1].0, "x must be strictly increasing"));
            }
        }
        for &(x, r) in points {
            if !x.is_finite() || !r.is_finite() {
                return Err(Error::param("grid", x, "non-finite node"));
            }
            if r < 0.0 {
                return Err(Error::NegativeDensity { x, value: r });
            }
        }
        let area: f64 = points.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        if !(area > 0.0) {
            return Err(Error::param("grid", area, "density has zero area"));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let rho: Vec<f64> = points.iter().map(|p| p.1 / area).collect();
        let n = xs.len();
        let drho = (0..n)
            .map(|i| {
                let (l, r) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (rho[r] - rho[l]) / (xs[r] - xs[l])
            })
            .collect();
        Ok(SamplingFunction::Tabulated { xs, rho, drho })
    }

    /// Width parameter: `τ`, `σ`, or the half-width of the tabulated grid.
    pub fn scale(&self) -> f64 {
        match self {
            SamplingFunction::Lorentzian { tau } => *tau,
            SamplingFunction::Gaussian { sigma } => *sigma,
            SamplingFunction::Tabulated { xs, .. } => 0.5 * (xs[xs.len() - 1] - xs[0]),
        }
    }

    /// `ρ_s(x) = ρ(x/s)/s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidScale { value: s });
        }
        Ok(match self {
            SamplingFunction::Lorentzian { tau } => SamplingFunction::Lorentzian { tau: tau * s },
            SamplingFunction::Gaussian { sigma } => SamplingFunction::Gaussian { sigma: sigma * s },
            SamplingFunction::Tabulated { xs, rho, drho } => SamplingFunction::Tabulated {
                xs: xs.iter().map(|x| x * s).collect(),
                rho: rho.iter().map(|r| r / s).collect(),
                drho: drho.iter().map(|d| d / (s * s)).collect(),
            },
        })
    }

    fn locate(xs: &[f64], x: f64) -> Option<(usize, f64)> {
        let n = xs.len();
        if x < xs[0] || x > xs[n - 1] {
            return None;
        }
        let i = xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        Some((i, (x - xs[i]) / (xs[i + 1] - xs[i])))
    }

    pub fn rho(&self, x: f64) -> f64 {
        match self {
            SamplingFunction::Lorentzian { tau } => tau / (PI * (x * x + tau * tau)),
            SamplingFunction::Gaussian { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            SamplingFunction::Tabulated { xs, rho, .. } => match Self::locate(xs, x) {
                Some((i, t)) => rho[i] + t * (rho[i + 1] - rho[i]),
                None => 0.0,
            },
        }
    }

    pub fn drho(&self, x: f64) -> f64 {
        match self {
            SamplingFunction::Lorentzian { tau } => {
                let d = x * x + tau * tau;
                -2.0 * x * tau / (PI * d * d)
            }
            SamplingFunction::Gaussian { sigma } => -x / (sigma * sigma) * self.rho(x),
            SamplingFunction::Tabulated { xs, drho, .. } => match Self::locate(xs, x) {
                Some((i, t)) => drho[i] + t * (drho[i + 1] - drho[i]),
                None => 0.0,
            },
        }
    }

    /// `ρ′²/ρ`, in closed form for the analytic kinds so that tails do not
    /// underflow into `0/0`.
    fn fisher_density(&self, x: f64) -> f64 {
        match self {
            SamplingFunction::Lorentzian { tau } => {
                let d = x * x + tau * tau;
                4.0 * x * x * tau / (PI * d * d * d)
            }
            SamplingFunction::Gaussian { sigma } => x * x / sigma.powi(4) * self.rho(x),
            SamplingFunction::Tabulated { .. } => {
                let r = self.rho(x);
                let d = self.drho(x);
                if d == 0.0 {
                    0.0
                } else {
                    d * d / r
                }
            }
        }
    }

    /// `∫ ρ dx` over `[lo, hi]`.
    pub fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        match self {
            SamplingFunction::Lorentzian { tau } => Ok(((hi / tau).atan() - (lo / tau).atan()) / PI),
            SamplingFunction::Gaussian { .. } => Ok(integrate(|x| self.rho(x), Domain::finite(lo, hi), &qi_tolerances())?.value),
            SamplingFunction::Tabulated { xs, .. } => {
                let (lo, hi) = (lo.max(xs[0]), hi.min(xs[xs.len() - 1]));
                if hi <= lo {
                    return Ok(0.0);
                }
                let mut cuts = vec![lo];
                cuts.extend(xs.iter().copied().filter(|&x| x > lo && x < hi));
                cuts.push(hi);
                Ok(cuts.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (self.rho(w[0]) + self.rho(w[1]))).sum())
            }
        }
    }

    /// `∫ ρ dx` over the whole line.
    pub fn total_mass(&self) -> Result<f64> {
        match self {
            SamplingFunction::Lorentzian { .. } => Ok(1.0),
            SamplingFunction::Gaussian { sigma } => {
                let half = integrate(|x| self.rho(x), Domain::half_line(0.0, *sigma, Tail::Algebraic), &qi_tolerances())?;
                Ok(2.0 * half.value)
            }
            SamplingFunction::Tabulated { xs, .. } => self.mass(xs[0], xs[xs.len() - 1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QiBound {
    /// `−(1/24π) ∫ ρ′²/ρ dx` by quadrature.
    pub bound_quadrature: f64,
    /// The closed form `−1/(24πτ²)` quoted for the Lorentzian.
    pub bound_paper: Option<f64>,
}

/// Evaluates the bound functional. A density that reaches zero with a
/// nonzero slope makes the integral diverge and is reported as
/// `DivergentBound`.
pub fn qi_bound(rho: &SamplingFunction) -> Result<QiBound> {
    let tol = qi_tolerances();
    let integral = match rho {
        SamplingFunction::Lorentzian { tau } => {
            2.0 * integrate(|x| rho.fisher_density(x), Domain::half_line(0.0, *tau, Tail::Algebraic), &tol)?.value
        }
        SamplingFunction::Gaussian { sigma } => {
            2.0 * integrate(|x| rho.fisher_density(x), Domain::half_line(0.0, *sigma, Tail::Algebraic), &tol)?.value
        }
        SamplingFunction::Tabulated { xs, rho: r, drho } => {
            for i in 0..xs.len() {
                if r[i] == 0.0 && drho[i] != 0.0 {
                    return Err(Error::DivergentBound { x: xs[i] });
                }
            }
            let mut total = 0.0;
            for i in 0..xs.len() - 1 {
                if r[i] == 0.0 && r[i + 1] == 0.0 {
                    continue;
                }
                let piece = integrate(|x| rho.fisher_density(x), Domain::finite(xs[i], xs[i + 1]), &tol)
                    .map_err(|e| match e {
                        Error::IntegrandSingularity { x } => Error::DivergentBound { x },
                        other => other,
                    })?;
                total += piece.value;
            }
            total
        }
    };
    let bound_paper = match rho {
        SamplingFunction::Lorentzian { tau } => Some(-1.0 / (24.0 * PI * tau * tau)),
        _ => None,
    };
    Ok(QiBound { bound_quadrature: -integral / (24.0 * PI), bound_paper })
}

/// `∫ T₀₀(x) ρ(x) dx` for the piecewise-constant continuum profile, i.e.
/// `(η₁ + η₂) ∫_{−a/2}^{a/2} ρ dx`. For the Lorentzian the closed form
/// `−(2η/π) atan(a/2τ)` is used and checked against quadrature.
pub fn weighted_density(profile: &DensityProfile, rho: &SamplingFunction) -> Result<f64> {
    let half = 0.5 * profile.a;
    match rho {
        SamplingFunction::Lorentzian { tau } => {
            let closed = -(2.0 * profile.eta / PI) * (half / tau).atan();
            let quad = profile.region1_value * integrate(|x| rho.rho(x), Domain::finite(-half, half), &qi_tolerances())?.value;
            if (closed - quad).abs() > 1e-10 * closed.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::InvariantViolation(format!("weighted density closed form {closed} vs quadrature {quad}")));
            }
            Ok(closed)
        }
        _ => Ok(profile.region1_value * rho.mass(-half, half)?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QiReport {
    pub tau_or_scale: f64,
    pub lhs: f64,
    pub bound_paper: Option<f64>,
    pub bound_quadrature: f64,
    pub violated_vs_paper: Option<bool>,
    pub violated_vs_quadrature: bool,
    /// `lhs / bound_quadrature`.
    pub ratio: f64,
    /// `bound_paper / bound_quadrature`; 2 for the Lorentzian.
    pub paper_to_quadrature: Option<f64>,
}

/// QI report for an arbitrary profile and sampling function. A divergent
/// bound is reported as `−∞`, which is never violated.
pub fn violation_report_with(profile: &DensityProfile, rho: &SamplingFunction) -> Result<QiReport> {
    let lhs = weighted_density(profile, rho)?;
    let bound = match qi_bound(rho) {
        Ok(b) => b,
        Err(Error::DivergentBound { .. }) => QiBound { bound_quadrature: f64::NEG_INFINITY, bound_paper: None },
        Err(e) => return Err(e),
    };
    Ok(QiReport {
        tau_or_scale: rho.scale(),
        lhs,
        bound_paper: bound.bound_paper,
        bound_quadrature: bound.bound_quadrature,
        violated_vs_paper: bound.bound_paper.map(|b| lhs < b),
        violated_vs_quadrature: lhs < bound.bound_quadrature,
        ratio: lhs / bound.bound_quadrature,
        paper_to_quadrature: bound.bound_paper.map(|b| b / bound.bound_quadrature),
    })
}

pub fn violation_report_for_profile(profile: &DensityProfile, tau: f64) -> Result<QiReport> {
    violation_report_with(profile, &SamplingFunction::lorentzian(tau)?)
}

/// Lorentzian QI report at width `tau` for the double-delta profile.
pub fn violation_report(pot: &PotentialSpec, tau: f64) -> Result<QiReport> {
    violation_report_for_profile(&density_profile(pot)?, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Paper,
    Quadrature,
}

/// Smallest Lorentzian width above which the inequality is violated at every
/// tested width, scanning `[10⁻⁴a, 10⁴a]` geometrically and polishing the
/// last sign change with `solve_root`. `None` if the scan never ends in
/// violation.
pub fn critical_tau(profile: &DensityProfile, kind: BoundKind) -> Result<Option<f64>> {
    if !(profile.eta > 0.0) {
        return Ok(None);
    }
    let gap = |tau: f64| -> Result<f64> {
        let rho = SamplingFunction::lorentzian(tau)?;
        let lhs = weighted_density(profile, &rho)?;
        let b = match kind {
            BoundKind::Paper => -1.0 / (24.0 * PI * tau * tau),
            BoundKind::Quadrature => qi_bound(&rho)?.bound_quadrature,
        };
        Ok(lhs - b)
    };
    let a = profile.a;
    let steps = 160;
    let taus: Vec<f64> = (0..=steps).map(|i| a * 10f64.powf(-4.0 + 8.0 * i as f64 / steps as f64)).collect();
    let gaps = taus.iter().map(|&t| gap(t)).collect::<Result<Vec<_>>>()?;
    if !(gaps[steps] < 0.0) {
        return Ok(None);
    }
    let mut i = steps;
    while i > 0 && gaps[i - 1] < 0.0 {
        i -= 1;
    }
    if i == 0 {
        return Ok(Some(taus[0]));
    }
    let root = solve_root(|t| gap(t).unwrap_or(f64::NAN), (taus[i - 1], taus[i]), &root_tolerances())?;
    Ok(Some(root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn plates() -> DensityProfile {
        DensityProfile::dirichlet(1.0).unwrap()
    }

    #[test]
    fn lorentzian_peak() {
        let r = SamplingFunction::lorentzian(1.0).unwrap();
        assert_relative_eq!(r.rho(0.0), 1.0 / PI);
    }

    #[test]
    fn gaussian_peak_and_mass() {
        let r = SamplingFunction::gaussian(0.7).unwrap();
        assert_relative_eq!(r.rho(0.0), 1.0 / (0.7 * (2.0 * PI).sqrt()));
        assert!((r.total_mass().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn invalid_scales() {
        assert_eq!(SamplingFunction::lorentzian(0.0).unwrap_err(), Error::InvalidScale { value: 0.0 });
        assert!(SamplingFunction::gaussian(-1.0).is_err());
        assert!(matches!(SamplingFunction::tabulated(&[(0.0, 1.0), (1.0, -0.1)]), Err(Error::NegativeDensity { .. })));
        assert!(SamplingFunction::tabulated(&[(0.0, 1.0), (0.0, 1.0)]).is_err());
    }

    #[test]
    fn tabulated_is_renormalized() {
        let pts: Vec<(f64, f64)> = (0..=40).map(|i| {
            let x = -4.0 + 0.2 * i as f64;
            (x, 3.0 * (-x * x).exp())
        }).collect();
        let r = SamplingFunction::tabulated(&pts).unwrap();
        assert!((r.total_mass().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.rho(10.0), 0.0);
    }

    #[test]
    fn lorentzian_bound() {
        for tau in [0.3, 1.0, 7.0] {
            let b = qi_bound(&SamplingFunction::lorentzian(tau).unwrap()).unwrap();
            assert_relative_eq!(b.bound_quadrature, -1.0 / (48.0 * PI * tau * tau), max_relative = 1e-8);
            assert_relative_eq!(b.bound_paper.unwrap(), -1.0 / (24.0 * PI * tau * tau), max_relative = 1e-15);
        }
    }

    #[test]
    fn gaussian_bound() {
        for sigma in [0.5, 1.0, 4.0] {
            let b = qi_bound(&SamplingFunction::gaussian(sigma).unwrap()).unwrap();
            assert_relative_eq!(b.bound_quadrature, -1.0 / (24.0 * PI * sigma * sigma), max_relative = 1e-8);
            assert!(b.bound_paper.is_none());
        }
    }

    #[test]
    fn triangular_bound_diverges() {
        let pts: Vec<(f64, f64)> = (0..=20).map(|i| {
            let x = -1.0 + 0.1 * i as f64;
            (x, 1.0 - x.abs())
        }).collect();
        let r = SamplingFunction::tabulated(&pts).unwrap();
        assert!(matches!(qi_bound(&r), Err(Error::DivergentBound { .. })));
        let rep = violation_report_with(&plates(), &r).unwrap();
        assert_eq!(rep.bound_quadrature, f64::NEG_INFINITY);
        assert!(!rep.violated_vs_quadrature);
    }

    #[test]
    fn tabulated_gaussian_bound_close_to_closed_form() {
        let pts: Vec<(f64, f64)> = (0..=2000).map(|i| {
            let x = -10.0 + 0.01 * i as f64;
            (x, (-0.5 * x * x).exp())
        }).collect();
        let r = SamplingFunction::tabulated(&pts).unwrap();
        let b = qi_bound(&r).unwrap().bound_quadrature;
        assert_relative_eq!(b, -1.0 / (24.0 * PI), max_relative = 1e-3);
    }

    #[test]
    fn weighted_density_reference() {
        let lhs = weighted_density(&plates(), &SamplingFunction::lorentzian(10.0).unwrap()).unwrap();
        assert_relative_eq!(lhs, -(0.05f64).atan() / 12.0, max_relative = 1e-13);
        assert_relative_eq!(lhs, -4.1632e-3, max_relative = 1e-4);
    }

    #[test]
    fn weighted_density_limits() {
        let p = plates();
        let wide = weighted_density(&p, &SamplingFunction::lorentzian(1e6).unwrap()).unwrap();
        assert!(wide.abs() < 1e-5 * p.eta);
        let narrow = weighted_density(&p, &SamplingFunction::lorentzian(1e-6).unwrap()).unwrap();
        assert!((narrow + p.eta).abs() < 1e-5 * p.eta);
    }

    #[test]
    fn headline_violation() {
        let rep = violation_report_for_profile(&plates(), 10.0).unwrap();
        assert_relative_eq!(rep.bound_paper.unwrap(), -1.0 / (2400.0 * PI), max_relative = 1e-12);
        assert_eq!(rep.violated_vs_paper, Some(true));
        assert!(rep.violated_vs_quadrature);
        assert_relative_eq!(rep.paper_to_quadrature.unwrap(), 2.0, max_relative = 1e-8);
    }

    #[test]
    fn narrow_sampling_is_not_violated() {
        let rep = violation_report_for_profile(&plates(), 1e-3).unwrap();
        assert_eq!(rep.violated_vs_paper, Some(false));
        assert!(!rep.violated_vs_quadrature);
    }

    #[test]
    fn critical_widths() {
        let p = plates();
        let paper = critical_tau(&p, BoundKind::Paper).unwrap().unwrap();
        assert_relative_eq!(paper, 0.430_083_058_069_763, max_relative = 1e-10);
        let quad = critical_tau(&p, BoundKind::Quadrature).unwrap().unwrap();
        assert_relative_eq!(quad, 0.272_477_904_537_906, max_relative = 1e-8);
    }

    #[test]
    fn free_profile_never_violates() {
        let p = density_profile(&PotentialSpec::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(critical_tau(&p, BoundKind::Paper).unwrap(), None);
    }
}
