//! Adaptive quadrature, period-averaged oscillatory tails and bracketed root
//! finding.
//!
//! Every routine here is a pure function of its inputs. Panels are reduced in
//! left-to-right order so repeated runs are bit-identical.

use serde::Serialize;

use crate::error::{Error, Result};

/// Convergence controls shared by the quadrature and root-finding routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Panel budget for quadrature, iteration budget for root finding.
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_iter: 200 }
    }
}

impl Tolerances {
    pub fn new(rel_tol: f64, abs_tol: f64, max_iter: usize) -> Result<Self> {
        let tol = Self { rel_tol, abs_tol, max_iter };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::param("rel_tol", self.rel_tol, "must be positive"));
        }
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::param("abs_tol", self.abs_tol, "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", 0.0, "must be at least 1"));
        }
        Ok(())
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Integration domain.
///
/// Half-lines are mapped onto `(0, 1)`: `Exponential` uses
/// `x = start - scale * ln(1 - t)` and suits integrands decaying like
/// `exp(-x / scale)`; `Algebraic` uses `x = start + scale * t / (1 - t)` and
/// suits power-law tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite { lo: f64, hi: f64 },
    HalfLine { start: f64, scale: f64, tail: Tail },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Exponential,
    Algebraic,
}

impl Domain {
    pub fn finite(lo: f64, hi: f64) -> Self {
        Domain::Finite { lo, hi }
    }

    /// `[0, inf)` with the exponential map and unit scale.
    pub fn semi_infinite() -> Self {
        Domain::HalfLine { start: 0.0, scale: 1.0, tail: Tail::Exponential }
    }

    pub fn half_line(start: f64, scale: f64, tail: Tail) -> Self {
        Domain::HalfLine { start, scale, tail }
    }
}

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gk15<F>(g: &F, lo: f64, hi: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<f64>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = g(center)?;
    let mut result_k = f_center * WGK[7];
    let mut result_g = f_center * WG[3];
    let mut result_abs = result_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = g(center - dx)?;
        let f2 = g(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        result_k += WGK[j] * (f1 + f2);
        result_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            result_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * result_k;
    let mut result_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        result_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = result_k * half;
    result_abs *= half.abs();
    result_asc *= half.abs();
    let mut error = ((result_k - result_g) * half).abs();
    if result_asc != 0.0 && error != 0.0 {
        error = result_asc * (200.0 * error / result_asc).powf(1.5).min(1.0);
    }
    if result_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * result_abs);
    }
    Ok(Panel { lo, hi, value, error })
}

/// Globally adaptive Gauss-Kronrod quadrature: the panel with the largest
/// error estimate is bisected until the total error meets the tolerance or the
/// panel budget (`tol.max_iter` subdivisions) is spent.
pub fn integrate<F>(f: F, domain: Domain, tol: &Tolerances) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    tol.validate()?;
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: f64| -> Result<f64> {
        evals.set(evals.get() + 1);
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::IntegrandSingularity { x })
        }
    };
    let result = match domain {
        Domain::Finite { lo, hi } => {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::param("domain", if lo.is_finite() { hi } else { lo }, "finite bounds required"));
            }
            if lo == hi {
                return Ok(QuadratureResult { value: 0.0, error_estimate: 0.0, evaluations: 1 });
            }
            let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
            let r = adapt(&eval, a, b, tol)?;
            QuadratureResult { value: sign * r.value, ..r }
        }
        Domain::HalfLine { start, scale, tail } => {
            if !(scale > 0.0) || !scale.is_finite() {
                return Err(Error::InvalidScale { value: scale });
            }
            let mapped = |t: f64| -> Result<f64> {
                let one_minus = 1.0 - t;
                let (x, jac) = match tail {
                    Tail::Exponential => (start - scale * (-t).ln_1p(), scale / one_minus),
                    Tail::Algebraic => (start + scale * t / one_minus, scale / (one_minus * one_minus)),
                };
                if !x.is_finite() || !jac.is_finite() {
                    return Ok(0.0);
                }
                let y = eval(x)?;
                if y == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(y * jac)
                }
            };
            adapt(&mapped, 0.0, 1.0, tol)?
        }
    };
    Ok(QuadratureResult { evaluations: evals.get().max(1), ..result })
}

fn adapt<G>(g: &G, lo: f64, hi: f64, tol: &Tolerances) -> Result<QuadratureResult>
where
    G: Fn(f64) -> Result<f64>,
{
    let mut panels = vec![gk15(g, lo, hi)?];
    let mut subdivisions = 0usize;
    loop {
        let (value, error) = reduce(&panels);
        let target = tol.abs_tol.max(tol.rel_tol * value.abs());
        if error <= target {
            return Ok(QuadratureResult { value, error_estimate: error, evaluations: 0 });
        }
        if subdivisions >= tol.max_iter {
            return Err(Error::QuadratureFailure { partial: value, error_estimate: error });
        }
        let worst = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc })
            .0;
        let p = panels[worst];
        let mid = 0.5 * (p.lo + p.hi);
        if !(mid > p.lo && mid < p.hi) {
            return Err(Error::QuadratureFailure { partial: value, error_estimate: error });
        }
        panels[worst] = gk15(g, p.lo, mid)?;
        panels.push(gk15(g, mid, p.hi)?);
        subdivisions += 1;
    }
}

fn reduce(panels: &[Panel]) -> (f64, f64) {
    let mut sorted: Vec<&Panel> = panels.iter().collect();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    sorted.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

/// Integrates `f` over `[lo, hi]` in consecutive chunks no longer than
/// `chunk`, summing left to right. Keeps the per-call panel budget small for
/// long oscillatory ranges.
pub fn integrate_chunked<F>(f: F, lo: f64, hi: f64, chunk: f64, tol: &Tolerances) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !(chunk > 0.0) {
        return Err(Error::InvalidScale { value: chunk });
    }
    let pieces = (((hi - lo) / chunk).ceil() as usize).max(1);
    let width = (hi - lo) / pieces as f64;
    let mut total = QuadratureResult { value: 0.0, error_estimate: 0.0, evaluations: 0 };
    for i in 0..pieces {
        let a = lo + width * i as f64;
        let b = if i + 1 == pieces { hi } else { lo + width * (i + 1) as f64 };
        let r = integrate(&f, Domain::finite(a, b), tol)?;
        total.value += r.value;
        total.error_estimate += r.error_estimate;
        total.evaluations += r.evaluations;
    }
    Ok(total)
}

/// Cumulative integrals `C_k = ∫_start^{start + k·period} f` for
/// `k = 1..=cycles`, together with the summed quadrature error and evaluation
/// count.
pub fn oscillatory_partials<F>(
    f: F,
    start: f64,
    period: f64,
    cycles: usize,
    tol: &Tolerances,
) -> Result<(Vec<f64>, f64, usize)>
where
    F: Fn(f64) -> f64,
{
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidScale { value: period });
    }
    let mut partials = Vec::with_capacity(cycles);
    let mut cumulative = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    for k in 0..cycles {
        let lo = start + period * k as f64;
        let hi = start + period * (k + 1) as f64;
        let r = integrate(&f, Domain::finite(lo, hi), tol)?;
        cumulative += r.value;
        error += r.error_estimate;
        evaluations += r.evaluations;
        partials.push(cumulative);
    }
    Ok((partials, error, evaluations))
}

/// Mean-value evaluation of `∫_start^∞ f` for an integrand that converges
/// only in the mean, with asymptotic period `period`.
///
/// The cumulative integrals at whole periods beyond `start` are computed, the
/// first half is discarded and the rest averaged. The error estimate is the
/// difference between the means of the third and fourth quarters of the
/// partial sequence plus the accumulated quadrature error.
pub fn average_oscillatory<F>(
    f: F,
    start: f64,
    period: f64,
    cycles: usize,
    tol: &Tolerances,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if cycles < 4 {
        return Err(Error::InsufficientAveragingWindow { cycles });
    }
    let (partials, quad_error, evaluations) = oscillatory_partials(f, start, period, cycles, tol)?;
    let (value, spread) = tail_mean(&partials);
    Ok(QuadratureResult { value, error_estimate: spread + quad_error, evaluations })
}

/// Mean over the second half of `partials`, and the gap between the means of
/// its two halves.
pub fn tail_mean(partials: &[f64]) -> (f64, f64) {
    let n = partials.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let tail = &partials[n / 2..];
    let mean = |s: &[f64]| if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 };
    let value = mean(tail);
    let q = tail.len() / 2;
    let spread = if q == 0 { 0.0 } else { (mean(&tail[..q]) - mean(&tail[q..])).abs() };
    (value, spread)
}

/// Bracketed root finding: secant steps safeguarded by bisection.
///
/// Terminates when the bracket width drops below
/// `max(abs_tol, rel_tol * |x|)` or an exact zero is hit.
pub fn solve_root<F>(f: F, bracket: (f64, f64), tol: &Tolerances) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    tol.validate()?;
    let (mut lo, mut hi) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo * f_hi > 0.0 {
        return Err(Error::InvalidBracket { lo, hi, f_lo, f_hi });
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    let mut last_width = hi - lo;
    let mut force_bisect = false;
    for _ in 0..tol.max_iter {
        let width = hi - lo;
        let scale = lo.abs().min(hi.abs());
        if width <= tol.abs_tol.max(tol.rel_tol * scale) {
            return Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi });
        }
        let mid = lo + 0.5 * width;
        let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        let x = if force_bisect || !(secant > lo && secant < hi) { mid } else { secant };
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::IntegrandSingularity { x });
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
        let new_width = hi - lo;
        // one-sided secant convergence stalls; fall back to a bisection step
        force_bisect = new_width > 0.5 * last_width;
        last_width = new_width;
        if x == mid {
            force_bisect = false;
        }
    }
    let width = hi - lo;
    if width <= tol.abs_tol.max(tol.rel_tol * lo.abs().min(hi.abs())) * 4.0 {
        return Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi });
    }
    Err(Error::RootNotConverged { iterations: tol.max_iter })
}

/// Tight settings for root polishing: relative width at machine precision.
pub fn root_tolerances() -> Tolerances {
    Tolerances { rel_tol: 4.0 * f64::EPSILON, abs_tol: 1e-300, max_iter: 400 }
}
