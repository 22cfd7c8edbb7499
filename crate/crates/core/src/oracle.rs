//! Brute-force checks at finite box size: explicit mode-renormalized sums,
//! extrapolation in `1/L`, the derivative-jump route to the region-I/II
//! density difference, and an independent shooting eigensolver.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modes::{spectrum, validate_mode, BoxSpec, FreeMode, ModeResiduals, ModeSolution, Parity, PotentialSpec, Region};
use crate::numerics::{solve_root, Tolerances};

/// Spectrum of one box, with the matching free modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteBoxRun {
    pub pot: PotentialSpec,
    pub bx: BoxSpec,
    pub n_max: usize,
    /// Ordered odd `n = 1..=n_max`, then even.
    pub modes: Vec<ModeSolution>,
    pub free_modes: Vec<FreeMode>,
}

/// Default truncation `⌈40 L/a⌉` per parity: a fixed frequency cutoff near
/// `80π/a` for every box size.
pub fn default_n_max(pot: &PotentialSpec, bx: &BoxSpec) -> usize {
    (40.0 * bx.length() / pot.a()).ceil() as usize
}

impl FiniteBoxRun {
    /// Solves the spectrum; each mode passes the continuity, jump and wall
    /// checks. The normalization integral is left to `validate_all`.
    pub fn new(pot: &PotentialSpec, bx: &BoxSpec, n_max: usize) -> Result<Self> {
        let modes = spectrum(pot, bx, n_max)?;
        let free_modes = modes.iter().map(|m| FreeMode::new(m.parity, m.index, bx)).collect();
        Ok(Self { pot: *pot, bx: *bx, n_max, modes, free_modes })
    }

    pub fn with_default_truncation(pot: &PotentialSpec, bx: &BoxSpec) -> Result<Self> {
        Self::new(pot, bx, default_n_max(pot, bx))
    }

    /// Full per-mode validation including the normalization quadrature.
    /// Returns the worst residual of each kind.
    pub fn validate_all(&self) -> Result<ModeResiduals> {
        let all = self
            .modes
            .par_iter()
            .map(|m| validate_mode(m, &self.pot, &self.bx))
            .collect::<Result<Vec<_>>>()?;
        let worst = all.iter().fold(
            ModeResiduals {
                norm_residual: 0.0,
                continuity_residual: 0.0,
                jump_residual_left: 0.0,
                jump_residual_right: 0.0,
                boundary_residual: 0.0,
            },
            |acc, r| ModeResiduals {
                norm_residual: acc.norm_residual.max(r.norm_residual),
                continuity_residual: acc.continuity_residual.max(r.continuity_residual),
                jump_residual_left: acc.jump_residual_left.max(r.jump_residual_left),
                jump_residual_right: acc.jump_residual_right.max(r.jump_residual_right),
                boundary_residual: acc.boundary_residual.max(r.boundary_residual),
            },
        );
        Ok(worst)
    }

    fn pairs(&self) -> impl Iterator<Item = (&ModeSolution, &ModeSolution)> {
        let (odd, even) = self.modes.split_at(self.n_max);
        odd.iter().zip(even)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AveragedSum {
    /// Mean of the partial sums over the final window.
    pub value: f64,
    /// Half the range of the partial sums over that window.
    pub tail_bound: f64,
    /// Plain sum of all terms.
    pub raw: f64,
}

/// Averages partial sums of `terms` over the last `⌈n/10⌉` entries.
pub fn averaged_partial_sum(terms: &[f64]) -> AveragedSum {
    let n = terms.len();
    if n == 0 {
        return AveragedSum { value: 0.0, tail_bound: 0.0, raw: 0.0 };
    }
    let window = n.div_ceil(10);
    let mut partial = 0.0;
    let (mut acc, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for (i, t) in terms.iter().enumerate() {
        partial += t;
        if i >= n - window {
            acc += partial;
            lo = lo.min(partial);
            hi = hi.max(partial);
        }
    }
    AveragedSum { value: acc / window as f64, tail_bound: 0.5 * (hi - lo), raw: partial }
}

fn region_at(run: &FiniteBoxRun, x: f64) -> Result<Region> {
    let half = run.bx.half();
    if x.abs() > half {
        return Err(Error::OutsideBox { x, half });
    }
    let edge = 0.5 * run.pot.a();
    if (x.abs() - edge).abs() <= 1e-9 * run.pot.a() {
        return Err(Error::SingularPoint { x });
    }
    Ok(Region::of(x, &run.pot))
}

/// Mode-renormalized density `Σ (T_λ,jn − T_0,jn)` at `x`, with the
/// oscillating partial sums averaged over the last tenth of the modes.
pub fn finite_box_density_detail(run: &FiniteBoxRun, x: f64) -> Result<AveragedSum> {
    let region = region_at(run, x)?;
    let terms: Vec<f64> = run
        .pairs()
        .map(|(o, e)| o.renormalized_density(&run.bx, region) + e.renormalized_density(&run.bx, region))
        .collect();
    Ok(averaged_partial_sum(&terms))
}

pub fn finite_box_density(run: &FiniteBoxRun, x: f64) -> Result<f64> {
    Ok(finite_box_density_detail(run, x)?.value)
}

/// `a·T_I + (L − a)·T_II` for the finite box.
pub fn integrated_energy(run: &FiniteBoxRun) -> Result<f64> {
    let a = run.pot.a();
    let t1 = finite_box_density(run, 0.0)?;
    let t2 = finite_box_density(run, 0.5 * (a + run.bx.half()))?;
    Ok(a * t1 + (run.bx.length() - a) * t2)
}

/// Truncation rule for a family of boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NMaxRule {
    /// `⌈k L/a⌉` modes per parity.
    PerLength(f64),
    Fixed(usize),
}

impl Default for NMaxRule {
    fn default() -> Self {
        NMaxRule::PerLength(40.0)
    }
}

impl NMaxRule {
    pub fn n_max(&self, pot: &PotentialSpec, bx: &BoxSpec) -> usize {
        match self {
            NMaxRule::PerLength(k) => (k * bx.length() / pot.a()).ceil() as usize,
            NMaxRule::Fixed(n) => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub slope: f64,
    pub lengths: Vec<f64>,
    pub values: Vec<f64>,
    /// RMS residual of the linear fit in `1/L`.
    pub residual: f64,
}

/// Least-squares fit `y = c₀ + c₁ t`.
fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    let c1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c0 = my - c1 * mt;
    let rms = (t.iter().zip(y).map(|(a, b)| (b - c0 - c1 * a).powi(2)).sum::<f64>() / n).sqrt();
    (c0, c1, rms)
}

/// Finite-box density at `x` for each `L`, fitted to `limit + slope/L`.
pub fn continuum_extrapolate(pot: &PotentialSpec, lengths: &[f64], x: f64, rule: NMaxRule) -> Result<Extrapolation> {
    let mut distinct = lengths.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::param("Ls", distinct.len() as f64, "need at least 3 distinct box lengths"));
    }
    let values = lengths
        .iter()
        .map(|&len| {
            let bx = BoxSpec::new(len, pot)?;
            let run = FiniteBoxRun::new(pot, &bx, rule.n_max(pot, &bx))?;
            finite_box_density(&run, x)
        })
        .collect::<Result<Vec<_>>>()?;
    extrapolate_inverse_length(lengths, &values)
}

/// Fits precomputed values to `limit + slope/L`.
pub fn extrapolate_inverse_length(lengths: &[f64], values: &[f64]) -> Result<Extrapolation> {
    let inv: Vec<f64> = lengths.iter().map(|l| 1.0 / l).collect();
    let (limit, slope, residual) = linear_fit(&inv, values);
    let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values.iter().cloned().fold(f64::INFINITY, f64::min);
    if residual > 0.1 * spread {
        return Err(Error::NonInverseL { residual, spread });
    }
    Ok(Extrapolation { limit, slope, lengths: lengths.to_vec(), values: values.to_vec(), residual })
}

/// Fit `|y| = C L^p`; returns `(p, C)`.
pub fn fit_power_law(lengths: &[f64], values: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = lengths.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    let (c, p, _) = linear_fit(&lx, &ly);
    (p, c.exp())
}

/// Least-squares coefficient `c` of `y = c/L`.
pub fn fit_inverse_length(lengths: &[f64], values: &[f64]) -> f64 {
    let num: f64 = lengths.iter().zip(values).map(|(l, v)| v / l).sum();
    let den: f64 = lengths.iter().map(|l| 1.0 / (l * l)).sum();
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEntry {
    pub parity: Parity,
    pub n: usize,
    /// `(λ/2) u(−a/2) [u′(−a/2; II) + u′(−a/2; I)]` from the mode values.
    pub delta_t_direct: f64,
    /// `ω N² (A² − 1) / 2L`.
    pub delta_t_closed: f64,
    /// `(λN²A²/2Lω)(2ω s c + λ s²)` with sign and trig factors per parity.
    pub delta_t_expanded: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpReport {
    pub per_mode: Vec<JumpEntry>,
    /// Averaged sum of the direct per-mode jumps.
    pub total_jump: f64,
    /// Averaged region-I sum minus averaged region-II sum.
    pub density_difference: f64,
    /// Largest `|direct − closed| / |closed|` over modes with `closed ≠ 0`.
    pub max_relative_mismatch: f64,
    pub tail_bound: f64,
}

/// Region-I minus region-II density from the derivative jump at `x = −a/2`,
/// compared against the separately renormalized region sums.
pub fn jump_consistency(run: &FiniteBoxRun) -> Result<JumpReport> {
    let pot = &run.pot;
    let bx = &run.bx;
    let lam = pot.lambda();
    let edge = -0.5 * pot.a();
    let len = bx.length();
    let per_mode = run
        .modes
        .iter()
        .map(|m| {
            let inner = m.eval_side(pot, bx, edge, Region::Inner)?;
            let outer = m.eval_side(pot, bx, edge, Region::Outer)?;
            let direct = 0.5 * lam * inner.u * (outer.du + inner.du);
            let n2 = m.norm_n * m.norm_n;
            let closed = m.omega * n2 * m.amplitude_sq_minus_one / (2.0 * len);
            let (s, c) = (0.5 * m.omega * pot.a()).sin_cos();
            let pre = lam * n2 * m.amplitude * m.amplitude / (2.0 * len * m.omega);
            let expanded = match m.parity {
                Parity::Odd => -pre * (2.0 * m.omega * s * c + lam * s * s),
                Parity::Even => pre * (2.0 * m.omega * s * c - lam * c * c),
            };
            Ok(JumpEntry { parity: m.parity, n: m.index, delta_t_direct: direct, delta_t_closed: closed, delta_t_expanded: expanded })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = run.n_max;
    let jumps: Vec<f64> = (0..n).map(|i| per_mode[i].delta_t_direct + per_mode[n + i].delta_t_direct).collect();
    let total = averaged_partial_sum(&jumps);
    let inner = finite_box_density_detail(run, 0.0)?;
    let outer = finite_box_density_detail(run, 0.5 * (pot.a() + bx.half()))?;
    let max_relative_mismatch = per_mode
        .iter()
        .filter(|e| e.delta_t_closed != 0.0)
        .map(|e| (e.delta_t_direct - e.delta_t_closed).abs() / e.delta_t_closed.abs())
        .fold(0.0, f64::max);
    Ok(JumpReport {
        per_mode,
        total_jump: total.value,
        density_difference: inner.value - outer.value,
        max_relative_mismatch,
        tail_bound: total.tail_bound,
    })
}

/// Maximum deviation of the pointwise mode-summed density across `xs`, all
/// of which must lie strictly inside the same region. Each term is
/// `½(ω²u² + u′²) − ½(ω₀²u₀² + u₀′²)` evaluated at the point.
pub fn density_flatness_check(run: &FiniteBoxRun, xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Ok(0.0);
    }
    let region = region_at(run, xs[0])?;
    for &x in xs {
        if region_at(run, x)? != region {
            return Err(Error::param("xs", x, "all points must lie in the same region"));
        }
    }
    let values = xs
        .iter()
        .map(|&x| {
            let terms = run
                .pairs()
                .map(|(o, e)| {
                    let mut t = 0.0;
                    for m in [o, e] {
                        let v = m.eval(&run.pot, &run.bx, x)?;
                        let f = m.free().eval(&run.bx, x);
                        let w0 = m.omega0;
                        t += 0.5 * (m.omega * m.omega * v.u * v.u + v.du * v.du) - 0.5 * (w0 * w0 * f.u * f.u + f.du * f.du);
                    }
                    Ok(t)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(averaged_partial_sum(&terms).value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().map(|v| (v - values[0]).abs()).fold(0.0, f64::max))
}

/// Delta pair replaced by square barriers of width `w` and height `λ/w`.
#[derive(Debug, Clone, Copy)]
struct Barriers {
    half_length: f64,
    edge: f64,
    width: f64,
    height: f64,
}

impl Barriers {
    /// Segments of the left half-box and the constant potential on each.
    fn segments(&self) -> [(f64, f64, f64); 3] {
        let (e, hw, h, lh) = (self.edge, 0.5 * self.width, self.height, self.half_length);
        [(-lh, -e - hw, 0.0), (-e - hw, -e + hw, h), (-e + hw, 0.0, 0.0)]
    }

    /// `(u, u′)` at the midpoint from `u(−L/2) = 0, u′(−L/2) = 1`, marching
    /// `u″ = (U − ω²) u` by RK4 with step at most `step` on each segment.
    fn shoot(&self, omega: f64, step: f64) -> (f64, f64) {
        let (mut u, mut v) = (0.0, 1.0);
        for (lo, hi, pot) in self.segments() {
            let k = pot - omega * omega;
            let n = (((hi - lo) / step).ceil() as usize).max(4);
            let h = (hi - lo) / n as f64;
            for _ in 0..n {
                let (k1u, k1v) = (v, k * u);
                let (k2u, k2v) = (v + 0.5 * h * k1v, k * (u + 0.5 * h * k1u));
                let (k3u, k3v) = (v + 0.5 * h * k2v, k * (u + 0.5 * h * k2u));
                let (k4u, k4v) = (v + h * k3v, k * (u + h * k3u));
                u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            }
        }
        (u, v)
    }
}

/// The `count` lowest roots of one parity. By symmetry an eigenfunction
/// shot from the left wall is even iff `u′(0) = 0` and odd iff `u(0) = 0`;
/// treating the parities separately keeps near-degenerate doublets apart.
fn parity_roots(b: &Barriers, length: f64, parity: Parity, count: usize, step: f64) -> Result<Vec<f64>> {
    let dw = PI / (8.0 * length);
    let tol = Tolerances { rel_tol: 1e-14, abs_tol: 1e-300, max_iter: 200 };
    let f = |w: f64| {
        let (u, du) = b.shoot(w, step);
        match parity {
            Parity::Even => du,
            Parity::Odd => u,
        }
    };
    let limit = parity.free_frequency(count + 2, length);
    let mut roots = Vec::with_capacity(count);
    let mut w_lo = 0.5 * dw;
    let mut f_lo = f(w_lo);
    while roots.len() < count {
        let w_hi = w_lo + dw;
        if w_hi > limit {
            return Err(Error::SpectrumGap(format!(
                "found {} of {} parity-{} roots below {}",
                roots.len(),
                count,
                parity.index(),
                limit
            )));
        }
        let f_hi = f(w_hi);
        if f_lo == 0.0 {
            roots.push(w_lo);
        } else if f_lo * f_hi < 0.0 {
            roots.push(solve_root(f, (w_lo, w_hi), &tol)?);
        }
        w_lo = w_hi;
        f_lo = f_hi;
    }
    // each root must sit in its own window [ω₀, ω₀ + 2π/L) from the free counting
    for (i, &w) in roots.iter().enumerate() {
        let w0 = parity.free_frequency(i + 1, length);
        if !(w >= w0 * (1.0 - 1e-9) && w < w0 + 2.0 * PI / length) {
            return Err(Error::SpectrumGap(format!("parity-{} root {} at {w} outside its window above {w0}", parity.index(), i + 1)));
        }
    }
    Ok(roots)
}

fn shooting_roots(b: &Barriers, length: f64, k_max: usize, step: f64) -> Result<Vec<f64>> {
    let per = k_max / 2 + 1;
    let even = parity_roots(b, length, Parity::Even, per, step)?;
    let odd = parity_roots(b, length, Parity::Odd, per, step)?;
    let mut all: Vec<(f64, Parity)> = even.iter().map(|&w| (w, Parity::Even)).chain(odd.iter().map(|&w| (w, Parity::Odd))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (k, &(w, p)) in all.iter().take(k_max).enumerate() {
        let expected = if k % 2 == 0 { Parity::Even } else { Parity::Odd };
        if p != expected {
            return Err(Error::SpectrumGap(format!("root {k} at {w} has parity {} (expected {})", p.index(), expected.index())));
        }
    }
    Ok(all.into_iter().take(k_max).map(|(w, _)| w).collect())
}

/// The `k_max` lowest eigenfrequencies with the deltas replaced by square
/// barriers of width `barrier_width`, found by shooting from the left wall.
/// The marching step starts at `L/2¹¹` and is halved until no eigenvalue
/// moves by more than `10⁻⁸` relative.
pub fn shooting_spectrum(pot: &PotentialSpec, bx: &BoxSpec, barrier_width: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(barrier_width > 0.0) || barrier_width > pot.a() / 100.0 {
        return Err(Error::param("barrier_width", barrier_width, "must be in (0, a/100]"));
    }
    if k_max == 0 {
        return Err(Error::param("k_max", 0.0, "must be at least 1"));
    }
    let b = Barriers { half_length: bx.half(), edge: 0.5 * pot.a(), width: barrier_width, height: pot.lambda() / barrier_width };
    let mut step = bx.length() / 2048.0;
    let mut prev = shooting_roots(&b, bx.length(), k_max, step)?;
    for _ in 0..10 {
        step *= 0.5;
        let next = shooting_roots(&b, bx.length(), k_max, step)?;
        let shift = prev.iter().zip(&next).map(|(p, q)| ((p - q) / q).abs()).fold(0.0, f64::max);
        prev = next;
        if shift < 1e-8 {
            return Ok(prev);
        }
    }
    Err(Error::RootNotConverged { iterations: 10 })
}

/// Shooting spectra at three barrier widths, extrapolated to `w → 0` by the
/// quadratic through the three points.
pub fn shooting_extrapolated(pot: &PotentialSpec, bx: &BoxSpec, widths: [f64; 3], k_max: usize) -> Result<Vec<f64>> {
    let spectra = widths
        .par_iter()
        .map(|&w| shooting_spectrum(pot, bx, w, k_max))
        .collect::<Result<Vec<_>>>()?;
    let [w0, w1, w2] = widths;
    // Lagrange weights at w = 0
    let l0 = w1 * w2 / ((w0 - w1) * (w0 - w2));
    let l1 = w0 * w2 / ((w1 - w0) * (w1 - w2));
    let l2 = w0 * w1 / ((w2 - w0) * (w2 - w1));
    Ok((0..k_max).map(|k| l0 * spectra[0][k] + l1 * spectra[1][k] + l2 * spectra[2][k]).collect())
}

/// Closed-form spectrum merged across parities in ascending frequency.
pub fn sorted_frequencies(modes: &[ModeSolution]) -> Vec<f64> {
    let mut w: Vec<f64> = modes.iter().map(|m| m.omega).collect();
    w.sort_by(f64::total_cmp);
    w
}
