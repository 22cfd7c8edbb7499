use std::f64::consts::PI;

use deltaqi::energy::eta_components;
use deltaqi::modes::{scattering_reduced, spectrum};
use deltaqi::qi::{qi_bound, weighted_density, SamplingFunction};
use deltaqi::energy::DensityProfile;
use deltaqi::{BoxSpec, Parity, PotentialSpec, Region};
use proptest::prelude::*;

fn resolves(p: Parity, coupling: f64, lo: f64, hi: f64, depth: u32) -> bool {
    let d = |w: f64| scattering_reduced(p, w, coupling).phase;
    if (d(hi) - d(lo)).abs() < 0.1 {
        return true;
    }
    if depth == 0 || hi - lo <= f64::EPSILON * hi {
        return false;
    }
    let mid = 0.5 * (lo + hi);
    resolves(p, coupling, lo, mid, depth - 1) && resolves(p, coupling, mid, hi, depth - 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn amplitude_positive(big_omega in 1e-6f64..1e4, coupling in 0.0f64..1e4) {
        for p in Parity::BOTH {
            let s = scattering_reduced(p, big_omega, coupling);
            prop_assert!(s.amplitude > 0.0 && s.amplitude.is_finite());
            prop_assert!(s.phase <= 0.0 && s.phase > -PI);
        }
    }

    #[test]
    fn phase_continuous(coupling in 0.01f64..100.0, start in 0.01f64..20.0) {
        // 10³ points per unit of reduced frequency; steep steps near sharp
        // resonances are bisected until they resolve
        for p in Parity::BOTH {
            for i in 0..1000 {
                let lo = start + i as f64 * 1e-3;
                prop_assert!(resolves(p, coupling, lo, lo + 1e-3, 50), "jump near {}", lo);
            }
        }
    }

    #[test]
    fn density_ratio_is_amplitude_squared(coupling in 0.0f64..20.0, len in 10.0f64..200.0) {
        let pot = PotentialSpec::from_coupling(coupling, 1.0).unwrap();
        let bx = BoxSpec::new(len, &pot).unwrap();
        let modes = spectrum(&pot, &bx, 20).unwrap();
        for pair in modes.windows(2) {
            if pair[0].parity == pair[1].parity {
                prop_assert!(pair[1].omega > pair[0].omega);
            }
        }
        for m in &modes {
            let ratio = m.density(&bx, Region::Inner) / m.density(&bx, Region::Outer);
            prop_assert!((ratio - m.amplitude * m.amplitude).abs() <= 1e-14 * ratio.max(1.0));
        }
    }

    #[test]
    fn lhs_strictly_between(eta in 1e-3f64..1.0, tau in 1e-2f64..1e3) {
        let prof = DensityProfile::from_eta(eta, 1.0).unwrap();
        let lhs = weighted_density(&prof, &SamplingFunction::lorentzian(tau).unwrap()).unwrap();
        prop_assert!(lhs < 0.0 && lhs > -eta);
    }
}

#[test]
fn bound_scaling_law() {
    for base in [SamplingFunction::lorentzian(0.7).unwrap(), SamplingFunction::gaussian(1.3).unwrap()] {
        let b = qi_bound(&base).unwrap().bound_quadrature;
        for s in [2.0, 5.0] {
            let bs = qi_bound(&base.scaled(s).unwrap()).unwrap().bound_quadrature;
            assert!(((bs * s * s - b) / b).abs() < 1e-8);
        }
    }
}

#[test]
fn eta_sum_monotone_in_coupling() {
    // observed, not a claim of the model
    let mut prev = 0.0;
    for i in 1..=40 {
        let c = 100.0 * (i as f64 / 40.0).powi(2);
        let sum = eta_components(&PotentialSpec::from_coupling(c, 1.0).unwrap()).unwrap().sum();
        assert!(sum <= prev, "coupling {c}: {sum} > {prev}");
        prev = sum;
    }
}
