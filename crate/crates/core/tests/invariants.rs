use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use ion_gauge::dynamics::{evolve_effective, fit_rabi, profile_phase, InitialStateSpec};
use ion_gauge::effective::{build_h_eff, diagonalize, ring_spectrum, ring_terms, wavepacket_velocity, EffectiveModel};
use ion_gauge::geometry::{apply_gauge, compile, expand_to_graph, GeometrySpec, HoppingTerm};
use ion_gauge::linalg::hermiticity_defect;
use ion_gauge::model::{Basis, ChainConfig};
use ion_gauge::scheduler::{schedule, stroboscopic_period, validate, Knobs};
use ion_gauge::units::{hz_to_rad, rad_to_hz, wrap_angle};

fn levels(terms: &[HoppingTerm], n: usize, sector: Option<usize>) -> Vec<f64> {
    diagonalize(&build_h_eff(terms, n, &[], &[], 0.0, sector).unwrap(), 5000).unwrap().0
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wrap_angle_lands_in_half_open_interval(x in -100.0f64..100.0) {
        let y = wrap_angle(x);
        prop_assert!(y > -PI && y <= PI);
        prop_assert!(((x - y) / TAU - ((x - y) / TAU).round()).abs() < 1e-9);
    }

    #[test]
    fn hz_round_trip(f in -1e7f64..1e7) {
        prop_assert!((rad_to_hz(hz_to_rad(f)) - f).abs() <= 1e-9 * f.abs().max(1.0));
    }

    #[test]
    fn basis_labels_round_trip(ns in 1usize..5, c0 in 0usize..4, c1 in 0usize..3, pick in any::<prop::sample::Index>()) {
        let b = Basis::new(ns, &[c0, c1]).unwrap();
        let i = pick.index(b.dim());
        let (spin, ph) = b.labels(i);
        prop_assert_eq!(b.index(spin, &ph).unwrap(), i);
        prop_assert_eq!(b.dim(), (1 << ns) * (c0 + 1) * (c1 + 1));
    }

    #[test]
    fn ring_loop_flux_is_reproduced(n in 3usize..12, lp in -PI..PI) {
        let g = compile(&GeometrySpec::Ring { n, loop_flux: lp, omega: 1.0 }).unwrap();
        prop_assert!(wrap_angle(g.fluxes[0].loop_phase - lp).abs() < 1e-9);
        let graph = expand_to_graph(&g.terms, &g.spacers, g.n_ions).unwrap();
        prop_assert!(graph.is_hermitian(1e-12));
        prop_assert!((0..n).all(|i| graph.degree(i) == 2));
    }

    #[test]
    fn gauge_transformation_keeps_fluxes_and_spectrum(n in 4usize..8, gauge in -PI..PI, p1 in -PI..PI, p2 in -PI..PI, j in 0.1f64..2.0) {
        let terms = [HoppingTerm::new(1, 1.0, p1), HoppingTerm::new(2, j, p2)];
        let moved = apply_gauge(&terms, gauge);
        prop_assert!(close(&levels(&terms, n, None), &levels(&moved, n, None), 1e-10));
        let a = expand_to_graph(&terms, &[], n).unwrap();
        let b = expand_to_graph(&moved, &[], n).unwrap();
        let cycle = [0, 1, 2];
        prop_assert!(wrap_angle(a.loop_flux(&cycle, true).unwrap() - b.loop_flux(&cycle, true).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn ring_spectrum_is_periodic_in_flux(n in 3usize..10, flux in 0.0f64..1.0, omega in 0.1f64..10.0) {
        let mut a = ring_spectrum(n, flux, omega);
        let mut b = ring_spectrum(n, flux + 1.0, omega);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert!(close(&a, &b, 1e-10 * omega));
        let v = wavepacket_velocity(n, 0, flux, omega);
        prop_assert!(v.abs() <= 4.0 * omega * (PI / n as f64).sin() * (1.0 + 1e-12));
    }

    #[test]
    fn single_excitation_ed_matches_closed_form(n in 3usize..9, flux in 0.0f64..1.0) {
        let mut want = ring_spectrum(n, flux, 1.3);
        want.sort_by(f64::total_cmp);
        prop_assert!(close(&levels(&ring_terms(n, flux, 1.3).unwrap(), n, Some(1)), &want, 1e-10));
    }

    #[test]
    fn effective_hamiltonian_is_hermitian(n in 2usize..6, p1 in -PI..PI, d in -1.0f64..1.0, t in 0.0f64..3.0) {
        let terms = [HoppingTerm { n: 1, omega: 0.7, phi: p1, delta: d }];
        let h = build_h_eff(&terms, n, &[], &[], t, None).unwrap();
        prop_assert!(hermiticity_defect(&h.matrix) < 1e-12);
    }

    #[test]
    fn effective_evolution_conserves_norm_and_excitations(n in 3usize..7, flux in 0.0f64..1.0, k in -2i64..3) {
        let model = EffectiveModel::new(n, ring_terms(n, flux, 1.0).unwrap(), vec![], vec![]).unwrap();
        let sites: Vec<usize> = (0..n).collect();
        let amps = InitialStateSpec::wave_packet(k, 0.4).spin_amplitudes(&sites).unwrap();
        let times: Vec<f64> = (0..8).map(|i| 0.37 * i as f64).collect();
        let tr = evolve_effective(&amps, &model, &times).unwrap();
        for r in &tr.records {
            prop_assert!((r.norm - 1.0).abs() < 1e-10);
            prop_assert!((r.p_excited.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn profile_phase_recovers_cosine(n in 3usize..12, phi in -3.0f64..3.0, a in 0.05f64..1.0) {
        let p: Vec<f64> = (0..n).map(|m| 1.0 + a * (TAU * m as f64 / n as f64 - phi).cos()).collect();
        let (got, res) = profile_phase(&p);
        prop_assert!(wrap_angle(got - phi).abs() < 1e-10);
        prop_assert!(res < 1e-10);
    }

    #[test]
    fn rabi_fit_recovers_frequency(w in 1.0f64..5.0, amp in 0.1f64..1.0) {
        let t: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|&x| amp * (1.0 - (w * x).cos())).collect();
        let f = fit_rabi(&t, &y, 0.5, 6.0).unwrap();
        prop_assert!((f.frequency - w).abs() < 1e-6 * w);
        prop_assert!((f.amplitude - amp).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schedule_realizes_requested_rate(n in 3usize..7, range in 1usize..3, beta in 20.0f64..200.0, phi in -PI..PI, alpha in 10.0f64..40.0) {
        prop_assume!(range < n);
        let c = ChainConfig::com(n, TAU * 2e3, TAU * 2e6, 0.1, 2).unwrap();
        let rate = c.gradient / beta;
        let s = schedule(&[HoppingTerm::new(range, rate, phi)], &c, &Knobs { alpha, ..Knobs::blue_only() }).unwrap();
        let rep = validate(&s, &c, 0.0);
        prop_assert!((rep.predicted_coupling[0] / rate - 1.0).abs() < 1e-9);
        // the pair's two tones carry ±φ/2 and sit ξ ± nΔ/2 above the mode
        prop_assert_eq!(s.tones.len(), 2);
        prop_assert!(wrap_angle(s.tones[0].phase - s.tones[1].phase - phi).abs() < 1e-12);
        prop_assert!(((s.tones[0].detuning - s.tones[1].detuning).abs() - range as f64 * c.gradient).abs() < 1e-6);
    }

    #[test]
    fn stroboscopic_period_is_commensurate(n in 3usize..7, beta in 20.0f64..200.0, div in 1u32..5) {
        let c = ChainConfig::com(n, TAU * 2e3, TAU * 2e6, 0.1, 2).unwrap();
        let knobs = Knobs { grid_divisor: div, ..Knobs::default() };
        let s = schedule(&[HoppingTerm::new(1, c.gradient / beta, 0.0)], &c, &knobs).unwrap();
        let p = stroboscopic_period(&s, 10_000).unwrap();
        prop_assert!((p.t * c.gradient / (4.0 * PI) - p.m as f64).abs() < 1e-9);
        for t in &s.tones {
            let cycles = p.t * t.xi / TAU;
            prop_assert!((cycles - cycles.round()).abs() < 1e-6);
        }
    }
}
