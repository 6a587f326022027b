use nalgebra::DVector;
use proptest::prelude::*;
use stochfsi_core::discretization::Discretization;
use stochfsi_core::geometry::{ReferenceDomain, WallProfile};
use stochfsi_core::noise::{sample_path, NoiseSpec, PathKey};
use stochfsi_core::scheme::{structure_step, update_cutoff, CutoffState};

fn disc(nz: usize, nr: usize) -> Discretization {
    Discretization::new(ReferenceDomain::new(1.0, 1.0, nz, nr).unwrap(), nz).unwrap()
}

fn vector(n: usize, scale: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-scale..scale, n).prop_map(DVector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn structure_step_balances_energy(
        (eta, v) in (vector(10, 0.1), vector(10, 2.0)),
        dt in 1e-4f64..0.2,
    ) {
        let d = disc(6, 2);
        let f = &d.structure;
        let (eh, vh) = structure_step(f, &eta, &v, dt).unwrap();
        let e_n = 0.5 * (f.beam_sq(&v) + f.elastic_sq(&eta));
        let e_half = 0.5 * (f.beam_sq(&vh) + f.elastic_sq(&eh));
        let c1 = 0.5 * (f.beam_sq(&(&vh - &v)) + f.elastic_sq(&(&eh - &eta)));
        prop_assert!((e_half + c1 - e_n).abs() <= 1e-12 * e_n.max(1e-300));
        prop_assert!(e_half <= e_n * (1.0 + 1e-12));
    }

    #[test]
    fn advection_is_skew_for_any_transport(
        coeffs in vector(6, 0.15),
        frozen in vector(64, 3.0),
        x in vector(64, 1.0),
    ) {
        let d = disc(4, 3);
        let eta = WallProfile::from_coeffs(1.0, 4, coeffs).unwrap();
        let q = d.quadrature(&eta).unwrap();
        let n = d.n_free();
        let frozen = DVector::from_fn(n, |k, _| frozen[k % frozen.len()]);
        let x = DVector::from_fn(n, |k, _| x[k % x.len()]);
        let b = d.advection(&q, &frozen);
        prop_assert!(b.quadratic(&x).abs() <= 1e-11 * (1.0 + frozen.norm()) * x.norm_squared());
    }

    #[test]
    fn mass_is_positive(coeffs in vector(6, 0.3), x in vector(64, 1.0)) {
        let d = disc(4, 3);
        let eta = WallProfile::from_coeffs(1.0, 4, coeffs).unwrap();
        let n = d.n_free();
        let x = DVector::from_fn(n, |k, _| x[k % x.len()]);
        prop_assume!(x.norm() > 1e-6);
        prop_assert!(d.jacobian_mass(&eta).quadratic(&x) > 0.0);
    }

    #[test]
    fn cutoff_never_recovers(amplitudes in prop::collection::vec(-1.2f64..0.4, 1..12)) {
        let zero = WallProfile::zero(1.0, 2);
        let mut state = CutoffState::initial(&zero, 1.0, 0.2, 1.75).unwrap();
        let mut dropped = false;
        for (n, a) in amplitudes.iter().enumerate() {
            let candidate = WallProfile::from_coeffs(1.0, 2, DVector::from_vec(vec![*a, 0.0])).unwrap();
            let next = update_cutoff(&state, &candidate, 1.0, n + 1).unwrap();
            if dropped {
                prop_assert!(!next.theta);
                prop_assert_eq!(&next.eta_star, &state.eta_star);
            }
            if next.theta {
                prop_assert_eq!(&next.eta_star, &candidate);
            }
            dropped |= !next.theta;
            state = next;
        }
    }

    #[test]
    fn increments_depend_only_on_the_key(
        seed in any::<u64>(),
        master in any::<u64>(),
        path in 0u64..1000,
        steps in 1usize..40,
    ) {
        let spec = NoiseSpec { modes: 2, q: vec![1.0, 0.5], amplitude: vec![1.0, 1.0], seed, ..NoiseSpec::default() };
        let key = PathKey { master_seed: master, path };
        let a = sample_path(&spec, key, steps, 0.01).unwrap();
        let b = sample_path(&spec, key, steps, 0.01).unwrap();
        prop_assert_eq!(a.increments(), b.increments());
        let silent = NoiseSpec { amplitude: vec![0.0, 0.0], ..spec };
        prop_assert!(sample_path(&silent, key, steps, 0.01).unwrap().increments().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn coarse_increments_sum_fine_ones(seed in any::<u64>(), path in 0u64..100) {
        let fine = NoiseSpec { modes: 1, q: vec![0.7], amplitude: vec![1.0], seed, base_steps: Some(32), ..NoiseSpec::default() };
        let key = PathKey { master_seed: 4, path };
        let a = sample_path(&fine, key, 32, 1.0 / 32.0).unwrap();
        let b = sample_path(&fine, key, 8, 1.0 / 8.0).unwrap();
        for n in 0..8 {
            let sum: f64 = (0..4).map(|k| a.increment(4 * n + k)[0]).sum();
            prop_assert!((sum - b.increment(n)[0]).abs() <= 1e-14 * (1.0 + sum.abs()));
        }
    }
}
