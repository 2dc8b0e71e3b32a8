use proptest::prelude::*;

use shaken_lattice::dqn::Environment;
use shaken_lattice::estimation::{bayes_posterior, bragg_table, AccelGrid, MeasurementRecord, Posterior};
use shaken_lattice::lattice::{
    bloch_eigensystem, propagate, propagate_lattice_frame, propagator, LatticeConfig, PhaseSchedule,
};
use shaken_lattice::tasks::{terminal_reward, MirrorSettings, MirrorTask, SplitterSettings, SplitterTask};

fn phases() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagators_are_unitary(ph in phases(), step in 0.05f64..0.4, accel in -0.01f64..0.01) {
        let cfg = LatticeConfig::default().with_accel(accel);
        let u = propagator(&PhaseSchedule::piecewise_constant(&ph, step).unwrap(), &cfg).unwrap();
        prop_assert!(u.unitarity_error() <= 1e-9, "{}", u.unitarity_error());
    }

    #[test]
    fn norm_is_conserved(ph in phases(), step in 0.05f64..0.4, accel in -0.01f64..0.01) {
        let cfg = LatticeConfig::default().with_accel(accel);
        let g = bloch_eigensystem(&LatticeConfig::default()).unwrap().band(0);
        let s = PhaseSchedule::piecewise_constant(&ph, step).unwrap();
        let out = propagate(&g, &s, &cfg).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-10);
        let lf = propagate_lattice_frame(&g, &s, &cfg).unwrap();
        prop_assert!((lf.norm_sqr() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn bloch_states_are_stationary(band in 0usize..6, t in 0.1f64..20.0) {
        let cfg = LatticeConfig::default();
        let b = bloch_eigensystem(&cfg).unwrap().band(band);
        let out = propagate(&b, &PhaseSchedule::piecewise_constant(&[0.0], t).unwrap(), &cfg).unwrap();
        prop_assert!(out.fidelity(&b) >= 1.0 - 1e-8);
    }

    #[test]
    fn splitter_observations_are_populations(actions in prop::collection::vec(0usize..5, 1..40)) {
        let mut task = SplitterTask::new(&LatticeConfig::default(), SplitterSettings::default()).unwrap();
        task.reset();
        for a in actions {
            let out = task.step(a).unwrap();
            prop_assert!(out.observation.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
            prop_assert!(out.observation.iter().sum::<f64>() <= 1.0 + 1e-12);
            prop_assert!(out.done || out.reward == 0.0);
            if out.done { break; }
        }
    }

    #[test]
    fn mirror_observation_columns(actions in prop::collection::vec(0usize..5, 1..16)) {
        let mut task = MirrorTask::new(&LatticeConfig::default(), MirrorSettings::default()).unwrap();
        task.reset();
        for a in actions {
            let out = task.step(a).unwrap();
            let (plus, minus) = out.observation.split_at(7);
            prop_assert!(plus.iter().sum::<f64>() <= 1.0 + 1e-12);
            prop_assert!(minus.iter().sum::<f64>() <= 1.0 + 1e-12);
            if out.done { break; }
        }
    }

    #[test]
    fn reward_is_increasing(f in 0.0f64..0.999, df in 1e-6f64..1e-3) {
        prop_assert!(terminal_reward(f + df) > terminal_reward(f));
    }

    #[test]
    fn posterior_stays_normalised(outcomes in prop::collection::vec(0usize..2, 0..400), t in 2.0f64..20.0) {
        let grid = AccelGrid::new(-1e-3, 1e-3, 101).unwrap();
        let table = bragg_table(&grid, t).unwrap();
        let rec = MeasurementRecord { outcomes, seed: 0, true_accel: 0.0 };
        if let Ok(p) = bayes_posterior(&table, &rec, &Posterior::uniform(101)) {
            prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.probs.iter().all(|&x| x >= 0.0));
        }
    }
}

#[test]
fn initial_observations() {
    let mut s = SplitterTask::new(&LatticeConfig::default(), SplitterSettings::default()).unwrap();
    let o = s.reset();
    for k in 0..3 {
        assert!((o[k] - o[6 - k]).abs() < 1e-10);
    }
    assert!(o[3] > 0.5);
    assert_eq!(o, s.reset());

    let mut m = MirrorTask::new(&LatticeConfig::default(), MirrorSettings::default()).unwrap();
    let o = m.reset();
    assert_eq!(o.iter().sum::<f64>(), 2.0);
}
