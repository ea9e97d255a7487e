use levicav::constants::TWO_PI;
use levicav::dynamics::build_linear_model;
use levicav::params::PositionPhase;
use levicav::SystemParams;
use proptest::prelude::*;

/// Sum over axes of g²/Ω, the quantity that sets the static threshold.
fn spring_load(sys: &SystemParams) -> f64 {
    let g = sys.coupling_rates().rates;
    let w = sys.trap_frequencies();
    (0..3).map(|i| g[i] * g[i] / w[i]).sum()
}

fn node_system(g0: f64, detuning: f64) -> SystemParams {
    let mut sys = SystemParams::paper_defaults()
        .with_phase(PositionPhase::NODE)
        .with_detuning(detuning)
        .with_g0(g0);
    sys.tweezer.polarization_misalignment = 0.0;
    sys
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigenvalues_follow_static_threshold(log_g in 3.0f64..6.5, log_delta in 4.0f64..7.5) {
        let sys = node_system(TWO_PI * 10f64.powf(log_g), TWO_PI * 10f64.powf(log_delta));
        let kappa = sys.cavity.linewidth;
        let delta = sys.tweezer.detuning;
        let threshold = (delta * delta + 0.25 * kappa * kappa) / (4.0 * delta);
        let ratio = spring_load(&sys) / threshold;
        prop_assume!(!(0.98..=1.02).contains(&ratio));
        let stable = build_linear_model(&sys).unwrap().is_stable();
        prop_assert_eq!(stable, ratio < 1.0, "load/threshold = {}", ratio);
    }

    #[test]
    fn blue_detuning_with_strong_coupling_is_unstable(log_delta in 4.5f64..6.0) {
        let sys = node_system(TWO_PI * 33e3, -TWO_PI * 10f64.powf(log_delta));
        prop_assert!(!build_linear_model(&sys).unwrap().is_stable());
    }
}

#[test]
fn calibrated_detuning_grid_is_stable() {
    for f in [0.3e6, 0.4e6, 0.6e6, 1e6, 2e6, 5e6, 10e6, 20e6] {
        let sys = SystemParams::paper_defaults().with_detuning(TWO_PI * f);
        assert!(build_linear_model(&sys).unwrap().is_stable(), "{f} Hz");
    }
}
