use approx::assert_abs_diff_eq;
use wgklm_core::{
    build, build_n_qubit, klm_target, run_circuit, run_protocol, success_probability, EmitterParams, ProtocolKind,
    ProtocolParams, Purcell,
};

fn grid() -> Vec<EmitterParams> {
    let mut v = Vec::new();
    for p in [1.0, 5.0, 20.0, 100.0, 1000.0] {
        for d in [-0.4, -0.1, 0.0, 0.15, 0.3] {
            v.push(EmitterParams::new(Purcell::Finite(p), d));
        }
    }
    v
}

#[test]
fn corrected_states_are_klm_for_every_n() {
    for n in 2..=8 {
        let target = klm_target(n).unwrap();
        assert_eq!(target.state.amps.len(), n + 1);
        let run = run_protocol(&ProtocolParams::new(n, EmitterParams::ideal()), ProtocolKind::General).unwrap();
        assert_abs_diff_eq!(run.success_probability(), 1.0, epsilon = 1e-10);
        for o in &run.outcomes {
            assert!(o.fidelity.unwrap() >= 1.0 - 1e-10, "N={n} {}", o.detector);
            assert!(target.fidelity(&o.corrected) >= 1.0 - 1e-10);
        }
    }
}

#[test]
fn herald_probability_is_r_to_the_2n() {
    for n in 2..=8 {
        for nominal in grid() {
            let run = run_protocol(&ProtocolParams::new(n, nominal), ProtocolKind::General).unwrap();
            let expected = success_probability(n, &nominal).unwrap();
            assert_abs_diff_eq!(run.success_probability(), expected, epsilon = 1e-10);
            assert_abs_diff_eq!(run.weighted_fidelity().unwrap(), 1.0, epsilon = 1e-10);
        }
    }
}

/// Generic and dedicated builders give the same outcome distribution and corrected states.
#[test]
fn generic_builder_matches_dedicated_ones() {
    for (n, kind) in [(2, ProtocolKind::TwoQubit), (3, ProtocolKind::ThreeQubit)] {
        for nominal in grid().into_iter().step_by(3) {
            for offsets in [vec![], (0..n).map(|i| 0.05 * (i as f64) - 0.04).collect::<Vec<_>>()] {
                let params = ProtocolParams::new(n, nominal).with_offsets(offsets);
                let dedicated = run_protocol(&params, kind).unwrap();
                let generic = run_circuit(&build_n_qubit(&params).unwrap(), &params.environment()).unwrap();
                assert_abs_diff_eq!(
                    dedicated.success_probability(),
                    generic.success_probability(),
                    epsilon = 1e-10
                );
                assert_abs_diff_eq!(dedicated.sink_total(), generic.sink_total(), epsilon = 1e-10);
                assert_abs_diff_eq!(
                    dedicated.weighted_fidelity().unwrap(),
                    generic.weighted_fidelity().unwrap(),
                    epsilon = 1e-10
                );
                let mut a: Vec<f64> = dedicated.outcomes.iter().map(|o| o.probability).collect();
                let mut b: Vec<f64> = generic.outcomes.iter().map(|o| o.probability).collect();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                assert_eq!(a.len(), b.len());
                for (x, y) in a.iter().zip(&b) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-10);
                }
                for o in &generic.outcomes {
                    let twin = dedicated
                        .outcomes
                        .iter()
                        .find(|d| d.corrected.fidelity(&o.corrected) >= 1.0 - 1e-10);
                    assert!(twin.is_some(), "N={n}: no dedicated outcome matches {}", o.detector);
                }
            }
        }
    }
}

#[test]
fn builders_reject_bad_sizes() {
    let nominal = EmitterParams::ideal();
    assert!(build(ProtocolKind::TwoQubit, &ProtocolParams::new(3, nominal)).is_err());
    assert!(build(ProtocolKind::ThreeQubit, &ProtocolParams::new(2, nominal)).is_err());
    assert!(build_n_qubit(&ProtocolParams::new(1, nominal)).is_err());
    assert!(build_n_qubit(&ProtocolParams::new(21, nominal)).is_err());
}
