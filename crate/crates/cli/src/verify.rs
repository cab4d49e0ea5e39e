//! Built-in invariant suite for `wgklm verify`.

use wgklm_core::netlist::{parse, serialize};
use wgklm_core::{
    averaged_fidelity, build, check_passive_unitarity, heralded_z_success, run_protocol, scatter_coeffs,
    BroadeningModel, EmitterParams, ProtocolKind, ProtocolParams, Purcell, Result,
};

type Outcome = std::result::Result<(), String>;

pub struct Check {
    pub name: &'static str,
    pub run: fn() -> Outcome,
}

pub const CHECKS: &[Check] = &[
    Check {
        name: "norm-conservation",
        run: norm_conservation,
    },
    Check {
        name: "closed-form-success",
        run: closed_form_success,
    },
    Check {
        name: "heralded-z",
        run: heralded_z,
    },
    Check {
        name: "table1-two-qubit",
        run: table1,
    },
    Check {
        name: "table2-three-qubit",
        run: table2,
    },
    Check {
        name: "klm-generalization",
        run: klm_generalization,
    },
    Check {
        name: "passive-unitarity",
        run: passive_unitarity,
    },
    Check {
        name: "netlist-roundtrip",
        run: netlist_roundtrip,
    },
    Check {
        name: "broadening-sigma-zero",
        run: sigma_zero,
    },
];

const PURCELLS: [Purcell; 5] = [
    Purcell::Finite(1.0),
    Purcell::Finite(10.0),
    Purcell::Finite(50.0),
    Purcell::Finite(100.0),
    Purcell::Ideal,
];
const DETUNINGS: [f64; 5] = [-0.3, -0.1, 0.0, 0.15, 0.4];

fn kinds() -> Vec<(ProtocolKind, usize)> {
    let mut v = vec![(ProtocolKind::TwoQubit, 2), (ProtocolKind::ThreeQubit, 3)];
    v.extend((2..=6).map(|n| (ProtocolKind::General, n)));
    v
}

fn grid() -> impl Iterator<Item = EmitterParams> {
    PURCELLS
        .into_iter()
        .flat_map(|p| DETUNINGS.into_iter().map(move |d| EmitterParams::new(p, d)))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn norm_conservation() -> Outcome {
    for (kind, n) in kinds() {
        for (i, nominal) in grid().enumerate() {
            let offsets = (0..n).map(|k| 0.07 * ((i + 3 * k) % 5) as f64 - 0.14).collect();
            let params = ProtocolParams::new(n, nominal).with_offsets(offsets);
            let run = core(run_protocol(&params, kind))?;
            let total = run.success_probability() + run.sink_total();
            ensure((total - 1.0).abs() <= 1e-10, || {
                format!("{} at {nominal:?}: detectors + sinks = {total}", kind.name())
            })?;
        }
    }
    Ok(())
}

fn closed_form_success() -> Outcome {
    for n in 2..=8 {
        let kind = ProtocolKind::for_n(n);
        for nominal in grid() {
            let run = core(run_protocol(&ProtocolParams::new(n, nominal), kind))?;
            let expected = core(scatter_coeffs(&nominal))?.r.norm_sqr().powi(n as i32);
            let got = run.success_probability();
            ensure((got - expected).abs() <= 1e-10, || {
                format!("N={n} at {nominal:?}: simulated {got}, closed form {expected}")
            })?;
        }
    }
    Ok(())
}

fn heralded_z() -> Outcome {
    let p = core(heralded_z_success(&EmitterParams::new(Purcell::Finite(100.0), 0.1)))?;
    ensure((p - 0.9433).abs() <= 5e-4, || format!("p_h(100, 0.1) = {p}"))
}

fn ideal_table(kind: ProtocolKind, n: usize) -> Outcome {
    let run = core(run_protocol(&ProtocolParams::new(n, EmitterParams::ideal()), kind))?;
    ensure(run.outcomes.len() == 4, || format!("{} detectors", run.outcomes.len()))?;
    for o in &run.outcomes {
        ensure((o.probability - 0.25).abs() <= 1e-10, || {
            format!("{} probability {}", o.detector, o.probability)
        })?;
        let f = o.fidelity.unwrap_or(0.0);
        ensure(f >= 1.0 - 1e-10, || format!("{} fidelity {f}", o.detector))?;
    }
    Ok(())
}

fn table1() -> Outcome {
    ideal_table(ProtocolKind::TwoQubit, 2)
}

fn table2() -> Outcome {
    ideal_table(ProtocolKind::ThreeQubit, 3)
}

fn klm_generalization() -> Outcome {
    for n in 2..=8 {
        let run = core(run_protocol(
            &ProtocolParams::new(n, EmitterParams::ideal()),
            ProtocolKind::General,
        ))?;
        ensure((run.success_probability() - 1.0).abs() <= 1e-10, || {
            format!("N={n}: success {}", run.success_probability())
        })?;
        for o in run.outcomes.iter().filter(|o| o.probability > 1e-12) {
            let f = o.fidelity.unwrap_or(0.0);
            ensure(f >= 1.0 - 1e-10, || format!("N={n} {}: fidelity {f}", o.detector))?;
        }
    }
    Ok(())
}

fn passive_unitarity() -> Outcome {
    let nominal = EmitterParams::new(Purcell::Finite(100.0), 0.1);
    for (kind, n) in kinds() {
        let circuit = core(build(kind, &ProtocolParams::new(n, nominal)))?;
        let report = check_passive_unitarity(&circuit);
        if let Some(bad) = report.violations(1e-12).first() {
            return Err(format!(
                "{} component {} ({}) deviates by {}",
                circuit.name, bad.index, bad.kind, bad.deviation
            ));
        }
    }
    Ok(())
}

fn netlist_roundtrip() -> Outcome {
    let nominal = EmitterParams::new(Purcell::Finite(100.0), 0.1);
    for (kind, n) in kinds() {
        let circuit = core(build(kind, &ProtocolParams::new(n, nominal)))?;
        let text = serialize(&circuit);
        let back = core(parse(&text))?;
        ensure(back == circuit, || format!("{} does not round-trip", circuit.name))?;
        ensure(serialize(&back) == text, || {
            format!("{} serialization is not idempotent", circuit.name)
        })?;
    }
    Ok(())
}

fn sigma_zero() -> Outcome {
    for n in [2, 3] {
        for d in [-0.3, 0.0, 0.2] {
            let nominal = EmitterParams::new(Purcell::Finite(100.0), d);
            let f = core(averaged_fidelity(n, &nominal, &BroadeningModel::gauss_hermite(0.0, 20)))?;
            ensure((f.mean - 1.0).abs() <= 1e-10, || {
                format!("N={n}, d={d}: mean {}", f.mean)
            })?;
        }
    }
    Ok(())
}
