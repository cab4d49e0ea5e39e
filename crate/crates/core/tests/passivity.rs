use wgklm_core::{
    build, check_passive_unitarity, Circuit, Component, EmitterParams, MixerKind, PolarizationMatrix, ProtocolKind,
    ProtocolParams,
};

fn circuits() -> Vec<Circuit> {
    let nominal = EmitterParams::ideal();
    let mut v = vec![
        build(ProtocolKind::TwoQubit, &ProtocolParams::new(2, nominal)).unwrap(),
        build(ProtocolKind::ThreeQubit, &ProtocolParams::new(3, nominal)).unwrap(),
    ];
    v.extend((2..=10).map(|n| build(ProtocolKind::General, &ProtocolParams::new(n, nominal)).unwrap()));
    v
}

#[test]
fn passive_parts_of_every_builder_are_unitary() {
    for c in circuits() {
        let report = check_passive_unitarity(&c);
        assert!(report.violations(1e-12).is_empty(), "{}", c.name);
        let passive = c.components.iter().filter(|x| x.is_passive()).count();
        assert_eq!(report.entries.len() - report.non_passive().len(), passive);
    }
}

#[test]
fn lossy_custom_mixer_is_rejected() {
    let mut c = circuits().remove(0);
    let Some(Component::Mixer { kind, .. }) = c.components.iter_mut().find(|x| matches!(x, Component::Mixer { .. }))
    else {
        panic!("no mixer");
    };
    *kind = MixerKind::Custom(PolarizationMatrix::real([[0.6, 0.6], [0.6, -0.6]]));
    let report = check_passive_unitarity(&c);
    assert_eq!(report.violations(1e-12).len(), 1);
}
