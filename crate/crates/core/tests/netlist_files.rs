use std::path::PathBuf;

use proptest::prelude::*;
use wgklm_core::netlist::{parse, serialize, ParseErrorKind};
use wgklm_core::{build, run_circuit, EmitterParams, Error, ProtocolKind, ProtocolParams, Purcell};

fn shipped(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../netlists")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const FILES: [&str; 4] = ["klm2.wgq", "klm3.wgq", "klm5.wgq", "heralded_z.wgq"];

#[test]
fn shipped_files_round_trip() {
    for name in FILES {
        let circuit = parse(&shipped(name)).unwrap();
        let text = serialize(&circuit);
        assert_eq!(parse(&text).unwrap(), circuit, "{name}");
        assert_eq!(serialize(&parse(&text).unwrap()), text, "{name}");
    }
}

#[test]
fn shipped_files_equal_builders() {
    let nominal = EmitterParams::new(Purcell::Finite(100.0), 0.05);
    for (name, kind, n) in [
        ("klm2.wgq", ProtocolKind::TwoQubit, 2),
        ("klm3.wgq", ProtocolKind::ThreeQubit, 3),
        ("klm5.wgq", ProtocolKind::General, 5),
    ] {
        let params = ProtocolParams::new(n, nominal).with_offsets((0..n).map(|i| 0.02 * i as f64).collect());
        let built = build(kind, &params).unwrap();
        let parsed = parse(&shipped(name)).unwrap();
        assert_eq!(parsed, built, "{name}");
        let a = run_circuit(&parsed, &params.environment()).unwrap();
        let b = run_circuit(&built, &params.environment()).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            assert_eq!(x.probability.to_bits(), y.probability.to_bits());
        }
    }
}

#[test]
fn heralded_z_file_matches_closed_form() {
    let circuit = parse(&shipped("heralded_z.wgq")).unwrap();
    let env = wgklm_core::Environment::new(EmitterParams::new(Purcell::Finite(100.0), 0.1));
    let run = run_circuit(&circuit, &env).unwrap();
    assert_eq!(run.outcomes.len(), 1);
    assert!((run.success_probability() - 0.943_307_235_166_493_7).abs() < 1e-12);
}

#[test]
fn modes_serialize_in_declaration_order() {
    let text = "circuit m\nemitters 1\nmodes 7 3 5\nscatter in=7 emitter=0 out=3 sink=L\ndetect A=(3,V) B=(3,H)\n";
    let c = parse(text).unwrap();
    assert!(serialize(&c).contains("modes 7 3 5\n"));
}

#[test]
fn typo_is_reported_at_the_token() {
    let mut text = shipped("klm2.wgq");
    text = text.replacen("hwp mode=1 theta=22.5", "hpw 22.5", 1);
    let line = text.lines().position(|l| l.starts_with("hpw")).unwrap() + 1;
    match parse(&text) {
        Err(Error::Parse(e)) => {
            assert_eq!(e.kind, ParseErrorKind::UnknownComponent("hpw".into()));
            assert_eq!((e.line, e.column), (line, 1));
            assert!(e.to_string().starts_with(&format!("line {line}, column 1")));
        }
        other => panic!("{other:?}"),
    }
}

fn all_builders() -> Vec<wgklm_core::Circuit> {
    let nominal = EmitterParams::ideal();
    let mut v = vec![
        build(ProtocolKind::TwoQubit, &ProtocolParams::new(2, nominal)).unwrap(),
        build(ProtocolKind::ThreeQubit, &ProtocolParams::new(3, nominal)).unwrap(),
    ];
    v.extend((2..=9).map(|n| build(ProtocolKind::General, &ProtocolParams::new(n, nominal)).unwrap()));
    v
}

#[test]
fn every_builder_round_trips() {
    for c in all_builders() {
        assert_eq!(parse(&serialize(&c)).unwrap(), c, "{}", c.name);
    }
}

proptest! {
    #[test]
    fn corrupted_lines_fail_with_location(line_index in 0usize..40, garbage in "[a-z0-9=(),>-]{1,8}") {
        let text = shipped("klm3.wgq");
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let i = line_index % lines.len();
        lines[i] = format!("{} {garbage}", lines[i]);
        match parse(&lines.join("\n")) {
            Ok(_) => {}
            Err(Error::Parse(e)) => {
                prop_assert!(e.line >= 1 && e.line <= lines.len());
                prop_assert!(e.column >= 1);
            }
            Err(other) => prop_assert!(false, "non-parse error {other:?}"),
        }
    }
}
