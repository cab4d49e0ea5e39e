//! Heralded KLM-state generation circuits, feedforward and target states.
//!
//! Every protocol splits the ancilla photon into N+1 branches of equal
//! weight. Branch j scatters off the last j emitters (each scattering flips
//! one emitter from |+⟩ to |−⟩ and multiplies by r) and passes an attenuator
//! r_nom^(N−j), so in the homogeneous case every branch carries r^N. A final
//! polarization/spatial Hadamard network erases which-path information and
//! the detector click selects a sign pattern that feedforward removes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::circuit::{
    execute, Circuit, Coefficient, Component, Correction, Environment, FeedforwardRule, MixerKind, PhotonInput,
};
use crate::error::{Error, Result};
use crate::scatter::{prep_angle, EmitterParams};
use crate::state::{Basis, DetectorId, EmitterConfig, EmitterState, PmLabel, Polarization, SinkId, SpatialMode};

/// ½·arccos(1/√3) rounded to one decimal place.
pub const ROUNDED_TWO_QUBIT_PREP_DEG: f64 = 27.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    /// Dedicated two-emitter circuit (four detectors).
    TwoQubit,
    /// Dedicated three-emitter circuit (four detectors).
    ThreeQubit,
    /// Peeling chain for any N ≥ 2.
    General,
}

impl ProtocolKind {
    /// Dedicated builder when one exists, the general chain otherwise.
    pub fn for_n(n: usize) -> Self {
        match n {
            2 => ProtocolKind::TwoQubit,
            3 => ProtocolKind::ThreeQubit,
            _ => ProtocolKind::General,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::TwoQubit => "klm2",
            ProtocolKind::ThreeQubit => "klm3",
            ProtocolKind::General => "klmN",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "klm2" => Ok(ProtocolKind::TwoQubit),
            "klm3" => Ok(ProtocolKind::ThreeQubit),
            "klmN" | "klmn" => Ok(ProtocolKind::General),
            other => Err(Error::param(format!(
                "unknown protocol `{other}` (expected klm2, klm3 or klmN)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub n: usize,
    /// Calibration point of the attenuators.
    pub nominal: EmitterParams,
    /// δ_i/γ_1D per emitter; empty means all zero.
    pub offsets: Vec<f64>,
}

impl ProtocolParams {
    pub fn new(n: usize, nominal: EmitterParams) -> Self {
        ProtocolParams {
            n,
            nominal,
            offsets: Vec::new(),
        }
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Self {
        self.offsets = offsets;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param(format!("KLM protocols need N ≥ 2, got {}", self.n)));
        }
        self.nominal.validate()?;
        if !self.offsets.is_empty() && self.offsets.len() != self.n {
            return Err(Error::param(format!(
                "{} offsets given for {} emitters",
                self.offsets.len(),
                self.n
            )));
        }
        if let Some(bad) = self.offsets.iter().find(|o| !o.is_finite()) {
            return Err(Error::param(format!("offset {bad} is not finite")));
        }
        Ok(())
    }

    pub fn environment(&self) -> Environment {
        Environment::with_offsets(self.nominal, self.offsets.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BuildOptions {
    /// Use the rounded 27.4° prep plate in the two-qubit circuit.
    pub rounded_prep_angle: bool,
}

/// The uniform superposition of the N+1 domain-wall configurations |+⟩^a|−⟩^(N−a).
#[derive(Debug, Clone, PartialEq)]
pub struct KlmTarget {
    pub n: usize,
    pub state: EmitterState,
}

impl KlmTarget {
    pub fn fidelity(&self, state: &EmitterState) -> f64 {
        self.state.fidelity(state)
    }
}

/// Configuration with the last `j` emitters in |−⟩.
pub fn domain_wall(n: usize, j: usize) -> EmitterConfig {
    EmitterConfig(((1u64 << j) - 1) << (n - j))
}

pub fn klm_target(n: usize) -> Result<KlmTarget> {
    if n < 2 {
        return Err(Error::param(format!("KLM target needs N ≥ 2, got {n}")));
    }
    if n > crate::state::MAX_EMITTERS {
        return Err(Error::param(format!("N = {n} exceeds the supported register size")));
    }
    let amp = Complex64::new(1.0 / ((n + 1) as f64).sqrt(), 0.0);
    let mut state = EmitterState::new(n, Basis::PlusMinus);
    for j in 0..=n {
        state.amps.insert(domain_wall(n, j), amp);
    }
    Ok(KlmTarget { n, state })
}

/// Per-emitter σ_z/I in the ± basis.
pub fn apply_feedforward(state: &EmitterState, rule: &[Correction]) -> EmitterState {
    let mut out = state.to_basis(Basis::PlusMinus);
    for (config, a) in out.amps.iter_mut() {
        let flips = rule
            .iter()
            .enumerate()
            .filter(|(i, c)| **c == Correction::Z && config.bit(*i))
            .count();
        if flips % 2 == 1 {
            *a = -*a;
        }
    }
    out
}

/// Recovers the σ_z pattern mapping a signed domain-wall superposition onto
/// the KLM target. `None` if the state has weight outside the domain walls.
pub fn derive_feedforward(state: &EmitterState) -> Option<Vec<Correction>> {
    let n = state.n;
    let pm = state.to_basis(Basis::PlusMinus);
    let walls: Vec<Complex64> = (0..=n).map(|j| pm.amplitude(domain_wall(n, j))).collect();
    let wall_weight: f64 = walls.iter().map(|a| a.norm_sqr()).sum();
    if (pm.norm_sqr() - wall_weight).abs() > 1e-9 || walls[0].norm() < 1e-12 {
        return None;
    }
    let sign = |j: usize| (walls[j] / walls[0]).re >= 0.0;
    // σ_z on emitter i flips every E_j with j ≥ N − i.
    Some(
        (0..n)
            .map(|i| {
                if sign(n - i) != sign(n - i - 1) {
                    Correction::Z
                } else {
                    Correction::I
                }
            })
            .collect(),
    )
}

fn rule(s: &str) -> Vec<Correction> {
    s.chars().filter_map(Correction::from_symbol).collect()
}

/// Helper for declaring modes while wiring a circuit.
struct Wiring {
    modes: Vec<SpatialMode>,
    components: Vec<Component>,
}

impl Wiring {
    fn new() -> Self {
        Wiring {
            modes: Vec::new(),
            components: Vec::new(),
        }
    }

    fn mode(&mut self, label: u32) -> SpatialMode {
        let m = SpatialMode(label);
        if !self.modes.contains(&m) {
            self.modes.push(m);
        }
        m
    }

    fn fresh(&mut self) -> SpatialMode {
        let next = self.modes.iter().map(|m| m.0 + 1).max().unwrap_or(0);
        self.mode(next)
    }

    fn push(&mut self, c: Component) {
        self.components.push(c);
    }

    fn pbs(&mut self, routes: &[(SpatialMode, Polarization, SpatialMode)]) {
        let routing = routes.iter().map(|&(m, p, o)| ((m, p), o)).collect();
        self.push(Component::Pbs { routing });
    }

    fn hwp(&mut self, mode: SpatialMode, theta: f64) {
        self.push(Component::Hwp { mode, theta });
    }

    fn mixer(&mut self, a: SpatialMode, b: SpatialMode, out: (SpatialMode, SpatialMode), kind: MixerKind) {
        self.push(Component::Mixer { a, b, out, kind });
    }

    fn attenuate(&mut self, mode: SpatialMode, power: u32) {
        self.push(Component::Attenuator {
            mode,
            coefficient: Coefficient::RNomPow(power),
            sink: SinkId::new(format!("T{power}")),
        });
    }

    /// PBS double pass around one emitter: `pol` is routed to the emitter and
    /// the flipped reflection comes back on `out`.
    fn scatter_via_pbs(&mut self, input: SpatialMode, pol: Polarization, emitter: usize, sink: &str, out: SpatialMode) {
        let to_emitter = self.fresh();
        let back = self.fresh();
        self.pbs(&[(input, pol, to_emitter)]);
        self.push(Component::EmitterScatter {
            in_mode: to_emitter,
            emitter,
            reflected_out: back,
            sink: SinkId::new(sink),
        });
        self.pbs(&[(back, pol.flipped(), out)]);
    }

    fn detect(&mut self, detectors: &[(SpatialMode, Polarization, &str)]) {
        let detectors = detectors
            .iter()
            .map(|&(m, p, id)| ((m, p), DetectorId::new(id)))
            .collect();
        self.push(Component::DetectorBank { detectors });
    }

    fn finish(self, name: &str, n: usize, input: PhotonInput, feedforward: FeedforwardRule) -> Result<Circuit> {
        let circuit = Circuit {
            name: name.to_string(),
            n_emitters: n,
            modes: self.modes,
            input,
            components: self.components,
            feedforward,
        };
        circuit.validate()?;
        Ok(circuit)
    }
}

fn plus_input(n: usize, mode: SpatialMode, pol: Polarization) -> PhotonInput {
    PhotonInput {
        mode,
        pol,
        emitters: vec![PmLabel::Plus; n],
    }
}

pub fn build_two_qubit(params: &ProtocolParams) -> Result<Circuit> {
    build_two_qubit_with(params, &BuildOptions::default())
}

/// Two-emitter circuit. Mode labels 1–7 follow the published step-by-step
/// states; intermediate PBS round trips use labels ≥ 8.
pub fn build_two_qubit_with(params: &ProtocolParams, options: &BuildOptions) -> Result<Circuit> {
    params.validate()?;
    if params.n != 2 {
        return Err(Error::param(format!("two-qubit builder needs N = 2, got {}", params.n)));
    }
    use Polarization::{H, V};
    let mut w = Wiring::new();
    let m: Vec<SpatialMode> = (0..=13).map(|i| w.mode(i)).collect();
    let theta = if options.rounded_prep_angle {
        ROUNDED_TWO_QUBIT_PREP_DEG
    } else {
        prep_angle(3)
    };
    let (e1, e2) = (0, 1);

    w.hwp(m[0], theta);
    w.pbs(&[(m[0], H, m[1]), (m[0], V, m[2])]);
    // PBS2 round trip through e2, then BS′ entered from its lower port
    w.scatter_via_pbs(m[2], V, e2, "D'1", m[4]);
    w.mixer(m[3], m[4], (m[3], m[4]), MixerKind::BsPrime);
    // PBS3 round trip through e1
    let back = w.fresh();
    w.scatter_via_pbs(m[4], H, e1, "D'2", back);
    w.attenuate(m[1], 2);
    w.attenuate(m[3], 1);
    w.pbs(&[(m[3], H, m[5]), (back, V, m[5])]);
    w.hwp(m[1], 22.5);
    w.hwp(m[5], 22.5);
    w.mixer(m[1], m[5], (m[6], m[7]), MixerKind::Bs);
    w.pbs(&[(m[6], H, m[8]), (m[6], V, m[9])]);
    w.pbs(&[(m[7], H, m[10]), (m[7], V, m[11])]);
    w.detect(&[(m[8], H, "D1"), (m[9], V, "D2"), (m[11], V, "D3"), (m[10], H, "D4")]);

    let feedforward = FeedforwardRule::from([
        (DetectorId::new("D1"), rule("II")),
        (DetectorId::new("D2"), rule("ZI")),
        (DetectorId::new("D3"), rule("ZZ")),
        (DetectorId::new("D4"), rule("IZ")),
    ]);
    w.finish("klm2", 2, plus_input(2, m[0], H), feedforward)
}

/// Three-emitter circuit; mode labels 1–10 follow the published states.
pub fn build_three_qubit(params: &ProtocolParams) -> Result<Circuit> {
    params.validate()?;
    if params.n != 3 {
        return Err(Error::param(format!(
            "three-qubit builder needs N = 3, got {}",
            params.n
        )));
    }
    use Polarization::{H, V};
    let mut w = Wiring::new();
    let m: Vec<SpatialMode> = (0..=14).map(|i| w.mode(i)).collect();
    let (e1, e2, e3) = (0, 1, 2);

    w.hwp(m[0], prep_angle(4));
    w.pbs(&[(m[0], H, m[1]), (m[0], V, m[2])]);
    w.scatter_via_pbs(m[2], V, e3, "D'1", m[4]);
    w.mixer(m[3], m[4], (m[3], m[4]), MixerKind::Vbs { k: 2, n: 3 });
    let from_e2 = w.fresh();
    w.scatter_via_pbs(m[4], H, e2, "D'2", from_e2);
    w.mixer(m[5], from_e2, (m[5], m[6]), MixerKind::Vbs { k: 3, n: 3 });
    w.attenuate(m[1], 3);
    w.hwp(m[3], 45.0);
    w.attenuate(m[3], 2);
    w.pbs(&[(m[1], H, m[7]), (m[3], V, m[7])]);
    w.attenuate(m[5], 1);
    let from_e1 = w.fresh();
    w.scatter_via_pbs(m[6], V, e1, "D'3", from_e1);
    w.pbs(&[(m[5], V, m[8]), (from_e1, H, m[8])]);
    w.hwp(m[7], 22.5);
    w.hwp(m[8], 22.5);
    w.mixer(m[7], m[8], (m[9], m[10]), MixerKind::Bs);
    w.pbs(&[(m[9], H, m[11]), (m[9], V, m[12])]);
    w.pbs(&[(m[10], H, m[13]), (m[10], V, m[14])]);
    w.detect(&[(m[11], H, "D1"), (m[12], V, "D2"), (m[14], V, "D3"), (m[13], H, "D4")]);

    let feedforward = FeedforwardRule::from([
        (DetectorId::new("D1"), rule("III")),
        (DetectorId::new("D2"), rule("ZIZ")),
        (DetectorId::new("D3"), rule("ZZZ")),
        (DetectorId::new("D4"), rule("IZI")),
    ]);
    w.finish("klm3", 3, plus_input(3, m[0], H), feedforward)
}

/// Number of detectors of the general builder: the smallest power of two ≥ N+1.
pub fn general_detector_count(n: usize) -> usize {
    (n + 1).next_power_of_two()
}

/// Peeling chain for any N ≥ 2.
///
/// Stage k (1..=N) splits off 1/(N+2−k) of the live arm into a terminal
/// branch attenuated by r_nom^(N+1−k), and sends the rest to emitter
/// e_(N+1−k). Terminal branches are paired onto single spatial modes by
/// polarization, Hadamard-mixed in polarization by HWP(22.5°) and in space by
/// a balanced-BS butterfly, and read out by 2^⌈log2(N+1)⌉ detectors.
pub fn build_n_qubit(params: &ProtocolParams) -> Result<Circuit> {
    params.validate()?;
    let n = params.n;
    if n > crate::state::MAX_EMITTERS {
        return Err(Error::param(format!("N = {n} exceeds the supported register size")));
    }
    use Polarization::{H, V};
    let mut w = Wiring::new();
    let input = w.mode(0);
    let mut live = input;
    // (mode, polarization) of branch j = number of scatterings
    let mut branches: Vec<(SpatialMode, Polarization)> = Vec::with_capacity(n + 1);
    for k in 1..=n {
        let peel = w.fresh();
        let next = w.fresh();
        w.mixer(peel, live, (peel, next), MixerKind::Vbs { k, n });
        w.attenuate(peel, (n + 1 - k) as u32);
        branches.push((peel, V));
        let back = w.fresh();
        w.scatter_via_pbs(next, V, n - k, &format!("D'{k}"), back);
        if k < n {
            w.hwp(back, 45.0);
        }
        live = back;
    }
    branches.push((live, H));

    let outputs = general_detector_count(n);
    let spatial = outputs / 2;
    let mut merged = Vec::with_capacity(spatial);
    for pair in 0..spatial {
        let target = w.fresh();
        let mut routes = Vec::new();
        for (slot, want) in [(2 * pair, H), (2 * pair + 1, V)] {
            if let Some(&(mode, pol)) = branches.get(slot) {
                if pol != want {
                    w.hwp(mode, 45.0);
                }
                routes.push((mode, want, target));
            }
        }
        if !routes.is_empty() {
            w.pbs(&routes);
        }
        w.hwp(target, 22.5);
        merged.push(target);
    }
    let mut stride = 1;
    while stride < spatial {
        for i in (0..spatial).filter(|i| i & stride == 0) {
            let (a, b) = (merged[i], merged[i | stride]);
            let out = (w.fresh(), w.fresh());
            w.mixer(a, b, out, MixerKind::Bs);
            merged[i] = out.0;
            merged[i | stride] = out.1;
        }
        stride <<= 1;
    }
    let names: Vec<String> = (1..=outputs).map(|q| format!("D{q}")).collect();
    let detectors: Vec<(SpatialMode, Polarization, &str)> = merged
        .iter()
        .enumerate()
        .flat_map(|(q, &mode)| [(mode, H, names[2 * q].as_str()), (mode, V, names[2 * q + 1].as_str())])
        .collect();
    w.detect(&detectors);

    let mut circuit = w.finish("klmN", n, plus_input(n, input, V), FeedforwardRule::new())?;
    circuit.feedforward = ideal_feedforward(&circuit)?;
    circuit.validate()?;
    Ok(circuit)
}

/// Feedforward table read off an ideal (r = −1) run of the circuit.
pub fn ideal_feedforward(circuit: &Circuit) -> Result<FeedforwardRule> {
    let env = Environment::new(EmitterParams::ideal());
    let run = execute(circuit, &circuit.initial_state()?, &env, false)?;
    let mut rules = FeedforwardRule::new();
    for o in &run.outcomes {
        let r = derive_feedforward(&o.state).ok_or_else(|| {
            Error::InvalidCircuit(format!(
                "detector {} does not herald a signed domain-wall superposition",
                o.detector
            ))
        })?;
        rules.insert(o.detector.clone(), r);
    }
    Ok(rules)
}

pub fn build(kind: ProtocolKind, params: &ProtocolParams) -> Result<Circuit> {
    match kind {
        ProtocolKind::TwoQubit => build_two_qubit(params),
        ProtocolKind::ThreeQubit => build_three_qubit(params),
        ProtocolKind::General => build_n_qubit(params),
    }
}

/// One heralded detector click after feedforward.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedOutcome {
    pub detector: DetectorId,
    pub probability: f64,
    /// Conditioned emitter state in the ± basis, canonical phase.
    pub conditioned: EmitterState,
    /// After feedforward (equal to `conditioned` if no rule exists), canonical phase.
    pub corrected: EmitterState,
    pub correction: Option<Vec<Correction>>,
    /// |⟨KLM_N|corrected⟩|², when N ≥ 2.
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub circuit_name: String,
    pub n: usize,
    pub outcomes: Vec<HeraldedOutcome>,
    pub sinks: BTreeMap<SinkId, f64>,
}

impl ProtocolRun {
    /// Σ_q P(D_q).
    pub fn success_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    pub fn sink_total(&self) -> f64 {
        self.sinks.values().sum()
    }

    /// Herald-weighted mean fidelity of the corrected states.
    pub fn weighted_fidelity(&self) -> Result<f64> {
        let total = self.success_probability();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::UndefinedFidelity);
        }
        let acc: f64 = self
            .outcomes
            .iter()
            .map(|o| o.probability * o.fidelity.unwrap_or(f64::NAN))
            .sum();
        Ok(acc / total)
    }
}

/// Executes any circuit and post-processes its detector outcomes.
pub fn run_circuit(circuit: &Circuit, env: &Environment) -> Result<ProtocolRun> {
    let exec = execute(circuit, &circuit.initial_state()?, env, false)?;
    let target = (circuit.n_emitters >= 2)
        .then(|| klm_target(circuit.n_emitters))
        .transpose()?;
    let outcomes = exec
        .outcomes
        .into_iter()
        .map(|o| {
            let conditioned = o.state.to_basis(Basis::PlusMinus).with_canonical_phase();
            let correction = circuit.feedforward.get(&o.detector).cloned();
            let corrected = match &correction {
                Some(r) => apply_feedforward(&conditioned, r).with_canonical_phase(),
                None => conditioned.clone(),
            };
            let fidelity = target.as_ref().map(|t| t.fidelity(&corrected));
            HeraldedOutcome {
                detector: o.detector,
                probability: o.probability,
                conditioned,
                corrected,
                correction,
                fidelity,
            }
        })
        .collect();
    Ok(ProtocolRun {
        circuit_name: circuit.name.clone(),
        n: circuit.n_emitters,
        outcomes,
        sinks: exec.sinks,
    })
}

pub fn run_protocol(params: &ProtocolParams, kind: ProtocolKind) -> Result<ProtocolRun> {
    let circuit = build(kind, params)?;
    run_circuit(&circuit, &params.environment())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pm(n: usize, terms: &[(&str, f64)]) -> EmitterState {
        let mut s = EmitterState::new(n, Basis::PlusMinus);
        for (label, a) in terms {
            let labels: Vec<PmLabel> = label.chars().map(|c| PmLabel::from_symbol(c).unwrap()).collect();
            s.amps
                .insert(EmitterConfig::from_pm_labels(&labels), Complex64::new(*a, 0.0));
        }
        s
    }

    #[test]
    fn targets() {
        let k = 1.0 / 3f64.sqrt();
        let t2 = klm_target(2).unwrap();
        assert_eq!(t2.state, pm(2, &[("++", k), ("+-", k), ("--", k)]));
        let t3 = klm_target(3).unwrap();
        assert_eq!(
            t3.state,
            pm(3, &[("+++", 0.5), ("++-", 0.5), ("+--", 0.5), ("---", 0.5)])
        );
        for n in 2..=10 {
            let t = klm_target(n).unwrap();
            assert_eq!(t.state.amps.len(), n + 1);
            assert_abs_diff_eq!(t.state.norm_sqr(), 1.0, epsilon = 1e-14);
        }
        assert!(klm_target(1).is_err());
    }

    #[test]
    fn feedforward_flips() {
        let s = pm(2, &[("-+", 1.0)]);
        let out = apply_feedforward(&s, &rule("ZI"));
        assert_eq!(out, pm(2, &[("-+", -1.0)]));
    }

    #[test]
    fn table_rows_corrected() {
        let k = 1.0 / 3f64.sqrt();
        let target = klm_target(2).unwrap();
        // D2 row under σz ⊗ I
        let d2 = pm(2, &[("++", k), ("+-", k), ("--", -k)]);
        assert_abs_diff_eq!(
            target.fidelity(&apply_feedforward(&d2, &rule("ZI"))),
            1.0,
            epsilon = 1e-14
        );
        // three-emitter D3 row under σz ⊗ σz ⊗ σz
        let d3 = pm(3, &[("+++", -0.5), ("++-", 0.5), ("+--", -0.5), ("---", 0.5)]);
        let t3 = klm_target(3).unwrap();
        assert_abs_diff_eq!(t3.fidelity(&apply_feedforward(&d3, &rule("ZZZ"))), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn derived_feedforward_matches_tables() {
        let k = 1.0 / 3f64.sqrt();
        let rows2 = [
            (pm(2, &[("++", k), ("+-", k), ("--", k)]), "II"),
            (pm(2, &[("++", k), ("+-", k), ("--", -k)]), "ZI"),
            (pm(2, &[("++", k), ("+-", -k), ("--", k)]), "ZZ"),
            (pm(2, &[("++", k), ("+-", -k), ("--", -k)]), "IZ"),
        ];
        for (state, expect) in rows2 {
            assert_eq!(derive_feedforward(&state).unwrap(), rule(expect));
        }
        let rows3 = [
            (pm(3, &[("+++", 1.), ("++-", -1.), ("+--", -1.), ("---", 1.)]), "ZIZ"),
            (pm(3, &[("+++", 1.), ("++-", -1.), ("+--", 1.), ("---", -1.)]), "ZZZ"),
            (pm(3, &[("+++", 1.), ("++-", 1.), ("+--", -1.), ("---", -1.)]), "IZI"),
        ];
        for (state, expect) in rows3 {
            assert_eq!(derive_feedforward(&state).unwrap(), rule(expect));
        }
        assert!(derive_feedforward(&pm(2, &[("-+", 1.0)])).is_none());
    }

    #[test]
    fn builders_reject_wrong_n() {
        let ideal = EmitterParams::ideal();
        assert!(build_two_qubit(&ProtocolParams::new(3, ideal)).is_err());
        assert!(build_three_qubit(&ProtocolParams::new(2, ideal)).is_err());
        assert!(build_n_qubit(&ProtocolParams::new(1, ideal)).is_err());
        assert!(ProtocolParams::new(2, ideal)
            .with_offsets(vec![0.1])
            .validate()
            .is_err());
    }

    #[test]
    fn general_detector_counts() {
        assert_eq!(general_detector_count(2), 4);
        assert_eq!(general_detector_count(3), 4);
        assert_eq!(general_detector_count(4), 8);
        assert_eq!(general_detector_count(7), 8);
        assert_eq!(general_detector_count(8), 16);
    }

    #[test]
    fn protocol_names_round_trip() {
        for k in [ProtocolKind::TwoQubit, ProtocolKind::ThreeQubit, ProtocolKind::General] {
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("klm4".parse::<ProtocolKind>().is_err());
    }
}
