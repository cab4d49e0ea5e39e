//! Straight-line optical circuits and their executor.
//!
//! A circuit is an ordered list of placed components acting on labeled
//! spatial modes. Loops in a physical setup (a photon returning through the
//! same PBS) are unrolled into separate components with explicit
//! intermediate modes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scatter::{hwp_matrix, scatter_coeffs, EmitterParams, PolarizationMatrix, ScatterCoeffs};
use crate::state::{
    Basis, DetectorId, DetectorOutcome, EmitterConfig, PmLabel, Polarization, SinkId, Slot, SpatialMode, SystemState,
};

/// Two-port spatial mixer conventions.
#[derive(Debug, Clone, PartialEq)]
pub enum MixerKind {
    /// u → (u + l)/√2, l → (u − l)/√2.
    Bs,
    /// u → (l − u)/√2, l → (u + l)/√2.
    BsPrime,
    /// Stage `k` of an `n`-emitter peeling chain: l → c·u + s·l, u → c·l − s·u
    /// with c² = 1/(n + 2 − k).
    Vbs {
        k: usize,
        n: usize,
    },
    Custom(PolarizationMatrix),
}

impl MixerKind {
    /// Matrix with rows = outputs (u, l) and columns = inputs (u, l).
    pub fn matrix(&self) -> Result<PolarizationMatrix> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Ok(match self {
            MixerKind::Bs => PolarizationMatrix::real([[h, h], [h, -h]]),
            MixerKind::BsPrime => PolarizationMatrix::real([[-h, h], [h, h]]),
            MixerKind::Vbs { k, n } => {
                if *k < 1 || k > n {
                    return Err(Error::param(format!("VBS stage {k} out of range 1..={n}")));
                }
                let ways = (n + 2 - k) as f64;
                let c = 1.0 / ways.sqrt();
                let s = ((ways - 1.0) / ways).sqrt();
                PolarizationMatrix::real([[-s, c], [c, s]])
            }
            MixerKind::Custom(m) => *m,
        })
    }
}

/// Attenuator transmission, either fixed or r_nom^j of the nominal emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Fixed(Complex64),
    RNomPow(u32),
}

impl Coefficient {
    pub fn resolve(&self, r_nom: Complex64) -> Complex64 {
        match *self {
            Coefficient::Fixed(c) => c,
            Coefficient::RNomPow(j) => r_nom.powu(j),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Pbs {
        routing: BTreeMap<(SpatialMode, Polarization), SpatialMode>,
    },
    Mixer {
        a: SpatialMode,
        b: SpatialMode,
        out: (SpatialMode, SpatialMode),
        kind: MixerKind,
    },
    Hwp {
        mode: SpatialMode,
        theta: f64,
    },
    Attenuator {
        mode: SpatialMode,
        coefficient: Coefficient,
        sink: SinkId,
    },
    EmitterScatter {
        in_mode: SpatialMode,
        emitter: usize,
        reflected_out: SpatialMode,
        sink: SinkId,
    },
    Mirror {
        from: SpatialMode,
        to: SpatialMode,
    },
    DetectorBank {
        detectors: BTreeMap<(SpatialMode, Polarization), DetectorId>,
    },
}

impl Component {
    pub fn kind(&self) -> &'static str {
        match self {
            Component::Pbs { .. } => "pbs",
            Component::Mixer { .. } => "mixer",
            Component::Hwp { .. } => "hwp",
            Component::Attenuator { .. } => "attenuator",
            Component::EmitterScatter { .. } => "scatter",
            Component::Mirror { .. } => "mirror",
            Component::DetectorBank { .. } => "detect",
        }
    }

    /// Every mode this component reads or writes.
    pub fn modes(&self) -> Vec<SpatialMode> {
        match self {
            Component::Pbs { routing } => routing.iter().flat_map(|((m, _), o)| [*m, *o]).collect(),
            Component::Mixer { a, b, out, .. } => vec![*a, *b, out.0, out.1],
            Component::Hwp { mode, .. } | Component::Attenuator { mode, .. } => vec![*mode],
            Component::EmitterScatter {
                in_mode, reflected_out, ..
            } => vec![*in_mode, *reflected_out],
            Component::Mirror { from, to } => vec![*from, *to],
            Component::DetectorBank { detectors } => detectors.keys().map(|(m, _)| *m).collect(),
        }
    }

    pub fn sink(&self) -> Option<&SinkId> {
        match self {
            Component::Attenuator { sink, .. } | Component::EmitterScatter { sink, .. } => Some(sink),
            _ => None,
        }
    }

    /// Lossless linear-optical element.
    pub fn is_passive(&self) -> bool {
        matches!(
            self,
            Component::Pbs { .. } | Component::Mixer { .. } | Component::Hwp { .. } | Component::Mirror { .. }
        )
    }
}

/// Per-emitter classical correction in the ± basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Correction {
    I,
    Z,
}

impl Correction {
    pub fn symbol(self) -> char {
        match self {
            Correction::I => 'I',
            Correction::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'I' | 'i' => Some(Correction::I),
            'Z' | 'z' => Some(Correction::Z),
            _ => None,
        }
    }
}

/// Detector → per-emitter correction (emitter 0 first).
pub type FeedforwardRule = BTreeMap<DetectorId, Vec<Correction>>;

/// Where the ancilla photon enters and how the emitters are prepared.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonInput {
    pub mode: SpatialMode,
    pub pol: Polarization,
    pub emitters: Vec<PmLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub name: String,
    pub n_emitters: usize,
    /// Declared modes, in declaration order.
    pub modes: Vec<SpatialMode>,
    pub input: PhotonInput,
    pub components: Vec<Component>,
    pub feedforward: FeedforwardRule,
}

impl Circuit {
    pub fn detector_bank(&self) -> Option<&BTreeMap<(SpatialMode, Polarization), DetectorId>> {
        self.components.iter().find_map(|c| match c {
            Component::DetectorBank { detectors } => Some(detectors),
            _ => None,
        })
    }

    /// Detector ids in natural order.
    pub fn detectors(&self) -> Vec<DetectorId> {
        let mut ids: Vec<_> = self
            .detector_bank()
            .map(|b| b.values().cloned().collect())
            .unwrap_or_default();
        ids.sort();
        ids
    }

    pub fn initial_state(&self) -> Result<SystemState> {
        SystemState::new(self.n_emitters, (self.input.mode, self.input.pol), &self.input.emitters)
    }

    /// Full structural check, including the single trailing detector bank.
    pub fn validate(&self) -> Result<()> {
        self.validate_wiring()?;
        let banks = self
            .components
            .iter()
            .filter(|c| matches!(c, Component::DetectorBank { .. }))
            .count();
        if banks != 1 {
            return Err(Error::InvalidCircuit(format!(
                "expected exactly one detector bank, found {banks}"
            )));
        }
        Ok(())
    }

    /// Checks everything except the presence of a detector bank.
    pub fn validate_wiring(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidCircuit(msg));
        if self.n_emitters < 1 {
            return invalid("emitter count must be at least 1".into());
        }
        if self.input.emitters.len() != self.n_emitters {
            return invalid(format!(
                "input prepares {} emitters, circuit declares {}",
                self.input.emitters.len(),
                self.n_emitters
            ));
        }
        let declared: BTreeSet<_> = self.modes.iter().copied().collect();
        if declared.len() != self.modes.len() {
            return invalid("duplicate mode declaration".into());
        }
        if !declared.contains(&self.input.mode) {
            return invalid(format!("input mode {} is not declared", self.input.mode));
        }
        let mut sinks = BTreeSet::new();
        let last = self.components.len().saturating_sub(1);
        for (i, c) in self.components.iter().enumerate() {
            if let Some(m) = c.modes().into_iter().find(|m| !declared.contains(m)) {
                return invalid(format!("component {i} ({}) uses undeclared mode {m}", c.kind()));
            }
            if let Some(s) = c.sink() {
                if !sinks.insert(s.clone()) {
                    return invalid(format!("sink {s} is declared twice"));
                }
            }
            match c {
                Component::EmitterScatter { emitter, .. } if *emitter >= self.n_emitters => {
                    return invalid(format!(
                        "component {i} scatters off emitter {emitter} but only {} exist",
                        self.n_emitters
                    ));
                }
                Component::DetectorBank { detectors } => {
                    if i != last {
                        return invalid(format!("detector bank at component {i} is not the final component"));
                    }
                    let ids: BTreeSet<_> = detectors.values().collect();
                    if ids.len() != detectors.len() {
                        return invalid("a detector id is bound to more than one slot".into());
                    }
                }
                Component::Mixer { kind, .. } => {
                    kind.matrix()?;
                }
                _ => {}
            }
        }
        let detectors: BTreeSet<_> = self.detectors().into_iter().collect();
        for (det, rule) in &self.feedforward {
            if !detectors.contains(det) {
                return invalid(format!("feedforward names unknown detector {det}"));
            }
            if rule.len() != self.n_emitters {
                return invalid(format!(
                    "feedforward for {det} has {} entries, expected {}",
                    rule.len(),
                    self.n_emitters
                ));
            }
        }
        Ok(())
    }
}

/// Physical parameters a circuit is executed against.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    /// Calibration point; also the source of every `rnom^j` attenuator.
    pub nominal: EmitterParams,
    /// Per-emitter inhomogeneous offsets δ_i/γ_1D; empty means all zero.
    pub offsets: Vec<f64>,
}

impl Environment {
    pub fn new(nominal: EmitterParams) -> Self {
        Environment {
            nominal,
            offsets: Vec::new(),
        }
    }

    pub fn with_offsets(nominal: EmitterParams, offsets: Vec<f64>) -> Self {
        Environment { nominal, offsets }
    }

    pub fn r_nom(&self) -> Result<Complex64> {
        Ok(scatter_coeffs(&self.nominal)?.r)
    }

    /// Coefficients of each of `n` emitters.
    pub fn emitter_coeffs(&self, n: usize) -> Result<Vec<ScatterCoeffs>> {
        if !self.offsets.is_empty() && self.offsets.len() != n {
            return Err(Error::param(format!(
                "{} offsets given for {n} emitters",
                self.offsets.len()
            )));
        }
        (0..n)
            .map(|i| {
                let offset = self.offsets.get(i).copied().unwrap_or(0.0);
                scatter_coeffs(&self.nominal.with_offset(self.nominal.offset + offset))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub index: usize,
    pub kind: &'static str,
    pub state: SystemState,
}

/// State snapshot after every component.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionTrace {
    pub steps: Vec<TraceStep>,
}

impl ExecutionTrace {
    /// Snapshot right after component `index`.
    pub fn after(&self, index: usize) -> Option<&SystemState> {
        self.steps.iter().find(|s| s.index == index).map(|s| &s.state)
    }

    /// One block per step: a `# step <i> <kind>` header followed by the state dump.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            let _ = writeln!(out, "# step {} {}", step.index, step.kind);
            out.push_str(&step.state.dump());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    /// State just before detection (after the last non-detector component).
    pub final_state: SystemState,
    pub outcomes: Vec<DetectorOutcome>,
    pub sinks: BTreeMap<SinkId, f64>,
    pub trace: Option<ExecutionTrace>,
}

impl Execution {
    pub fn herald_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    pub fn sink_total(&self) -> f64 {
        self.sinks.values().sum()
    }
}

fn apply_component(
    state: &mut SystemState,
    component: &Component,
    coeffs: &[ScatterCoeffs],
    r_nom: Complex64,
) -> Result<Option<Vec<DetectorOutcome>>> {
    match component {
        Component::Pbs { routing } => state.apply_pbs(routing)?,
        Component::Mixer { a, b, out, kind } => state.apply_mode_mixer(*a, *b, *out, &kind.matrix()?)?,
        Component::Hwp { mode, theta } => state.apply_polarization_unitary(*mode, &hwp_matrix(*theta))?,
        Component::Attenuator {
            mode,
            coefficient,
            sink,
        } => state.apply_attenuator(*mode, coefficient.resolve(r_nom), sink)?,
        Component::EmitterScatter {
            in_mode,
            emitter,
            reflected_out,
            sink,
        } => {
            let c = coeffs
                .get(*emitter)
                .ok_or_else(|| Error::op(format!("emitter index {emitter} out of range")))?;
            state.apply_emitter_scatter(*in_mode, *emitter, c, *reflected_out, sink)?
        }
        Component::Mirror { from, to } => state.apply_mirror(*from, *to)?,
        Component::DetectorBank { detectors } => return state.measure_detector_bank(detectors).map(Some),
    }
    Ok(None)
}

/// Runs `circuit` on `initial`, optionally recording a snapshot after every component.
pub fn execute(circuit: &Circuit, initial: &SystemState, env: &Environment, trace: bool) -> Result<Execution> {
    circuit.validate_wiring()?;
    if initial.emitter_count() != circuit.n_emitters {
        return Err(Error::param(format!(
            "initial state has {} emitters, circuit expects {}",
            initial.emitter_count(),
            circuit.n_emitters
        )));
    }
    let coeffs = env.emitter_coeffs(circuit.n_emitters)?;
    let r_nom = env.r_nom()?;
    let mut state = initial.clone();
    if state.basis() != Basis::Energy {
        state.change_basis(Basis::Energy);
    }
    let mut steps = trace.then(Vec::new);
    let mut outcomes = Vec::new();
    for (index, component) in circuit.components.iter().enumerate() {
        let wrap = |e: Error| Error::Component {
            index,
            kind: component.kind(),
            source: Box::new(e),
        };
        if let Some(out) = apply_component(&mut state, component, &coeffs, r_nom).map_err(wrap)? {
            outcomes = out;
        }
        if let Some(steps) = steps.as_mut() {
            steps.push(TraceStep {
                index,
                kind: component.kind(),
                state: state.clone(),
            });
        }
    }
    Ok(Execution {
        sinks: state.sinks().clone(),
        final_state: state,
        outcomes,
        trace: steps.map(|steps| ExecutionTrace { steps }),
    })
}

/// Result of sweeping one component over its input basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PassivityEntry {
    pub index: usize,
    pub kind: &'static str,
    /// `false` for attenuators, scatterers and detectors, which are not checked.
    pub passive: bool,
    /// Largest deviation of the output Gram matrix from the identity.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PassivityReport {
    pub entries: Vec<PassivityEntry>,
}

impl PassivityReport {
    pub fn violations(&self, tol: f64) -> Vec<&PassivityEntry> {
        self.entries
            .iter()
            .filter(|e| e.passive && (e.deviation.is_nan() || e.deviation > tol))
            .collect()
    }

    pub fn non_passive(&self) -> Vec<&PassivityEntry> {
        self.entries.iter().filter(|e| !e.passive).collect()
    }
}

/// Applies every passive component to each basis slot of its input modes and
/// checks the images stay orthonormal.
pub fn check_passive_unitarity(circuit: &Circuit) -> PassivityReport {
    let mut report = PassivityReport::default();
    for (index, component) in circuit.components.iter().enumerate() {
        if !component.is_passive() {
            report.entries.push(PassivityEntry {
                index,
                kind: component.kind(),
                passive: false,
                deviation: 0.0,
            });
            continue;
        }
        let inputs: BTreeSet<SpatialMode> = match component {
            Component::Pbs { routing } => routing.keys().map(|(m, _)| *m).collect(),
            Component::Mixer { a, b, .. } => [*a, *b].into(),
            Component::Hwp { mode, .. } => [*mode].into(),
            Component::Mirror { from, .. } => [*from].into(),
            _ => BTreeSet::new(),
        };
        let mut images = Vec::new();
        let mut deviation: f64 = 0.0;
        for mode in &inputs {
            for pol in [Polarization::H, Polarization::V] {
                let slot = Slot::new(*mode, pol, EmitterConfig(0));
                let image = SystemState::from_amplitudes(1, Basis::Energy, [(slot, Complex64::new(1.0, 0.0))])
                    .and_then(|mut s| {
                        apply_component(&mut s, component, &[ScatterCoeffs::IDEAL], Complex64::new(-1.0, 0.0))?;
                        Ok(s)
                    });
                match image {
                    Ok(s) => images.push(s),
                    Err(_) => deviation = f64::INFINITY,
                }
            }
        }
        for (i, a) in images.iter().enumerate() {
            for (j, b) in images.iter().enumerate() {
                let overlap: Complex64 = a.amplitudes().iter().map(|(s, x)| x.conj() * b.amplitude(s)).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((overlap - expect).norm());
            }
        }
        report.entries.push(PassivityEntry {
            index,
            kind: component.kind(),
            passive: true,
            deviation,
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scatter::Purcell;
    use approx::assert_abs_diff_eq;

    fn m(i: u32) -> SpatialMode {
        SpatialMode(i)
    }

    fn bare(components: Vec<Component>, modes: &[u32]) -> Circuit {
        Circuit {
            name: "t".into(),
            n_emitters: 1,
            modes: modes.iter().map(|&i| m(i)).collect(),
            input: PhotonInput {
                mode: m(modes[0]),
                pol: Polarization::H,
                emitters: vec![PmLabel::Plus],
            },
            components,
            feedforward: FeedforwardRule::new(),
        }
    }

    fn heralded_z() -> Circuit {
        bare(
            vec![
                Component::EmitterScatter {
                    in_mode: m(1),
                    emitter: 0,
                    reflected_out: m(2),
                    sink: SinkId::new("D'1"),
                },
                Component::DetectorBank {
                    detectors: BTreeMap::from([
                        ((m(2), Polarization::V), DetectorId::new("D1")),
                        ((m(2), Polarization::H), DetectorId::new("D2")),
                    ]),
                },
            ],
            &[1, 2],
        )
    }

    #[test]
    fn vbs_matrices() {
        let three = 1.0 / 3f64.sqrt();
        let m = MixerKind::Vbs { k: 2, n: 3 }.matrix().unwrap();
        // l → (1/√3) u + (√2/√3) l
        assert_abs_diff_eq!(m.0[0][1].re, three, epsilon = 1e-15);
        assert_abs_diff_eq!(m.0[1][1].re, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert!(m.is_unitary(1e-14));
        assert!(MixerKind::Vbs { k: 0, n: 3 }.matrix().is_err());
        assert!(MixerKind::Vbs { k: 4, n: 3 }.matrix().is_err());
    }

    #[test]
    fn heralded_z_ideal() {
        let c = heralded_z();
        c.validate().unwrap();
        let init = c.initial_state().unwrap();
        let ex = execute(&c, &init, &Environment::new(EmitterParams::ideal()), false).unwrap();
        assert_eq!(ex.outcomes.len(), 1);
        let o = &ex.outcomes[0];
        assert_eq!(o.detector, DetectorId::new("D1"));
        assert_abs_diff_eq!(o.probability, 1.0, epsilon = 1e-15);
        let pm = o.state.to_basis(Basis::PlusMinus);
        assert_abs_diff_eq!(pm.amplitude(EmitterConfig(1)).norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn heralded_z_lossy_success_is_r_squared() {
        let c = heralded_z();
        let env = Environment::new(EmitterParams::new(Purcell::Finite(100.0), 0.1));
        let ex = execute(&c, &c.initial_state().unwrap(), &env, false).unwrap();
        assert_abs_diff_eq!(ex.herald_probability(), 0.943_307_235_166_493_7, epsilon = 1e-14);
        assert_abs_diff_eq!(ex.herald_probability() + ex.sink_total(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = bare(vec![], &[1]);
        let init = c.initial_state().unwrap();
        let ex = execute(&c, &init, &Environment::new(EmitterParams::ideal()), true).unwrap();
        assert_eq!(ex.final_state, init);
        assert!(ex.outcomes.is_empty());
        assert!(ex.trace.unwrap().steps.is_empty());
        assert!(c.validate().is_err());
    }

    #[test]
    fn errors_carry_component_index() {
        let c = bare(
            vec![
                Component::Hwp {
                    mode: m(1),
                    theta: 10.0,
                },
                Component::Attenuator {
                    mode: m(1),
                    coefficient: Coefficient::Fixed(Complex64::new(2.0, 0.0)),
                    sink: SinkId::new("T"),
                },
            ],
            &[1],
        );
        let err = execute(
            &c,
            &c.initial_state().unwrap(),
            &Environment::new(EmitterParams::ideal()),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Component { index: 1, .. }), "{err}");
    }

    #[test]
    fn validation_errors() {
        let mut c = heralded_z();
        c.modes = vec![m(1)];
        assert!(c.validate().is_err());

        let mut c = heralded_z();
        c.components.insert(
            0,
            Component::Attenuator {
                mode: m(1),
                coefficient: Coefficient::RNomPow(1),
                sink: SinkId::new("D'1"),
            },
        );
        assert!(c.validate().is_err(), "duplicate sink");

        let mut c = heralded_z();
        c.components.push(Component::Hwp { mode: m(2), theta: 0.0 });
        assert!(c.validate().is_err(), "bank not last");

        let mut c = heralded_z();
        c.feedforward.insert(DetectorId::new("D9"), vec![Correction::I]);
        assert!(c.validate().is_err(), "unknown detector in feedforward");
    }

    #[test]
    fn trace_on_off_identical() {
        let c = heralded_z();
        let init = c.initial_state().unwrap();
        let env = Environment::new(EmitterParams::new(Purcell::Finite(30.0), 0.2));
        let a = execute(&c, &init, &env, false).unwrap();
        let b = execute(&c, &init, &env, true).unwrap();
        assert_eq!(a.outcomes, b.outcomes);
        assert_eq!(a.sinks, b.sinks);
        let trace = b.trace.unwrap();
        assert_eq!(trace.steps.len(), 2);
        assert!(trace.export().starts_with("# step 0 scatter\n"));
    }

    #[test]
    fn passivity_report() {
        let bs = bare(
            vec![Component::Mixer {
                a: m(1),
                b: m(2),
                out: (m(1), m(2)),
                kind: MixerKind::Bs,
            }],
            &[1, 2],
        );
        let report = check_passive_unitarity(&bs);
        assert!(report.violations(1e-12).is_empty());
        assert_eq!(report.entries.len(), 1);

        let att = bare(
            vec![Component::Attenuator {
                mode: m(1),
                coefficient: Coefficient::Fixed(Complex64::new(0.9, 0.0)),
                sink: SinkId::new("T"),
            }],
            &[1],
        );
        let report = check_passive_unitarity(&att);
        assert_eq!(report.non_passive().len(), 1);
        assert!(report.violations(1e-12).is_empty());

        let broken = bare(
            vec![Component::Mixer {
                a: m(1),
                b: m(2),
                out: (m(1), m(2)),
                kind: MixerKind::Custom(PolarizationMatrix::real([[1.0, 0.0], [0.0, 0.5]])),
            }],
            &[1, 2],
        );
        assert_eq!(check_passive_unitarity(&broken).violations(1e-12).len(), 1);
    }
}
