//! Single photon ⊗ N emitter qubits, stored as a sparse amplitude map.
//!
//! Amplitudes live in the emitter energy basis {g+, g−} while the photon is
//! propagating, because emitter scattering is diagonal there. Discarded
//! branches (herald-error detectors, attenuator and free-space loss) are kept
//! only as accumulated probabilities in named sinks.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scatter::{PolarizationMatrix, ScatterCoeffs};

/// Largest emitter register the dense basis change will expand.
pub const MAX_EMITTERS: usize = 20;

/// Outcomes whose probability falls below this are not reported.
pub const DETECTOR_THRESHOLD: f64 = 1e-14;

/// Amplitudes with |a|² below this are pruned after every operation.
const PRUNE: f64 = 1e-28;

const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }

    fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpatialMode(pub u32);

impl fmt::Display for SpatialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which single-emitter basis the configuration bits refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// Bit clear = g+, bit set = g−.
    Energy,
    /// Bit clear = |+⟩, bit set = |−⟩.
    PlusMinus,
}

/// Label of one emitter in the ± basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PmLabel {
    Plus,
    Minus,
}

impl PmLabel {
    pub fn symbol(self) -> char {
        match self {
            PmLabel::Plus => '+',
            PmLabel::Minus => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(PmLabel::Plus),
            '-' => Some(PmLabel::Minus),
            _ => None,
        }
    }
}

/// Emitter register configuration; bit `i` is the label of emitter `i` (e_{i+1}).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EmitterConfig(pub u64);

impl EmitterConfig {
    pub fn bit(self, emitter: usize) -> bool {
        self.0 >> emitter & 1 == 1
    }

    /// Textual form, emitter 0 first: `u`/`d` for g+/g− or `+`/`-`.
    pub fn label(self, n: usize, basis: Basis) -> String {
        let (zero, one) = match basis {
            Basis::Energy => ('u', 'd'),
            Basis::PlusMinus => ('+', '-'),
        };
        (0..n).map(|i| if self.bit(i) { one } else { zero }).collect()
    }

    pub fn from_pm_labels(labels: &[PmLabel]) -> Self {
        let bits = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == PmLabel::Minus)
            .fold(0u64, |acc, (i, _)| acc | 1 << i);
        EmitterConfig(bits)
    }
}

/// Identity of an accounting sink (D′ monitor, attenuator, free-space loss).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SinkId(pub String);

impl SinkId {
    pub fn new(name: impl Into<String>) -> Self {
        SinkId(name.into())
    }
}

impl Ord for SinkId {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for SinkId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Name of an output single-photon detector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DetectorId(pub String);

impl DetectorId {
    pub fn new(name: impl Into<String>) -> Self {
        DetectorId(name.into())
    }
}

impl Ord for DetectorId {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for DetectorId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Orders "D2" before "D10": runs of ASCII digits compare numerically.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let la = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let lb = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (da, db) = (trim_zeros(&a[..la]), trim_zeros(&b[..lb]));
                let ord = da.len().cmp(&db.len()).then_with(|| da.cmp(db)).then(la.cmp(&lb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[la..];
                b = &b[lb..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(digits: &[u8]) -> &[u8] {
    let start = digits.iter().position(|&d| d != b'0').unwrap_or(digits.len());
    &digits[start..]
}

/// Key of one amplitude in the sparse map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub mode: SpatialMode,
    pub pol: Polarization,
    pub config: EmitterConfig,
}

impl Slot {
    pub fn new(mode: SpatialMode, pol: Polarization, config: EmitterConfig) -> Self {
        Slot { mode, pol, config }
    }
}

/// Normalized (or unnormalized) state of the emitter register alone.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterState {
    pub n: usize,
    pub basis: Basis,
    pub amps: BTreeMap<EmitterConfig, Complex64>,
}

impl EmitterState {
    pub fn new(n: usize, basis: Basis) -> Self {
        EmitterState {
            n,
            basis,
            amps: BTreeMap::new(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            for a in self.amps.values_mut() {
                *a /= norm;
            }
        }
        self
    }

    pub fn amplitude(&self, config: EmitterConfig) -> Complex64 {
        self.amps.get(&config).copied().unwrap_or_default()
    }

    pub fn to_basis(&self, target: Basis) -> EmitterState {
        if target == self.basis {
            return self.clone();
        }
        let mut dense = vec![Complex64::new(0.0, 0.0); 1usize << self.n];
        for (c, a) in &self.amps {
            dense[c.0 as usize] = *a;
        }
        hadamard_all(&mut dense, self.n);
        let mut out = EmitterState::new(self.n, target);
        for (i, a) in dense.into_iter().enumerate() {
            if a.norm_sqr() >= PRUNE {
                out.amps.insert(EmitterConfig(i as u64), a);
            }
        }
        out
    }

    /// ⟨self|other⟩, computed in `self`'s basis.
    pub fn inner(&self, other: &EmitterState) -> Complex64 {
        let other = other.to_basis(self.basis);
        self.amps.iter().map(|(c, a)| a.conj() * other.amplitude(*c)).sum()
    }

    /// |⟨self|other⟩|² of the two normalized states.
    pub fn fidelity(&self, other: &EmitterState) -> f64 {
        let a = self.clone().normalized();
        let b = other.clone().normalized();
        a.inner(&b).norm_sqr()
    }

    /// Multiplies by a global phase so the all-|+⟩ (or all-g+) amplitude is real and ≥ 0.
    pub fn with_canonical_phase(mut self) -> Self {
        let reference = self
            .amps
            .get(&EmitterConfig(0))
            .copied()
            .filter(|a| a.norm() > 1e-12)
            .or_else(|| self.amps.values().copied().find(|a| a.norm() > 1e-12));
        if let Some(a) = reference {
            let phase = a.conj() / a.norm();
            for v in self.amps.values_mut() {
                *v *= phase;
            }
        }
        self
    }
}

impl fmt::Display for EmitterState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, a) in &self.amps {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "({:+.6}{:+.6}i)|{}>", a.re, a.im, c.label(self.n, self.basis))?;
        }
        Ok(())
    }
}

/// In-place per-emitter Hadamard on a dense 2^n vector.
fn hadamard_all(v: &mut [Complex64], n: usize) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for bit in 0..n {
        let stride = 1usize << bit;
        for i in 0..v.len() {
            if i & stride == 0 {
                let (a, b) = (v[i], v[i | stride]);
                v[i] = (a + b) * h;
                v[i | stride] = (a - b) * h;
            }
        }
    }
}

/// One detector click: probability and the normalized emitter state it leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutcome {
    pub detector: DetectorId,
    pub probability: f64,
    pub state: EmitterState,
}

/// The hybrid photon ⊗ emitter state plus probability sinks.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    n: usize,
    basis: Basis,
    amps: BTreeMap<Slot, Complex64>,
    sinks: BTreeMap<SinkId, f64>,
}

impl SystemState {
    /// Photon in one (mode, polarization) slot, emitters in a ± product state,
    /// expanded into the energy basis.
    pub fn new(n: usize, photon: (SpatialMode, Polarization), emitters: &[PmLabel]) -> Result<Self> {
        if n < 1 {
            return Err(Error::param("emitter count must be at least 1"));
        }
        if n > MAX_EMITTERS {
            return Err(Error::param(format!(
                "at most {MAX_EMITTERS} emitters are supported, got {n}"
            )));
        }
        if emitters.len() != n {
            return Err(Error::param(format!(
                "expected {n} emitter labels, got {}",
                emitters.len()
            )));
        }
        let pm = EmitterState {
            n,
            basis: Basis::PlusMinus,
            amps: BTreeMap::from([(EmitterConfig::from_pm_labels(emitters), Complex64::new(1.0, 0.0))]),
        };
        let energy = pm.to_basis(Basis::Energy);
        let amps = energy
            .amps
            .into_iter()
            .map(|(c, a)| (Slot::new(photon.0, photon.1, c), a))
            .collect();
        Ok(SystemState {
            n,
            basis: Basis::Energy,
            amps,
            sinks: BTreeMap::new(),
        })
    }

    /// Arbitrary (possibly unnormalized) state; zero amplitudes are dropped.
    pub fn from_amplitudes(n: usize, basis: Basis, amps: impl IntoIterator<Item = (Slot, Complex64)>) -> Result<Self> {
        if !(1..=MAX_EMITTERS).contains(&n) {
            return Err(Error::param(format!(
                "emitter count {n} out of range 1..={MAX_EMITTERS}"
            )));
        }
        let mut map = BTreeMap::new();
        for (slot, a) in amps {
            if slot.config.0 >> n != 0 {
                return Err(Error::param(format!(
                    "configuration {:#b} has bits beyond {n} emitters",
                    slot.config.0
                )));
            }
            if a.norm_sqr() >= PRUNE {
                *map.entry(slot).or_insert(Complex64::new(0.0, 0.0)) += a;
            }
        }
        Ok(SystemState {
            n,
            basis,
            amps: map,
            sinks: BTreeMap::new(),
        })
    }

    pub fn emitter_count(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn amplitudes(&self) -> &BTreeMap<Slot, Complex64> {
        &self.amps
    }

    pub fn amplitude(&self, slot: &Slot) -> Complex64 {
        self.amps.get(slot).copied().unwrap_or_default()
    }

    pub fn sinks(&self) -> &BTreeMap<SinkId, f64> {
        &self.sinks
    }

    pub fn photon_norm(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn sink_total(&self) -> f64 {
        self.sinks.values().sum()
    }

    /// Σ|amplitude|² + Σ sinks.
    pub fn total_norm(&self) -> f64 {
        self.photon_norm() + self.sink_total()
    }

    /// Probability mass carried by one spatial mode.
    pub fn mode_probability(&self, mode: SpatialMode) -> f64 {
        self.amps
            .iter()
            .filter(|(s, _)| s.mode == mode)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Spatial modes currently carrying amplitude, ascending.
    pub fn occupied_modes(&self) -> Vec<SpatialMode> {
        let mut modes: Vec<_> = self.amps.keys().map(|s| s.mode).collect();
        modes.dedup();
        modes
    }

    /// Linear combination α·self + β·other of the amplitudes (sinks are dropped).
    pub fn superpose(&self, alpha: Complex64, other: &SystemState, beta: Complex64) -> Result<Self> {
        if self.n != other.n || self.basis != other.basis {
            return Err(Error::op("superposed states must share emitter count and basis"));
        }
        let terms = self
            .amps
            .iter()
            .map(|(s, a)| (*s, alpha * a))
            .chain(other.amps.iter().map(|(s, a)| (*s, beta * a)));
        SystemState::from_amplitudes(self.n, self.basis, terms)
    }

    fn add_sink(&mut self, sink: &SinkId, p: f64) {
        *self.sinks.entry(sink.clone()).or_insert(0.0) += p;
    }

    fn insert_new(map: &mut BTreeMap<Slot, Complex64>, slot: Slot, a: Complex64) -> Result<()> {
        if a.norm_sqr() < PRUNE {
            return Ok(());
        }
        if map.insert(slot, a).is_some() {
            return Err(Error::op(format!(
                "two branches collide in mode {} polarization {}",
                slot.mode, slot.pol
            )));
        }
        Ok(())
    }

    /// Mixes the H/V amplitudes carried by `mode`.
    pub fn apply_polarization_unitary(&mut self, mode: SpatialMode, m: &PolarizationMatrix) -> Result<()> {
        if !m.is_unitary(UNITARY_TOL) {
            return Err(Error::op(format!(
                "polarization matrix is not unitary (deviation {:.3e})",
                m.unitarity_error()
            )));
        }
        let mut groups: BTreeMap<EmitterConfig, [Complex64; 2]> = BTreeMap::new();
        self.amps.retain(|s, a| {
            if s.mode == mode {
                groups.entry(s.config).or_default()[s.pol.index()] = *a;
                false
            } else {
                true
            }
        });
        for (config, v) in groups {
            let out = m.apply(v);
            for (pol, a) in [(Polarization::H, out[0]), (Polarization::V, out[1])] {
                if a.norm_sqr() >= PRUNE {
                    self.amps.insert(Slot::new(mode, pol, config), a);
                }
            }
        }
        Ok(())
    }

    /// Two-port spatial mixer: the input amplitudes (a, b) become
    /// (u00·a + u01·b, u10·a + u11·b) on the output modes, per polarization and configuration.
    pub fn apply_mode_mixer(
        &mut self,
        a: SpatialMode,
        b: SpatialMode,
        outputs: (SpatialMode, SpatialMode),
        u: &PolarizationMatrix,
    ) -> Result<()> {
        if a == b {
            return Err(Error::op(format!("mixer input ports must differ, both are mode {a}")));
        }
        if outputs.0 == outputs.1 {
            return Err(Error::op(format!(
                "mixer output ports must differ, both are mode {}",
                outputs.0
            )));
        }
        if !u.is_unitary(UNITARY_TOL) {
            return Err(Error::op(format!(
                "mixer matrix is not unitary (deviation {:.3e})",
                u.unitarity_error()
            )));
        }
        let mut groups: BTreeMap<(Polarization, EmitterConfig), [Complex64; 2]> = BTreeMap::new();
        self.amps.retain(|s, amp| {
            let port = if s.mode == a {
                0
            } else if s.mode == b {
                1
            } else {
                return true;
            };
            groups.entry((s.pol, s.config)).or_default()[port] = *amp;
            false
        });
        for ((pol, config), v) in groups {
            let out = u.apply(v);
            Self::insert_new(&mut self.amps, Slot::new(outputs.0, pol, config), out[0])?;
            Self::insert_new(&mut self.amps, Slot::new(outputs.1, pol, config), out[1])?;
        }
        Ok(())
    }

    /// Polarization-conditioned relabeling of spatial modes; unrouted slots stay put.
    pub fn apply_pbs(&mut self, routing: &BTreeMap<(SpatialMode, Polarization), SpatialMode>) -> Result<()> {
        let old = std::mem::take(&mut self.amps);
        for (s, a) in old {
            let mode = routing.get(&(s.mode, s.pol)).copied().unwrap_or(s.mode);
            Self::insert_new(&mut self.amps, Slot::new(mode, s.pol, s.config), a)?;
        }
        Ok(())
    }

    /// Moves everything in `from` to `to` without any phase.
    pub fn apply_mirror(&mut self, from: SpatialMode, to: SpatialMode) -> Result<()> {
        let routing = BTreeMap::from([((from, Polarization::H), to), ((from, Polarization::V), to)]);
        self.apply_pbs(&routing)
    }

    /// Multiplies the amplitudes in `mode` by `c`; the removed probability goes to `sink`.
    pub fn apply_attenuator(&mut self, mode: SpatialMode, c: Complex64, sink: &SinkId) -> Result<()> {
        if c.norm().is_nan() || c.norm() > 1.0 + 1e-12 {
            return Err(Error::op(format!("attenuator coefficient |{c}| exceeds 1")));
        }
        let mut mass = 0.0;
        for (_, a) in self.amps.iter_mut().filter(|(s, _)| s.mode == mode) {
            mass += a.norm_sqr();
            *a *= c;
        }
        self.amps.retain(|_, a| a.norm_sqr() >= PRUNE);
        self.add_sink(sink, (1.0 - c.norm_sqr()).max(0.0) * mass);
        Ok(())
    }

    /// Scatters the photon in `in_mode` off `emitter`.
    ///
    /// The reflected branch picks up ±r (sign of the emitter's energy label),
    /// flips polarization and moves to `reflected_out`. Transmission and
    /// free-space loss, together 1 − |r|², are heralded into `herald_sink`.
    pub fn apply_emitter_scatter(
        &mut self,
        in_mode: SpatialMode,
        emitter: usize,
        coeffs: &ScatterCoeffs,
        reflected_out: SpatialMode,
        herald_sink: &SinkId,
    ) -> Result<()> {
        if emitter >= self.n {
            return Err(Error::op(format!(
                "emitter index {emitter} out of range for {} emitters",
                self.n
            )));
        }
        if self.basis != Basis::Energy {
            return Err(Error::op("emitter scattering requires the energy basis"));
        }
        let r = coeffs.r;
        let lost_fraction = (1.0 - r.norm_sqr()).max(0.0);
        let mut incident = Vec::new();
        self.amps.retain(|s, a| {
            if s.mode == in_mode {
                incident.push((*s, *a));
                false
            } else {
                true
            }
        });
        let mut mass = 0.0;
        for (s, a) in incident {
            mass += a.norm_sqr();
            let sign = if s.config.bit(emitter) { -1.0 } else { 1.0 };
            Self::insert_new(
                &mut self.amps,
                Slot::new(reflected_out, s.pol.flipped(), s.config),
                a * r * sign,
            )?;
        }
        self.add_sink(herald_sink, lost_fraction * mass);
        Ok(())
    }

    /// Per-emitter Hadamard relabeling between {g+, g−} and {+, −}.
    pub fn change_basis(&mut self, target: Basis) {
        if target == self.basis {
            return;
        }
        let mut groups: BTreeMap<(SpatialMode, Polarization), EmitterState> = BTreeMap::new();
        for (s, a) in std::mem::take(&mut self.amps) {
            groups
                .entry((s.mode, s.pol))
                .or_insert_with(|| EmitterState::new(self.n, self.basis))
                .amps
                .insert(s.config, a);
        }
        for ((mode, pol), st) in groups {
            for (c, a) in st.to_basis(target).amps {
                self.amps.insert(Slot::new(mode, pol, c), a);
            }
        }
        self.basis = target;
    }

    /// Projects onto each detector's slot. Every occupied slot must be covered.
    pub fn measure_detector_bank(
        &self,
        bank: &BTreeMap<(SpatialMode, Polarization), DetectorId>,
    ) -> Result<Vec<DetectorOutcome>> {
        let mut per_detector: BTreeMap<&DetectorId, EmitterState> = BTreeMap::new();
        for (s, a) in &self.amps {
            let det = bank.get(&(s.mode, s.pol)).ok_or_else(|| {
                Error::op(format!(
                    "no detector covers mode {} polarization {} (probability {:.3e})",
                    s.mode,
                    s.pol,
                    a.norm_sqr()
                ))
            })?;
            let st = per_detector
                .entry(det)
                .or_insert_with(|| EmitterState::new(self.n, self.basis));
            *st.amps.entry(s.config).or_default() += a;
        }
        Ok(per_detector
            .into_iter()
            .filter_map(|(det, st)| {
                let p = st.norm_sqr();
                (p >= DETECTOR_THRESHOLD).then(|| DetectorOutcome {
                    detector: det.clone(),
                    probability: p,
                    state: st.normalized(),
                })
            })
            .collect())
    }

    /// One line per slot, `mode,pol,config,re,im`, in slot order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (s, a) in &self.amps {
            let _ = writeln!(
                out,
                "{},{},{},{:.15e},{:.15e}",
                s.mode,
                s.pol,
                s.config.label(self.n, self.basis),
                a.re,
                a.im
            );
        }
        out
    }
}
