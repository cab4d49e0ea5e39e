use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use wgklm_core::{Basis, EmitterParams, ProtocolRun, Purcell};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum PurcellValue {
    Finite(f64),
    Named(&'static str),
}

impl From<Purcell> for PurcellValue {
    fn from(p: Purcell) -> Self {
        match p {
            Purcell::Ideal => PurcellValue::Named("ideal"),
            Purcell::Finite(x) => PurcellValue::Finite(x),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Parameters {
    pub purcell: PurcellValue,
    pub detuning: f64,
    pub offsets: Vec<f64>,
}

impl Parameters {
    pub fn new(nominal: &EmitterParams, offsets: &[f64]) -> Self {
        Parameters {
            purcell: nominal.purcell.into(),
            detuning: nominal.detuning,
            offsets: offsets.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Amplitude {
    pub label: String,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectorRecord {
    pub id: String,
    pub probability: f64,
    pub fidelity: Option<f64>,
    pub correction: Option<String>,
    /// Corrected emitter state in the ± basis, emitter 1 first.
    pub state: Vec<Amplitude>,
}

/// Timing and invocation details; not part of the reproducible payload.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub invocation: Vec<String>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub circuit: String,
    pub n: usize,
    pub parameters: Parameters,
    pub detectors: Vec<DetectorRecord>,
    pub sinks: BTreeMap<String, f64>,
    pub success_probability: f64,
    pub sink_total: f64,
    pub fidelity: Option<f64>,
    pub meta: Meta,
}

impl RunReport {
    pub fn new(run: &ProtocolRun, parameters: Parameters, meta: Meta) -> Self {
        let detectors = run
            .outcomes
            .iter()
            .map(|o| DetectorRecord {
                id: o.detector.to_string(),
                probability: o.probability,
                fidelity: o.fidelity,
                correction: o.correction.as_ref().map(|r| r.iter().map(|c| c.symbol()).collect()),
                state: o
                    .corrected
                    .amps
                    .iter()
                    .map(|(config, a)| Amplitude {
                        label: config.label(run.n, Basis::PlusMinus),
                        re: a.re,
                        im: a.im,
                    })
                    .collect(),
            })
            .collect();
        let fidelity = if run.outcomes.iter().all(|o| o.fidelity.is_some()) {
            run.weighted_fidelity().ok()
        } else {
            None
        };
        RunReport {
            schema_version: SCHEMA_VERSION,
            circuit: run.circuit_name.clone(),
            n: run.n,
            parameters,
            detectors,
            sinks: run.sinks.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            success_probability: run.success_probability(),
            sink_total: run.sink_total(),
            fidelity,
            meta,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "circuit {} (N = {})", self.circuit, self.n);
        let _ = writeln!(
            out,
            "{:<8} {:>12} {:>14} {:<10} state",
            "detector", "probability", "fidelity", "feedfwd"
        );
        for d in &self.detectors {
            let state: Vec<String> = d
                .state
                .iter()
                .map(|a| format!("({:+.6}{:+.6}i)|{}>", a.re + 0.0, a.im + 0.0, a.label))
                .collect();
            let _ = writeln!(
                out,
                "{:<8} {:>12.9} {:>14} {:<10} {}",
                d.id,
                d.probability,
                d.fidelity.map_or("-".to_string(), |f| format!("{f:.12}")),
                d.correction.as_deref().unwrap_or("-"),
                state.join(" ")
            );
        }
        for (id, p) in &self.sinks {
            let _ = writeln!(out, "sink {id:<8} {p:.9}");
        }
        let _ = writeln!(out, "success probability {:.9}", self.success_probability);
        let _ = writeln!(out, "sink total          {:.9}", self.sink_total);
        if let Some(f) = self.fidelity {
            let _ = writeln!(out, "fidelity            {f:.12}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,id,probability,fidelity,correction\n");
        for d in &self.detectors {
            let _ = writeln!(
                out,
                "detector,{},{},{},{}",
                d.id,
                d.probability,
                d.fidelity.map_or(String::new(), |f| f.to_string()),
                d.correction.as_deref().unwrap_or("")
            );
        }
        for (id, p) in &self.sinks {
            let _ = writeln!(out, "sink,{id},{p},,");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodRecord {
    GaussHermite { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub schema_version: u32,
    pub n: usize,
    pub parameters: Parameters,
    pub sigma: f64,
    pub method: MethodRecord,
    /// `herald-weighted` or a detector id.
    pub mode: String,
    pub mean: f64,
    pub std_error: Option<f64>,
    pub evaluations: u64,
    pub meta: Meta,
}

impl FidelityReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("N = {}, sigma = {}, mode {}\n", self.n, self.sigma, self.mode);
        let _ = writeln!(out, "mean fidelity {:.12}", self.mean);
        if let Some(se) = self.std_error {
            let _ = writeln!(out, "std error     {se:.3e}");
        }
        let _ = writeln!(out, "evaluations   {}", self.evaluations);
        out
    }
}
