//! Success probabilities, fidelities under inhomogeneous broadening, and
//! parameter sweeps.

mod quadrature;
mod sweep;

pub use quadrature::GaussHermite;
pub use sweep::{linspace, sig6, sweep, Series, SweepKind, SweepOptions, SweepResult};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::circuit::{Circuit, Environment};
use crate::error::{Error, Result};
use crate::protocols::{build, run_circuit, ProtocolKind, ProtocolParams, ProtocolRun};
use crate::scatter::{scatter_coeffs, EmitterParams};
use crate::state::DetectorId;

/// Default cap on the number of tensor-grid points.
pub const DEFAULT_GRID_BUDGET: u128 = 2_000_000;

/// Monte-Carlo samples per independently seeded stream.
const MC_CHUNK: usize = 4096;

/// Closed-form success probability |r(P, d)|^(2N).
pub fn success_probability(n: usize, nominal: &EmitterParams) -> Result<f64> {
    if n < 2 {
        return Err(Error::param(format!("KLM protocols need N ≥ 2, got {n}")));
    }
    Ok(scatter_coeffs(nominal)?.r.norm_sqr().powi(n as i32))
}

/// Which fidelity figure to report.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FidelityMode {
    /// Σ_q P(D_q) F_q / Σ_q P(D_q).
    #[default]
    HeraldWeighted,
    /// Fidelity of one detector's corrected state.
    Detector(DetectorId),
}

/// Reusable circuit for repeated fidelity evaluations at varying offsets.
#[derive(Debug, Clone)]
pub struct FidelityEvaluator {
    circuit: Circuit,
    nominal: EmitterParams,
    mode: FidelityMode,
}

impl FidelityEvaluator {
    pub fn new(n: usize, nominal: EmitterParams, kind: ProtocolKind, mode: FidelityMode) -> Result<Self> {
        let params = ProtocolParams::new(n, nominal);
        let circuit = build(kind, &params)?;
        if let FidelityMode::Detector(d) = &mode {
            if !circuit.detectors().contains(d) {
                return Err(Error::param(format!("circuit {} has no detector {d}", circuit.name)));
            }
        }
        Ok(FidelityEvaluator { circuit, nominal, mode })
    }

    pub fn n(&self) -> usize {
        self.circuit.n_emitters
    }

    pub fn run(&self, offsets: &[f64]) -> Result<ProtocolRun> {
        run_circuit(
            &self.circuit,
            &Environment::with_offsets(self.nominal, offsets.to_vec()),
        )
    }

    pub fn fidelity(&self, offsets: &[f64]) -> Result<f64> {
        let run = self.run(offsets)?;
        match &self.mode {
            FidelityMode::HeraldWeighted => run.weighted_fidelity(),
            FidelityMode::Detector(d) => run
                .outcomes
                .iter()
                .find(|o| &o.detector == d)
                .and_then(|o| o.fidelity)
                .ok_or(Error::UndefinedFidelity),
        }
    }
}

/// Herald-weighted fidelity of the corrected states for fixed per-emitter offsets.
pub fn conditioned_fidelity(params: &ProtocolParams) -> Result<f64> {
    params.validate()?;
    let eval = FidelityEvaluator::new(
        params.n,
        params.nominal,
        ProtocolKind::for_n(params.n),
        FidelityMode::HeraldWeighted,
    )?;
    let offsets = if params.offsets.is_empty() {
        vec![0.0; params.n]
    } else {
        params.offsets.clone()
    };
    eval.fidelity(&offsets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    GaussHermite { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

/// Independent Gaussian offsets δ_i ~ N(0, σ²) per emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadeningModel {
    /// σ/γ_1D.
    pub sigma: f64,
    pub method: Method,
}

impl BroadeningModel {
    pub fn gauss_hermite(sigma: f64, order: usize) -> Self {
        BroadeningModel {
            sigma,
            method: Method::GaussHermite { order },
        }
    }

    pub fn monte_carlo(sigma: f64, samples: usize, seed: u64) -> Self {
        BroadeningModel {
            sigma,
            method: Method::MonteCarlo { samples, seed },
        }
    }

    /// Gauss–Hermite order 20 up to three emitters, Monte-Carlo beyond.
    pub fn default_for(n: usize, sigma: f64) -> Self {
        if n <= 3 {
            BroadeningModel::gauss_hermite(sigma, 20)
        } else {
            BroadeningModel::monte_carlo(sigma, 100_000, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!(
                "sigma must be finite and ≥ 0, got {}",
                self.sigma
            )));
        }
        match self.method {
            Method::GaussHermite { order: 0 } => Err(Error::param("Gauss-Hermite order must be ≥ 1")),
            Method::MonteCarlo { samples: 0, .. } => Err(Error::param("Monte-Carlo needs at least one sample")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedFidelity {
    pub mean: f64,
    /// Standard error of the mean (Monte-Carlo only).
    pub std_error: Option<f64>,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingOptions {
    pub mode: FidelityMode,
    /// Builder to use; `None` picks the dedicated one for N = 2, 3.
    pub kind: Option<ProtocolKind>,
    pub grid_budget: u128,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        AveragingOptions {
            mode: FidelityMode::HeraldWeighted,
            kind: None,
            grid_budget: DEFAULT_GRID_BUDGET,
        }
    }
}

pub fn averaged_fidelity(n: usize, nominal: &EmitterParams, model: &BroadeningModel) -> Result<AveragedFidelity> {
    averaged_fidelity_with(n, nominal, model, &AveragingOptions::default())
}

/// Expectation of the conditioned fidelity over independent Gaussian offsets.
pub fn averaged_fidelity_with(
    n: usize,
    nominal: &EmitterParams,
    model: &BroadeningModel,
    options: &AveragingOptions,
) -> Result<AveragedFidelity> {
    model.validate()?;
    let kind = options.kind.unwrap_or_else(|| ProtocolKind::for_n(n));
    let eval = FidelityEvaluator::new(n, *nominal, kind, options.mode.clone())?;
    if model.sigma == 0.0 {
        return Ok(AveragedFidelity {
            mean: eval.fidelity(&vec![0.0; n])?,
            std_error: matches!(model.method, Method::MonteCarlo { .. }).then_some(0.0),
            evaluations: 1,
        });
    }
    match model.method {
        Method::GaussHermite { order } => gauss_hermite_average(&eval, model.sigma, order, options.grid_budget),
        Method::MonteCarlo { samples, seed } => monte_carlo_average(&eval, model.sigma, samples, seed),
    }
}

fn gauss_hermite_average(eval: &FidelityEvaluator, sigma: f64, order: usize, budget: u128) -> Result<AveragedFidelity> {
    let n = eval.n();
    let points = (order as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if points > budget {
        return Err(Error::QuadratureBudget { points, budget });
    }
    let rule = GaussHermite::new(order)?.gaussian_points(sigma);
    let total = points as usize;
    let partials: Vec<f64> = (0..total.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut offsets = vec![0.0; n];
            let mut acc = 0.0;
            for mut idx in chunk * MC_CHUNK..((chunk + 1) * MC_CHUNK).min(total) {
                let mut weight = 1.0;
                for o in offsets.iter_mut() {
                    let (x, w) = rule[idx % order];
                    *o = x;
                    weight *= w;
                    idx /= order;
                }
                acc += weight * eval.fidelity(&offsets)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(AveragedFidelity {
        mean: partials.iter().sum(),
        std_error: None,
        evaluations: total as u64,
    })
}

fn monte_carlo_average(eval: &FidelityEvaluator, sigma: f64, samples: usize, seed: u64) -> Result<AveragedFidelity> {
    let n = eval.n();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    let partials: Vec<(f64, f64)> = (0..samples.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            let mut offsets = vec![0.0; n];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..count {
                for o in offsets.iter_mut() {
                    *o = normal.sample(&mut rng);
                }
                let f = eval.fidelity(&offsets)?;
                sum += f;
                sum_sq += f * f;
            }
            Ok((sum, sum_sq))
        })
        .collect::<Result<_>>()?;
    let (sum, sum_sq) = partials.iter().fold((0.0, 0.0), |(s, q), (a, b)| (s + a, q + b));
    let count = samples as f64;
    let mean = sum / count;
    let variance = if samples > 1 {
        ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(AveragedFidelity {
        mean,
        std_error: Some((variance / count).sqrt()),
        evaluations: samples as u64,
    })
}
