use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use super::{averaged_fidelity_with, AveragingOptions, BroadeningModel, Method};
use crate::error::{Error, Result};
use crate::protocols::{run_protocol, ProtocolKind, ProtocolParams};
use crate::scatter::{heralded_z_success, EmitterParams, Purcell};

/// Figure-style sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// p_h vs P at d ∈ {0, 0.1, 0.15}.
    Fig5a,
    /// p_h vs d at P ∈ {100, 50, 10}.
    Fig5b,
    /// p_2, p_3 vs P at d ∈ {0, 0.1, 0.15}, from full circuit runs.
    Fig6,
    /// p_2, p_3 vs d at P ∈ {100, 50, 10}, from full circuit runs.
    Fig7,
    /// Broadening-averaged F_2, F_3 vs d at P = 100, σ ∈ {0, 0.1, 0.2}.
    Fig8,
}

const DETUNINGS: [f64; 3] = [0.0, 0.1, 0.15];
const PURCELLS: [f64; 3] = [100.0, 50.0, 10.0];
const SIGMAS: [f64; 3] = [0.0, 0.1, 0.2];

impl SweepKind {
    pub const ALL: [SweepKind; 5] = [
        SweepKind::Fig5a,
        SweepKind::Fig5b,
        SweepKind::Fig6,
        SweepKind::Fig7,
        SweepKind::Fig8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Fig5a => "fig5a",
            SweepKind::Fig5b => "fig5b",
            SweepKind::Fig6 => "fig6",
            SweepKind::Fig7 => "fig7",
            SweepKind::Fig8 => "fig8",
        }
    }

    pub fn axis(self) -> &'static str {
        match self {
            SweepKind::Fig5a | SweepKind::Fig6 => "purcell",
            _ => "detuning",
        }
    }

    /// Grid used when the caller does not supply one.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::Fig5a | SweepKind::Fig6 => linspace(2.0, 200.0, 100),
            SweepKind::Fig5b | SweepKind::Fig7 => linspace(-0.3, 0.3, 121),
            SweepKind::Fig8 => linspace(0.0, 0.5, 26),
        }
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::param(format!(
                "unknown sweep kind `{s}` (expected fig5a, fig5b, fig6, fig7 or fig8)"
            ))
        })
    }
}

/// `points` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|i| start + (end - start) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub axis: String,
    pub grid: Vec<f64>,
    pub series: Vec<Series>,
}

impl SweepResult {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Header naming the axis and every series, then one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = self.axis.clone();
        for s in &self.series {
            out.push(',');
            out.push_str(&s.name);
        }
        out.push('\n');
        for (i, x) in self.grid.iter().enumerate() {
            out.push_str(&sig6(*x));
            for s in &self.series {
                out.push(',');
                out.push_str(&sig6(s.values[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Minimal line chart of the same data as [`SweepResult::to_csv`].
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const M: f64 = 50.0;
        const COLORS: [&str; 6] = ["#2a9d43", "#c2185b", "#1f5fbf", "#e07b00", "#6a3d9a", "#444444"];
        let (x0, x1) = (self.grid[0], *self.grid.last().unwrap());
        let values = self.series.iter().flat_map(|s| s.values.iter().copied());
        let (y0, y1) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let (y0, y1) = if y1 > y0 { (y0, y1) } else { (y0 - 0.5, y0 + 0.5) };
        let px = |x: f64| M + (x - x0) / (x1 - x0).max(f64::EPSILON) * (W - 2.0 * M);
        let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<path d="M{M},{M} V{} H{}" fill="none" stroke="black"/>"#,
            H - M,
            W - M
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 12.0,
            self.axis
        );
        let _ = writeln!(
            svg,
            r#"<text x="{M}" y="{}" text-anchor="end">{}</text>"#,
            H - M + 14.0,
            sig6(x0)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            W - M,
            H - M + 14.0,
            sig6(x1)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            M - 4.0,
            H - M,
            sig6(y0)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{M}" text-anchor="end">{}</text>"#,
            M - 4.0,
            sig6(y1)
        );
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let points: Vec<String> = self
                .grid
                .iter()
                .zip(&s.values)
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                points.join(" ")
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                W - M - 110.0,
                M + 14.0 * (i as f64 + 1.0),
                s.name
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Formats with 6 significant digits, like C's `%.6g`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new digit (9.999995 → 10.00000); trim either way
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, exponent) = s.split_once('e').unwrap();
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exponent}")
    }
}

/// Settings that only matter for some sweep kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Averaging method for the fig8 curves (σ is set per curve).
    pub method: Method,
    pub averaging: AveragingOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            method: Method::GaussHermite { order: 20 },
            averaging: AveragingOptions::default(),
        }
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

/// Evaluates every curve of `kind` on `grid`; grid points run in parallel and
/// are assembled by index.
pub fn sweep(kind: SweepKind, grid: &[f64], options: &SweepOptions) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::param(format!("sweep grid contains non-finite value {bad}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("sweep grid must be strictly increasing"));
    }
    if kind.axis() == "purcell" && grid[0] <= 0.0 {
        return Err(Error::param("purcell grid values must be > 0"));
    }

    // (series name, evaluator of one grid point)
    type Curve = (String, Box<dyn Fn(f64) -> Result<f64> + Sync>);
    let mut curves: Vec<Curve> = Vec::new();
    let protocol_success = |n: usize, params: EmitterParams| -> Result<f64> {
        Ok(run_protocol(&ProtocolParams::new(n, params), ProtocolKind::for_n(n))?.success_probability())
    };
    match kind {
        SweepKind::Fig5a => {
            for d in DETUNINGS {
                curves.push((
                    format!("ph_d{}", fmt_value(d)),
                    Box::new(move |p| heralded_z_success(&EmitterParams::new(Purcell::Finite(p), d))),
                ));
            }
        }
        SweepKind::Fig5b => {
            for p in PURCELLS {
                curves.push((
                    format!("ph_P{}", fmt_value(p)),
                    Box::new(move |d| heralded_z_success(&EmitterParams::new(Purcell::Finite(p), d))),
                ));
            }
        }
        SweepKind::Fig6 => {
            for n in [2, 3] {
                for d in DETUNINGS {
                    curves.push((
                        format!("p{n}_d{}", fmt_value(d)),
                        Box::new(move |p| protocol_success(n, EmitterParams::new(Purcell::Finite(p), d))),
                    ));
                }
            }
        }
        SweepKind::Fig7 => {
            for n in [2, 3] {
                for p in PURCELLS {
                    curves.push((
                        format!("p{n}_P{}", fmt_value(p)),
                        Box::new(move |d| protocol_success(n, EmitterParams::new(Purcell::Finite(p), d))),
                    ));
                }
            }
        }
        SweepKind::Fig8 => {
            for n in [2, 3] {
                for sigma in SIGMAS {
                    let model = BroadeningModel {
                        sigma,
                        method: options.method,
                    };
                    model.validate()?;
                    let averaging = options.averaging.clone();
                    curves.push((
                        format!("F{n}_sigma{}", fmt_value(sigma)),
                        Box::new(move |d| {
                            let nominal = EmitterParams::new(Purcell::Finite(100.0), d);
                            Ok(averaged_fidelity_with(n, &nominal, &model, &averaging)?.mean)
                        }),
                    ));
                }
            }
        }
    }

    let series = curves
        .iter()
        .map(|(name, f)| {
            let values = grid.par_iter().map(|x| f(*x)).collect::<Result<Vec<f64>>>()?;
            Ok(Series {
                name: name.clone(),
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind,
        axis: kind.axis().to_string(),
        grid: grid.to_vec(),
        series,
    })
}
