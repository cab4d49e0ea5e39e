//! Closed-form single-photon scattering off a two-level emitter in a 1D waveguide.
//!
//! All rates are dimensionless: the detuning and inhomogeneous offset are in
//! units of the guided decay rate γ_1D, and the Purcell factor is γ_1D/γ′.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Purcell factor P = γ_1D/γ′, with an explicit lossless limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purcell {
    /// γ′ = 0: no emission into free space.
    Ideal,
    Finite(f64),
}

impl Purcell {
    /// γ′/γ_1D, exactly zero for [`Purcell::Ideal`].
    pub fn inverse(self) -> f64 {
        match self {
            Purcell::Ideal => 0.0,
            Purcell::Finite(p) => 1.0 / p,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Purcell::Ideal => Ok(()),
            Purcell::Finite(p) if p.is_finite() && p > 0.0 => Ok(()),
            Purcell::Finite(p) => Err(Error::param(format!("purcell factor must be finite and > 0, got {p}"))),
        }
    }
}

impl fmt::Display for Purcell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Purcell::Ideal => f.write_str("ideal"),
            Purcell::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Purcell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("ideal") || s.eq_ignore_ascii_case("inf") {
            return Ok(Purcell::Ideal);
        }
        let p: f64 = s
            .parse()
            .map_err(|_| Error::param(format!("purcell factor `{s}` is neither a number nor `ideal`")))?;
        let p = Purcell::Finite(p);
        p.validate()?;
        Ok(p)
    }
}

/// Parameters of one emitter as seen by the scattered photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    pub purcell: Purcell,
    /// Δ/γ_1D.
    pub detuning: f64,
    /// Inhomogeneous shift δ/γ_1D added to the detuning.
    #[serde(default)]
    pub offset: f64,
}

impl EmitterParams {
    pub fn new(purcell: Purcell, detuning: f64) -> Self {
        EmitterParams {
            purcell,
            detuning,
            offset: 0.0,
        }
    }

    pub fn ideal() -> Self {
        EmitterParams::new(Purcell::Ideal, 0.0)
    }

    pub fn with_offset(self, offset: f64) -> Self {
        EmitterParams { offset, ..self }
    }

    /// Total detuning d + δ.
    pub fn effective_detuning(&self) -> f64 {
        self.detuning + self.offset
    }

    pub fn validate(&self) -> Result<()> {
        self.purcell.validate()?;
        if !self.detuning.is_finite() {
            return Err(Error::param(format!("detuning must be finite, got {}", self.detuning)));
        }
        if !self.offset.is_finite() {
            return Err(Error::param(format!("offset must be finite, got {}", self.offset)));
        }
        Ok(())
    }
}

/// Reflection and transmission amplitudes of a single emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterCoeffs {
    pub r: Complex64,
    pub t: Complex64,
}

impl ScatterCoeffs {
    /// Perfect mirror: r = −1, t = 0.
    pub const IDEAL: ScatterCoeffs = ScatterCoeffs {
        r: Complex64::new(-1.0, 0.0),
        t: Complex64::new(0.0, 0.0),
    };

    /// Probability lost to free space, 1 − |r|² − |t|².
    pub fn loss(&self) -> f64 {
        1.0 - self.r.norm_sqr() - self.t.norm_sqr()
    }
}

/// r = −1/(1 − 2i(d+δ) + 1/P), t = r + 1.
pub fn scatter_coeffs(params: &EmitterParams) -> Result<ScatterCoeffs> {
    params.validate()?;
    let denom = Complex64::new(1.0 + params.purcell.inverse(), -2.0 * params.effective_detuning());
    let r = -denom.inv();
    Ok(ScatterCoeffs { r, t: r + 1.0 })
}

/// Success probability of the heralded Z device, |r|².
pub fn heralded_z_success(params: &EmitterParams) -> Result<f64> {
    Ok(scatter_coeffs(params)?.r.norm_sqr())
}

/// 2×2 complex matrix on the {H, V} polarization basis (row = output).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationMatrix(pub [[Complex64; 2]; 2]);

impl PolarizationMatrix {
    pub fn identity() -> Self {
        PolarizationMatrix::real([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn real(m: [[f64; 2]; 2]) -> Self {
        PolarizationMatrix(m.map(|row| row.map(|x| Complex64::new(x, 0.0))))
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn mul(&self, rhs: &PolarizationMatrix) -> PolarizationMatrix {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        PolarizationMatrix(out)
    }

    pub fn adjoint(&self) -> PolarizationMatrix {
        let m = &self.0;
        PolarizationMatrix([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    /// Largest entry-wise deviation of M†M from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = PolarizationMatrix::identity();
        let mut err: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                err = err.max((p.0[i][j] - id.0[i][j]).norm());
            }
        }
        err
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite()) && self.unitarity_error() <= tol
    }
}

/// Half-wave plate with its fast axis at `theta_deg` degrees:
/// [[cos 2θ, sin 2θ], [sin 2θ, −cos 2θ]].
pub fn hwp_matrix(theta_deg: f64) -> PolarizationMatrix {
    let (s, c) = (2.0 * theta_deg.to_radians()).sin_cos();
    PolarizationMatrix::real([[c, s], [s, -c]])
}

/// HWP angle that turns |H⟩ into (|H⟩ + √(n−1)|V⟩)/√n, i.e. ½·arccos(1/√n) in degrees.
pub fn prep_angle(n_branches: usize) -> f64 {
    0.5 * (1.0 / (n_branches as f64).sqrt()).acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(purcell: f64, d: f64) -> EmitterParams {
        EmitterParams::new(Purcell::Finite(purcell), d)
    }

    #[test]
    fn ideal_resonant_is_perfect_mirror() {
        let c = scatter_coeffs(&EmitterParams::ideal()).unwrap();
        assert_eq!(c.r, Complex64::new(-1.0, 0.0));
        assert_eq!(c.t, Complex64::new(0.0, 0.0));
        assert_eq!(heralded_z_success(&EmitterParams::ideal()).unwrap(), 1.0);
    }

    #[test]
    fn reflection_at_p100_d01() {
        // mpmath: 0.943307235166493727
        let c = scatter_coeffs(&p(100.0, 0.1)).unwrap();
        assert_abs_diff_eq!(c.r.norm_sqr(), 0.943_307_235_166_493_7, epsilon = 1e-14);
        assert_abs_diff_eq!(c.r.norm_sqr(), 0.94330, epsilon = 1e-5);
    }

    #[test]
    fn reflection_at_p10_resonant() {
        let c = scatter_coeffs(&p(10.0, 0.0)).unwrap();
        assert_abs_diff_eq!(c.r.re, -1.0 / 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(c.r.im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.r.norm_sqr(), 0.826_446_280_991_735_5, epsilon = 1e-14);
    }

    #[test]
    fn heralded_z_above_ninety_percent_region() {
        // mpmath: 0.902527075812274368
        let ph = heralded_z_success(&p(50.0, 0.13)).unwrap();
        assert!(ph > 0.90);
        assert_abs_diff_eq!(ph, 0.902_527_075_812_274_4, epsilon = 1e-14);
    }

    #[test]
    fn offset_adds_to_detuning() {
        let a = scatter_coeffs(&p(100.0, 0.1).with_offset(0.05)).unwrap();
        let b = scatter_coeffs(&p(100.0, 0.15)).unwrap();
        assert_abs_diff_eq!((a.r - b.r).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_purcell_rejected() {
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(scatter_coeffs(&p(bad, 0.0)), Err(Error::InvalidParameter(_))));
        }
        assert!(scatter_coeffs(&p(10.0, f64::NAN)).is_err());
        assert!(scatter_coeffs(&p(10.0, 0.0).with_offset(f64::INFINITY)).is_err());
        assert!("-1".parse::<Purcell>().is_err());
        assert!("abc".parse::<Purcell>().is_err());
        assert_eq!("ideal".parse::<Purcell>().unwrap(), Purcell::Ideal);
        assert_eq!("100".parse::<Purcell>().unwrap(), Purcell::Finite(100.0));
    }

    #[test]
    fn hwp_45_swaps() {
        let m = hwp_matrix(45.0);
        let v = m.apply([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert_abs_diff_eq!(v[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn hwp_22_5_is_hadamard() {
        let m = hwp_matrix(22.5);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [[h, h], [h, -h]];
        for (row, want) in m.0.iter().zip(expect) {
            for (a, b) in row.iter().zip(want) {
                assert_abs_diff_eq!(a.re, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn two_qubit_prep_angle() {
        let theta = prep_angle(3);
        assert_abs_diff_eq!(theta, 27.367_805_158_622_67, epsilon = 1e-12);
        let v = hwp_matrix(theta).apply([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert_abs_diff_eq!(v[0].re, 0.577_350_269_189_625_8, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1].re, 0.816_496_580_927_726, epsilon = 1e-12);
        assert_abs_diff_eq!(prep_angle(4), 30.0, epsilon = 1e-12);
    }
}
