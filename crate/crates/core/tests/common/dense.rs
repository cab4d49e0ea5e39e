//! Dense-matrix reference for the two-emitter circuit.
//!
//! Every optical element is written out as a full matrix over
//! (mode, polarization, emitter configuration) and applied by plain
//! matrix-vector products. Shares nothing with the library except the wiring.

#![allow(dead_code)]

use num_complex::Complex64 as C;

const MODES: usize = 19;
const CONFIGS: usize = 4;
const DIM: usize = MODES * 2 * CONFIGS;
const H: usize = 0;
const V: usize = 1;

fn idx(mode: usize, pol: usize, config: usize) -> usize {
    (mode * 2 + pol) * CONFIGS + config
}

type Matrix = Vec<Vec<C>>;

fn identity() -> Matrix {
    let mut m = vec![vec![C::new(0.0, 0.0); DIM]; DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

fn apply(m: &Matrix, v: &[C]) -> Vec<C> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Column `from` of the identity moved to row `to`.
fn route(m: &mut Matrix, from: usize, to: usize) {
    for row in m.iter_mut() {
        row[from] = C::new(0.0, 0.0);
    }
    m[to][from] = C::new(1.0, 0.0);
}

fn pbs(routes: &[(usize, usize, usize)]) -> Matrix {
    let mut m = identity();
    for &(mode, pol, out) in routes {
        for c in 0..CONFIGS {
            route(&mut m, idx(mode, pol, c), idx(out, pol, c));
        }
    }
    m
}

fn hwp(mode: usize, theta_deg: f64) -> Matrix {
    let t = 2.0 * theta_deg.to_radians();
    let u = [[t.cos(), t.sin()], [t.sin(), -t.cos()]];
    let mut m = identity();
    for c in 0..CONFIGS {
        for p in 0..2 {
            for q in 0..2 {
                m[idx(mode, p, c)][idx(mode, q, c)] = C::new(u[p][q], 0.0);
            }
        }
    }
    m
}

/// `u` has rows = outputs (o1, o2), columns = inputs (a, b).
fn mixer(a: usize, b: usize, o1: usize, o2: usize, u: [[f64; 2]; 2]) -> Matrix {
    let mut m = identity();
    for c in 0..CONFIGS {
        for p in 0..2 {
            let ins = [idx(a, p, c), idx(b, p, c)];
            let outs = [idx(o1, p, c), idx(o2, p, c)];
            for row in m.iter_mut() {
                row[ins[0]] = C::new(0.0, 0.0);
                row[ins[1]] = C::new(0.0, 0.0);
            }
            for (i, o) in outs.iter().enumerate() {
                for (j, input) in ins.iter().enumerate() {
                    m[*o][*input] = C::new(u[i][j], 0.0);
                }
            }
        }
    }
    m
}

/// Reflection off emitter `e`: polarization flip, +r on g+, −r on g−.
fn scatter(input: usize, e: usize, out: usize, r: C) -> Matrix {
    let mut m = identity();
    for c in 0..CONFIGS {
        let sign = if c >> e & 1 == 1 { -1.0 } else { 1.0 };
        for p in 0..2 {
            let from = idx(input, p, c);
            for row in m.iter_mut() {
                row[from] = C::new(0.0, 0.0);
            }
            m[idx(out, 1 - p, c)][from] = r * sign;
        }
    }
    m
}

fn attenuate(mode: usize, c: C) -> Matrix {
    let mut m = identity();
    for k in 0..CONFIGS {
        for p in 0..2 {
            m[idx(mode, p, k)][idx(mode, p, k)] = c;
        }
    }
    m
}

fn reflection(purcell: Option<f64>, detuning: f64) -> C {
    let inv = purcell.map_or(0.0, |p| 1.0 / p);
    -C::new(1.0, 0.0) / C::new(1.0 + inv, -2.0 * detuning)
}

/// Herald-weighted fidelity with the two-emitter KLM state after feedforward.
/// `purcell = None` means the ideal limit.
pub fn klm2_fidelity(purcell: Option<f64>, detuning: f64, offsets: [f64; 2]) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r_nom = reflection(purcell, detuning);
    let r = [
        reflection(purcell, detuning + offsets[0]),
        reflection(purcell, detuning + offsets[1]),
    ];

    // photon H in mode 0, both emitters |+⟩ = (g+ + g−)/√2
    let mut psi = vec![C::new(0.0, 0.0); DIM];
    for c in 0..CONFIGS {
        psi[idx(0, H, c)] = C::new(0.5, 0.0);
    }
    let prep = 0.5 * (1.0 / 3f64.sqrt()).acos().to_degrees();
    let steps = [
        hwp(0, prep),
        pbs(&[(0, H, 1), (0, V, 2)]),
        pbs(&[(2, V, 14)]),
        scatter(14, 1, 15, r[1]),
        pbs(&[(15, H, 4)]),
        mixer(3, 4, 3, 4, [[-s, s], [s, s]]),
        pbs(&[(4, H, 17)]),
        scatter(17, 0, 18, r[0]),
        pbs(&[(18, V, 16)]),
        attenuate(1, r_nom * r_nom),
        attenuate(3, r_nom),
        pbs(&[(3, H, 5), (16, V, 5)]),
        hwp(1, 22.5),
        hwp(5, 22.5),
        mixer(1, 5, 6, 7, [[s, s], [s, -s]]),
        pbs(&[(6, H, 8), (6, V, 9), (7, H, 10), (7, V, 11)]),
    ];
    for m in &steps {
        psi = apply(m, &psi);
    }

    // detector slot and σz pattern (e1, e2)
    let detectors = [
        ((8, H), [false, false]),
        ((9, V), [true, false]),
        ((11, V), [true, true]),
        ((10, H), [false, true]),
    ];
    let target = [1.0, 0.0, 1.0, 1.0].map(|a: f64| C::new(a / 3f64.sqrt(), 0.0)); // index bit i = emitter i in |−⟩: ++, −+, +−, −−
    let (mut weighted, mut total) = (0.0, 0.0);
    for ((mode, pol), flips) in detectors {
        let energy: Vec<C> = (0..CONFIGS).map(|c| psi[idx(mode, pol, c)]).collect();
        // ± amplitudes: bit i set = emitter i in |−⟩
        let mut pm = [C::new(0.0, 0.0); CONFIGS];
        for (k, slot) in pm.iter_mut().enumerate() {
            for (c, a) in energy.iter().enumerate() {
                let mut coef = 0.5;
                for e in 0..2 {
                    if k >> e & 1 == 1 && c >> e & 1 == 1 {
                        coef = -coef;
                    }
                }
                *slot += a * coef;
            }
        }
        for (k, slot) in pm.iter_mut().enumerate() {
            for (e, flip) in flips.iter().enumerate() {
                if *flip && k >> e & 1 == 1 {
                    *slot = -*slot;
                }
            }
        }
        let p: f64 = pm.iter().map(|a| a.norm_sqr()).sum();
        if p < 1e-14 {
            continue;
        }
        let overlap: C = target.iter().zip(&pm).map(|(t, a)| t.conj() * a).sum();
        weighted += overlap.norm_sqr(); // = p · F
        total += p;
    }
    weighted / total
}
