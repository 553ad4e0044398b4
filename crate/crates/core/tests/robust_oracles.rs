mod common;

use common::random_pac_data;
use pacdp_core::estimators::{trimmed_stats, trimmed_variance_ratio, winsorized_stats};
use pacdp_core::pac::{Censor, PACData};

/// Element-wise evaluation straight from the winsorized data z′.
fn loop_oracle(d: &PACData) -> (f64, f64, f64, f64) {
    let p = d.zc.len() as f64;
    let (mut sum, mut n_l, mut n_u, mut s1, mut s2, mut pc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(v, c) in &d.zc {
        match c {
            Censor::Left => {
                sum += d.l;
                n_l += 1.0;
            }
            Censor::Right => {
                sum += d.u;
                n_u += 1.0;
            }
            Censor::None => {
                sum += v;
                s1 += v;
                s2 += v * v;
                pc += 1.0;
            }
        }
    }
    let tw = sum / p;
    let (a, b) = (n_l / p, n_u / p);
    let bracket = a * (d.l - tw).powi(2) + b * (d.u - tw).powi(2) + s2 / p - (1.0 - a - b) * tw * tw;
    let vw = (p - 1.0) / (pc - 1.0).powi(2) * bracket;
    let tt = s1 / pc;
    let vt = p * (pc - 1.0) / (pc * (p - 1.0)) * vw;
    (tw, vw, tt, vt)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn winsorized_and_trimmed_match_loop_oracle() {
    for k in 0..100 {
        let d = random_pac_data(400, k);
        let (tw, vw) = winsorized_stats(&d).unwrap();
        let (tt, vt) = trimmed_stats(&d).unwrap();
        let (otw, ovw, ott, ovt) = loop_oracle(&d);
        for (name, a, b) in [("θw", tw, otw), ("σ²w", vw, ovw), ("θt", tt, ott), ("σ²t", vt, ovt)] {
            assert!(rel(a, b) < 1e-12, "instance {k} {name}: {a} vs {b}");
        }
    }
}

#[test]
fn trimmed_to_winsorized_ratio_is_exact() {
    for k in 0..100 {
        let d = random_pac_data(401, k);
        let (_, vw) = winsorized_stats(&d).unwrap();
        let (_, vt) = trimmed_stats(&d).unwrap();
        let p = d.zc.len();
        let pc = p - d.p_l - d.p_u;
        assert_eq!(vt, trimmed_variance_ratio(p, pc) * vw, "instance {k}");
    }
}
