//! Independent transcription of the nine-mode equations, used as an oracle.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Quadratic part of the amplitude equations written out term by term, in
/// the usual one-based notation (`a[1]` … `a[9]`).
pub fn quadratic_by_hand(lx: f64, lz: f64, x: &[f64; 9]) -> [f64; 9] {
    let a = |i: usize| x[i - 1];
    let al = 2.0 * PI / lx;
    let be = PI / 2.0;
    let ga = 2.0 * PI / lz;
    let k_ag = (al * al + ga * ga).sqrt();
    let k_bg = (be * be + ga * ga).sqrt();
    let k_abg = (al * al + be * be + ga * ga).sqrt();
    let s6 = 6f64.sqrt();
    let s32 = 1.5f64.sqrt();

    let mut d = [0.0; 9];
    d[0] = -s32 * be * ga / k_abg * a(6) * a(8) + s32 * be * ga / k_bg * a(2) * a(3);
    d[1] = 5.0 * 2f64.sqrt() * ga * ga / (3.0 * 3f64.sqrt() * k_ag) * a(4) * a(6)
        - ga * ga / (s6 * k_ag) * a(5) * a(7)
        - al * be * ga / (s6 * k_ag * k_abg) * a(5) * a(8)
        - s32 * be * ga / k_bg * (a(1) * a(3) + a(3) * a(9));
    d[2] = 2.0 * al * be * ga / (s6 * k_ag * k_bg) * (a(4) * a(7) + a(5) * a(6))
        + (be * be * (3.0 * al * al + ga * ga) - 3.0 * ga * ga * (al * al + ga * ga)) / (s6 * k_ag * k_bg * k_abg)
            * a(4)
            * a(8);
    d[3] = -al / s6 * a(1) * a(5)
        - 10.0 / (3.0 * s6) * al * al / k_ag * a(2) * a(6)
        - s32 * al * be * ga / (k_ag * k_bg) * a(3) * a(7)
        - s32 * al * al * be * be / (k_ag * k_bg * k_abg) * a(3) * a(8)
        - al / s6 * a(5) * a(9);
    d[4] = al / s6 * a(1) * a(4) + al * al / (s6 * k_ag) * a(2) * a(7)
        - al * be * ga / (s6 * k_ag * k_abg) * a(2) * a(8)
        + al / s6 * a(4) * a(9)
        + 2.0 * al * be * ga / (s6 * k_ag * k_bg) * a(3) * a(6);
    d[5] = al / s6 * a(1) * a(7) + s32 * be * ga / k_abg * a(1) * a(8)
        + 10.0 / (3.0 * s6) * (al * al - ga * ga) / k_ag * a(2) * a(4)
        - 2.0 * (2.0f64 / 3.0).sqrt() * al * be * ga / (k_ag * k_bg) * a(3) * a(5)
        + al / s6 * a(7) * a(9)
        + s32 * be * ga / k_abg * a(8) * a(9);
    d[6] = -al / s6 * (a(1) * a(6) + a(6) * a(9)) + (ga * ga - al * al) / (s6 * k_ag) * a(2) * a(5)
        + al * be * ga / (s6 * k_ag * k_bg) * a(3) * a(4);
    d[7] = 2.0 * al * be * ga / (s6 * k_ag * k_abg) * a(2) * a(5)
        + ga * ga * (3.0 * al * al - be * be + 3.0 * ga * ga) / (s6 * k_ag * k_bg * k_abg) * a(3) * a(4);
    d[8] = s32 * be * ga / k_bg * a(2) * a(3) - s32 * be * ga / k_abg * a(6) * a(8);
    d
}

/// Dense symmetric tensor `T[j][k][l]` with `N_j(a) = Σ_kl T_jkl a_k a_l`,
/// recovered from the hand-written equations by polarization.
pub fn dense_tensor(lx: f64, lz: f64) -> Vec<[[f64; 9]; 9]> {
    let unit = |k: usize| {
        let mut e = [0.0; 9];
        e[k] = 1.0;
        e
    };
    let mut t = vec![[[0.0; 9]; 9]; 9];
    for k in 0..9 {
        let nk = quadratic_by_hand(lx, lz, &unit(k));
        for j in 0..9 {
            t[j][k][k] = nk[j];
        }
        for l in k + 1..9 {
            let mut e = unit(k);
            e[l] = 1.0;
            let nkl = quadratic_by_hand(lx, lz, &e);
            let nl = quadratic_by_hand(lx, lz, &unit(l));
            for j in 0..9 {
                let v = (nkl[j] - nk[j] - nl[j]) / 2.0;
                t[j][k][l] = v;
                t[j][l][k] = v;
            }
        }
    }
    t
}

pub fn contract(t: &[[[f64; 9]; 9]], a: &[f64; 9]) -> [f64; 9] {
    let mut out = [0.0; 9];
    for j in 0..9 {
        for k in 0..9 {
            for l in 0..9 {
                out[j] += t[j][k][l] * a[k] * a[l];
            }
        }
    }
    out
}
