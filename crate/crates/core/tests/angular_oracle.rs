//! Racah-sum coefficients checked against an independent construction:
//! Clebsch–Gordan tables built by lowering-operator recursion plus
//! Gram–Schmidt in the product basis, and 6j symbols assembled from four 3j
//! symbols of that table.

use starkgate::angular::{
    angular_factor, clebsch_gordan, reduced_matrix_element, wigner_6j, AngularMomentum,
    RydbergLevel, Sublevel,
};

mod common;

use common::Oracle;

fn am(two_j: u32, two_m: i32) -> AngularMomentum {
    AngularMomentum::new(two_j, two_m).unwrap()
}

#[test]
fn cg_matches_oracle_up_to_three() {
    let mut oracle = Oracle::new();
    let mut checked = 0;
    for a in 0..=6u32 {
        for b in 0..=6u32 {
            for c in 0..=6u32 {
                for ma in (-(a as i32)..=a as i32).step_by(2) {
                    for mb in (-(b as i32)..=b as i32).step_by(2) {
                        let mc = ma + mb;
                        if mc.unsigned_abs() > c || (c as i32 - mc) % 2 != 0 {
                            continue;
                        }
                        let got = clebsch_gordan(am(a, ma), am(b, mb), am(c, mc)).unwrap();
                        let want = oracle.cg(a as i32, ma, b as i32, mb, c as i32, mc);
                        assert!(
                            (got - want).abs() < 1e-12,
                            "CG({a},{ma};{b},{mb}|{c},{mc}) = {got}, oracle {want}"
                        );
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn cg_reference_values() {
    let v = clebsch_gordan(am(2, 0), am(2, 0), am(4, 0)).unwrap();
    assert!((v - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    assert_eq!(clebsch_gordan(am(2, 2), am(2, 0), am(4, 4)).unwrap(), 0.0);
    // spin-1/2 coupled first: Condon–Shortley fixes the sign positive
    let v = clebsch_gordan(am(1, 1), am(2, 0), am(1, 1)).unwrap();
    assert!((v - 1.0 / 3.0f64.sqrt()).abs() < 1e-14);
    // with the spin-1 coupled first the sign flips
    let v = clebsch_gordan(am(2, 0), am(1, 1), am(1, 1)).unwrap();
    assert!((v + 1.0 / 3.0f64.sqrt()).abs() < 1e-14);
}

#[test]
fn cg_orthogonality() {
    for a in 0..=6u32 {
        for b in 0..=6u32 {
            let totals: Vec<u32> = (a.abs_diff(b)..=a + b).step_by(2).collect();
            for &c in &totals {
                for &c2 in &totals {
                    for mc in (-(c as i32)..=c as i32).step_by(2) {
                        for mc2 in (-(c2 as i32)..=c2 as i32).step_by(2) {
                            let mut sum = 0.0;
                            for ma in (-(a as i32)..=a as i32).step_by(2) {
                                for mb in (-(b as i32)..=b as i32).step_by(2) {
                                    let x = clebsch_gordan(am(a, ma), am(b, mb), am(c, mc)).unwrap();
                                    let y = clebsch_gordan(am(a, ma), am(b, mb), am(c2, mc2)).unwrap();
                                    sum += x * y;
                                }
                            }
                            let want = if c == c2 && mc == mc2 { 1.0 } else { 0.0 };
                            assert!((sum - want).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn six_j_matches_oracle_up_to_three() {
    let mut oracle = Oracle::new();
    let mut nonzero = 0;
    for j1 in 0..=6 {
        for j2 in 0..=6 {
            for j3 in 0..=6 {
                for j4 in 0..=6 {
                    for j5 in 0..=6 {
                        for j6 in 0..=6 {
                            let args = [j1, j2, j3, j4, j5, j6];
                            let got = wigner_6j(args).unwrap();
                            let triads = [(j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3)];
                            let allowed = triads.iter().all(|&(a, b, c)| {
                                c >= a.abs_diff(b) && c <= a + b && (a + b + c) % 2 == 0
                            });
                            if !allowed {
                                assert_eq!(got, 0.0, "{args:?}");
                                continue;
                            }
                            let want = oracle.six_j(args.map(|x| x as i32));
                            assert!((got - want).abs() < 1e-12, "{args:?}: {got} vs {want}");
                            nonzero += 1;
                        }
                    }
                }
            }
        }
    }
    assert!(nonzero > 500);
}

#[test]
fn six_j_reference_values() {
    // {0 1/2 1/2; 1/2 1 1}
    let v = wigner_6j([0, 1, 1, 1, 2, 2]).unwrap();
    assert!((v.abs() - 1.0 / 6.0f64.sqrt()).abs() < 1e-14);
    // {1/2 1/2 1; 1/2 1/2 1}
    let v = wigner_6j([1, 1, 2, 1, 1, 2]).unwrap();
    assert!((v - 1.0 / 6.0).abs() < 1e-14);
}

#[test]
fn reduced_element_composes_with_oracle_six_j() {
    let mut oracle = Oracle::new();
    let s = RydbergLevel::parse("90S1/2").unwrap();
    let p = RydbergLevel::parse("90P1/2").unwrap();
    let got = reduced_matrix_element(&s, &p, 1.0).unwrap();
    let six = oracle.six_j([0, 1, 1, 1, 2, 2]);
    let want = 1.0f64.sqrt() * 2.0f64.sqrt() * 2.0f64.sqrt() * six.abs();
    assert!((got.abs() - want).abs() < 1e-14);
}

/// Angular factors of the eight channels from `|90S1/2 m=1/2, 96S1/2 m=1/2>`.
///
/// Rows 3 and 5 are `-sqrt(2/3)`: the q = -1 term is
/// `C(1 -1; 1 1 | 2 0) C(1/2 1/2; 1 -1 | 1/2 -1/2) C(1/2 1/2; 1 1 | 3/2 3/2)
///  = (1/sqrt 6)(-sqrt(2/3))(1)`. The sum rule below pins this down.
#[test]
fn angular_factors_of_pair_channels() {
    let sqrt2 = 2.0f64.sqrt();
    let rows: [(&str, i32, &str, i32, f64); 8] = [
        ("90P1/2", 1, "95P1/2", 1, -2.0 / 3.0),
        ("90P1/2", 1, "95P3/2", 1, -2.0 * sqrt2 / 3.0),
        ("90P1/2", -1, "95P3/2", 3, -(2.0f64 / 3.0).sqrt()),
        ("90P3/2", 1, "95P1/2", 1, -2.0 * sqrt2 / 3.0),
        ("90P3/2", 3, "95P1/2", -1, -(2.0f64 / 3.0).sqrt()),
        ("90P3/2", 1, "95P3/2", 1, -4.0 / 3.0),
        ("90P3/2", -1, "95P3/2", 3, -1.0 / 3.0f64.sqrt()),
        ("90P3/2", 3, "95P3/2", -1, -1.0 / 3.0f64.sqrt()),
    ];
    let a = Sublevel::new(RydbergLevel::parse("90S1/2").unwrap(), 1).unwrap();
    let b = Sublevel::new(RydbergLevel::parse("96S1/2").unwrap(), 1).unwrap();
    for (alpha, m_alpha, beta, m_beta, want) in rows {
        let alpha = Sublevel::new(RydbergLevel::parse(alpha).unwrap(), m_alpha).unwrap();
        let beta = Sublevel::new(RydbergLevel::parse(beta).unwrap(), m_beta).unwrap();
        let q = angular_factor(a, b, alpha, beta).unwrap();
        assert!((q - want).abs() < 1e-12, "{alpha} {beta}: {q} vs {want}");
    }
}

/// Summed over every P-P final sublevel the squared factors add up to 6,
/// independent of the initial projections (completeness of the CG tables
/// and normalization of the rank-2 tensor coefficient).
#[test]
fn angular_factor_sum_rule() {
    let s_a = RydbergLevel::parse("90S1/2").unwrap();
    let s_b = RydbergLevel::parse("96S1/2").unwrap();
    for (ma, mb) in [(1, 1), (1, -1), (-1, -1)] {
        let a = Sublevel::new(s_a, ma).unwrap();
        let b = Sublevel::new(s_b, mb).unwrap();
        let mut total = 0.0;
        for la in ["90P1/2", "90P3/2"] {
            for lb in ["95P1/2", "95P3/2"] {
                let la = RydbergLevel::parse(la).unwrap();
                let lb = RydbergLevel::parse(lb).unwrap();
                for m_alpha in (-(la.two_j as i32)..=la.two_j as i32).step_by(2) {
                    for m_beta in (-(lb.two_j as i32)..=lb.two_j as i32).step_by(2) {
                        let alpha = Sublevel::new(la, m_alpha).unwrap();
                        let beta = Sublevel::new(lb, m_beta).unwrap();
                        total += angular_factor(a, b, alpha, beta).unwrap().powi(2);
                    }
                }
            }
        }
        assert!((total - 6.0).abs() < 1e-12, "{ma} {mb}: {total}");
    }
}

#[test]
fn angular_factor_selection_rule() {
    let a = Sublevel::new(RydbergLevel::parse("90S1/2").unwrap(), 1).unwrap();
    let b = Sublevel::new(RydbergLevel::parse("96S1/2").unwrap(), 1).unwrap();
    let alpha = Sublevel::new(RydbergLevel::parse("90P3/2").unwrap(), 3).unwrap();
    let beta = Sublevel::new(RydbergLevel::parse("95P3/2").unwrap(), 1).unwrap();
    assert_eq!(angular_factor(a, b, alpha, beta).unwrap(), 0.0);
}

#[test]
fn angular_factor_projection_reversal_keeps_magnitude() {
    let levels = ["90P1/2", "90P3/2"];
    let targets = ["95P1/2", "95P3/2"];
    let s_a = RydbergLevel::parse("90S1/2").unwrap();
    let s_b = RydbergLevel::parse("96S1/2").unwrap();
    for la in levels {
        for lb in targets {
            let la = RydbergLevel::parse(la).unwrap();
            let lb = RydbergLevel::parse(lb).unwrap();
            for ma in [-1, 1] {
                for mb in [-1, 1] {
                    for m_alpha in (-(la.two_j as i32)..=la.two_j as i32).step_by(2) {
                        for m_beta in (-(lb.two_j as i32)..=lb.two_j as i32).step_by(2) {
                            let sub = |l, m| Sublevel::new(l, m).unwrap();
                            let q = angular_factor(sub(s_a, ma), sub(s_b, mb), sub(la, m_alpha), sub(lb, m_beta)).unwrap();
                            let q_rev = angular_factor(sub(s_a, -ma), sub(s_b, -mb), sub(la, -m_alpha), sub(lb, -m_beta)).unwrap();
                            assert!((q.abs() - q_rev.abs()).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}
