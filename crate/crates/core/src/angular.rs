//! Angular-momentum coupling coefficients and Förster matrix-element factors.
//!
//! All spins are stored doubled (`two_j`, `two_m`) so that half-integer values
//! and every selection rule stay exact integer arithmetic. Clebsch–Gordan and
//! 6j symbols are evaluated with the closed-form Racah sums over a factorial
//! table; arguments are limited to `j <= MAX_J` (see [`MAX_TWO_J`]).

use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest supported doubled angular momentum (j <= 10).
pub const MAX_TWO_J: u32 = 20;

// Racah sums for 6j symbols reach (a + b + c + d + 1)! with all four j <= MAX_J.
const FACTORIAL_LEN: usize = (2 * MAX_TWO_J as usize) + 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AngularError {
    #[error("invalid angular momentum: two_j = {two_j}, two_m = {two_m}")]
    InvalidMomentum { two_j: u32, two_m: i32 },
    #[error("angular momentum 2j = {0} exceeds the supported bound 2j <= {MAX_TWO_J}")]
    OutOfRange(u32),
    #[error("invalid Rydberg level n = {n}, l = {l}, 2j = {two_j}")]
    InvalidLevel { n: u32, l: u32, two_j: u32 },
    #[error("dipole-forbidden transition: l = {from} -> l = {to}")]
    DipoleForbidden { from: u32, to: u32 },
}

/// An angular momentum `|j, m>` with both quantum numbers doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AngularMomentum {
    pub two_j: u32,
    pub two_m: i32,
}

impl AngularMomentum {
    pub fn new(two_j: u32, two_m: i32) -> Result<Self, AngularError> {
        let parity_ok = (two_j as i32 - two_m).rem_euclid(2) == 0;
        if two_m.unsigned_abs() > two_j || !parity_ok {
            return Err(AngularError::InvalidMomentum { two_j, two_m });
        }
        Ok(Self { two_j, two_m })
    }

    /// Stretched state `m = j`.
    pub fn stretched(two_j: u32) -> Self {
        Self {
            two_j,
            two_m: two_j as i32,
        }
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn m(&self) -> f64 {
        self.two_m as f64 / 2.0
    }

    fn is_valid(&self) -> bool {
        self.two_m.unsigned_abs() <= self.two_j && (self.two_j as i32 - self.two_m) % 2 == 0
    }
}

/// Orbital letter for `l`.
fn orbital_letter(l: u32) -> char {
    const LETTERS: &[u8] = b"SPDFGHIK";
    LETTERS.get(l as usize).map(|&c| c as char).unwrap_or('?')
}

/// A fine-structure Rydberg level `nL_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RydbergLevel {
    pub n: u32,
    pub l: u32,
    pub two_j: u32,
}

impl RydbergLevel {
    pub fn new(n: u32, l: u32, two_j: u32) -> Result<Self, AngularError> {
        let err = AngularError::InvalidLevel { n, l, two_j };
        if n <= l || two_j == 0 || two_j % 2 == 0 {
            return Err(err);
        }
        // j = l +- 1/2
        if two_j != 2 * l + 1 && two_j + 1 != 2 * l {
            return Err(err);
        }
        Ok(Self { n, l, two_j })
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    /// Parses labels like `90S1/2`, `95P3/2`, `97D5/2`.
    pub fn parse(label: &str) -> Option<Self> {
        let split = label.find(|c: char| c.is_ascii_alphabetic())?;
        let n: u32 = label[..split].parse().ok()?;
        let letter = label[split..].chars().next()?.to_ascii_uppercase();
        let l = b"SPDFGHIK".iter().position(|&c| c as char == letter)? as u32;
        let rest = &label[split + 1..];
        let num = rest.strip_suffix("/2")?;
        let two_j: u32 = num.parse().ok()?;
        Self::new(n, l, two_j).ok()
    }
}

impl fmt::Display for RydbergLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}/2", self.n, orbital_letter(self.l), self.two_j)
    }
}

/// A Zeeman sublevel `|n l j m_j>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sublevel {
    pub level: RydbergLevel,
    pub two_m: i32,
}

impl Sublevel {
    pub fn new(level: RydbergLevel, two_m: i32) -> Result<Self, AngularError> {
        AngularMomentum::new(level.two_j, two_m)?;
        Ok(Self { level, two_m })
    }

    pub fn momentum(&self) -> AngularMomentum {
        AngularMomentum {
            two_j: self.level.two_j,
            two_m: self.two_m,
        }
    }
}

impl fmt::Display for Sublevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} m={}/2", self.level, self.two_m)
    }
}

fn factorials() -> &'static [f64; FACTORIAL_LEN] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; FACTORIAL_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0; FACTORIAL_LEN];
        for n in 1..FACTORIAL_LEN {
            t[n] = t[n - 1] * n as f64;
        }
        t
    })
}

/// `n!` for a doubled argument `two_n` (must be even and non-negative).
fn fact2(two_n: i32) -> f64 {
    debug_assert!(two_n >= 0 && two_n % 2 == 0, "bad factorial argument {two_n}");
    factorials()[(two_n / 2) as usize]
}

fn check_bound(two_j: u32) -> Result<(), AngularError> {
    if two_j > MAX_TWO_J {
        Err(AngularError::OutOfRange(two_j))
    } else {
        Ok(())
    }
}

/// Triangle rule on doubled spins, including integer total.
fn triangle(a: u32, b: u32, c: u32) -> bool {
    let (a, b, c) = (a as i32, b as i32, c as i32);
    c >= (a - b).abs() && c <= a + b && (a + b + c) % 2 == 0
}

/// Triangle coefficient Δ(abc) on doubled spins (caller checked the triad).
fn triangle_coefficient(a: u32, b: u32, c: u32) -> f64 {
    let (a, b, c) = (a as i32, b as i32, c as i32);
    (fact2(a + b - c) * fact2(a - b + c) * fact2(-a + b + c) / fact2(a + b + c + 2)).sqrt()
}

fn sign(exponent: i32) -> f64 {
    if exponent.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Clebsch–Gordan coefficient `<j1 m1; j2 m2 | J M>` (Condon–Shortley phase).
///
/// Returns 0 whenever the projections do not add up or the triangle rule
/// fails. Errors only when a spin exceeds [`MAX_TWO_J`] or a projection is
/// inconsistent with its spin.
pub fn clebsch_gordan(
    j1: AngularMomentum,
    j2: AngularMomentum,
    total: AngularMomentum,
) -> Result<f64, AngularError> {
    for am in [j1, j2, total] {
        check_bound(am.two_j)?;
        if !am.is_valid() {
            return Err(AngularError::InvalidMomentum {
                two_j: am.two_j,
                two_m: am.two_m,
            });
        }
    }
    if j1.two_m + j2.two_m != total.two_m || !triangle(j1.two_j, j2.two_j, total.two_j) {
        return Ok(0.0);
    }

    let (a, b, c) = (j1.two_j as i32, j2.two_j as i32, total.two_j as i32);
    let (ma, mb, mc) = (j1.two_m, j2.two_m, total.two_m);

    let prefactor = ((c + 1) as f64
        * fact2(c + a - b)
        * fact2(c - a + b)
        * fact2(a + b - c)
        / fact2(a + b + c + 2))
        .sqrt();
    let projections = (fact2(c + mc)
        * fact2(c - mc)
        * fact2(a - ma)
        * fact2(a + ma)
        * fact2(b - mb)
        * fact2(b + mb))
        .sqrt();

    // Summation index k (doubled) keeps every factorial argument non-negative.
    let k_min = 0.max(b - c - ma).max(a - c + mb);
    let k_max = (a + b - c).min(a - ma).min(b + mb);
    let mut sum = 0.0;
    let mut k = k_min;
    while k <= k_max {
        let denom = fact2(k)
            * fact2(a + b - c - k)
            * fact2(a - ma - k)
            * fact2(b + mb - k)
            * fact2(c - b + ma + k)
            * fact2(c - a - mb + k);
        sum += sign(k / 2) / denom;
        k += 2;
    }
    Ok(prefactor * projections * sum)
}

/// Wigner 3j symbol built from the Clebsch–Gordan coefficient.
pub fn wigner_3j(
    j1: AngularMomentum,
    j2: AngularMomentum,
    j3: AngularMomentum,
) -> Result<f64, AngularError> {
    let coupled = AngularMomentum {
        two_j: j3.two_j,
        two_m: -j3.two_m,
    };
    let cg = clebsch_gordan(j1, j2, coupled)?;
    let phase = sign((j1.two_j as i32 - j2.two_j as i32 - j3.two_m) / 2);
    Ok(phase * cg / ((j3.two_j + 1) as f64).sqrt())
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}` with doubled arguments, via the
/// Racah formula. Returns 0 when any of the four triads violates the triangle
/// rule.
pub fn wigner_6j(two_j: [u32; 6]) -> Result<f64, AngularError> {
    for &j in &two_j {
        check_bound(j)?;
    }
    let [j1, j2, j3, j4, j5, j6] = two_j;
    let triads = [(j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3)];
    if !triads.iter().all(|&(a, b, c)| triangle(a, b, c)) {
        return Ok(0.0);
    }
    let delta: f64 = triads
        .iter()
        .map(|&(a, b, c)| triangle_coefficient(a, b, c))
        .product();

    let (j1, j2, j3, j4, j5, j6) = (
        j1 as i32, j2 as i32, j3 as i32, j4 as i32, j5 as i32, j6 as i32,
    );
    let alphas = [j1 + j2 + j3, j1 + j5 + j6, j4 + j2 + j6, j4 + j5 + j3];
    let betas = [j1 + j2 + j4 + j5, j2 + j3 + j5 + j6, j3 + j1 + j6 + j4];
    let t_min = *alphas.iter().max().unwrap();
    let t_max = *betas.iter().min().unwrap();

    let mut sum = 0.0;
    let mut t = t_min;
    while t <= t_max {
        let mut denom = 1.0;
        for a in alphas {
            denom *= fact2(t - a);
        }
        for b in betas {
            denom *= fact2(b - t);
        }
        sum += sign(t / 2) * fact2(t + 2) / denom;
        t += 2;
    }
    Ok(delta * sum)
}

fn dipole_allowed(from: &RydbergLevel, to: &RydbergLevel) -> Result<(), AngularError> {
    if from.l.abs_diff(to.l) != 1 {
        return Err(AngularError::DipoleForbidden {
            from: from.l,
            to: to.l,
        });
    }
    Ok(())
}

/// Angular factor of a pair transition `|a, b> -> |alpha, beta>` for atoms on
/// the quantization axis:
///
/// `Q = -sqrt(6) sum_q C(1 q; 1 -q | 2 0) C(j_a m_a; 1 q | j_alpha m_alpha) C(j_b m_b; 1 -q | j_beta m_beta)`
pub fn angular_factor(
    a: Sublevel,
    b: Sublevel,
    alpha: Sublevel,
    beta: Sublevel,
) -> Result<f64, AngularError> {
    dipole_allowed(&a.level, &alpha.level)?;
    dipole_allowed(&b.level, &beta.level)?;
    if a.two_m + b.two_m != alpha.two_m + beta.two_m {
        return Ok(0.0);
    }
    let rank2 = AngularMomentum::new(4, 0)?;
    let mut q_sum = 0.0;
    for two_q in [-2, 0, 2] {
        let photon = AngularMomentum::new(2, two_q)?;
        let photon_rev = AngularMomentum::new(2, -two_q)?;
        let tensor = clebsch_gordan(photon, photon_rev, rank2)?;
        let on_a = clebsch_gordan(a.momentum(), photon, alpha.momentum())?;
        let on_b = clebsch_gordan(b.momentum(), photon_rev, beta.momentum())?;
        q_sum += tensor * on_a * on_b;
    }
    Ok(-(6.0f64).sqrt() * q_sum)
}

/// Reduced dipole matrix element `<to||r||from>` in the fine-structure basis,
/// scaled by the supplied radial integral (any length unit; the result is in
/// the same unit).
pub fn reduced_matrix_element(
    from: &RydbergLevel,
    to: &RydbergLevel,
    radial: f64,
) -> Result<f64, AngularError> {
    dipole_allowed(from, to)?;
    // (l_to + l_from)/2 + j_from is an integer for a dipole transition.
    let doubled_exponent = (to.l + from.l) as i32 + from.two_j as i32;
    debug_assert!(doubled_exponent % 2 == 0);
    let phase = sign(doubled_exponent / 2);
    let six_j = wigner_6j([2 * from.l, 1, from.two_j, to.two_j, 2, 2 * to.l])?;
    Ok(phase
        * (from.l.max(to.l) as f64).sqrt()
        * ((to.two_j + 1) as f64).sqrt()
        * ((from.two_j + 1) as f64).sqrt()
        * six_j
        * radial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn am(two_j: u32, two_m: i32) -> AngularMomentum {
        AngularMomentum::new(two_j, two_m).unwrap()
    }

    fn level(label: &str) -> RydbergLevel {
        RydbergLevel::parse(label).unwrap()
    }

    #[test]
    fn rejects_bad_momenta() {
        assert!(AngularMomentum::new(1, 0).is_err());
        assert!(AngularMomentum::new(2, 4).is_err());
        assert!(AngularMomentum::new(3, -3).is_ok());
    }

    #[test]
    fn level_invariants() {
        assert!(RydbergLevel::new(90, 0, 1).is_ok());
        assert!(RydbergLevel::new(90, 0, 3).is_err());
        assert!(RydbergLevel::new(90, 1, 5).is_err());
        assert!(RydbergLevel::new(1, 1, 1).is_err());
        assert_eq!(level("95P3/2"), RydbergLevel::new(95, 1, 3).unwrap());
        assert_eq!(level("88D3/2").to_string(), "88D3/2");
        assert!(RydbergLevel::parse("90X1/2").is_none());
    }

    #[test]
    fn cg_projection_mismatch_is_zero() {
        let v = clebsch_gordan(am(2, 2), am(2, 0), am(4, 4)).unwrap();
        assert_eq!(v, 0.0);
        let v = clebsch_gordan(am(2, 2), am(2, 0), am(4, 2)).unwrap();
        assert!(v != 0.0);
    }

    #[test]
    fn cg_triangle_violation_is_zero() {
        assert_eq!(clebsch_gordan(am(1, 1), am(1, -1), am(4, 0)).unwrap(), 0.0);
    }

    #[test]
    fn cg_bound_is_enforced() {
        let big = AngularMomentum::stretched(MAX_TWO_J + 2);
        assert_eq!(
            clebsch_gordan(big, am(2, 0), big),
            Err(AngularError::OutOfRange(MAX_TWO_J + 2))
        );
    }

    #[test]
    fn six_j_triad_violation_is_zero() {
        assert_eq!(wigner_6j([2, 2, 8, 2, 2, 2]).unwrap(), 0.0);
        assert_eq!(wigner_6j([1, 1, 1, 1, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn dipole_forbidden_is_reported() {
        let s = Sublevel::new(level("90S1/2"), 1).unwrap();
        let d = Sublevel::new(level("90D3/2"), 1).unwrap();
        let p = Sublevel::new(level("95P1/2"), 1).unwrap();
        assert!(matches!(
            angular_factor(s, s, d, p),
            Err(AngularError::DipoleForbidden { .. })
        ));
        assert!(reduced_matrix_element(&level("90S1/2"), &level("91S1/2"), 1.0).is_err());
    }

    #[test]
    fn reduced_element_is_linear_in_radial() {
        let s = level("90S1/2");
        let p = level("90P1/2");
        assert_eq!(reduced_matrix_element(&s, &p, 0.0).unwrap(), 0.0);
        let one = reduced_matrix_element(&s, &p, 1.0).unwrap();
        let three = reduced_matrix_element(&s, &p, 3.0).unwrap();
        assert_abs_diff_eq!(three, 3.0 * one, epsilon = 1e-14);
        assert_abs_diff_eq!(one.abs(), 2.0 / 6.0f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn reduced_element_phase_tracks_j_from() {
        // S1/2 -> P1/2 and P1/2 -> S1/2 differ in (l+l')/2 + j_from parity only
        // through j_from; for P3/2 -> S1/2 the exponent changes by one unit.
        let s = level("90S1/2");
        let p1 = level("90P1/2");
        let p3 = level("90P3/2");
        let a = reduced_matrix_element(&p1, &s, 1.0).unwrap();
        let b = reduced_matrix_element(&p3, &s, 1.0).unwrap();
        let six_a = wigner_6j([2, 1, 1, 1, 2, 0]).unwrap();
        let six_b = wigner_6j([2, 1, 3, 1, 2, 0]).unwrap();
        // sign(a)/sign(6j_a) and sign(b)/sign(6j_b) are the pure phase factors
        let phase_a = a.signum() * six_a.signum();
        let phase_b = b.signum() * six_b.signum();
        assert_eq!(phase_a, -phase_b);
    }
}
