//! Two-level adiabatic rapid passage: exact integration of
//! `H = 1/2 [[0, Omega0], [Omega0, 2 delta]]` and the dressed-state
//! approximation that neglects the `theta'` coupling.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    propagate_schrodinger, unwrap_phase, Coupling, SparseHamiltonian, TimeDependentHamiltonian,
};
use crate::error::{Error, Result};
use crate::ode::Tolerances;
use crate::stark::{profile_detuning, DetuningProfile};
use crate::{mhz, C64};

pub type Signal = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default threshold on `max(|Omega0'|, |delta'|) / Omega^2`.
pub const ADIABATICITY_THRESHOLD: f64 = 0.1;

/// Rabi frequency and detuning (rad/us) over a time span. Both signals may
/// jump at `breakpoints`; they are right-continuous there.
#[derive(Clone)]
pub struct TwoLevelDrive {
    pub rabi: Signal,
    pub detuning: Signal,
    pub t_span: (f64, f64),
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for TwoLevelDrive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwoLevelDrive")
            .field("t_span", &self.t_span)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

impl TwoLevelDrive {
    pub fn new(
        rabi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        detuning: impl Fn(f64) -> f64 + Send + Sync + 'static,
        t_span: (f64, f64),
        breakpoints: Vec<f64>,
    ) -> Self {
        Self {
            rabi: Arc::new(rabi),
            detuning: Arc::new(detuning),
            t_span,
            breakpoints,
        }
    }

    /// The drive run backwards in time: `H_rev(s) = -H(a + b - s)`.
    pub fn reversed(&self) -> Self {
        let (a, b) = self.t_span;
        let rabi = self.rabi.clone();
        let detuning = self.detuning.clone();
        let mut bps: Vec<f64> = self.breakpoints.iter().map(|&t| a + b - t).collect();
        bps.reverse();
        Self::new(
            move |s| -rabi(a + b - s),
            move |s| -detuning(a + b - s),
            self.t_span,
            bps,
        )
    }

    /// Uniform grid over the span with spacing at most `max_step`.
    pub fn grid(&self, max_step: f64) -> Vec<f64> {
        uniform_grid(self.t_span, max_step)
    }
}

pub fn uniform_grid(span: (f64, f64), max_step: f64) -> Vec<f64> {
    let (a, b) = span;
    let n = (((b - a) / max_step).ceil() as usize).max(1);
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}

impl TimeDependentHamiltonian for TwoLevelDrive {
    fn structure(&self) -> SparseHamiltonian {
        SparseHamiltonian {
            diag: vec![0.0; 2],
            couplings: vec![Coupling {
                row: 0,
                col: 1,
                value: C64::default(),
            }],
        }
    }

    fn fill(&self, t: f64, h: &mut SparseHamiltonian) {
        h.diag[1] = (self.detuning)(t);
        h.couplings[0].value = C64::new(0.5 * (self.rabi)(t), 0.0);
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// Bare amplitudes `(c1, c2)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelSeries {
    pub times: Vec<f64>,
    pub amplitudes: Vec<[C64; 2]>,
}

impl TwoLevelSeries {
    pub fn pop1(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c[0].norm_sqr()).collect()
    }

    /// `arg c1` unwrapped along the grid.
    pub fn phase1(&self) -> Vec<f64> {
        unwrap_phase(&self.amplitudes.iter().map(|c| c[0].arg()).collect::<Vec<_>>())
    }

    pub fn last(&self) -> [C64; 2] {
        *self.amplitudes.last().expect("non-empty series")
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "t_us,re_c1,im_c1,re_c2,im_c2,pop1,phase1_rad")?;
        for ((t, c), (p, ph)) in self
            .times
            .iter()
            .zip(&self.amplitudes)
            .zip(self.pop1().into_iter().zip(self.phase1()))
        {
            writeln!(
                w,
                "{t},{},{},{},{},{p},{ph}",
                c[0].re, c[0].im, c[1].re, c[1].im
            )?;
        }
        Ok(())
    }
}

pub fn evolve_exact(
    drive: &TwoLevelDrive,
    initial: [C64; 2],
    grid: &[f64],
    tol: Tolerances,
) -> Result<TwoLevelSeries> {
    if grid.first() != Some(&drive.t_span.0) || grid.last() != Some(&drive.t_span.1) {
        return Err(Error::InvalidState("grid must start and end on the drive span".into()));
    }
    let tr = propagate_schrodinger(drive, &initial, grid, tol)?;
    Ok(TwoLevelSeries {
        times: tr.times,
        amplitudes: tr.states.into_iter().map(|s| [s[0], s[1]]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DressedLabel {
    I,
    II,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DressedTrajectory {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub omega_minus: Vec<f64>,
    pub omega_plus: Vec<f64>,
    /// Dressed amplitudes `(c~1, c~2)`.
    pub dressed: Vec<[C64; 2]>,
    /// Bare amplitudes rebuilt from the dressed ones.
    pub bare: Vec<[C64; 2]>,
    /// `S(t) = 1/2 int_start^t Omega_-`.
    pub phase_s: Vec<f64>,
    pub adiabaticity: f64,
    pub adiabaticity_violated: bool,
}

impl DressedTrajectory {
    pub fn series(&self) -> TwoLevelSeries {
        TwoLevelSeries {
            times: self.times.clone(),
            amplitudes: self.bare.clone(),
        }
    }
}

struct DressedPoint {
    theta: f64,
    minus: f64,
    plus: f64,
}

fn dressed_point(drive: &TwoLevelDrive, t: f64) -> DressedPoint {
    let o0 = (drive.rabi)(t);
    let d = (drive.detuning)(t);
    let omega = o0.hypot(d);
    DressedPoint {
        theta: 0.5 * o0.atan2(d),
        minus: d - omega,
        plus: d + omega,
    }
}

fn to_bare(d: [C64; 2], theta: f64) -> [C64; 2] {
    let (s, c) = theta.sin_cos();
    [d[0] * c + d[1] * s, -d[0] * s + d[1] * c]
}

fn to_dressed(b: [C64; 2], theta: f64) -> [C64; 2] {
    let (s, c) = theta.sin_cos();
    [b[0] * c - b[1] * s, b[0] * s + b[1] * c]
}

/// Dressed-state evolution. Within each segment between breakpoints the
/// dressed amplitudes only acquire the phases `exp(-i/2 int Omega_-+)`; at a
/// breakpoint the bare state is carried over and re-projected onto the new
/// dressed basis.
pub fn evolve_adiabatic(
    drive: &TwoLevelDrive,
    initial: DressedLabel,
    grid: &[f64],
    threshold: f64,
) -> Result<DressedTrajectory> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidState("grid must be strictly increasing".into()));
    }
    let mut bps: Vec<f64> = drive.breakpoints.clone();
    bps.sort_by(f64::total_cmp);
    let is_bp = |t: f64| bps.binary_search_by(|b| b.total_cmp(&t)).is_ok();
    let left = |t: f64| if is_bp(t) { t.next_down() } else { t };

    let mut d = match initial {
        DressedLabel::I => [C64::new(1.0, 0.0), C64::default()],
        DressedLabel::II => [C64::default(), C64::new(1.0, 0.0)],
    };
    let mut s_acc = 0.0;
    let n = grid.len();
    let mut out = DressedTrajectory {
        times: grid.to_vec(),
        theta: Vec::with_capacity(n),
        omega_minus: Vec::with_capacity(n),
        omega_plus: Vec::with_capacity(n),
        dressed: Vec::with_capacity(n),
        bare: Vec::with_capacity(n),
        phase_s: Vec::with_capacity(n),
        adiabaticity: 0.0,
        adiabaticity_violated: false,
    };
    let record = |out: &mut DressedTrajectory, t: f64, d: [C64; 2], s: f64| {
        let p = dressed_point(drive, t);
        out.theta.push(p.theta);
        out.omega_minus.push(p.minus);
        out.omega_plus.push(p.plus);
        out.dressed.push(d);
        out.bare.push(to_bare(d, p.theta));
        out.phase_s.push(s);
    };
    record(&mut out, grid[0], d, 0.0);
    for w in grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let mut cuts: Vec<f64> = bps.iter().copied().filter(|&b| b > ta && b <= tb).collect();
        cuts.push(tb);
        cuts.dedup();
        let mut pa = ta;
        for pb in cuts {
            // Simpson on [pa, pb) for both eigenfrequencies
            let (fa, fm, fb) = (
                dressed_point(drive, pa),
                dressed_point(drive, 0.5 * (pa + pb)),
                dressed_point(drive, left(pb)),
            );
            let h6 = (pb - pa) / 6.0;
            let int_minus = h6 * (fa.minus + 4.0 * fm.minus + fb.minus);
            let int_plus = h6 * (fa.plus + 4.0 * fm.plus + fb.plus);
            d[0] *= C64::from_polar(1.0, -0.5 * int_minus);
            d[1] *= C64::from_polar(1.0, -0.5 * int_plus);
            s_acc += 0.5 * int_minus;
            if is_bp(pb) {
                let bare = to_bare(d, fb.theta);
                d = to_dressed(bare, dressed_point(drive, pb).theta);
            }
            pa = pb;
        }
        record(&mut out, tb, d, s_acc);
    }
    out.adiabaticity = adiabaticity(drive, grid, &bps);
    out.adiabaticity_violated = out.adiabaticity > threshold;
    Ok(out)
}

fn adiabaticity(drive: &TwoLevelDrive, grid: &[f64], bps: &[f64]) -> f64 {
    let h = 1e-6;
    grid.iter()
        .filter(|&&t| bps.iter().all(|&b| (t - b).abs() > h))
        .filter(|&&t| t - h >= drive.t_span.0 && t + h <= drive.t_span.1)
        .map(|&t| {
            let o0 = (drive.rabi)(t);
            let d = (drive.detuning)(t);
            let omega2 = o0 * o0 + d * d;
            let do0 = ((drive.rabi)(t + h) - (drive.rabi)(t - h)) / (2.0 * h);
            let dd = ((drive.detuning)(t + h) - (drive.detuning)(t - h)) / (2.0 * h);
            do0.abs().max(dd.abs()) / omega2
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageShape {
    /// `Omega0 exp(-(t - t_j)^2 / 2w^2)` with a linear chirp `s1 (t - t_j)`.
    GaussianLinearChirp,
    /// Constant `Omega0` with `s1 (t - t_j) + s2 (t - t_j)^5`.
    RectangularNonlinear,
}

/// Parameters of a two-pulse sequence; each pulse owns a window of
/// half-width `(t2 - t1)/2` centred on its crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageParams {
    pub rabi_peak: f64,
    pub width: f64,
    pub s1: f64,
    pub s2: f64,
    pub t1: f64,
    pub t2: f64,
}

impl PassageParams {
    /// Gaussian pulses with `Omega0/2pi = 2 MHz`, `w = 0.12 us` and
    /// `s1/2pi = -10 MHz/us`, centred at 0.45 and 1.35 us.
    pub fn gaussian() -> Self {
        Self {
            rabi_peak: mhz(2.0),
            width: 0.12,
            s1: mhz(-10.0),
            s2: 0.0,
            t1: 0.45,
            t2: 1.35,
        }
    }

    /// Rectangular pulses with `Omega0/2pi = 2.1 MHz`, `s1/2pi = -10 MHz/us`
    /// and `s2/2pi = -2600 MHz/us^5`.
    pub fn rectangular() -> Self {
        Self {
            rabi_peak: mhz(2.1),
            width: 0.0,
            s1: mhz(-10.0),
            s2: mhz(-2600.0),
            t1: 0.45,
            t2: 1.35,
        }
    }

    /// The illustrative Gaussian sequence: `Omega0/2pi = 20 MHz`,
    /// `s1/2pi = -50 MHz/us`, pulses at 0.5 and 1.5 us.
    pub fn illustration() -> Self {
        Self {
            rabi_peak: mhz(20.0),
            width: 0.12,
            s1: mhz(-50.0),
            s2: 0.0,
            t1: 0.5,
            t2: 1.5,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.t2 - self.t1)
    }

    pub fn profile(&self, shape: PassageShape) -> Result<DetuningProfile> {
        let s2 = match shape {
            PassageShape::GaussianLinearChirp => 0.0,
            PassageShape::RectangularNonlinear => self.s2,
        };
        DetuningProfile::centred(self.s1, s2, &[self.t1, self.t2], self.half_width())
    }

    fn validate(&self, shape: PassageShape) -> Result<()> {
        let ok = self.t2 > self.t1
            && self.rabi_peak.is_finite()
            && self.s1.is_finite()
            && self.s2.is_finite()
            && (shape == PassageShape::RectangularNonlinear || self.width > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProfile(format!("bad passage parameters {self:?}")))
        }
    }
}

pub fn passage_drive(shape: PassageShape, params: &PassageParams, sign_flip: bool) -> Result<TwoLevelDrive> {
    params.validate(shape)?;
    let profile = params.profile(shape)?;
    let span = profile.span();
    let bps = profile.breakpoints();
    let p = *params;
    let mid = 0.5 * (p.t1 + p.t2);
    let rabi = move |t: f64| {
        let second = t >= mid;
        let centre = if second { p.t2 } else { p.t1 };
        let sign = if second && sign_flip { -1.0 } else { 1.0 };
        let amp = match shape {
            PassageShape::GaussianLinearChirp => {
                let x = (t - centre) / p.width;
                p.rabi_peak * (-0.5 * x * x).exp()
            }
            PassageShape::RectangularNonlinear => p.rabi_peak,
        };
        sign * amp
    };
    Ok(TwoLevelDrive::new(
        rabi,
        move |t| profile_detuning(&profile, t),
        span,
        bps,
    ))
}

#[derive(Debug, Clone)]
pub struct DoublePassage {
    pub series: TwoLevelSeries,
    pub final_amplitudes: [C64; 2],
    /// `1 - |c1|^2` at the end.
    pub population_error: f64,
    /// Unwrapped `arg c1` at the end.
    pub phase: f64,
}

/// Runs the exact evolution from `|1>` over the two-pulse sequence on a
/// 1 ns grid.
pub fn double_passage(
    shape: PassageShape,
    params: &PassageParams,
    sign_flip: bool,
    tol: Tolerances,
) -> Result<DoublePassage> {
    let drive = passage_drive(shape, params, sign_flip)?;
    let grid = drive.grid(1e-3);
    let series = evolve_exact(&drive, [C64::new(1.0, 0.0), C64::default()], &grid, tol)?;
    let last = series.last();
    let phase = *series.phase1().last().expect("non-empty");
    Ok(DoublePassage {
        final_amplitudes: last,
        population_error: 1.0 - last[0].norm_sqr(),
        phase,
        series,
    })
}
