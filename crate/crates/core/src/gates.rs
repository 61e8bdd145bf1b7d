//! CZ and CNOT gates on two atoms built from a double Förster passage,
//! truth tables, Bell-state preparation and density-matrix reconstruction.
//!
//! Atom `a` is the control (Rydberg level 90S), atom `b` the target (96S).
//! Register basis, in order: the nine products of `{0, 1, r}` listed as
//! `00, 01, 10, 11, 0r, r0, 1r, r1, rr` (control first), followed by one
//! state per Förster channel.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::Sublevel;
use crate::catalog::ChannelData;
use crate::dynamics::{
    propagate_master, propagate_schrodinger, wrap_angle, Coupling, DecayChannel, QuantumState,
    SparseHamiltonian, TimeDependentHamiltonian,
};
use crate::error::{Error, Result};
use crate::forster::{build_catalog, passage_amplitude, ChannelSpec, PairHamiltonian};
use crate::ode::Tolerances;
use crate::stark::{field_from_profile, stark_shift, DetuningProfile, FieldWaveform, PolarizabilityTable};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    Control,
    Target,
}

/// Single-atom level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Zero,
    One,
    Rydberg,
}

/// Two-level subspace addressed by a laser pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// `|0> <-> |1>`
    Qubit,
    /// `|1> <-> |r>`
    Rydberg,
}

impl Transition {
    fn levels(self) -> (Level, Level) {
        match self {
            Self::Qubit => (Level::Zero, Level::One),
            Self::Rydberg => (Level::One, Level::Rydberg),
        }
    }
}

/// Index bookkeeping for the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitRegister {
    pub channels: usize,
}

impl QubitRegister {
    pub const RR: usize = 8;

    pub fn dim(&self) -> usize {
        9 + self.channels
    }

    pub fn index(a: Level, b: Level) -> usize {
        use Level::*;
        match (a, b) {
            (Zero, Zero) => 0,
            (Zero, One) => 1,
            (One, Zero) => 2,
            (One, One) => 3,
            (Zero, Rydberg) => 4,
            (Rydberg, Zero) => 5,
            (One, Rydberg) => 6,
            (Rydberg, One) => 7,
            (Rydberg, Rydberg) => 8,
        }
    }

    pub fn forster(k: usize) -> usize {
        9 + k
    }

    pub fn label(&self, i: usize) -> String {
        const NAMES: [&str; 9] = ["00", "01", "10", "11", "0r", "r0", "1r", "r1", "rr"];
        match NAMES.get(i) {
            Some(n) => n.to_string(),
            None => format!("F{}", i - 8),
        }
    }

    /// Embeds a computational-subspace state into the register.
    pub fn embed(&self, state: &QuantumState) -> Result<QuantumState> {
        let n = self.dim();
        match state {
            QuantumState::Pure(v) if v.len() == 4 => {
                let mut out = vec![C64::default(); n];
                out[..4].copy_from_slice(v);
                Ok(QuantumState::Pure(out))
            }
            QuantumState::Mixed(m) if m.nrows() == 4 => {
                let mut out = DMatrix::zeros(n, n);
                out.view_mut((0, 0), (4, 4)).copy_from(m);
                Ok(QuantumState::Mixed(out))
            }
            s if s.dim() == n => Ok(s.clone()),
            s => Err(Error::InvalidState(format!(
                "state of dimension {} does not fit a register of {n}",
                s.dim()
            ))),
        }
    }
}

const LEVELS: [Level; 3] = [Level::Zero, Level::One, Level::Rydberg];

fn product_pairs() -> impl Iterator<Item = (Level, Level)> {
    LEVELS.into_iter().flat_map(|a| LEVELS.into_iter().map(move |b| (a, b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateEvent {
    /// `exp(-i angle/2 (cos phase sx + sin phase sy))` on one transition;
    /// `phase = pi/2` is a rotation about y. Instantaneous when
    /// `duration == 0`, otherwise driven at constant Rabi frequency with the
    /// field off.
    Rotation {
        time: f64,
        atom: Atom,
        transition: Transition,
        angle: f64,
        phase: f64,
        duration: f64,
    },
    /// `diag(1, exp(i angle))` on `{|0>, |1>}` of one atom.
    PhaseShift { time: f64, atom: Atom, angle: f64 },
    FieldRamp { waveform: FieldWaveform },
    /// Free evolution with the field off.
    Wait { time: f64, duration: f64 },
}

impl GateEvent {
    pub fn interval(&self) -> (f64, f64) {
        match self {
            Self::Rotation { time, duration, .. } => (*time, time + duration),
            Self::PhaseShift { time, .. } => (*time, *time),
            Self::FieldRamp { waveform } => waveform.span(),
            Self::Wait { time, duration } => (*time, time + duration),
        }
    }

    pub fn instant_rotation(time: f64, atom: Atom, transition: Transition, angle: f64, phase: f64) -> Self {
        Self::Rotation {
            time,
            atom,
            transition,
            angle,
            phase,
            duration: 0.0,
        }
    }
}

/// Ordered gate events at a fixed interatomic distance (um).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub distance: f64,
    pub events: Vec<GateEvent>,
}

impl PulseSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0) {
            return Err(Error::InvalidSchedule(format!("distance {}", self.distance)));
        }
        let mut last_end = f64::NEG_INFINITY;
        for e in &self.events {
            let (start, end) = e.interval();
            if !(end >= start) || !start.is_finite() || !end.is_finite() {
                return Err(Error::InvalidSchedule(format!("bad interval in {e:?}")));
            }
            if start < last_end {
                return Err(Error::InvalidSchedule(format!("event overlaps its predecessor: {e:?}")));
            }
            last_end = end;
        }
        Ok(())
    }

    pub fn ramp(&self) -> Option<&FieldWaveform> {
        self.events.iter().find_map(|e| match e {
            GateEvent::FieldRamp { waveform } => Some(waveform),
            _ => None,
        })
    }

    /// Gives every rotation a finite duration `|angle| / rabi` and moves later
    /// events so none overlap; field ramps keep their own time axis, so
    /// rotations are re-timed around them.
    pub fn with_finite_pulses(&self, rabi: f64) -> Result<Self> {
        if !(rabi > 0.0) {
            return Err(Error::InvalidSchedule("Rabi frequency must be positive".into()));
        }
        let mut out = self.clone();
        let mut cursor = f64::NEG_INFINITY;
        let n = out.events.len();
        for i in 0..n {
            let next_ramp_start = out.events[i + 1..].iter().find_map(|e| match e {
                GateEvent::FieldRamp { waveform } => Some(waveform.span().0),
                _ => None,
            });
            match &mut out.events[i] {
                GateEvent::Rotation { time, angle, duration, .. } => {
                    *duration = angle.abs() / rabi;
                    *time = time.max(cursor);
                    if let Some(ramp_start) = next_ramp_start {
                        if *time + *duration > ramp_start {
                            *time = ramp_start - *duration;
                        }
                    }
                    cursor = *time + *duration;
                }
                other => {
                    let (s, e) = other.interval();
                    cursor = cursor.max(e).max(s);
                }
            }
        }
        // Rotations pushed before a ramp may now overlap earlier pulses;
        // lay out each pre-ramp run backwards from the ramp.
        let mut limit = f64::INFINITY;
        for e in out.events.iter_mut().rev() {
            match e {
                GateEvent::FieldRamp { waveform } => limit = waveform.span().0,
                GateEvent::Rotation { time, duration, .. } if *time + *duration > limit => {
                    *time = limit - *duration;
                    limit = *time;
                }
                other => limit = limit.min(other.interval().0),
            }
        }
        out.validate()?;
        Ok(out)
    }
}

/// Decay rates (1/us) of register states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterRates {
    pub control_rydberg: f64,
    pub target_rydberg: f64,
    pub forster: Vec<f64>,
}

impl RegisterRates {
    pub fn decays(&self) -> Vec<DecayChannel> {
        let ix = QubitRegister::index;
        let (a, b) = (self.control_rydberg, self.target_rydberg);
        let mut out = vec![
            DecayChannel { index: ix(Level::Zero, Level::Rydberg), rate: b },
            DecayChannel { index: ix(Level::One, Level::Rydberg), rate: b },
            DecayChannel { index: ix(Level::Rydberg, Level::Zero), rate: a },
            DecayChannel { index: ix(Level::Rydberg, Level::One), rate: a },
            DecayChannel { index: QubitRegister::RR, rate: a + b },
        ];
        out.extend(
            self.forster
                .iter()
                .enumerate()
                .map(|(k, &rate)| DecayChannel { index: QubitRegister::forster(k), rate }),
        );
        out
    }
}

/// Everything needed to run gates: channel catalog, polarizabilities, decay
/// rates and integrator tolerances.
#[derive(Debug, Clone)]
pub struct GateModel {
    pub channels: Vec<ChannelSpec>,
    pub table: PolarizabilityTable,
    pub rates: RegisterRates,
    pub tol: Tolerances,
}

impl GateModel {
    pub fn from_catalog(data: &ChannelData, coupling_floor: f64, tol: Tolerances) -> Result<Self> {
        let channels = build_catalog(data, coupling_floor)?;
        Self::new(data, channels, tol)
    }

    /// Model restricted to the given channels of the catalog.
    pub fn new(data: &ChannelData, channels: Vec<ChannelSpec>, tol: Tolerances) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Catalog("no channels".into()))?;
        let rate = |s: &Sublevel| {
            data.decay_rate(&s.level)
                .ok_or_else(|| Error::Catalog(format!("no lifetime for {}", s.level)))
        };
        let rates = RegisterRates {
            control_rydberg: rate(&first.a)?,
            target_rydberg: rate(&first.b)?,
            forster: channels
                .iter()
                .map(|ch| Ok(rate(&ch.alpha)? + rate(&ch.beta)?))
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            table: data.polarizabilities()?,
            channels,
            rates,
            tol,
        })
    }

    pub fn register(&self) -> QubitRegister {
        QubitRegister {
            channels: self.channels.len(),
        }
    }

    pub fn control_level(&self) -> Sublevel {
        self.channels[0].a
    }

    pub fn target_level(&self) -> Sublevel {
        self.channels[0].b
    }

    pub fn pair(&self, distance: f64) -> Result<PairHamiltonian> {
        PairHamiltonian::new(self.channels.clone(), &self.table, distance)
    }

    /// Field waveform tuning the first channel along `profile`.
    pub fn waveform(&self, profile: &DetuningProfile) -> Result<FieldWaveform> {
        field_from_profile(profile, &self.channels[0], &self.table)
    }
}

/// Laser phase that cancels the Stark phase a Rydberg sublevel accumulates
/// during the waveform: `-int stark_shift(E(t)) dt`.
pub fn stark_phase_correction(
    table: &PolarizabilityTable,
    level: &Sublevel,
    waveform: &FieldWaveform,
) -> Result<f64> {
    let p = table.for_sublevel(level)?;
    let (a, b) = waveform.span();
    let mut edges = vec![a];
    edges.extend(waveform.breakpoints());
    edges.push(b);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let seg_end = w[1];
        // right end taken as a left limit so each segment stays smooth
        let f = |t: f64| -stark_shift(p, waveform.field_squared(t.min(seg_end.next_down())).sqrt());
        total += crate::quad::integrate(f, w[0], w[1], 1e-13);
    }
    Ok(total)
}

fn check_profile(profile: &DetuningProfile) -> Result<()> {
    profile.validate()?;
    if profile.crossings.len() != 2 {
        return Err(Error::InvalidProfile(format!(
            "gate needs exactly two crossings, got {}",
            profile.crossings.len()
        )));
    }
    Ok(())
}

/// CZ: pi pulses `|1> -> |r>` on both atoms, the field ramp with the second
/// crossing moved by `t2_correction`, then `-pi` pulses whose laser phases
/// cancel each atom's Stark phase.
pub fn cz_sequence(
    model: &GateModel,
    distance: f64,
    profile: &DetuningProfile,
    t2_correction: f64,
) -> Result<PulseSchedule> {
    check_profile(profile)?;
    let profile = profile.with_crossing_shift(1, t2_correction)?;
    let waveform = model.waveform(&profile)?;
    let (start, end) = waveform.span();
    let phi_a = stark_phase_correction(&model.table, &model.control_level(), &waveform)?;
    let phi_b = stark_phase_correction(&model.table, &model.target_level(), &waveform)?;
    let rot = GateEvent::instant_rotation;
    let schedule = PulseSchedule {
        distance,
        events: vec![
            rot(start, Atom::Control, Transition::Rydberg, PI, 0.0),
            rot(start, Atom::Target, Transition::Rydberg, PI, 0.0),
            GateEvent::FieldRamp { waveform },
            rot(end, Atom::Control, Transition::Rydberg, -PI, phi_a),
            rot(end, Atom::Target, Transition::Rydberg, -PI, phi_b),
        ],
    };
    schedule.validate()?;
    Ok(schedule)
}

/// CNOT: the CZ wrapped in `-pi/2` and `+pi/2` y rotations of the target.
pub fn cnot_sequence(
    model: &GateModel,
    distance: f64,
    profile: &DetuningProfile,
    t2_correction: f64,
) -> Result<PulseSchedule> {
    let cz = cz_sequence(model, distance, profile, t2_correction)?;
    let (start, end) = cz.ramp().expect("cz has a ramp").span();
    let mut events = vec![GateEvent::instant_rotation(start, Atom::Target, Transition::Qubit, -PI / 2.0, PI / 2.0)];
    events.extend(cz.events);
    events.push(GateEvent::instant_rotation(end, Atom::Target, Transition::Qubit, PI / 2.0, PI / 2.0));
    let schedule = PulseSchedule { distance, events };
    schedule.validate()?;
    Ok(schedule)
}

/// Hadamard on the control (a Z phase followed by a `pi/2` y rotation) and
/// then the CNOT.
pub fn bell_sequence(cnot: &PulseSchedule) -> Result<PulseSchedule> {
    let start = cnot.events.first().map_or(0.0, |e| e.interval().0);
    let mut events = vec![
        GateEvent::PhaseShift { time: start, atom: Atom::Control, angle: PI },
        GateEvent::instant_rotation(start, Atom::Control, Transition::Qubit, PI / 2.0, PI / 2.0),
    ];
    events.extend(cnot.events.iter().cloned());
    let schedule = PulseSchedule {
        distance: cnot.distance,
        events,
    };
    schedule.validate()?;
    Ok(schedule)
}

fn single_atom_unitary(event: &GateEvent) -> Option<(Atom, [[C64; 3]; 3])> {
    let zero = C64::default();
    let one = C64::new(1.0, 0.0);
    let mut u = [[one, zero, zero], [zero, one, zero], [zero, zero, one]];
    match *event {
        GateEvent::Rotation { atom, transition, angle, phase, .. } => {
            let (x, y) = transition.levels();
            let (i, j) = (x as usize, y as usize);
            let (s, c) = (0.5 * angle).sin_cos();
            let off = C64::new(0.0, -s) * C64::from_polar(1.0, -phase);
            u[i][i] = C64::new(c, 0.0);
            u[j][j] = C64::new(c, 0.0);
            u[i][j] = off;
            u[j][i] = C64::new(0.0, -s) * C64::from_polar(1.0, phase);
            Some((atom, u))
        }
        GateEvent::PhaseShift { atom, angle, .. } => {
            u[1][1] = C64::from_polar(1.0, angle);
            Some((atom, u))
        }
        _ => None,
    }
}

/// Register unitary of an instantaneous single-atom operation.
fn lift(reg: &QubitRegister, atom: Atom, u: &[[C64; 3]; 3]) -> DMatrix<C64> {
    let n = reg.dim();
    let mut m = DMatrix::<C64>::identity(n, n);
    for (a, b) in product_pairs() {
        m[(QubitRegister::index(a, b), QubitRegister::index(a, b))] = C64::default();
    }
    for (a1, b1) in product_pairs() {
        for (a2, b2) in product_pairs() {
            let v = match atom {
                Atom::Control if b1 == b2 => u[a1 as usize][a2 as usize],
                Atom::Target if a1 == a2 => u[b1 as usize][b2 as usize],
                _ => continue,
            };
            m[(QubitRegister::index(a1, b1), QubitRegister::index(a2, b2))] = v;
        }
    }
    m
}

/// Register Hamiltonian: single-atom Stark shifts on the Rydberg levels,
/// pair detunings on the Förster states, the star of Förster couplings from
/// `rr`, and optionally one laser-driven transition.
struct RegisterHamiltonian<'a> {
    reg: QubitRegister,
    pair: &'a PairHamiltonian,
    alpha_a: f64,
    alpha_b: f64,
    waveform: Option<&'a FieldWaveform>,
    laser: Option<(Atom, Transition, f64, f64)>,
}

impl TimeDependentHamiltonian for RegisterHamiltonian<'_> {
    fn structure(&self) -> SparseHamiltonian {
        let mut h = SparseHamiltonian::zeros(self.reg.dim());
        for (k, &v) in self.pair.couplings().iter().enumerate() {
            h.couplings.push(Coupling {
                row: QubitRegister::RR,
                col: QubitRegister::forster(k),
                value: C64::new(v, 0.0),
            });
        }
        if let Some((atom, transition, rabi, phase)) = self.laser {
            let (x, y) = transition.levels();
            let value = C64::from_polar(0.5 * rabi, -phase);
            for other in LEVELS {
                let (row, col) = match atom {
                    Atom::Control => (QubitRegister::index(x, other), QubitRegister::index(y, other)),
                    Atom::Target => (QubitRegister::index(other, x), QubitRegister::index(other, y)),
                };
                h.couplings.push(Coupling { row, col, value });
            }
        }
        h
    }

    fn fill(&self, t: f64, h: &mut SparseHamiltonian) {
        let e2 = self.waveform.map_or(0.0, |w| w.field_squared(t));
        let sa = -0.5 * self.alpha_a * e2;
        let sb = -0.5 * self.alpha_b * e2;
        let ix = QubitRegister::index;
        use Level::*;
        h.diag[ix(Zero, Rydberg)] = sb;
        h.diag[ix(One, Rydberg)] = sb;
        h.diag[ix(Rydberg, Zero)] = sa;
        h.diag[ix(Rydberg, One)] = sa;
        h.diag[QubitRegister::RR] = sa + sb;
        for (k, d) in self.pair.detunings_sq(e2).enumerate() {
            h.diag[QubitRegister::forster(k)] = sa + sb + d;
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.waveform.map_or_else(Vec::new, |w| w.breakpoints())
    }
}

/// Final register state of a gate run.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRun {
    pub state: QuantumState,
}

impl GateRun {
    /// 4x4 block of the density matrix on the computational states.
    pub fn computational(&self) -> DMatrix<C64> {
        let rho = self.state.to_density();
        rho.view((0, 0), (4, 4)).into_owned()
    }

    pub fn populations(&self) -> [f64; 4] {
        let p = self.state.populations();
        [p[0], p[1], p[2], p[3]]
    }
}

fn evolve(
    h: &RegisterHamiltonian<'_>,
    state: QuantumState,
    span: (f64, f64),
    decays: &[DecayChannel],
    tol: Tolerances,
) -> Result<QuantumState> {
    let grid = [span.0, span.1];
    Ok(match state {
        QuantumState::Pure(psi) if decays.is_empty() => {
            QuantumState::Pure(propagate_schrodinger(h, &psi, &grid, tol)?.last().clone())
        }
        other => {
            let rho = other.to_density();
            QuantumState::Mixed(propagate_master(h, &rho, decays, &grid, tol)?.last().clone())
        }
    })
}

/// Runs the schedule from `initial` (a 4-dimensional computational state or
/// a full register state). Pure inputs without decay stay pure; everything
/// else is propagated as a density matrix.
pub fn run_gate(
    model: &GateModel,
    schedule: &PulseSchedule,
    initial: &QuantumState,
    decay: bool,
) -> Result<GateRun> {
    schedule.validate()?;
    let reg = model.register();
    let mut state = reg.embed(initial)?;
    let trace = state.trace();
    if (trace - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("initial state has norm {trace}")));
    }
    let pair = model.pair(schedule.distance)?;
    let decays = if decay { model.rates.decays() } else { Vec::new() };
    let alpha_a = model.table.for_sublevel(&model.control_level())?.alpha;
    let alpha_b = model.table.for_sublevel(&model.target_level())?.alpha;
    let ham = |waveform, laser| RegisterHamiltonian {
        reg,
        pair: &pair,
        alpha_a,
        alpha_b,
        waveform,
        laser,
    };
    for event in &schedule.events {
        state = match event {
            GateEvent::Rotation {
                atom,
                transition,
                angle,
                phase,
                duration,
                ..
            } if *duration > 0.0 => {
                let h = ham(None, Some((*atom, *transition, angle / duration, *phase)));
                evolve(&h, state, (0.0, *duration), &decays, model.tol)?
            }
            GateEvent::Rotation { .. } | GateEvent::PhaseShift { .. } => {
                let (atom, u) = single_atom_unitary(event).expect("single-atom event");
                let m = lift(&reg, atom, &u);
                match state {
                    QuantumState::Pure(psi) => {
                        let out = &m * DVector::from_vec(psi);
                        QuantumState::Pure(out.as_slice().to_vec())
                    }
                    QuantumState::Mixed(rho) => QuantumState::Mixed(&m * rho * m.adjoint()),
                }
            }
            GateEvent::FieldRamp { waveform } => {
                evolve(&ham(Some(waveform), None), state, waveform.span(), &decays, model.tol)?
            }
            GateEvent::Wait { duration, .. } => {
                evolve(&ham(None, None), state, (0.0, *duration), &decays, model.tol)?
            }
        };
    }
    Ok(GateRun { state })
}

fn basis_state(i: usize) -> QuantumState {
    let mut v = vec![C64::default(); 4];
    v[i] = C64::new(1.0, 0.0);
    QuantumState::Pure(v)
}

/// Ideal CNOT output index for each computational input.
pub const CNOT_MAP: [usize; 4] = [0, 1, 3, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    /// `populations[input][output]`
    pub populations: [[f64; 4]; 4],
    /// Mean population of the ideal output over the four inputs.
    pub overlap: f64,
}

pub fn truth_table(
    model: &GateModel,
    schedule: &PulseSchedule,
    ideal: &[usize; 4],
    decay: bool,
) -> Result<TruthTable> {
    let rows = (0..4)
        .map(|i| Ok(run_gate(model, schedule, &basis_state(i), decay)?.populations()))
        .collect::<Result<Vec<_>>>()?;
    let mut populations = [[0.0; 4]; 4];
    populations.copy_from_slice(&rows);
    let overlap = (0..4).map(|i| populations[i][ideal[i]]).sum::<f64>() / 4.0;
    Ok(TruthTable { populations, overlap })
}

/// Diagonal phases of a schedule on the computational states (decay off).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostics {
    /// `arg <i|U|i>` relative to `|00>`, wrapped to `(-pi, pi]`.
    pub relative: [f64; 4],
    /// `phi_11 - phi_10 - phi_01 + phi_00`, wrapped.
    pub controlled_phase: f64,
    /// `1 - |<i|U|i>|^2` per input.
    pub leakage: [f64; 4],
}

pub fn phase_diagnostics(model: &GateModel, schedule: &PulseSchedule) -> Result<PhaseDiagnostics> {
    let mut amp = [C64::default(); 4];
    for (i, a) in amp.iter_mut().enumerate() {
        match run_gate(model, schedule, &basis_state(i), false)?.state {
            QuantumState::Pure(v) => *a = v[i],
            QuantumState::Mixed(_) => unreachable!("pure input without decay stays pure"),
        }
    }
    let arg = |i: usize| amp[i].arg();
    Ok(PhaseDiagnostics {
        relative: [0, 1, 2, 3].map(|i| wrap_angle(arg(i) - arg(0))),
        controlled_phase: wrap_angle(arg(3) - arg(2) - arg(1) + arg(0)),
        leakage: amp.map(|a| 1.0 - a.norm_sqr()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [Self; 4] = [Self::PhiPlus, Self::PhiMinus, Self::PsiPlus, Self::PsiMinus];

    /// Computational input that the Hadamard + CNOT circuit maps onto this
    /// state.
    pub fn input(self) -> usize {
        match self {
            Self::PhiPlus => 0,
            Self::PsiPlus => 1,
            Self::PhiMinus => 2,
            Self::PsiMinus => 3,
        }
    }

    pub fn vector(self) -> [C64; 4] {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = C64::default();
        match self {
            Self::PhiPlus => [h, z, z, h],
            Self::PhiMinus => [h, z, z, -h],
            Self::PsiPlus => [z, h, h, z],
            Self::PsiMinus => [z, h, -h, z],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PhiPlus => "phi_plus",
            Self::PhiMinus => "phi_minus",
            Self::PsiPlus => "psi_plus",
            Self::PsiMinus => "psi_minus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == s)
    }
}

/// `<psi|rho|psi>` for a 4-component state.
pub fn state_fidelity(psi: &[C64; 4], rho: &DMatrix<C64>) -> f64 {
    let v = DVector::from_column_slice(psi);
    (v.adjoint() * rho * &v)[(0, 0)].re
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellRun {
    pub state: BellState,
    pub fidelity_raw: f64,
    pub fidelity_reconstructed: f64,
    pub rho_raw: DMatrix<C64>,
    pub rho_reconstructed: DMatrix<C64>,
}

/// Prepares a Bell state with a Hadamard on the control followed by `cnot`.
pub fn bell_state_run(
    model: &GateModel,
    which: BellState,
    cnot: &PulseSchedule,
    decay: bool,
) -> Result<BellRun> {
    let schedule = bell_sequence(cnot)?;
    let run = run_gate(model, &schedule, &basis_state(which.input()), decay)?;
    let rho_raw = run.computational();
    let rho_reconstructed = reconstruct_physical(&rho_raw);
    let target = which.vector();
    Ok(BellRun {
        state: which,
        fidelity_raw: state_fidelity(&target, &rho_raw),
        fidelity_reconstructed: state_fidelity(&target, &rho_reconstructed),
        rho_raw,
        rho_reconstructed,
    })
}

/// Closest positive semidefinite matrix with the same trace: negative
/// eigenvalues are clipped to zero and their weight is spread evenly over
/// the remaining ones, smallest first. Physical inputs are returned
/// unchanged.
pub fn reconstruct_physical(rho: &DMatrix<C64>) -> DMatrix<C64> {
    let herm = (rho + rho.adjoint()).scale(0.5);
    let eig = herm.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return rho.clone();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut carry = 0.0;
    let mut k = n;
    while k > 0 {
        let share = carry / k as f64;
        if lambda[k - 1] + share < 0.0 {
            carry += lambda[k - 1];
            lambda[k - 1] = 0.0;
            k -= 1;
        } else {
            for l in lambda.iter_mut().take(k) {
                *l += share;
            }
            break;
        }
    }
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (slot, &i) in order.iter().enumerate() {
        if lambda[slot] == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        out += (v * v.adjoint()).scale(lambda[slot]);
    }
    (&out + out.adjoint()).scale(0.5)
}

/// Result of the second-crossing calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub t2_correction: f64,
    /// Residual `arg c_SS - pi`, wrapped.
    pub phase_error: f64,
    pub population: f64,
}

/// Shifts the second crossing within `bracket` (us) so that the pair-state
/// amplitude ends with phase `pi`, by golden-section search on the squared
/// wrapped phase error. Decay is off.
pub fn calibrate_t2(
    model: &GateModel,
    distance: f64,
    profile: &DetuningProfile,
    bracket: (f64, f64),
) -> Result<Calibration> {
    check_profile(profile)?;
    let pair = model.pair(distance)?;
    let eval = |dt: f64| -> Result<(f64, C64)> {
        let w = model.waveform(&profile.with_crossing_shift(1, dt)?)?;
        let c = passage_amplitude(&pair, &w, model.tol)?;
        Ok((wrap_angle(c.arg() - PI), c))
    };
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = bracket;
    let mut x1 = b - invphi * (b - a);
    let mut x2 = a + invphi * (b - a);
    let mut f1 = eval(x1)?.0.powi(2);
    let mut f2 = eval(x2)?.0.powi(2);
    while b - a > 1e-7 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = eval(x1)?.0.powi(2);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = eval(x2)?.0.powi(2);
        }
    }
    let best = 0.5 * (a + b);
    let (err, c) = eval(best)?;
    Ok(Calibration {
        t2_correction: best,
        phase_error: err,
        population: c.norm_sqr(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellFidelity {
    pub state: BellState,
    pub raw: f64,
    pub reconstructed: f64,
}

/// Summary of one gate configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub distance: f64,
    pub t2_correction: f64,
    pub decay: bool,
    pub truth_table: TruthTable,
    pub bell_fidelities: Vec<BellFidelity>,
    pub phases: PhaseDiagnostics,
}

/// Truth table, phase diagnostics and the requested Bell fidelities of the
/// CNOT at one distance.
pub fn evaluate_gate(
    model: &GateModel,
    distance: f64,
    profile: &DetuningProfile,
    t2_correction: f64,
    decay: bool,
    bell: &[BellState],
) -> Result<GateResult> {
    let cz = cz_sequence(model, distance, profile, t2_correction)?;
    let cnot = cnot_sequence(model, distance, profile, t2_correction)?;
    let bell_fidelities = bell
        .iter()
        .map(|&b| {
            let r = bell_state_run(model, b, &cnot, decay)?;
            Ok(BellFidelity {
                state: b,
                raw: r.fidelity_raw,
                reconstructed: r.fidelity_reconstructed,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GateResult {
        distance,
        t2_correction,
        decay,
        truth_table: truth_table(model, &cnot, &CNOT_MAP, decay)?,
        bell_fidelities,
        phases: phase_diagnostics(model, &cz)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub distance: f64,
    pub t2_correction: f64,
    pub overlap: f64,
    /// Raw fidelity of the prepared `Phi+`.
    pub bell_phi_plus: f64,
    pub bell_phi_plus_reconstructed: f64,
}

/// CNOT overlap and `Phi+` fidelity for every `(distance, t2_correction)`
/// point, evaluated in parallel and returned sorted by distance then
/// correction.
pub fn gate_sweep(
    model: &GateModel,
    points: &[(f64, f64)],
    profile: &DetuningProfile,
    decay: bool,
) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(Error::InvalidSchedule("empty sweep".into()));
    }
    let mut rows = points
        .par_iter()
        .map(|&(distance, dt)| {
            let cnot = cnot_sequence(model, distance, profile, dt)?;
            let table = truth_table(model, &cnot, &CNOT_MAP, decay)?;
            let bell = bell_state_run(model, BellState::PhiPlus, &cnot, decay)?;
            Ok(SweepRow {
                distance,
                t2_correction: dt,
                overlap: table.overlap,
                bell_phi_plus: bell.fidelity_raw,
                bell_phi_plus_reconstructed: bell.fidelity_reconstructed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|x, y| {
        x.distance
            .total_cmp(&y.distance)
            .then(x.t2_correction.total_cmp(&y.t2_correction))
    });
    Ok(rows)
}

pub fn distance_sweep(
    model: &GateModel,
    distances: &[f64],
    profile: &DetuningProfile,
    t2_correction: f64,
    decay: bool,
) -> Result<Vec<SweepRow>> {
    let points: Vec<(f64, f64)> = distances.iter().map(|&r| (r, t2_correction)).collect();
    gate_sweep(model, &points, profile, decay)
}

/// Largest minus smallest `Phi+` fidelity among rows within `half_width` of
/// `nominal`.
pub fn fidelity_spread(rows: &[SweepRow], nominal: f64, half_width: f64) -> f64 {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| (r.distance - nominal).abs() <= half_width + 1e-12)
        .map(|r| r.bell_phi_plus)
        .collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if vals.is_empty() {
        0.0
    } else {
        max - min
    }
}
