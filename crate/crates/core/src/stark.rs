//! Quadratic Stark shifts, channel detunings and the field waveform that
//! realises a prescribed detuning profile.

use serde::{Deserialize, Serialize};

use crate::angular::{RydbergLevel, Sublevel};
use crate::error::{Error, Result};
use crate::forster::ChannelSpec;
use crate::mhz;

/// Scalar polarizability of one `(level, |m_j|)` pair, in rad/us per (V/cm)^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polarizability {
    pub level: RydbergLevel,
    pub abs_two_m: u32,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolarizabilityTable {
    entries: Vec<Polarizability>,
}

impl PolarizabilityTable {
    pub fn new(entries: Vec<Polarizability>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[Polarizability] {
        &self.entries
    }

    pub fn get(&self, level: &RydbergLevel, two_m: i32) -> Result<&Polarizability> {
        let abs_two_m = two_m.unsigned_abs();
        self.entries
            .iter()
            .find(|p| p.level == *level && p.abs_two_m == abs_two_m)
            .ok_or_else(|| Error::MissingPolarizability {
                level: level.to_string(),
                abs_two_m,
            })
    }

    pub fn for_sublevel(&self, s: &Sublevel) -> Result<&Polarizability> {
        self.get(&s.level, s.two_m)
    }
}

/// `-alpha E^2 / 2` in rad/us.
pub fn stark_shift(p: &Polarizability, field: f64) -> f64 {
    -0.5 * p.alpha * field * field
}

/// `alpha_alpha + alpha_beta - alpha_a - alpha_b` for a channel.
pub fn pair_polarizability(ch: &ChannelSpec, table: &PolarizabilityTable) -> Result<f64> {
    Ok(table.for_sublevel(&ch.alpha)?.alpha + table.for_sublevel(&ch.beta)?.alpha
        - table.for_sublevel(&ch.a)?.alpha
        - table.for_sublevel(&ch.b)?.alpha)
}

/// Energy of the final pair minus the initial pair at field `E`, in rad/us.
pub fn pair_detuning(ch: &ChannelSpec, table: &PolarizabilityTable, field: f64) -> Result<f64> {
    Ok(ch.delta0 - 0.5 * pair_polarizability(ch, table)? * field * field)
}

/// Non-negative field at which the channel becomes resonant, found by
/// bisection to `1e-9` relative accuracy.
pub fn resonance_field(ch: &ChannelSpec, table: &PolarizabilityTable) -> Result<f64> {
    let f = |e: f64| pair_detuning(ch, table, e);
    let f0 = f(0.0)?;
    if f0 == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1e-3;
    while f(hi)?.signum() == f0.signum() {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoResonance(ch.id));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)?.signum() == f0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub time: f64,
    pub window: (f64, f64),
}

/// Piecewise detuning `delta(t) = s1 (t - t_k) + s2 (t - t_k)^5` inside the
/// window of crossing `k`.
///
/// Outside every window the detuning holds the value at the nearest preceding
/// window edge (the first window's start before the sequence). Adjacent
/// windows that share an edge produce a jump there: the field resets for the
/// next passage. When `inter_segment_level` is set the whole profile is
/// clamped to `|delta| <= level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningProfile {
    pub s1: f64,
    pub s2: f64,
    pub crossings: Vec<Crossing>,
    pub inter_segment_level: Option<f64>,
}

impl DetuningProfile {
    pub fn new(
        s1: f64,
        s2: f64,
        crossings: Vec<Crossing>,
        inter_segment_level: Option<f64>,
    ) -> Result<Self> {
        let p = Self {
            s1,
            s2,
            crossings,
            inter_segment_level,
        };
        p.validate()?;
        Ok(p)
    }

    /// Windows of half-width `half_width` centred on each crossing time.
    /// Adjacent edges closer than `1e-12` us are merged at the midpoint
    /// between the two crossings.
    pub fn centred(s1: f64, s2: f64, times: &[f64], half_width: f64) -> Result<Self> {
        let mut crossings: Vec<Crossing> = times
            .iter()
            .map(|&t| Crossing {
                time: t,
                window: (t - half_width, t + half_width),
            })
            .collect();
        for k in 1..crossings.len() {
            let (end, start) = (crossings[k - 1].window.1, crossings[k].window.0);
            if (end - start).abs() < 1e-12 {
                let edge = 0.5 * (crossings[k - 1].time + crossings[k].time);
                crossings[k - 1].window.1 = edge;
                crossings[k].window.0 = edge;
            }
        }
        Self::new(s1, s2, crossings, None)
    }

    /// Crossings at 0.45 and 1.35 us tiling 0 to 1.8 us, with
    /// `s1/2pi = -10 MHz/us` and `s2/2pi = -2600 MHz/us^5`.
    pub fn standard() -> Self {
        Self::centred(mhz(-10.0), mhz(-2600.0), &[0.45, 1.35], 0.45).expect("valid profile")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProfile(m.to_string()));
        if self.crossings.is_empty() {
            return bad("no crossings");
        }
        if !self.s1.is_finite() || !self.s2.is_finite() {
            return bad("non-finite sweep rates");
        }
        if let Some(level) = self.inter_segment_level {
            if !(level >= 0.0) {
                return bad("inter-segment level must be non-negative");
            }
        }
        for c in &self.crossings {
            let (a, b) = c.window;
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return bad("empty or non-finite window");
            }
            if !(c.time >= a && c.time <= b) {
                return bad("crossing time outside its window");
            }
        }
        for w in self.crossings.windows(2) {
            if !(w[0].time < w[1].time) {
                return bad("crossing times must increase strictly");
            }
            if w[0].window.1 > w[1].window.0 {
                return bad("windows overlap");
            }
        }
        Ok(())
    }

    /// Moves crossing `k` by `dt` while its window stays fixed.
    pub fn with_crossing_shift(&self, k: usize, dt: f64) -> Result<Self> {
        let mut p = self.clone();
        let c = p
            .crossings
            .get_mut(k)
            .ok_or_else(|| Error::InvalidProfile(format!("no crossing {k}")))?;
        c.time += dt;
        p.validate()?;
        Ok(p)
    }

    pub fn span(&self) -> (f64, f64) {
        (
            self.crossings[0].window.0,
            self.crossings[self.crossings.len() - 1].window.1,
        )
    }

    /// Window edges strictly inside the span.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (start, end) = self.span();
        let mut out: Vec<f64> = self
            .crossings
            .iter()
            .flat_map(|c| [c.window.0, c.window.1])
            .filter(|&t| t > start && t < end)
            .collect();
        out.dedup();
        out
    }

    fn polynomial(&self, c: &Crossing, t: f64) -> f64 {
        let x = t - c.time;
        let x2 = x * x;
        self.s1 * x + self.s2 * x2 * x2 * x
    }

    fn raw(&self, t: f64) -> f64 {
        let n = self.crossings.len();
        let first = &self.crossings[0];
        if t < first.window.0 {
            return self.polynomial(first, first.window.0);
        }
        for (k, c) in self.crossings.iter().enumerate() {
            let (a, b) = c.window;
            let last = k + 1 == n;
            if t >= a && (t < b || (last && t == b)) {
                return self.polynomial(c, t);
            }
            let next_start = if last {
                f64::INFINITY
            } else {
                self.crossings[k + 1].window.0
            };
            if t >= b && t < next_start {
                return self.polynomial(c, b);
            }
        }
        unreachable!("every time falls in a window or a hold region")
    }
}

pub fn profile_detuning(p: &DetuningProfile, t: f64) -> f64 {
    let d = p.raw(t);
    match p.inter_segment_level {
        Some(level) => d.clamp(-level, level),
        None => d,
    }
}

/// Electric field as a function of time. Outside its span every waveform is
/// switched off (`E = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldWaveform {
    /// Field that tunes one channel along a detuning profile:
    /// `E^2 = 2 (delta0 - delta(t)) / alpha_pair`.
    Profile {
        profile: DetuningProfile,
        delta0: f64,
        alpha_pair: f64,
    },
    Constant {
        field: f64,
        span: (f64, f64),
    },
    /// Linear interpolation between samples.
    Samples { times: Vec<f64>, fields: Vec<f64> },
}

impl FieldWaveform {
    pub fn span(&self) -> (f64, f64) {
        match self {
            Self::Profile { profile, .. } => profile.span(),
            Self::Constant { span, .. } => *span,
            Self::Samples { times, .. } => (times[0], times[times.len() - 1]),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Profile { profile, .. } => profile.breakpoints(),
            Self::Constant { .. } => Vec::new(),
            Self::Samples { times, .. } => times[1..times.len() - 1].to_vec(),
        }
    }

    pub fn field_squared(&self, t: f64) -> f64 {
        let (a, b) = self.span();
        if t < a || t > b {
            return 0.0;
        }
        match self {
            Self::Profile {
                profile,
                delta0,
                alpha_pair,
            } => (2.0 * (delta0 - profile_detuning(profile, t)) / alpha_pair).max(0.0),
            Self::Constant { field, .. } => field * field,
            Self::Samples { .. } => self.field(t).powi(2),
        }
    }

    pub fn field(&self, t: f64) -> f64 {
        match self {
            Self::Samples { times, fields } => {
                let (a, b) = self.span();
                if t < a || t > b {
                    return 0.0;
                }
                let i = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[i - 1], times[i]);
                let s = (t - t0) / (t1 - t0);
                fields[i - 1] + s * (fields[i] - fields[i - 1])
            }
            _ => self.field_squared(t).sqrt(),
        }
    }

    /// Samples on a uniform grid of `n + 1` points covering the span.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let (a, b) = self.span();
        (0..=n)
            .map(|i| {
                let t = if i == n { b } else { a + (b - a) * i as f64 / n as f64 };
                (t, self.field(t))
            })
            .collect()
    }
}

/// Field waveform that makes `ch` follow the detuning profile.
pub fn field_from_profile(
    p: &DetuningProfile,
    ch: &ChannelSpec,
    table: &PolarizabilityTable,
) -> Result<FieldWaveform> {
    let alpha_pair = pair_polarizability(ch, table)?;
    if alpha_pair == 0.0 {
        return Err(Error::OutOfRange {
            t: p.span().0,
            detail: format!("channel {} is not Stark tunable", ch.id),
        });
    }
    let (start, end) = p.span();
    let n = ((end - start) / 1e-3).ceil() as usize;
    let mut probes: Vec<f64> = (0..=n)
        .map(|i| (start + (end - start) * i as f64 / n as f64).min(end))
        .collect();
    for c in &p.crossings {
        probes.extend([c.window.0, c.window.1, c.window.1.next_down()]);
    }
    for t in probes {
        let e2 = 2.0 * (ch.delta0 - profile_detuning(p, t)) / alpha_pair;
        if e2 < 0.0 {
            return Err(Error::OutOfRange {
                t,
                detail: format!("E^2 = {e2:.3e} (V/cm)^2 for channel {}", ch.id),
            });
        }
    }
    Ok(FieldWaveform::Profile {
        profile: p.clone(),
        delta0: ch.delta0,
        alpha_pair,
    })
}
