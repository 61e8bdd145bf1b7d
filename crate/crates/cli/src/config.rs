//! Scenario configuration. Every section has defaults, so `{}` is a valid
//! config; unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use starkgate::catalog::ChannelData;
use starkgate::forster::DEFAULT_COUPLING_FLOOR;
use starkgate::mhz;
use starkgate::ode::Tolerances;
use starkgate::pulses::PassageParams;
use starkgate::stark::DetuningProfile;

use crate::CliError;

/// One two-pulse sequence. Frequencies in MHz (ordinary, not angular).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub rabi_peak_mhz: f64,
    #[serde(default)]
    pub width_us: f64,
    pub s1_mhz_per_us: f64,
    #[serde(default)]
    pub s2_mhz_per_us5: f64,
    pub t1_us: f64,
    pub t2_us: f64,
}

impl PulseConfig {
    fn from_params(p: PassageParams) -> Self {
        let f = |x: f64| x / starkgate::TWO_PI;
        Self {
            rabi_peak_mhz: f(p.rabi_peak),
            width_us: p.width,
            s1_mhz_per_us: f(p.s1),
            s2_mhz_per_us5: f(p.s2),
            t1_us: p.t1,
            t2_us: p.t2,
        }
    }

    pub fn params(&self) -> PassageParams {
        PassageParams {
            rabi_peak: mhz(self.rabi_peak_mhz),
            width: self.width_us,
            s1: mhz(self.s1_mhz_per_us),
            s2: mhz(self.s2_mhz_per_us5),
            t1: self.t1_us,
            t2: self.t2_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoLevelConfig {
    pub gaussian: PulseConfig,
    pub rectangular: PulseConfig,
}

impl Default for TwoLevelConfig {
    fn default() -> Self {
        Self {
            gaussian: PulseConfig::from_params(PassageParams::gaussian()),
            rectangular: PulseConfig::from_params(PassageParams::rectangular()),
        }
    }
}

/// Detuning profile of the field ramp used by the pair and gate commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub s1_mhz_per_us: f64,
    pub s2_mhz_per_us5: f64,
    pub t1_us: f64,
    pub t2_us: f64,
    /// Half-width of each crossing window; `null` tiles the span.
    pub half_width_us: Option<f64>,
    pub inter_segment_level_mhz: Option<f64>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            s1_mhz_per_us: -10.0,
            s2_mhz_per_us5: -2600.0,
            t1_us: 0.45,
            t2_us: 1.35,
            half_width_us: None,
            inter_segment_level_mhz: None,
        }
    }
}

impl ProfileConfig {
    pub fn profile(&self) -> Result<DetuningProfile, CliError> {
        let hw = self.half_width_us.unwrap_or(0.5 * (self.t2_us - self.t1_us));
        let mut p = DetuningProfile::centred(
            mhz(self.s1_mhz_per_us),
            mhz(self.s2_mhz_per_us5),
            &[self.t1_us, self.t2_us],
            hw,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        p.inter_segment_level = self.inter_segment_level_mhz.map(mhz);
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub distance_um: f64,
    pub decay: bool,
    /// Shift of the second crossing; `null` calibrates it at the gate
    /// distance.
    pub t2_correction_ns: Option<f64>,
    pub calibration_bracket_ns: [f64; 2],
    pub coupling_floor: f64,
    /// Finite laser pulses at this Rabi frequency instead of instantaneous
    /// rotations.
    pub finite_pulse_rabi_mhz: Option<f64>,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            distance_um: 25.0,
            decay: true,
            t2_correction_ns: None,
            calibration_bracket_ns: [-2.0, 2.0],
            coupling_floor: DEFAULT_COUPLING_FLOOR,
            finite_pulse_rabi_mhz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub distances_um: Vec<f64>,
    /// Multiples of the sweep step applied around the nominal value.
    pub steps: Vec<i32>,
    pub distance_step_um: f64,
    pub t2_step_ns: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            distances_um: vec![24.0, 24.85, 25.0, 25.15, 26.0],
            steps: vec![-1, 0, 1],
            distance_step_um: 0.15,
            t2_step_ns: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StarkMapConfig {
    pub field_max_mv_per_cm: f64,
    pub points: usize,
}

impl Default for StarkMapConfig {
    fn default() -> Self {
        Self {
            field_max_mv_per_cm: 60.0,
            points: 601,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self { rtol: t.rtol, atol: t.atol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub two_level: TwoLevelConfig,
    pub profile: ProfileConfig,
    pub gate: GateConfig,
    pub sweep: SweepConfig,
    pub stark_map: StarkMapConfig,
    /// Channel catalog JSON; `null` uses the built-in one.
    pub catalog: Option<PathBuf>,
    pub tolerances: ToleranceConfig,
    /// Sample spacing of written time series, us.
    pub sample_step_us: f64,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            two_level: TwoLevelConfig::default(),
            profile: ProfileConfig::default(),
            gate: GateConfig::default(),
            sweep: SweepConfig::default(),
            stark_map: StarkMapConfig::default(),
            catalog: None,
            tolerances: ToleranceConfig::default(),
            sample_step_us: 1e-3,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let t = &self.tolerances;
        if !(t.rtol > 0.0 && t.atol > 0.0) {
            return bad(format!("tolerances must be positive: {t:?}"));
        }
        if !(self.sample_step_us > 0.0) {
            return bad(format!("sample_step_us must be positive: {}", self.sample_step_us));
        }
        if !(self.gate.distance_um > 0.0) {
            return bad(format!("distance must be positive: {}", self.gate.distance_um));
        }
        let [lo, hi] = self.gate.calibration_bracket_ns;
        if !(lo < hi) {
            return bad(format!("empty calibration bracket [{lo}, {hi}]"));
        }
        if self.sweep.distances_um.iter().any(|&r| !(r > 0.0)) {
            return bad("sweep distances must be positive".into());
        }
        if self.stark_map.points < 2 || !(self.stark_map.field_max_mv_per_cm > 0.0) {
            return bad("stark map needs at least two points and a positive field range".into());
        }
        self.profile.profile()?;
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rtol: self.tolerances.rtol,
            atol: self.tolerances.atol,
        }
    }

    pub fn catalog(&self) -> Result<ChannelData, CliError> {
        match &self.catalog {
            None => Ok(ChannelData::builtin()),
            Some(p) => ChannelData::load(p).map_err(|e| CliError::Config(format!("catalog {}: {e}", p.display()))),
        }
    }

    /// SHA-256 of the effective configuration (after flag overrides),
    /// leaving out the output directory.
    pub fn sha256(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
