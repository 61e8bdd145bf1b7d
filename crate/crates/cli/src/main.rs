//! `starkgate` command-line front end.
//!
//! Every subcommand reads an optional JSON scenario config, applies flag
//! overrides, runs the simulation and writes CSV/JSON files carrying a
//! provenance header into the output directory.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 configuration error,
//! 3 numerical failure.

mod config;
mod output;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use starkgate::catalog::ChannelData;
use starkgate::dynamics::wrap_angle;
use starkgate::forster::{coupling, run_passage};
use starkgate::gates::*;
use starkgate::pulses::{double_passage, evolve_adiabatic, passage_drive, DressedLabel, PassageShape, ADIABATICITY_THRESHOLD};
use starkgate::stark::{pair_detuning, resonance_field, stark_shift, DetuningProfile};
use starkgate::{Error, TWO_PI};

use config::ScenarioConfig;
use output::{matrix_json, Metadata, OutDir};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Integration(_) | Error::NoResonance(_) | Error::OutOfRange { .. } | Error::Angular(_) => {
                Self::Numerical(e.to_string())
            }
            _ => Self::Config(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "starkgate", version, about = "Rydberg CZ/CNOT gates from double Förster passage")]
struct Cli {
    /// Scenario config (JSON). Defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Interatomic distance in um (overrides `gate.distance_um`).
    #[arg(long, global = true)]
    distance: Option<f64>,
    /// Only run the sequence whose second pulse has the opposite sign.
    #[arg(long, global = true)]
    sign_flip: bool,
    /// Keep the second crossing at its nominal time.
    #[arg(long, global = true)]
    no_correction: bool,
    /// Switch off spontaneous decay.
    #[arg(long, global = true)]
    no_decay: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Two-level double passage for both pulse shapes.
    TwoLevel,
    /// Pair-state passage through the Förster channels.
    Forster,
    /// CNOT truth table, CZ phases and Bell fidelities.
    Gate,
    /// Bell-state preparation with density matrices.
    Bell {
        /// phi_plus, phi_minus, psi_plus, psi_minus or all.
        #[arg(long, default_value = "all")]
        state: String,
    },
    /// Gate overlap and Phi+ fidelity over distance or second-crossing time.
    Sweep {
        #[arg(long, value_enum, default_value_t = SweepParam::Distance)]
        param: SweepParam,
        /// Step, with unit (e.g. `100ps`, `0.15um`); plain numbers are ns
        /// for t2 and um for distance.
        #[arg(long)]
        delta: Option<String>,
    },
    /// Pair detunings and single-atom Stark shifts versus field.
    StarkMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    Distance,
    T2,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::TwoLevel => "two-level",
            Self::Forster => "forster",
            Self::Gate => "gate",
            Self::Bell { .. } => "bell",
            Self::Sweep { .. } => "sweep",
            Self::StarkMap => "stark-map",
        }
    }
}

/// Effective config and everything derived from it.
struct Run {
    cfg: ScenarioConfig,
    data: ChannelData,
    out: OutDir,
    sign_flip: bool,
    no_correction: bool,
}

fn setup(cli: &Cli) -> CliResult<Run> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(r) = cli.distance {
        cfg.gate.distance_um = r;
    }
    if cli.no_decay {
        cfg.gate.decay = false;
    }
    if cli.no_correction {
        cfg.gate.t2_correction_ns = Some(0.0);
    }
    cfg.validate()?;
    let data = cfg.catalog()?;
    let meta = Metadata {
        command: cli.command.name().into(),
        scenario: cfg.scenario.clone(),
        config_sha256: cfg.sha256(),
        catalog_sha256: data.sha256.clone(),
        version: starkgate::VERSION.into(),
    };
    let out = OutDir::create(&cfg.output_dir, meta)?;
    Ok(Run {
        cfg,
        data,
        out,
        sign_flip: cli.sign_flip,
        no_correction: cli.no_correction,
    })
}

fn to_mhz(x: f64) -> f64 {
    x / TWO_PI
}

fn two_level(run: &mut Run) -> CliResult<()> {
    let tol = run.cfg.tolerances();
    let conventions: &[bool] = if run.sign_flip { &[true] } else { &[false, true] };
    let shapes = [
        ("gaussian", PassageShape::GaussianLinearChirp, run.cfg.two_level.gaussian.params()),
        ("rectangular", PassageShape::RectangularNonlinear, run.cfg.two_level.rectangular.params()),
    ];
    let mut rows = Vec::new();
    for (name, shape, params) in shapes {
        for &flip in conventions {
            let tag = format!("{name}_{}", if flip { "flipped" } else { "same" });
            let r = double_passage(shape, &params, flip, tol)?;
            let drive = passage_drive(shape, &params, flip)?;
            let adiabatic = evolve_adiabatic(&drive, DressedLabel::I, &drive.grid(1e-3), ADIABATICITY_THRESHOLD)?;
            run.out.csv(&format!("two_level_{tag}.csv"), |w| r.series.write_csv(w))?;
            run.out
                .csv(&format!("two_level_{tag}_adiabatic.csv"), |w| adiabatic.series().write_csv(w))?;
            let phase = wrap_angle(r.phase);
            println!("{tag}: population error {:.3e}, phase {phase:.6} rad", r.population_error);
            if adiabatic.adiabaticity_violated {
                eprintln!(
                    "warning: {tag}: adiabaticity {:.3} exceeds {ADIABATICITY_THRESHOLD}",
                    adiabatic.adiabaticity
                );
            }
            rows.push(json!({
                "shape": name,
                "sign_flip": flip,
                "population_error": r.population_error,
                "phase": phase,
                "phase_unwrapped": r.phase,
                "adiabaticity": adiabatic.adiabaticity,
                "adiabaticity_violated": adiabatic.adiabaticity_violated,
            }));
        }
    }
    run.out.json("two_level_summary.json", &json!({ "runs": rows }))
}

fn model(run: &Run) -> CliResult<GateModel> {
    Ok(GateModel::from_catalog(&run.data, run.cfg.gate.coupling_floor, run.cfg.tolerances())?)
}

/// Second-crossing shift in us: configured, disabled, or calibrated at
/// `distance`.
fn t2_correction(run: &Run, model: &GateModel, profile: &DetuningProfile, distance: f64) -> CliResult<(f64, Option<Calibration>)> {
    if let Some(ns) = run.cfg.gate.t2_correction_ns {
        return Ok((ns * 1e-3, None));
    }
    let [lo, hi] = run.cfg.gate.calibration_bracket_ns;
    let cal = calibrate_t2(model, distance, profile, (lo * 1e-3, hi * 1e-3))?;
    println!(
        "calibrated second crossing at {distance} um: shift {:.4} ns (residual {:.1e} rad)",
        cal.t2_correction * 1e3,
        cal.phase_error
    );
    Ok((cal.t2_correction, Some(cal)))
}

fn forster(run: &mut Run) -> CliResult<()> {
    let m = model(run)?;
    let profile = run.cfg.profile.profile()?;
    let r = run.cfg.gate.distance_um;
    let (t2, cal) = t2_correction(run, &m, &profile, r)?;
    let pair = m.pair(r)?;
    let waveform = m.waveform(&profile.with_crossing_shift(1, t2)?)?;
    let res = run_passage(&pair, &waveform, run.cfg.sample_step_us, m.tol)?;
    let n = pair.channels.len();
    run.out.csv("forster_timeseries.csv", |w| {
        write!(w, "t_us,field_v_per_cm")?;
        for ch in &pair.channels {
            write!(w, ",detuning_{}_mhz", ch.id)?;
        }
        write!(w, ",pop_initial")?;
        for ch in &pair.channels {
            write!(w, ",pop_{}", ch.id)?;
        }
        writeln!(w, ",phase_initial_rad")?;
        for i in 0..res.times.len() {
            write!(w, "{},{}", res.times[i], res.field[i])?;
            for k in 0..n {
                write!(w, ",{}", to_mhz(res.detunings[i][k]))?;
            }
            for p in &res.populations[i] {
                write!(w, ",{p}")?;
            }
            writeln!(w, ",{}", res.phase[i])?;
        }
        Ok(())
    })?;
    let offset = wrap_angle(res.final_phase - PI);
    println!(
        "R = {r} um, t2 shift {:.4} ns: final population {:.6}, phase {:.6} rad (offset from pi {offset:+.4} rad)",
        t2 * 1e3,
        res.final_population,
        wrap_angle(res.final_phase)
    );
    let channels: Vec<_> = pair
        .channels
        .iter()
        .map(|ch| {
            json!({
                "id": ch.id,
                "alpha": ch.alpha.to_string(),
                "beta": ch.beta.to_string(),
                "q": ch.q,
                "defect_mhz": to_mhz(ch.delta0),
                "coupling_mhz": to_mhz(coupling(ch, r)),
            })
        })
        .collect();
    run.out.json(
        "forster_summary.json",
        &json!({
            "distance_um": r,
            "t2_correction_ns": t2 * 1e3,
            "calibration": cal,
            "final_population": res.final_population,
            "final_phase": wrap_angle(res.final_phase),
            "phase_offset_from_pi": offset,
            "channels": channels,
        }),
    )
}

/// CZ and CNOT schedules, with finite laser pulses when configured.
fn schedules(run: &Run, m: &GateModel, profile: &DetuningProfile, r: f64, t2: f64) -> CliResult<(PulseSchedule, PulseSchedule)> {
    let mut cz = cz_sequence(m, r, profile, t2)?;
    let mut cnot = cnot_sequence(m, r, profile, t2)?;
    if let Some(f) = run.cfg.gate.finite_pulse_rabi_mhz {
        cz = cz.with_finite_pulses(starkgate::mhz(f))?;
        cnot = cnot.with_finite_pulses(starkgate::mhz(f))?;
    }
    Ok((cz, cnot))
}

fn gate(run: &mut Run) -> CliResult<()> {
    let m = model(run)?;
    let profile = run.cfg.profile.profile()?;
    let r = run.cfg.gate.distance_um;
    let decay = run.cfg.gate.decay;
    let (t2, cal) = t2_correction(run, &m, &profile, r)?;
    let (cz, cnot) = schedules(run, &m, &profile, r, t2)?;
    let table = truth_table(&m, &cnot, &CNOT_MAP, decay)?;
    let phases = phase_diagnostics(&m, &cz)?;
    let bell_fidelities = BellState::ALL
        .iter()
        .map(|&b| {
            let res = bell_state_run(&m, b, &cnot, decay)?;
            Ok(BellFidelity {
                state: b,
                raw: res.fidelity_raw,
                reconstructed: res.fidelity_reconstructed,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let result = GateResult {
        distance: r,
        t2_correction: t2,
        decay,
        truth_table: table,
        bell_fidelities,
        phases,
    };
    let labels = ["00", "01", "10", "11"];
    run.out.csv("truth_table.csv", |w| {
        writeln!(w, "input,{}", labels.join(","))?;
        for (i, row) in result.truth_table.populations.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            writeln!(w, "{},{}", labels[i], cells.join(","))?;
        }
        Ok(())
    })?;
    println!("R = {r} um, decay {}: CNOT overlap {:.5}", if decay { "on" } else { "off" }, result.truth_table.overlap);
    println!("controlled phase {:.5} rad", result.phases.controlled_phase);
    for b in &result.bell_fidelities {
        println!("{} fidelity {:.5} (reconstructed {:.5})", b.state.name(), b.raw, b.reconstructed);
    }
    run.out.json("gate.json", &json!({ "result": result, "calibration": cal }))
}

fn bell(run: &mut Run, state: &str) -> CliResult<()> {
    let states: Vec<BellState> = if state == "all" {
        BellState::ALL.to_vec()
    } else {
        vec![BellState::parse(state).ok_or_else(|| CliError::Config(format!("unknown Bell state {state:?}")))?]
    };
    let m = model(run)?;
    let profile = run.cfg.profile.profile()?;
    let r = run.cfg.gate.distance_um;
    let decay = run.cfg.gate.decay;
    let (t2, _) = t2_correction(run, &m, &profile, r)?;
    let (_, cnot) = schedules(run, &m, &profile, r, t2)?;
    for b in states {
        let res = bell_state_run(&m, b, &cnot, decay)?;
        println!(
            "{} fidelity {:.5} (reconstructed {:.5})",
            b.name(),
            res.fidelity_raw,
            res.fidelity_reconstructed
        );
        run.out.json(
            &format!("bell_{}.json", b.name()),
            &json!({
                "state": b,
                "distance_um": r,
                "t2_correction_ns": t2 * 1e3,
                "decay": decay,
                "fidelity_raw": res.fidelity_raw,
                "fidelity_reconstructed": res.fidelity_reconstructed,
                "rho_raw": matrix_json(&res.rho_raw),
                "rho_reconstructed": matrix_json(&res.rho_reconstructed),
            }),
        )?;
    }
    Ok(())
}

/// Parses a step such as `100ps`, `0.1ns`, `0.15um` into ns (t2) or um
/// (distance).
fn parse_delta(s: &str, param: SweepParam) -> CliResult<f64> {
    let s = s.trim();
    let split = s
        .find(|c: char| c.is_ascii_alphabetic() || c == 'µ' || c == 'μ')
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad --delta {s:?}")))?;
    let scale = match (param, unit.trim()) {
        (SweepParam::T2, "" | "ns") => 1.0,
        (SweepParam::T2, "ps") => 1e-3,
        (SweepParam::T2, "us" | "µs" | "μs") => 1e3,
        (SweepParam::Distance, "" | "um" | "µm" | "μm") => 1.0,
        (SweepParam::Distance, "nm") => 1e-3,
        _ => return Err(CliError::Config(format!("unit of --delta {s:?} does not fit the swept parameter"))),
    };
    if !(value * scale).is_finite() || value == 0.0 {
        return Err(CliError::Config(format!("bad --delta {s:?}")));
    }
    Ok(value * scale)
}

#[derive(Serialize)]
struct SweepSummary {
    param: &'static str,
    nominal_distance_um: f64,
    nominal_t2_correction_ns: f64,
    step: Option<f64>,
    /// Largest minus smallest Phi+ fidelity within one step of the nominal
    /// distance (distance sweeps).
    spread: Option<f64>,
    /// Phi+ fidelity change of each row relative to the nominal row.
    drop: Vec<f64>,
    rows: Vec<SweepRow>,
}

fn sweep(run: &mut Run, param: SweepParam, delta: Option<&str>) -> CliResult<()> {
    let m = model(run)?;
    let profile = run.cfg.profile.profile()?;
    let r = run.cfg.gate.distance_um;
    let decay = run.cfg.gate.decay;
    let (t2, _) = t2_correction(run, &m, &profile, r)?;
    let step = delta.map(|d| parse_delta(d, param)).transpose()?;
    let steps = &run.cfg.sweep.steps;
    let points: Vec<(f64, f64)> = match param {
        SweepParam::Distance => match step {
            Some(s) => steps.iter().map(|&k| (r + k as f64 * s, t2)).collect(),
            None => run.cfg.sweep.distances_um.iter().map(|&d| (d, t2)).collect(),
        },
        SweepParam::T2 => {
            let s = step.unwrap_or(run.cfg.sweep.t2_step_ns);
            steps.iter().map(|&k| (r, t2 + k as f64 * s * 1e-3)).collect()
        }
    };
    if points.is_empty() {
        return Err(CliError::Config("sweep has no points".into()));
    }
    let rows = gate_sweep(&m, &points, &profile, decay)?;
    let nominal = rows
        .iter()
        .find(|row| row.distance == r && row.t2_correction == t2)
        .map(|row| row.bell_phi_plus);
    let drop = rows.iter().map(|row| nominal.map_or(f64::NAN, |n| row.bell_phi_plus - n)).collect();
    let spread = (param == SweepParam::Distance).then(|| {
        let half = step.unwrap_or(run.cfg.sweep.distance_step_um);
        fidelity_spread(&rows, r, half)
    });
    run.out.csv("sweep.csv", |w| {
        writeln!(w, "distance_um,t2_correction_ns,overlap,bell_phi_plus,bell_phi_plus_reconstructed")?;
        for row in &rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                row.distance,
                row.t2_correction * 1e3,
                row.overlap,
                row.bell_phi_plus,
                row.bell_phi_plus_reconstructed
            )?;
        }
        Ok(())
    })?;
    for row in &rows {
        println!(
            "R = {} um, t2 shift {:.4} ns: overlap {:.5}, phi_plus {:.5}",
            row.distance,
            row.t2_correction * 1e3,
            row.overlap,
            row.bell_phi_plus
        );
    }
    if let Some(s) = spread {
        println!("phi_plus spread near {r} um: {s:.2e}");
    }
    run.out.json(
        "sweep.json",
        &SweepSummary {
            param: match param {
                SweepParam::Distance => "distance",
                SweepParam::T2 => "t2",
            },
            nominal_distance_um: r,
            nominal_t2_correction_ns: t2 * 1e3,
            step,
            spread,
            drop,
            rows,
        },
    )
}

fn stark_map(run: &mut Run) -> CliResult<()> {
    let m = model(run)?;
    let sm = &run.cfg.stark_map;
    let emax = sm.field_max_mv_per_cm * 1e-3;
    let fields: Vec<f64> = (0..sm.points).map(|i| emax * i as f64 / (sm.points - 1) as f64).collect();
    let pa = *m.table.for_sublevel(&m.control_level())?;
    let pb = *m.table.for_sublevel(&m.target_level())?;
    let mut det = Vec::with_capacity(fields.len());
    for &e in &fields {
        det.push(
            m.channels
                .iter()
                .map(|ch| pair_detuning(ch, &m.table, e).map(to_mhz))
                .collect::<starkgate::Result<Vec<_>>>()?,
        );
    }
    let channels = m.channels.clone();
    run.out.csv("stark_map.csv", |w| {
        write!(w, "field_mv_per_cm,shift_control_mhz,shift_target_mhz")?;
        for ch in &channels {
            write!(w, ",detuning_{}_mhz", ch.id)?;
        }
        writeln!(w)?;
        for (e, d) in fields.iter().zip(&det) {
            write!(w, "{},{},{}", e * 1e3, to_mhz(stark_shift(&pa, *e)), to_mhz(stark_shift(&pb, *e)))?;
            for x in d {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    let mut resonances = Vec::new();
    for ch in &m.channels {
        let field = match resonance_field(ch, &m.table) {
            Ok(e) => Some(e * 1e3),
            Err(Error::NoResonance(_)) => None,
            Err(e) => return Err(e.into()),
        };
        if let Some(f) = field {
            println!("channel {} ({} + {}): resonance at {f:.4} mV/cm", ch.id, ch.alpha, ch.beta);
        } else {
            println!("channel {} ({} + {}): no resonance", ch.id, ch.alpha, ch.beta);
        }
        resonances.push(json!({
            "id": ch.id,
            "alpha": ch.alpha.to_string(),
            "beta": ch.beta.to_string(),
            "defect_mhz": to_mhz(ch.delta0),
            "resonance_field_mv_per_cm": field,
        }));
    }
    run.out.json("stark_map.json", &json!({ "channels": resonances }))
}

fn execute(cli: &Cli) -> CliResult<()> {
    let mut run = setup(cli)?;
    match &cli.command {
        Command::TwoLevel => two_level(&mut run)?,
        Command::Forster => forster(&mut run)?,
        Command::Gate => gate(&mut run)?,
        Command::Bell { state } => bell(&mut run, state)?,
        Command::Sweep { param, delta } => sweep(&mut run, *param, delta.as_deref())?,
        Command::StarkMap => stark_map(&mut run)?,
    }
    if run.no_correction && matches!(cli.command, Command::TwoLevel | Command::StarkMap) {
        eprintln!("note: --no-correction has no effect on {}", cli.command.name());
    }
    for p in run.out.written() {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("starkgate: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
