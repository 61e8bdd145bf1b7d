use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use starkgate::catalog::ChannelData;
use starkgate::dynamics::{wrap_angle, QuantumState};
use starkgate::forster::{build_catalog, DEFAULT_COUPLING_FLOOR};
use starkgate::gates::*;
use starkgate::ode::Tolerances;
use starkgate::quad;
use starkgate::stark::{profile_detuning, Crossing, DetuningProfile, FieldWaveform};
use starkgate::{Error, C64};

const BRACKET: (f64, f64) = (-2e-3, 2e-3);

fn full_model() -> GateModel {
    GateModel::from_catalog(&ChannelData::builtin(), DEFAULT_COUPLING_FLOOR, Tolerances::default()).unwrap()
}

fn single_channel_model() -> GateModel {
    let data = ChannelData::builtin();
    let first = build_catalog(&data, DEFAULT_COUPLING_FLOOR).unwrap().remove(0);
    GateModel::new(&data, vec![first], Tolerances::default()).unwrap()
}

fn calibrated(model: &GateModel) -> f64 {
    calibrate_t2(model, 25.0, &DetuningProfile::standard(), BRACKET)
        .unwrap()
        .t2_correction
}

fn full_t2() -> f64 {
    static T2: OnceLock<f64> = OnceLock::new();
    *T2.get_or_init(|| calibrated(&full_model()))
}

fn single_t2() -> f64 {
    static T2: OnceLock<f64> = OnceLock::new();
    *T2.get_or_init(|| calibrated(&single_channel_model()))
}

fn basis(i: usize) -> QuantumState {
    let mut v = vec![C64::default(); 4];
    v[i] = C64::new(1.0, 0.0);
    QuantumState::Pure(v)
}

fn pure(run: &GateRun) -> Vec<C64> {
    match &run.state {
        QuantumState::Pure(v) => v.clone(),
        QuantumState::Mixed(_) => panic!("expected a pure state"),
    }
}

/// 4x4 block of the gate unitary on the computational states.
fn computational_unitary(model: &GateModel, schedule: &PulseSchedule) -> DMatrix<C64> {
    let mut u = DMatrix::zeros(4, 4);
    for j in 0..4 {
        let v = pure(&run_gate(model, schedule, &basis(j), false).unwrap());
        for i in 0..4 {
            u[(i, j)] = v[i];
        }
    }
    u
}

/// Distance between unitaries after removing the global phase.
fn phase_free_distance(u: &DMatrix<C64>, ideal: &DMatrix<C64>) -> f64 {
    let overlap = (ideal.adjoint() * u).trace();
    let phase = C64::from_polar(1.0, -overlap.arg());
    (u.scale(1.0) * phase - ideal).norm()
}

fn cnot_matrix() -> DMatrix<C64> {
    let mut m = DMatrix::zeros(4, 4);
    for (i, &j) in CNOT_MAP.iter().enumerate() {
        m[(j, i)] = C64::new(1.0, 0.0);
    }
    m
}

#[test]
fn correction_vanishes_without_field() {
    let m = single_channel_model();
    let w = FieldWaveform::Constant { field: 0.0, span: (0.0, 1.8) };
    assert_eq!(stark_phase_correction(&m.table, &m.control_level(), &w).unwrap(), 0.0);
}

#[test]
fn correction_for_constant_field_is_closed_form() {
    let m = single_channel_model();
    let (field, t) = (0.031, 1.7);
    let w = FieldWaveform::Constant { field, span: (0.05, 0.05 + t) };
    for level in [m.control_level(), m.target_level()] {
        let alpha = m.table.for_sublevel(&level).unwrap().alpha;
        let phi = stark_phase_correction(&m.table, &level, &w).unwrap();
        let expected = alpha * field * field * t / 2.0;
        assert!((phi - expected).abs() < 1e-12 * expected.abs(), "{phi} vs {expected}");
    }
}

/// `int (delta0 - delta) dt` over each window of the profile in closed form.
fn analytic_detuning_integral(p: &DetuningProfile, delta0: f64) -> f64 {
    p.crossings
        .iter()
        .map(|c: &Crossing| {
            let prim = |x: f64| delta0 * x - p.s1 * x * x / 2.0 - p.s2 * x.powi(6) / 6.0;
            prim(c.window.1 - c.time) - prim(c.window.0 - c.time)
        })
        .sum()
}

#[test]
fn correction_for_standard_waveform_matches_oracles() {
    let m = full_model();
    let profile = DetuningProfile::standard().with_crossing_shift(1, 6e-4).unwrap();
    let w = m.waveform(&profile).unwrap();
    let FieldWaveform::Profile { delta0, alpha_pair, .. } = w.clone() else {
        panic!("profile waveform expected")
    };
    for level in [m.control_level(), m.target_level()] {
        let alpha = m.table.for_sublevel(&level).unwrap().alpha;
        let phi = stark_phase_correction(&m.table, &level, &w).unwrap();
        let analytic = alpha / alpha_pair * analytic_detuning_integral(&profile, delta0);
        assert!((phi - analytic).abs() < 1e-9, "{phi} vs {analytic}");

        let mut trap = 0.0;
        for c in &profile.crossings {
            let (a, b) = c.window;
            let f = |t: f64| {
                let t = t.clamp(a, b.next_down());
                let d = delta0 - (profile.s1 * (t - c.time) + profile.s2 * (t - c.time).powi(5));
                alpha / alpha_pair * d
            };
            trap += quad::trapezoid(f, a, b, 400_000);
        }
        assert!((phi - trap).abs() < 1e-9, "{phi} vs {trap}");
    }
    // sanity: the profile value inside a window is the polynomial used above
    let c = &profile.crossings[0];
    let x = 0.3 - c.time;
    assert!((profile_detuning(&profile, 0.3) - (profile.s1 * x + profile.s2 * x.powi(5))).abs() < 1e-12);
}

#[test]
fn cz_phases_at_25um() {
    let m = full_model();
    let cz = cz_sequence(&m, 25.0, &DetuningProfile::standard(), full_t2()).unwrap();
    let d = phase_diagnostics(&m, &cz).unwrap();
    assert!(wrap_angle(d.relative[3] - PI).abs() < 0.02, "{:?}", d);
    assert!(d.relative[1].abs() < 1e-6, "{:?}", d);
    assert!(d.relative[2].abs() < 1e-6, "{:?}", d);
    assert!(wrap_angle(d.controlled_phase - PI).abs() < 0.02);
    for l in d.leakage {
        assert!(l < 1e-3, "{:?}", d.leakage);
    }
}

#[test]
fn cz_is_diagonal_and_norm_preserving_without_decay() {
    let m = full_model();
    let cz = cz_sequence(&m, 25.0, &DetuningProfile::standard(), full_t2()).unwrap();
    let h = C64::new(0.5, 0.0);
    let psi = QuantumState::Pure(vec![h, h * C64::new(0.0, 1.0), -h, h]);
    let v = pure(&run_gate(&m, &cz, &psi, false).unwrap());
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    assert!((norm - 1.0).abs() < 1e-8, "{norm}");
    let u = computational_unitary(&m, &cz);
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                assert!(u[(i, j)].norm_sqr() < 1e-3);
            }
        }
    }
}

#[test]
fn cnot_truth_table_maps_target_by_control() {
    let m = full_model();
    let cnot = cnot_sequence(&m, 25.0, &DetuningProfile::standard(), full_t2()).unwrap();
    let t = truth_table(&m, &cnot, &CNOT_MAP, true).unwrap();
    for (i, row) in t.populations.iter().enumerate() {
        assert!(row[CNOT_MAP[i]] > 0.98, "{:?}", t.populations);
        assert!(row.iter().sum::<f64>() <= 1.0 + 1e-9);
    }
    assert!(t.overlap > 0.99 && t.overlap <= 1.0);
}

#[test]
fn single_channel_cnot_is_ideal() {
    let m = single_channel_model();
    let cnot = cnot_sequence(&m, 25.0, &DetuningProfile::standard(), single_t2()).unwrap();
    let t = truth_table(&m, &cnot, &CNOT_MAP, false).unwrap();
    assert!(t.overlap > 0.999, "{}", t.overlap);
    let u = computational_unitary(&m, &cnot);
    let dist = phase_free_distance(&u, &cnot_matrix());
    assert!(dist < 1e-3, "{dist}");
}

#[test]
fn single_channel_bell_states_are_ideal() {
    let m = single_channel_model();
    let cnot = cnot_sequence(&m, 25.0, &DetuningProfile::standard(), single_t2()).unwrap();
    for b in BellState::ALL {
        let r = bell_state_run(&m, b, &cnot, false).unwrap();
        assert!(r.fidelity_raw > 0.999, "{}: {}", b.name(), r.fidelity_raw);
        assert!((r.fidelity_raw - r.fidelity_reconstructed).abs() < 1e-9);
    }
}

#[test]
fn finite_pulses_approach_instantaneous_limit() {
    let m = single_channel_model();
    let cnot = cnot_sequence(&m, 25.0, &DetuningProfile::standard(), single_t2()).unwrap();
    let ideal = truth_table(&m, &cnot, &CNOT_MAP, false).unwrap().overlap;
    let gaps: Vec<f64> = [100.0, 1000.0, 10000.0]
        .iter()
        .map(|&f| {
            let s = cnot.with_finite_pulses(starkgate::mhz(f)).unwrap();
            (truth_table(&m, &s, &CNOT_MAP, false).unwrap().overlap - ideal).abs()
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 1e-3, "{gaps:?}");
}

#[test]
fn finite_pulse_schedule_is_ordered() {
    let m = single_channel_model();
    let cnot = cnot_sequence(&m, 25.0, &DetuningProfile::standard(), 0.0).unwrap();
    let s = cnot.with_finite_pulses(starkgate::mhz(5.0)).unwrap();
    s.validate().unwrap();
    assert_eq!(s.ramp(), cnot.ramp());
    assert!(matches!(cnot.with_finite_pulses(0.0), Err(Error::InvalidSchedule(_))));
}

#[test]
fn gate_sequences_need_two_crossings() {
    let m = single_channel_model();
    let one = DetuningProfile::centred(starkgate::mhz(-10.0), 0.0, &[0.45], 0.45).unwrap();
    assert!(matches!(cz_sequence(&m, 25.0, &one, 0.0), Err(Error::InvalidProfile(_))));
    assert!(matches!(cnot_sequence(&m, 25.0, &one, 0.0), Err(Error::InvalidProfile(_))));
    let empty = DetuningProfile::new(
        0.0,
        0.0,
        vec![Crossing { time: 0.5, window: (0.5, 0.5) }],
        None,
    );
    assert!(matches!(empty, Err(Error::InvalidProfile(_))));
    let mut bad = DetuningProfile::standard();
    bad.crossings[1].window.0 = 0.5;
    assert!(matches!(cz_sequence(&m, 25.0, &bad, 0.0), Err(Error::InvalidProfile(_))));
}

#[test]
fn cz_schedule_spans_the_ramp() {
    let m = full_model();
    let cz = cz_sequence(&m, 25.0, &DetuningProfile::standard(), 6e-4).unwrap();
    let (a, b) = cz.ramp().unwrap().span();
    assert!((a - 0.0).abs() < 1e-12 && (b - 1.8).abs() < 1e-12);
    assert_eq!(cz.events.len(), 5);
    let cnot = cnot_sequence(&m, 25.0, &DetuningProfile::standard(), 6e-4).unwrap();
    assert_eq!(cnot.events.len(), 7);
}

#[test]
fn sweep_is_deterministic_and_sorted() {
    let m = single_channel_model();
    let p = DetuningProfile::standard();
    let points = [(25.5, 0.0), (24.5, 1e-4), (24.5, 0.0)];
    let a = gate_sweep(&m, &points, &p, false).unwrap();
    let b = gate_sweep(&m, &points, &p, false).unwrap();
    assert_eq!(a, b);
    let keys: Vec<(f64, f64)> = a.iter().map(|r| (r.distance, r.t2_correction)).collect();
    assert_eq!(keys, vec![(24.5, 0.0), (24.5, 1e-4), (25.5, 0.0)]);
    assert_eq!(distance_sweep(&m, &[25.0], &p, 0.0, false).unwrap().len(), 1);
    assert!(gate_sweep(&m, &[], &p, false).is_err());
}

#[test]
fn spread_uses_rows_near_nominal() {
    let row = |distance, f| SweepRow {
        distance,
        t2_correction: 0.0,
        overlap: 1.0,
        bell_phi_plus: f,
        bell_phi_plus_reconstructed: f,
    };
    let rows = [row(24.0, 0.5), row(24.85, 0.99), row(25.0, 0.995), row(25.15, 0.992)];
    assert!((fidelity_spread(&rows, 25.0, 0.15) - 0.005).abs() < 1e-12);
}

#[test]
fn fidelity_ignores_global_phase() {
    let b = BellState::PsiMinus.vector();
    let v = DVector::from_column_slice(&b);
    let rho = &v * v.adjoint();
    let rotated = b.map(|c| c * C64::from_polar(1.0, 0.7));
    assert!((state_fidelity(&rotated, &rho) - 1.0).abs() < 1e-14);
    assert!((state_fidelity(&b, &rho) - 1.0).abs() < 1e-14);
}

fn hermitian(vals: &[f64]) -> DMatrix<C64> {
    let n = 4;
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = C64::new(vals[k], 0.0);
        k += 1;
        for j in i + 1..n {
            let z = C64::new(vals[k], vals[k + 1]);
            k += 2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

proptest! {
    #[test]
    fn reconstruction_is_physical(vals in prop::collection::vec(-0.5f64..0.5, 16)) {
        let mut rho = hermitian(&vals);
        let tr = rho.trace().re;
        // shift to unit trace so the clip has somewhere to put the weight
        for i in 0..4 {
            rho[(i, i)] += C64::new((1.0 - tr) / 4.0, 0.0);
        }
        let out = reconstruct_physical(&rho);
        prop_assert_eq!(&out, &out.adjoint());
        prop_assert!((out.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(out.clone().symmetric_eigenvalues().min() > -1e-12);
        let again = reconstruct_physical(&out);
        prop_assert!((&again - &out).norm() < 1e-12);
    }

    #[test]
    fn physical_input_is_untouched(vals in prop::collection::vec(-1.0f64..1.0, 16)) {
        let a = hermitian(&vals);
        let rho = &a * a.adjoint();
        let rho = rho.unscale(rho.trace().re);
        prop_assume!(rho.clone().symmetric_eigenvalues().min() >= 0.0);
        prop_assert_eq!(reconstruct_physical(&rho), rho);
    }
}
