//! Schrödinger and depopulation-only master-equation propagation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dop853, Tolerances};
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Off-diagonal element `H[row, col] = value`; the Hermitian partner
/// `H[col, row] = conj(value)` is implied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub row: usize,
    pub col: usize,
    pub value: C64,
}

/// Hermitian matrix stored as a real diagonal plus a list of couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseHamiltonian {
    pub diag: Vec<f64>,
    pub couplings: Vec<Coupling>,
}

impl SparseHamiltonian {
    pub fn zeros(dim: usize) -> Self {
        Self {
            diag: vec![0.0; dim],
            couplings: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.diag.iter().map(|&d| C64::new(d, 0.0)),
        ));
        for c in &self.couplings {
            m[(c.row, c.col)] += c.value;
            m[(c.col, c.row)] += c.value.conj();
        }
        m
    }

    /// `out = H psi`
    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        for ((o, &d), &p) in out.iter_mut().zip(&self.diag).zip(psi) {
            *o = p * d;
        }
        for c in &self.couplings {
            out[c.row] += c.value * psi[c.col];
            out[c.col] += c.value.conj() * psi[c.row];
        }
    }
}

pub trait TimeDependentHamiltonian {
    /// Sparsity pattern shared by every time; `fill` only rewrites values.
    fn structure(&self) -> SparseHamiltonian;
    fn fill(&self, t: f64, h: &mut SparseHamiltonian);
    /// Times where the Hamiltonian may be discontinuous.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl TimeDependentHamiltonian for SparseHamiltonian {
    fn structure(&self) -> SparseHamiltonian {
        self.clone()
    }

    fn fill(&self, _t: f64, _h: &mut SparseHamiltonian) {}
}

/// Wraps a closure `(t, h)` together with a fixed structure.
pub struct FnHamiltonian<F> {
    pub structure: SparseHamiltonian,
    pub f: F,
    pub breakpoints: Vec<f64>,
}

impl<F: Fn(f64, &mut SparseHamiltonian)> TimeDependentHamiltonian for FnHamiltonian<F> {
    fn structure(&self) -> SparseHamiltonian {
        self.structure.clone()
    }

    fn fill(&self, t: f64, h: &mut SparseHamiltonian) {
        (self.f)(t, h)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayChannel {
    pub index: usize,
    /// 1/us
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(Vec<C64>),
    Mixed(DMatrix<C64>),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            Self::Pure(v) => v.len(),
            Self::Mixed(m) => m.nrows(),
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        match self {
            Self::Pure(v) => v.iter().map(|c| c.norm_sqr()).collect(),
            Self::Mixed(m) => (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.populations().iter().sum()
    }

    pub fn purity(&self) -> f64 {
        match self {
            Self::Pure(v) => v.iter().map(|c| c.norm_sqr()).sum::<f64>().powi(2),
            Self::Mixed(m) => m.iter().map(|c| c.norm_sqr()).sum(),
        }
    }

    pub fn to_density(&self) -> DMatrix<C64> {
        match self {
            Self::Pure(v) => {
                let n = v.len();
                DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
            }
            Self::Mixed(m) => m.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &S {
        self.states.last().expect("non-empty trajectory")
    }
}

fn check_grid(grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidState("sample grid must be non-empty and sorted".into()));
    }
    Ok((grid[0], grid[grid.len() - 1]))
}

/// Integrates `i psi' = H(t) psi` and samples on `grid` (the first and last
/// grid points delimit the span).
pub fn propagate_schrodinger(
    h: &impl TimeDependentHamiltonian,
    psi0: &[C64],
    grid: &[f64],
    tol: Tolerances,
) -> Result<Trajectory<Vec<C64>>> {
    let span = check_grid(grid)?;
    let mut work = h.structure();
    if work.dim() != psi0.len() {
        return Err(Error::InvalidState(format!(
            "state has {} components, Hamiltonian {}",
            psi0.len(),
            work.dim()
        )));
    }
    let norm: f64 = psi0.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("initial norm {norm}")));
    }
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        h.fill(t, &mut work);
        work.apply(y, dy);
        for d in dy.iter_mut() {
            *d *= -I;
        }
    };
    let states = Dop853::new(psi0.len(), tol).solve(rhs, span, psi0, grid, &h.breakpoints())?;
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
    })
}

fn check_density(rho: &DMatrix<C64>) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::InvalidState("density matrix must be square".into()));
    }
    let herm = (rho - rho.adjoint()).norm();
    if herm > 1e-10 {
        return Err(Error::InvalidState(format!("density matrix not Hermitian ({herm:.2e})")));
    }
    let trace = rho.trace().re;
    if trace > 1.0 + 1e-10 {
        return Err(Error::InvalidState(format!("trace {trace} exceeds one")));
    }
    let sym = (rho + rho.adjoint()).scale(0.5);
    let min = sym.symmetric_eigenvalues().min();
    if min < -1e-10 {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:.2e}")));
    }
    Ok(())
}

/// Integrates `rho' = -i[H, rho] - (Gamma rho + rho Gamma)/2` with
/// `Gamma = sum_r gamma_r |r><r|`. The matrix is integrated as a column-major
/// vector and re-symmetrised only at the returned samples.
pub fn propagate_master(
    h: &impl TimeDependentHamiltonian,
    rho0: &DMatrix<C64>,
    decays: &[DecayChannel],
    grid: &[f64],
    tol: Tolerances,
) -> Result<Trajectory<DMatrix<C64>>> {
    let mut tr = propagate_master_raw(h, rho0, decays, grid, tol)?;
    for m in tr.states.iter_mut() {
        *m = (&*m + m.adjoint()).scale(0.5);
    }
    Ok(tr)
}

/// As [`propagate_master`] but without the final re-symmetrisation, so the
/// integrator's own Hermiticity defect stays visible.
pub fn propagate_master_raw(
    h: &impl TimeDependentHamiltonian,
    rho0: &DMatrix<C64>,
    decays: &[DecayChannel],
    grid: &[f64],
    tol: Tolerances,
) -> Result<Trajectory<DMatrix<C64>>> {
    let span = check_grid(grid)?;
    check_density(rho0)?;
    let mut work = h.structure();
    let n = work.dim();
    if rho0.nrows() != n {
        return Err(Error::InvalidState(format!(
            "density matrix is {0}x{0}, Hamiltonian {n}",
            rho0.nrows()
        )));
    }
    let mut gamma = vec![0.0; n];
    for d in decays {
        if d.index >= n || !(d.rate >= 0.0) {
            return Err(Error::InvalidState(format!("bad decay channel {d:?}")));
        }
        gamma[d.index] += d.rate;
    }
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        h.fill(t, &mut work);
        master_rhs(&work, &gamma, n, y, dy);
    };
    let y0: Vec<C64> = rho0.as_slice().to_vec();
    let raw = Dop853::new(n * n, tol).solve(rhs, span, &y0, grid, &h.breakpoints())?;
    Ok(Trajectory {
        times: grid.to_vec(),
        states: raw.into_iter().map(|v| DMatrix::from_vec(n, n, v)).collect(),
    })
}

/// `dy = -i (H rho - rho H) - (G rho + rho G)/2` on column-major storage.
fn master_rhs(h: &SparseHamiltonian, gamma: &[f64], n: usize, y: &[C64], dy: &mut [C64]) {
    // Effective non-Hermitian diagonal: d_i - i gamma_i / 2.
    for j in 0..n {
        let dj = C64::new(h.diag[j], 0.5 * gamma[j]);
        for i in 0..n {
            let di = C64::new(h.diag[i], -0.5 * gamma[i]);
            // diagonal commutator and anticommutator terms together
            dy[i + n * j] = -I * (di - dj) * y[i + n * j];
        }
    }
    for c in &h.couplings {
        let (r, k, v) = (c.row, c.col, c.value);
        let vc = v.conj();
        for j in 0..n {
            // H rho: rows r and k
            dy[r + n * j] += -I * v * y[k + n * j];
            dy[k + n * j] += -I * vc * y[r + n * j];
        }
        for i in 0..n {
            // rho H: columns k and r
            dy[i + n * k] += I * y[i + n * r] * v;
            dy[i + n * r] += I * y[i + n * k] * vc;
        }
    }
}

/// Which phase `observables` tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseProbe {
    /// `arg psi_i`; only defined for pure states.
    Amplitude(usize),
    /// `arg rho_ij` (or `arg psi_i psi_j^*`).
    Coherence(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observables {
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    /// Unwrapped; `None` when the probe is undefined for the state type.
    pub phase: Option<Vec<f64>>,
    pub trace: Vec<f64>,
    pub purity: Vec<f64>,
}

fn probe_phase(s: &QuantumState, probe: PhaseProbe) -> Option<f64> {
    match (s, probe) {
        (QuantumState::Pure(v), PhaseProbe::Amplitude(i)) => Some(v[i].arg()),
        (QuantumState::Pure(v), PhaseProbe::Coherence(i, j)) => Some((v[i] * v[j].conj()).arg()),
        (QuantumState::Mixed(m), PhaseProbe::Coherence(i, j)) => Some(m[(i, j)].arg()),
        (QuantumState::Mixed(_), PhaseProbe::Amplitude(_)) => None,
    }
}

pub fn observables(times: &[f64], states: &[QuantumState], probe: PhaseProbe) -> Observables {
    let phase: Option<Vec<f64>> = states.iter().map(|s| probe_phase(s, probe)).collect();
    Observables {
        times: times.to_vec(),
        populations: states.iter().map(QuantumState::populations).collect(),
        phase: phase.map(|p| unwrap_phase(&p)),
        trace: states.iter().map(QuantumState::trace).collect(),
        purity: states.iter().map(QuantumState::purity).collect(),
    }
}

/// Removes `2 pi` jumps between consecutive samples.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset: f64 = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let step: f64 = p + offset - out[i - 1];
            offset -= crate::TWO_PI * (step / crate::TWO_PI).round();
        }
        out.push(p + offset);
    }
    out
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(crate::TWO_PI);
    if y > std::f64::consts::PI {
        y - crate::TWO_PI
    } else {
        y
    }
}
