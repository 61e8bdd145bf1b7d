//! Multi-channel pair Hamiltonian: the initial `|90S, 96S>` pair coupled to
//! each catalogued `|P, P'>` product state through a star of dipole-dipole
//! couplings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::angular::{angular_factor, Sublevel};
use crate::catalog::{parse_level, ChannelData};
use crate::dynamics::{
    propagate_schrodinger, unwrap_phase, Coupling, SparseHamiltonian, TimeDependentHamiltonian,
};
use crate::ode::Tolerances;
use crate::error::{Error, Result};
use crate::stark::{pair_polarizability, FieldWaveform, PolarizabilityTable};
use crate::{mhz, C64, TWO_PI};

/// Default floor on `|C3 Q|`, in MHz um^3.
pub const DEFAULT_COUPLING_FLOOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub id: u32,
    pub a: Sublevel,
    pub b: Sublevel,
    pub alpha: Sublevel,
    pub beta: Sublevel,
    /// Zero-field defect, rad/us.
    pub delta0: f64,
    /// MHz um^3 as tabulated.
    pub c3: f64,
    /// Whether `c3 / R^3` is already in rad/us.
    pub c3_angular: bool,
    pub q: f64,
}

/// `C3 Q / R^3` in rad/us.
pub fn coupling(ch: &ChannelSpec, distance: f64) -> f64 {
    let scale = if ch.c3_angular { 1.0 } else { TWO_PI };
    scale * ch.c3 * ch.q / distance.powi(3)
}

/// Channels of the catalog whose `|C3 Q|` reaches `floor`, ordered by id.
pub fn build_catalog(data: &ChannelData, floor: f64) -> Result<Vec<ChannelSpec>> {
    let f = &data.file;
    let init = &f.initial_pair;
    let a_level = parse_level(&init.a)?;
    let b_level = parse_level(&init.b)?;
    let mut out = Vec::new();
    for entry in &f.channels {
        let row = data
            .defect_row(entry.defect_row)
            .ok_or_else(|| Error::Catalog(format!("missing defect row {}", entry.defect_row)))?;
        if parse_level(&row.a)? != a_level || parse_level(&row.b)? != b_level {
            return Err(Error::Catalog(format!(
                "channel {} does not start from the initial pair",
                entry.id
            )));
        }
        let ch = ChannelSpec {
            id: entry.id,
            a: Sublevel::new(a_level, init.two_m_a)?,
            b: Sublevel::new(b_level, init.two_m_b)?,
            alpha: Sublevel::new(parse_level(&row.alpha)?, entry.two_m_alpha)?,
            beta: Sublevel::new(parse_level(&row.beta)?, entry.two_m_beta)?,
            delta0: mhz(row.delta0),
            c3: row.c3,
            c3_angular: f.units.c3_angular,
            q: entry.q,
        };
        let recomputed = angular_factor(ch.a, ch.b, ch.alpha, ch.beta)?;
        if (recomputed - ch.q).abs() > 1e-12 {
            return Err(Error::CatalogMismatch {
                id: ch.id,
                stored: ch.q,
                recomputed,
            });
        }
        if (ch.c3 * ch.q).abs() >= floor {
            out.push(ch);
        }
    }
    out.sort_by_key(|c| c.id);
    Ok(out)
}

/// Ordered pair states: index 0 is the initial pair, index `k` the final
/// pair of the `k`-th channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveBasis {
    pub states: Vec<(Sublevel, Sublevel)>,
}

impl CollectiveBasis {
    pub fn from_channels(channels: &[ChannelSpec]) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Catalog("empty channel list".into()))?;
        let mut states = vec![(first.a, first.b)];
        for ch in channels {
            if (ch.a, ch.b) != states[0] {
                return Err(Error::Catalog(format!("channel {} has a different initial pair", ch.id)));
            }
            let s = (ch.alpha, ch.beta);
            if states.contains(&s) {
                return Err(Error::Catalog(format!("channel {} repeats a final pair", ch.id)));
            }
            states.push(s);
        }
        Ok(Self { states })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn label(&self, i: usize) -> String {
        let (x, y) = &self.states[i];
        format!("{} m={}/2; {} m={}/2", x.level, x.two_m, y.level, y.two_m)
    }
}

/// Star-shaped pair Hamiltonian at fixed interatomic distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairHamiltonian {
    pub basis: CollectiveBasis,
    pub channels: Vec<ChannelSpec>,
    pub distance: f64,
    pair_alpha: Vec<f64>,
    couplings: Vec<f64>,
}

impl PairHamiltonian {
    pub fn new(channels: Vec<ChannelSpec>, table: &PolarizabilityTable, distance: f64) -> Result<Self> {
        if !(distance > 0.0) {
            return Err(Error::InvalidState(format!("distance {distance} must be positive")));
        }
        let basis = CollectiveBasis::from_channels(&channels)?;
        let pair_alpha = channels
            .iter()
            .map(|ch| pair_polarizability(ch, table))
            .collect::<Result<Vec<_>>>()?;
        let couplings = channels.iter().map(|ch| coupling(ch, distance)).collect();
        Ok(Self {
            basis,
            channels,
            distance,
            pair_alpha,
            couplings,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Channel detunings `Delta_k(E)` from the squared field.
    pub fn detunings_sq(&self, field_sq: f64) -> impl Iterator<Item = f64> + '_ {
        self.channels
            .iter()
            .zip(&self.pair_alpha)
            .map(move |(ch, a)| ch.delta0 - 0.5 * a * field_sq)
    }

    pub fn detunings(&self, field: f64) -> Vec<f64> {
        self.detunings_sq(field * field).collect()
    }

    pub fn sparse_at(&self, field: f64) -> SparseHamiltonian {
        let mut h = self.structure();
        self.fill_sq(field * field, &mut h);
        h
    }

    pub fn structure(&self) -> SparseHamiltonian {
        SparseHamiltonian {
            diag: vec![0.0; self.dim()],
            couplings: self
                .couplings
                .iter()
                .enumerate()
                .map(|(k, &v)| Coupling {
                    row: 0,
                    col: k + 1,
                    value: C64::new(v, 0.0),
                })
                .collect(),
        }
    }

    fn fill_sq(&self, field_sq: f64, h: &mut SparseHamiltonian) {
        h.diag[0] = 0.0;
        for (k, d) in self.detunings_sq(field_sq).enumerate() {
            h.diag[k + 1] = d;
        }
    }
}

pub fn hamiltonian_at(h: &PairHamiltonian, field: f64) -> DMatrix<C64> {
    h.sparse_at(field).to_dense()
}

/// Pair Hamiltonian driven by a field waveform.
#[derive(Debug, Clone)]
pub struct PairRamp<'a> {
    pub pair: &'a PairHamiltonian,
    pub waveform: &'a FieldWaveform,
}

impl TimeDependentHamiltonian for PairRamp<'_> {
    fn structure(&self) -> SparseHamiltonian {
        self.pair.structure()
    }

    fn fill(&self, t: f64, h: &mut SparseHamiltonian) {
        self.pair.fill_sq(self.waveform.field_squared(t), h);
    }

    fn breakpoints(&self) -> Vec<f64> {
        let (a, b) = self.waveform.span();
        let mut out = vec![a, b];
        out.extend(self.waveform.breakpoints());
        out
    }
}

/// Time series of a pair-state passage starting from the initial pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageRun {
    pub times: Vec<f64>,
    pub field: Vec<f64>,
    /// `detunings[i][k]`: channel `k` at sample `i`, rad/us.
    pub detunings: Vec<Vec<f64>>,
    pub populations: Vec<Vec<f64>>,
    /// Unwrapped `arg c_0`.
    pub phase: Vec<f64>,
    pub final_population: f64,
    pub final_phase: f64,
}

/// Propagates `|initial pair>` through the waveform, sampled every
/// `max_step` us.
pub fn run_passage(
    pair: &PairHamiltonian,
    waveform: &FieldWaveform,
    max_step: f64,
    tol: Tolerances,
) -> Result<PassageRun> {
    let grid = crate::pulses::uniform_grid(waveform.span(), max_step);
    let mut psi0 = vec![C64::default(); pair.dim()];
    psi0[0] = C64::new(1.0, 0.0);
    let tr = propagate_schrodinger(&PairRamp { pair, waveform }, &psi0, &grid, tol)?;
    let phase = unwrap_phase(&tr.states.iter().map(|s| s[0].arg()).collect::<Vec<_>>());
    let populations: Vec<Vec<f64>> = tr
        .states
        .iter()
        .map(|s| s.iter().map(|c| c.norm_sqr()).collect())
        .collect();
    Ok(PassageRun {
        field: grid.iter().map(|&t| waveform.field(t)).collect(),
        detunings: grid
            .iter()
            .map(|&t| pair.detunings_sq(waveform.field_squared(t)).collect())
            .collect(),
        final_population: populations.last().map_or(0.0, |p| p[0]),
        final_phase: *phase.last().expect("non-empty"),
        populations,
        phase,
        times: grid,
    })
}

/// Final amplitude of the initial pair after the waveform.
pub fn passage_amplitude(pair: &PairHamiltonian, waveform: &FieldWaveform, tol: Tolerances) -> Result<C64> {
    let (a, b) = waveform.span();
    let mut psi0 = vec![C64::default(); pair.dim()];
    psi0[0] = C64::new(1.0, 0.0);
    let tr = propagate_schrodinger(&PairRamp { pair, waveform }, &psi0, &[a, b], tol)?;
    Ok(tr.last()[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pair(r: f64) -> PairHamiltonian {
        let data = ChannelData::builtin();
        let chs = build_catalog(&data, DEFAULT_COUPLING_FLOOR).unwrap();
        PairHamiltonian::new(chs, &data.polarizabilities().unwrap(), r).unwrap()
    }

    #[test]
    fn catalog_has_eight_channels() {
        let data = ChannelData::builtin();
        let chs = build_catalog(&data, DEFAULT_COUPLING_FLOOR).unwrap();
        assert_eq!(chs.len(), 8);
        assert_eq!(chs[0].c3, -154968.0);
        assert_relative_eq!(chs[0].q, -2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(chs[5].delta0, mhz(689.067));
        assert_relative_eq!(chs[5].q, -4.0 / 3.0, epsilon = 1e-15);
        let all = build_catalog(&data, 0.0).unwrap();
        assert_eq!(all.len(), 9);
        assert_eq!(all[8].c3, -26.0);
    }

    #[test]
    fn stored_factor_mismatch_is_reported() {
        let text = crate::catalog::BUILTIN_CATALOG_JSON.replacen("\"q\": -1.3333333333333333", "\"q\": -1.3", 1);
        let data = ChannelData::from_json(&text).unwrap();
        assert!(matches!(
            build_catalog(&data, DEFAULT_COUPLING_FLOOR),
            Err(Error::CatalogMismatch { id: 6, .. })
        ));
    }

    #[test]
    fn coupling_scaling() {
        let h = pair(25.0);
        let v1 = h.couplings()[0];
        assert_relative_eq!(v1, -154968.0 * (-2.0 / 3.0) / 15625.0, max_relative = 1e-14);
        let h2 = pair(50.0);
        assert_relative_eq!(h2.couplings()[0], v1 / 8.0, max_relative = 1e-14);
        let mut ch = h.channels[0].clone();
        ch.q = 0.0;
        assert_eq!(coupling(&ch, 25.0), 0.0);
        ch.q = 1.0;
        ch.c3_angular = false;
        assert_relative_eq!(coupling(&ch, 1.0), TWO_PI * ch.c3);
    }

    #[test]
    fn star_and_hermitian() {
        let h = pair(25.0);
        let m = hamiltonian_at(&h, 0.02);
        assert_eq!(m.nrows(), 9);
        assert!((&m - m.adjoint()).norm() == 0.0);
        let offdiag = (0..9)
            .flat_map(|i| (i + 1..9).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)].norm() > 0.0)
            .count();
        assert_eq!(offdiag, 8);
        let m0 = hamiltonian_at(&h, 0.0);
        assert_eq!(m0[(0, 0)].re, 0.0);
        for k in 1..9 {
            assert!(m0[(k, k)].re.abs() >= mhz(75.0));
        }
        assert_relative_eq!(m0[(1, 1)].re, mhz(75.610));
    }

    #[test]
    fn basis_labels() {
        let h = pair(25.0);
        assert_eq!(h.basis.label(0), "90S1/2 m=1/2; 96S1/2 m=1/2");
        assert_eq!(h.basis.label(3), "90P1/2 m=-1/2; 95P3/2 m=3/2");
    }
}
