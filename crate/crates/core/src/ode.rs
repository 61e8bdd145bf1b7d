//! Adaptive Dormand–Prince 8(5,3) integrator for complex linear-algebra ODEs.
//!
//! Complex states are treated as the split real/imaginary system: every real
//! and imaginary part is an independent component of the error norm. The
//! integrator lands exactly on requested sample times and restarts at
//! breakpoints (discontinuities of the right-hand side). Inside a segment
//! `[a, b)` the right-hand side is never evaluated at `b` itself; the last
//! stage uses the left limit `b⁻` instead.

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            rtol: self.rtol / factor,
            atol: self.atol / factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("sample times must be sorted and inside [{start}, {end}]")]
    BadSampleGrid { start: f64, end: f64 },
}

/// Accepted/rejected step counters of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const N_STAGES: usize = 12;
const MAX_STEPS: usize = 50_000_000;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

const C: [f64; N_STAGES] = [
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
];

// Lower-triangular Butcher tableau, row i holds a_{i,0..i}.
const A: [[f64; N_STAGES]; N_STAGES + 1] = {
    let mut a = [[0.0; N_STAGES]; N_STAGES + 1];
    a[1][0] = 5.26001519587677318785587544488e-2;

    a[2][0] = 1.97250569845378994544595329183e-2;
    a[2][1] = 5.91751709536136983633785987549e-2;

    a[3][0] = 2.95875854768068491816892993775e-2;
    a[3][2] = 8.87627564304205475450678981324e-2;

    a[4][0] = 2.41365134159266685502369798665e-1;
    a[4][2] = -8.84549479328286085344864962717e-1;
    a[4][3] = 9.24834003261792003115737966543e-1;

    a[5][0] = 3.7037037037037037037037037037e-2;
    a[5][3] = 1.70828608729473871279604482173e-1;
    a[5][4] = 1.25467687566822425016691814123e-1;

    a[6][0] = 3.7109375e-2;
    a[6][3] = 1.70252211019544039314978060272e-1;
    a[6][4] = 6.02165389804559606850219397283e-2;
    a[6][5] = -1.7578125e-2;

    a[7][0] = 3.70920001185047927108779319836e-2;
    a[7][3] = 1.70383925712239993810214054705e-1;
    a[7][4] = 1.07262030446373284651809199168e-1;
    a[7][5] = -1.53194377486244017527936158236e-2;
    a[7][6] = 8.27378916381402288758473766002e-3;

    a[8][0] = 6.24110958716075717114429577812e-1;
    a[8][3] = -3.36089262944694129406857109825;
    a[8][4] = -8.68219346841726006818189891453e-1;
    a[8][5] = 2.75920996994467083049415600797e1;
    a[8][6] = 2.01540675504778934086186788979e1;
    a[8][7] = -4.34898841810699588477366255144e1;

    a[9][0] = 4.77662536438264365890433908527e-1;
    a[9][3] = -2.48811461997166764192642586468;
    a[9][4] = -5.90290826836842996371446475743e-1;
    a[9][5] = 2.12300514481811942347288949897e1;
    a[9][6] = 1.52792336328824235832596922938e1;
    a[9][7] = -3.32882109689848629194453265587e1;
    a[9][8] = -2.03312017085086261358222928593e-2;

    a[10][0] = -9.3714243008598732571704021658e-1;
    a[10][3] = 5.18637242884406370830023853209;
    a[10][4] = 1.09143734899672957818500254654;
    a[10][5] = -8.14978701074692612513997267357;
    a[10][6] = -1.85200656599969598641566180701e1;
    a[10][7] = 2.27394870993505042818970056734e1;
    a[10][8] = 2.49360555267965238987089396762;
    a[10][9] = -3.0467644718982195003823669022;

    a[11][0] = 2.27331014751653820792359768449;
    a[11][3] = -1.05344954667372501984066689879e1;
    a[11][4] = -2.00087205822486249909675718444;
    a[11][5] = -1.79589318631187989172765950534e1;
    a[11][6] = 2.79488845294199600508499808837e1;
    a[11][7] = -2.85899827713502369474065508674;
    a[11][8] = -8.87285693353062954433549289258;
    a[11][9] = 1.23605671757943030647266201528e1;
    a[11][10] = 6.43392746015763530355970484046e-1;

    // weights of the 8th-order solution
    a[12][0] = 5.42937341165687622380535766363e-2;
    a[12][5] = 4.45031289275240888144113950566;
    a[12][6] = 1.89151789931450038304281599044;
    a[12][7] = -5.8012039600105847814672114227;
    a[12][8] = 3.1116436695781989440891606237e-1;
    a[12][9] = -1.52160949662516078556178806805e-1;
    a[12][10] = 2.01365400804030348374776537501e-1;
    a[12][11] = 4.47106157277725905176885569043e-2;
    a
};

const E3: [f64; N_STAGES + 1] = {
    let mut e = [0.0; N_STAGES + 1];
    let mut i = 0;
    while i < N_STAGES {
        e[i] = A[N_STAGES][i];
        i += 1;
    }
    e[0] -= 0.244094488188976377952755905512;
    e[8] -= 0.733846688281611857341361741547;
    e[11] -= 0.220588235294117647058823529412e-1;
    e
};

const E5: [f64; N_STAGES + 1] = {
    let mut e = [0.0; N_STAGES + 1];
    e[0] = 0.1312004499419488073250102996e-1;
    e[5] = -0.1225156446376204440720569753e+1;
    e[6] = -0.4957589496572501915214079952;
    e[7] = 0.1664377182454986536961530415e+1;
    e[8] = -0.3503288487499736816886487290;
    e[9] = 0.3341791187130174790297318841;
    e[10] = 0.8192320648511571246570742613e-1;
    e[11] = -0.2235530786388629525884427845e-1;
    e
};

/// Workspace for one integration run.
pub struct Dop853 {
    tol: Tolerances,
    k: Vec<Vec<C64>>,
    y_stage: Vec<C64>,
    y_new: Vec<C64>,
    stats: StepStats,
}

impl Dop853 {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        Self {
            tol,
            k: vec![vec![C64::new(0.0, 0.0); dim]; N_STAGES + 1],
            y_stage: vec![C64::new(0.0, 0.0); dim],
            y_new: vec![C64::new(0.0, 0.0); dim],
            stats: StepStats::default(),
        }
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Integrates `y' = f(t, y)` from `t_span.0` to `t_span.1` and returns
    /// the state at every sample time. `breakpoints` inside the span split
    /// the integration into independent segments.
    pub fn solve<F>(
        &mut self,
        mut f: F,
        t_span: (f64, f64),
        y0: &[C64],
        sample_times: &[f64],
        breakpoints: &[f64],
    ) -> Result<Vec<Vec<C64>>, OdeError>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let (start, end) = t_span;
        let sorted = sample_times.windows(2).all(|w| w[0] <= w[1]);
        let inside = sample_times.iter().all(|&t| t >= start && t <= end);
        if !sorted || !inside {
            return Err(OdeError::BadSampleGrid { start, end });
        }
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > start && b < end)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.push(end);

        let mut y = y0.to_vec();
        let mut out = Vec::with_capacity(sample_times.len());
        let mut next_sample = 0;
        let mut t = start;
        while next_sample < sample_times.len() && sample_times[next_sample] <= t {
            out.push(y.clone());
            next_sample += 1;
        }
        for &seg_end in &cuts {
            if seg_end <= t {
                continue;
            }
            let mut h_next = None;
            // fresh derivative at the segment start
            f(t, &y, &mut self.k[0]);
            self.stats.evaluations += 1;
            while t < seg_end {
                let target = match sample_times.get(next_sample) {
                    Some(&s) if s < seg_end => s,
                    _ => seg_end,
                };
                if target - t <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                    // gap below resolution: state is unchanged to rounding
                    t = target;
                    while next_sample < sample_times.len() && sample_times[next_sample] <= t {
                        out.push(y.clone());
                        next_sample += 1;
                    }
                    continue;
                }
                let h_proposed = match h_next {
                    Some(h) => h,
                    None => self.initial_step(&mut f, t, &y, seg_end),
                };
                let clipped = h_proposed >= target - t;
                let h = if clipped { target - t } else { h_proposed };
                let (h_taken, h_after) = self.step(&mut f, t, &mut y, h, seg_end)?;
                // a clipped step that was accepted at full size keeps the
                // larger proposal for the next step
                h_next = Some(if clipped && h_taken == h {
                    h_after.max(h_proposed)
                } else {
                    h_after
                });
                t = if h_taken == target - t { target } else { t + h_taken };
                while next_sample < sample_times.len() && sample_times[next_sample] <= t {
                    out.push(y.clone());
                    next_sample += 1;
                }
            }
        }
        Ok(out)
    }

    fn error_scale(&self, a: C64, b: C64) -> (f64, f64) {
        let re = self.tol.atol + self.tol.rtol * a.re.abs().max(b.re.abs());
        let im = self.tol.atol + self.tol.rtol * a.im.abs().max(b.im.abs());
        (re, im)
    }

    fn initial_step<F>(&mut self, f: &mut F, t: f64, y: &[C64], seg_end: f64) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = 2.0 * y.len() as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for (yi, fi) in y.iter().zip(&self.k[0]) {
            let (sr, si) = self.error_scale(*yi, *yi);
            d0 += (yi.re / sr).powi(2) + (yi.im / si).powi(2);
            d1 += (fi.re / sr).powi(2) + (fi.im / si).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let span = seg_end - t;
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        }
        .min(span);
        for ((ys, yi), fi) in self.y_stage.iter_mut().zip(y).zip(&self.k[0]) {
            *ys = yi + fi * h0;
        }
        let t_probe = left_limit(t + h0, seg_end);
        f(t_probe, &self.y_stage, &mut self.y_new);
        self.stats.evaluations += 1;
        let mut d2 = 0.0;
        for ((f1, f0), yi) in self.y_new.iter().zip(&self.k[0]).zip(y) {
            let (sr, si) = self.error_scale(*yi, *yi);
            let diff = f1 - f0;
            d2 += (diff.re / sr).powi(2) + (diff.im / si).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Attempts steps starting at `h` until one is accepted. Returns the
    /// accepted step size and the proposal for the next one. On return
    /// `y` holds the new state and `k[0]` its derivative.
    fn step<F>(
        &mut self,
        f: &mut F,
        t: f64,
        y: &mut [C64],
        mut h: f64,
        seg_end: f64,
    ) -> Result<(f64, f64), OdeError>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let dim = y.len();
        loop {
            if self.stats.accepted + self.stats.rejected > MAX_STEPS {
                return Err(OdeError::TooManySteps(MAX_STEPS));
            }
            let min_step = 10.0 * f64::EPSILON * t.abs().max(1e-300);
            if h < min_step {
                return Err(OdeError::StepSizeUnderflow { t, h });
            }
            for s in 1..N_STAGES {
                for i in 0..dim {
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, &a) in A[s][..s].iter().enumerate() {
                        if a != 0.0 {
                            acc += self.k[j][i] * a;
                        }
                    }
                    self.y_stage[i] = y[i] + acc * h;
                }
                let ts = left_limit(t + C[s] * h, seg_end);
                f(ts, &self.y_stage, &mut self.k[s]);
            }
            for i in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for (j, &b) in A[N_STAGES].iter().enumerate() {
                    if b != 0.0 {
                        acc += self.k[j][i] * b;
                    }
                }
                self.y_new[i] = y[i] + acc * h;
            }
            let t_new = left_limit(t + h, seg_end);
            f(t_new, &self.y_new, &mut self.k[N_STAGES]);
            self.stats.evaluations += N_STAGES;

            let mut err5 = 0.0;
            let mut err3 = 0.0;
            for i in 0..dim {
                let mut e5 = C64::new(0.0, 0.0);
                let mut e3 = C64::new(0.0, 0.0);
                for j in 0..=N_STAGES {
                    let kj = self.k[j][i];
                    if E5[j] != 0.0 {
                        e5 += kj * E5[j];
                    }
                    if E3[j] != 0.0 {
                        e3 += kj * E3[j];
                    }
                }
                let (sr, si) = self.error_scale(y[i], self.y_new[i]);
                err5 += (e5.re / sr).powi(2) + (e5.im / si).powi(2);
                err3 += (e3.re / sr).powi(2) + (e3.im / si).powi(2);
            }
            let error_norm = if err5 == 0.0 && err3 == 0.0 {
                0.0
            } else {
                let denom = err5 + 0.01 * err3;
                h * err5 / (denom * 2.0 * dim as f64).sqrt()
            };

            if error_norm < 1.0 {
                let factor = if error_norm == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * error_norm.powf(ERROR_EXPONENT)).min(MAX_FACTOR)
                };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, N_STAGES);
                self.stats.accepted += 1;
                return Ok((h, h * factor));
            }
            self.stats.rejected += 1;
            h *= (SAFETY * error_norm.powf(ERROR_EXPONENT)).max(MIN_FACTOR);
        }
    }
}

/// Evaluation time clamped to the open segment end.
fn left_limit(t: f64, seg_end: f64) -> f64 {
    if t >= seg_end {
        seg_end.next_down()
    } else {
        t
    }
}

/// Convenience wrapper: integrate and return only the final state.
pub fn solve_final<F>(
    f: F,
    t_span: (f64, f64),
    y0: &[C64],
    breakpoints: &[f64],
    tol: Tolerances,
) -> Result<Vec<C64>, OdeError>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let mut solver = Dop853::new(y0.len(), tol);
    let mut out = solver.solve(f, t_span, y0, &[t_span.1], breakpoints)?;
    Ok(out.pop().expect("final sample"))
}
