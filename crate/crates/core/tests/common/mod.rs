//! Independent recoupling oracle: Clebsch–Gordan tables built by
//! lowering-operator recursion plus Gram–Schmidt in the product basis, and
//! 6j symbols assembled from four 3j symbols of that table. All angular
//! momenta are doubled.

use std::collections::HashMap;

type State = HashMap<(i32, i32), f64>;

/// `sqrt(j(j+1) - m(m-1))` for doubled arguments.
fn lowering(two_j: i32, two_m: i32) -> f64 {
    let (j, m) = (two_j as f64 / 2.0, two_m as f64 / 2.0);
    (j * (j + 1.0) - m * (m - 1.0)).sqrt()
}

fn lower(state: &State, a: i32, b: i32) -> State {
    let mut out = State::new();
    for (&(m1, m2), &c) in state {
        if m1 > -a {
            *out.entry((m1 - 2, m2)).or_default() += c * lowering(a, m1);
        }
        if m2 > -b {
            *out.entry((m1, m2 - 2)).or_default() += c * lowering(b, m2);
        }
    }
    out
}

fn dot(x: &State, y: &State) -> f64 {
    x.iter().map(|(k, v)| v * y.get(k).copied().unwrap_or(0.0)).sum()
}

/// Full table `(J, M) -> |J M>` expanded in `|m1 m2>` for spins `a`, `b`.
fn cg_table(a: i32, b: i32) -> HashMap<(i32, i32), State> {
    let mut table: HashMap<(i32, i32), State> = HashMap::new();
    let mut big_j = a + b;
    while big_j >= (a - b).abs() {
        // orthogonal complement of higher multiplets in the M = J subspace
        let mut top = None;
        let mut m1 = a;
        while m1 >= -a {
            let m2 = big_j - m1;
            if m2.abs() <= b {
                let mut v = State::new();
                v.insert((m1, m2), 1.0);
                let mut higher = big_j + 2;
                while higher <= a + b {
                    let u = &table[&(higher, big_j)];
                    let p = dot(u, &v);
                    for (k, c) in u {
                        *v.entry(*k).or_default() -= p * c;
                    }
                    higher += 2;
                }
                let norm = dot(&v, &v).sqrt();
                if norm > 1e-8 {
                    for c in v.values_mut() {
                        *c /= norm;
                    }
                    top = Some(v);
                    break;
                }
            }
            m1 -= 2;
        }
        let mut state = top.expect("multiplet top state");
        // Condon–Shortley: <j1 j1; j2 J-j1 | J J> > 0
        let lead = state.get(&(a, big_j - a)).copied().unwrap_or(0.0);
        if lead < 0.0 {
            for c in state.values_mut() {
                *c = -*c;
            }
        }
        let mut m = big_j;
        loop {
            table.insert((big_j, m), state.clone());
            if m == -big_j {
                break;
            }
            let lowered = lower(&state, a, b);
            let n = lowering(big_j, m);
            state = lowered.into_iter().map(|(k, v)| (k, v / n)).collect();
            m -= 2;
        }
        big_j -= 2;
    }
    table
}

pub struct Oracle {
    tables: HashMap<(i32, i32), HashMap<(i32, i32), State>>,
}

impl Oracle {
    pub fn new() -> Self {
        Self {
            tables: HashMap::new(),
        }
    }

    pub fn cg(&mut self, a: i32, ma: i32, b: i32, mb: i32, c: i32, mc: i32) -> f64 {
        if ma + mb != mc || c > a + b || c < (a - b).abs() || (a + b + c) % 2 != 0 {
            return 0.0;
        }
        let table = self.tables.entry((a, b)).or_insert_with(|| cg_table(a, b));
        table[&(c, mc)].get(&(ma, mb)).copied().unwrap_or(0.0)
    }

    pub fn three_j(&mut self, a: i32, ma: i32, b: i32, mb: i32, c: i32, mc: i32) -> f64 {
        let phase = if ((a - b - mc) / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        phase * self.cg(a, ma, b, mb, c, -mc) / ((c + 1) as f64).sqrt()
    }

    /// 6j as a contraction of four 3j symbols (all arguments doubled).
    pub fn six_j(&mut self, j: [i32; 6]) -> f64 {
        let [j1, j2, j3, j4, j5, j6] = j;
        let range = |two_j: i32| (-two_j..=two_j).step_by(2);
        let mut total = 0.0;
        for m1 in range(j1) {
            for m2 in range(j2) {
                let m3 = -m1 - m2;
                if m3.abs() > j3 {
                    continue;
                }
                for m5 in range(j5) {
                    let m6 = m5 - m1;
                    if m6.abs() > j6 {
                        continue;
                    }
                    let m4 = m6 - m2;
                    if m4.abs() > j4 || -m4 + m5 + m3 != 0 {
                        continue;
                    }
                    let s = (j.iter().sum::<i32>() - (m1 + m2 + m3 + m4 + m5 + m6)) / 2;
                    let phase = if s.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    total += phase
                        * self.three_j(j1, -m1, j2, -m2, j3, -m3)
                        * self.three_j(j1, m1, j5, -m5, j6, m6)
                        * self.three_j(j4, m4, j2, m2, j6, -m6)
                        * self.three_j(j4, -m4, j5, m5, j3, m3);
                }
            }
        }
        total
    }
}

impl Default for Oracle {
    fn default() -> Self {
        Self::new()
    }
}
