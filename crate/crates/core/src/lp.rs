//! Dense two-phase simplex for the small packing programs met while clearing.
//!
//! Solves `max c.x` subject to `a_i . x <= b_i` and `x >= 0`. Rows with a
//! negative right-hand side make the slack basis infeasible; phase 1 then
//! minimizes one auxiliary variable subtracted from every row.

const TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;
const DEGENERATE_STREAK: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum LpOutcome {
    /// Optimal value; `+inf` if unbounded or the pivot budget ran out.
    Optimal(f64),
    Infeasible,
}

struct Tableau {
    width: usize,
    cells: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    obj: Vec<f64>,
    value: f64,
    /// Columns that may not enter the basis.
    barred: Vec<bool>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let p = self.at(r, e);
        for j in 0..w {
            self.cells[r * w + j] /= p;
        }
        self.rhs[r] /= p;
        let (pivot_row, pivot_rhs) = (self.cells[r * w..(r + 1) * w].to_vec(), self.rhs[r]);
        for i in 0..self.basis.len() {
            let f = self.at(i, e);
            if i != r && f != 0.0 {
                for (cell, pr) in self.cells[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *cell -= f * pr;
                }
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        let f = self.obj[e];
        if f != 0.0 {
            for (o, pr) in self.obj.iter_mut().zip(&pivot_row) {
                *o -= f * pr;
            }
            self.value += f * pivot_rhs;
        }
        self.basis[r] = e;
    }

    /// Runs primal simplex on the current objective row. `false` if unbounded
    /// or out of pivots.
    fn optimize(&mut self) -> bool {
        let mut degenerate = 0;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = TOL;
            for j in 0..self.width {
                if self.barred[j] || self.obj[j] <= TOL {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if self.obj[j] > best {
                    best = self.obj[j];
                    entering = Some(j);
                }
            }
            let Some(e) = entering else {
                return true;
            };
            let mut leaving: Option<(usize, f64, f64)> = None;
            for i in 0..self.basis.len() {
                let a = self.at(i, e);
                if a > TOL {
                    let ratio = self.rhs[i] / a;
                    let better = match leaving {
                        None => true,
                        Some((r, lr, la)) => {
                            if bland {
                                ratio < lr - TOL || (ratio <= lr + TOL && self.basis[i] < self.basis[r])
                            } else {
                                ratio < lr - TOL || (ratio <= lr + TOL && a > la)
                            }
                        }
                    };
                    if better {
                        leaving = Some((i, ratio, a));
                    }
                }
            }
            let Some((r, ratio, _)) = leaving else {
                return false;
            };
            degenerate = if ratio <= TOL { degenerate + 1 } else { 0 };
            self.pivot(r, e);
        }
        false
    }
}

/// `max c.x` over `x >= 0` and the given rows; `c.len()` variables.
pub(crate) fn maximize(c: &[f64], rows: &[Row]) -> LpOutcome {
    let n = c.len();
    let m = rows.len();
    let needs_phase_one = rows.iter().any(|r| r.rhs < -TOL);
    let aux = n + m;
    let width = n + m + usize::from(needs_phase_one);
    let mut t = Tableau {
        width,
        cells: vec![0.0; m * width],
        rhs: rows.iter().map(|r| r.rhs).collect(),
        basis: (n..n + m).collect(),
        obj: vec![0.0; width],
        value: 0.0,
        barred: vec![false; width],
    };
    for (i, row) in rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            t.cells[i * width + j] += a;
        }
        t.cells[i * width + n + i] = 1.0;
        if needs_phase_one {
            t.cells[i * width + aux] = -1.0;
        }
    }

    if needs_phase_one {
        // maximize -aux; entering aux on the most negative row makes all rhs >= 0
        t.obj[aux] = -1.0;
        let worst = (0..m).min_by(|&a, &b| t.rhs[a].total_cmp(&t.rhs[b])).expect("some row is negative");
        t.pivot(worst, aux);
        if !t.optimize() || t.value < -1e-7 {
            return LpOutcome::Infeasible;
        }
        if let Some(r) = t.basis.iter().position(|&b| b == aux) {
            match (0..aux).find(|&j| t.at(r, j).abs() > TOL) {
                Some(e) => t.pivot(r, e),
                None => return LpOutcome::Infeasible,
            }
        }
        t.barred[aux] = true;
        for i in 0..m {
            t.cells[i * width + aux] = 0.0;
        }
    }

    // phase 2 objective in terms of the current basis
    t.obj.iter_mut().for_each(|o| *o = 0.0);
    t.obj[..n].copy_from_slice(c);
    t.value = 0.0;
    for i in 0..m {
        let b = t.basis[i];
        let cb = if b < n { c[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                t.obj[j] -= cb * t.cells[i * width + j];
            }
            t.value += cb * t.rhs[i];
        }
    }
    for &b in &t.basis {
        t.obj[b] = 0.0;
    }
    if needs_phase_one {
        t.obj[aux] = 0.0;
    }
    if t.optimize() {
        LpOutcome::Optimal(t.value)
    } else {
        LpOutcome::Optimal(f64::INFINITY)
    }
}
