use super::{LpProblem, LpSolution, LpStatus};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;

/// How an original variable is rewritten over nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `z = offset + y`
    Shifted { col: usize, offset: f64 },
    /// `z = offset - y`
    Mirrored { col: usize, offset: f64 },
    /// `z = y_pos - y_neg`
    Split { pos: usize, neg: usize },
}

impl VarMap {
    fn offset(self) -> f64 {
        match self {
            VarMap::Shifted { offset, .. } | VarMap::Mirrored { offset, .. } => offset,
            VarMap::Split { .. } => 0.0,
        }
    }

    /// Adds `coef * z` (minus its constant part) into a row over the columns.
    fn scatter(self, coef: f64, row: &mut [f64]) {
        match self {
            VarMap::Shifted { col, .. } => row[col] += coef,
            VarMap::Mirrored { col, .. } => row[col] -= coef,
            VarMap::Split { pos, neg } => {
                row[pos] += coef;
                row[neg] -= coef;
            }
        }
    }

    fn recover(self, y: &[f64]) -> f64 {
        match self {
            VarMap::Shifted { col, offset } => offset + y[col],
            VarMap::Mirrored { col, offset } => offset - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        }
    }
}

/// Dense tableau for `maximize c.y, M y + s = rhs, y, s >= 0` with optional
/// artificial columns for rows whose right-hand side was negative.
struct Tableau {
    rows: usize,
    width: usize,
    /// Row-major `rows x (width + 1)`; the last entry of each row is its rhs.
    a: Vec<f64>,
    /// Reduced costs with `-objective` in the last slot.
    obj: Vec<f64>,
    basis: Vec<usize>,
    first_artificial: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.width + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width)
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let stride = self.width + 1;
        self.obj.clear();
        self.obj.extend_from_slice(costs);
        self.obj.push(0.0);
        for r in 0..self.rows {
            let cb = costs[self.basis[r]];
            if cb != 0.0 {
                let row = &self.a[r * stride..(r + 1) * stride];
                for (o, v) in self.obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
    }

    fn objective(&self) -> f64 {
        -self.obj[self.width]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.width + 1;
        let inv = 1.0 / self.at(pr, pc);
        let (before, rest) = self.a.split_at_mut(pr * stride);
        let (prow, after) = rest.split_at_mut(stride);
        prow.iter_mut().for_each(|v| *v *= inv);
        prow[pc] = 1.0;
        for row in before
            .chunks_exact_mut(stride)
            .chain(after.chunks_exact_mut(stride))
        {
            let f = row[pc];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            self.obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Bland's rule: lowest-index improving column enters, ties in the ratio
    /// test go to the lowest-index basic variable.
    fn run(&mut self, allow: usize) -> Result<Outcome> {
        let limit = 1000 + 200 * (self.width + self.rows);
        for _ in 0..limit {
            let Some(enter) = (0..allow).find(|&j| self.obj[j] > COST_TOL) else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let coef = self.at(r, enter);
                if coef <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / coef;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                        if (tie && self.basis[r] < self.basis[best]) || (!tie && ratio < best_ratio)
                        {
                            Some((r, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return Ok(Outcome::Unbounded),
            }
        }
        Err(Error::Numerical("simplex exceeded its pivot budget".into()))
    }
}

pub fn lp_solve(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let d = p.dim();

    let mut maps = Vec::with_capacity(d);
    let mut ncols = 0;
    let mut range_rows = Vec::new();
    for b in &p.bounds {
        if b.lo.is_finite() {
            maps.push(VarMap::Shifted {
                col: ncols,
                offset: b.lo,
            });
            if b.hi.is_finite() {
                range_rows.push((ncols, b.hi - b.lo));
            }
            ncols += 1;
        } else if b.hi.is_finite() {
            maps.push(VarMap::Mirrored {
                col: ncols,
                offset: b.hi,
            });
            ncols += 1;
        } else {
            maps.push(VarMap::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            ncols += 2;
        }
    }

    let m = p.rows.len() + range_rows.len();
    let mut std_rows = vec![0.0; m * ncols];
    let mut std_rhs = Vec::with_capacity(m);
    for (i, (row, b)) in p.rows.iter().zip(&p.rhs).enumerate() {
        let dst = &mut std_rows[i * ncols..(i + 1) * ncols];
        let mut rhs = *b;
        for (coef, map) in row.iter().zip(&maps) {
            map.scatter(*coef, dst);
            rhs -= coef * map.offset();
        }
        std_rhs.push(rhs);
    }
    for (k, (col, width)) in range_rows.iter().enumerate() {
        std_rows[(p.rows.len() + k) * ncols + col] = 1.0;
        std_rhs.push(*width);
    }

    let n_art = std_rhs.iter().filter(|b| **b < 0.0).count();
    let first_artificial = ncols + m;
    let width = first_artificial + n_art;
    let stride = width + 1;
    let mut a = vec![0.0; m * stride];
    let mut basis = Vec::with_capacity(m);
    let mut next_art = first_artificial;
    for r in 0..m {
        let row = &mut a[r * stride..(r + 1) * stride];
        let src = &std_rows[r * ncols..(r + 1) * ncols];
        if std_rhs[r] < 0.0 {
            for (dst, v) in row.iter_mut().zip(src) {
                *dst = -v;
            }
            row[ncols + r] = -1.0;
            row[next_art] = 1.0;
            row[width] = -std_rhs[r];
            basis.push(next_art);
            next_art += 1;
        } else {
            row[..ncols].copy_from_slice(src);
            row[ncols + r] = 1.0;
            row[width] = std_rhs[r];
            basis.push(ncols + r);
        }
    }

    let mut t = Tableau {
        rows: m,
        width,
        a,
        obj: Vec::with_capacity(stride),
        basis,
        first_artificial,
    };

    if n_art > 0 {
        let mut costs = vec![0.0; width];
        costs[first_artificial..].iter_mut().for_each(|c| *c = -1.0);
        t.set_costs(&costs);
        t.run(width)?;
        let scale = 1.0 + std_rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
        if t.objective() < -FEAS_TOL * scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, d));
        }
        for r in 0..m {
            if t.basis[r] >= t.first_artificial {
                if let Some(c) = (0..t.first_artificial).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                    t.pivot(r, c);
                }
            }
        }
    }

    let mut costs = vec![0.0; width];
    for (coef, map) in p.objective.iter().zip(&maps) {
        map.scatter(*coef, &mut costs);
    }
    t.set_costs(&costs);
    if let Outcome::Unbounded = t.run(first_artificial)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, d));
    }

    let mut y = vec![0.0; ncols];
    for r in 0..m {
        if t.basis[r] < ncols {
            y[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let z: Vec<f64> = maps
        .iter()
        .zip(&p.bounds)
        .map(|(map, b)| map.recover(&y).clamp(b.lo, b.hi))
        .collect();
    let objective_value = p.objective_at(&z);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        z,
        objective_value,
    })
}
