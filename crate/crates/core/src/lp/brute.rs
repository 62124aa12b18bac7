use super::{LpProblem, LpSolution, LpStatus};
use crate::error::{Error, Result};

const MAX_DIM: usize = 6;
const MAX_CONSTRAINTS: usize = 16;
const FEAS_TOL: f64 = 1e-9;
/// Half-width of the auxiliary box that gives lineality spaces a vertex.
const FAR: f64 = 1e7;

struct Halfspace {
    normal: Vec<f64>,
    rhs: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; `None` for (near-)singular systems.
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-11 * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let (done, rest) = m.split_at_mut(col + 1);
        let prow = &done[col];
        for (off, row) in rest.iter_mut().enumerate() {
            let f = row[col] / prow[col];
            if f != 0.0 {
                for (v, p) in row[col..].iter_mut().zip(&prow[col..]) {
                    *v -= f * p;
                }
                rhs[col + 1 + off] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - tail) / m[r][r];
    }
    Some(x)
}

/// Calls `visit` with every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Best vertex of `{z : h.normal z <= h.rhs}` under `objective`, if any vertex
/// is feasible.
fn best_vertex(halfspaces: &[Halfspace], objective: &[f64]) -> Option<(Vec<f64>, f64)> {
    let d = objective.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for_each_subset(halfspaces.len(), d, |active| {
        let m = active
            .iter()
            .map(|&i| halfspaces[i].normal.clone())
            .collect();
        let rhs = active.iter().map(|&i| halfspaces[i].rhs).collect();
        let Some(z) = solve_square(m, rhs) else {
            return;
        };
        let feasible = halfspaces
            .iter()
            .all(|h| dot(&h.normal, &z) <= h.rhs + FEAS_TOL * (1.0 + h.rhs.abs()));
        if !feasible {
            return;
        }
        let value = dot(objective, &z);
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((z, value));
        }
    });
    best
}

/// Vertex-enumeration reference solver.
///
/// Every choice of `d` active constraints among the rows and finite bounds
/// (plus a far-away box, so problems without vertices still have one) is
/// solved and filtered for feasibility. Unboundedness is decided separately
/// from the recession cone `{dir : A dir <= 0}` intersected with the unit box:
/// the problem is unbounded iff some feasible direction improves the
/// objective.
pub fn lp_brute_force(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let d = p.dim();
    let finite_bounds: usize = p.bounds.iter().map(|b| b.finite_count()).sum();
    if d > MAX_DIM {
        return Err(Error::Capacity(format!(
            "{d} variables, at most {MAX_DIM} supported"
        )));
    }
    if p.rows.len() + finite_bounds > MAX_CONSTRAINTS {
        return Err(Error::Capacity(format!(
            "{} constraints, at most {MAX_CONSTRAINTS} supported",
            p.rows.len() + finite_bounds
        )));
    }

    let unit = |j: usize, sign: f64| {
        let mut v = vec![0.0; d];
        v[j] = sign;
        v
    };
    let mut constraints: Vec<Halfspace> = p
        .rows
        .iter()
        .zip(&p.rhs)
        .map(|(row, b)| Halfspace {
            normal: row.clone(),
            rhs: *b,
        })
        .collect();
    for (j, b) in p.bounds.iter().enumerate() {
        if b.hi.is_finite() {
            constraints.push(Halfspace {
                normal: unit(j, 1.0),
                rhs: b.hi,
            });
        }
        if b.lo.is_finite() {
            constraints.push(Halfspace {
                normal: unit(j, -1.0),
                rhs: -b.lo,
            });
        }
    }

    let recession: Vec<Halfspace> = constraints
        .iter()
        .map(|h| Halfspace {
            normal: h.normal.clone(),
            rhs: 0.0,
        })
        .chain((0..d).flat_map(|j| {
            [
                Halfspace {
                    normal: unit(j, 1.0),
                    rhs: 1.0,
                },
                Halfspace {
                    normal: unit(j, -1.0),
                    rhs: 1.0,
                },
            ]
        }))
        .collect();

    for j in 0..d {
        constraints.push(Halfspace {
            normal: unit(j, 1.0),
            rhs: FAR,
        });
        constraints.push(Halfspace {
            normal: unit(j, -1.0),
            rhs: FAR,
        });
    }

    let Some((z, value)) = best_vertex(&constraints, &p.objective) else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, d));
    };
    let (_, ascent) =
        best_vertex(&recession, &p.objective).expect("the origin is a feasible direction");
    if ascent > FEAS_TOL {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, d));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        z,
        objective_value: value,
    })
}
