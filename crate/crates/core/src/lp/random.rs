use rand::Rng;

use super::{LpProblem, VarBound};

fn half_steps<R: Rng + ?Sized>(rng: &mut R, lo: i32, hi: i32) -> f64 {
    rng.random_range(2 * lo..=2 * hi) as f64 * 0.5
}

/// Random instance with at most 5 variables and 8 rows, mixing free, one-sided
/// and boxed variables. Coefficients sit on a half-integer grid so degenerate
/// vertices and parallel rows come up regularly.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> LpProblem {
    let d = rng.random_range(1..=5usize);
    let r = rng.random_range(0..=8usize);
    let objective = (0..d).map(|_| half_steps(rng, -3, 3)).collect();
    let mut p = LpProblem::maximize(objective);
    for _ in 0..r {
        let row = (0..d).map(|_| half_steps(rng, -3, 3)).collect();
        p = p.with_row(row, half_steps(rng, -2, 6));
    }
    let mut budget = 16 - r;
    for j in 0..d {
        let lo = half_steps(rng, -3, 1);
        let width = half_steps(rng, 0, 4);
        let choice = rng.random_range(0..5u8);
        let bound = match choice {
            0 => VarBound::FREE,
            1 => VarBound::nonnegative(),
            2 => VarBound::at_least(lo),
            3 => VarBound::at_most(lo + width),
            _ => VarBound::between(lo, lo + width),
        };
        if bound.finite_count() <= budget {
            budget -= bound.finite_count();
            p.bounds[j] = bound;
        }
    }
    p
}
