use std::cell::Cell;

use crate::error::{GpError, Result};
use crate::linalg::Matrix;
use crate::parallel;

thread_local! {
    static FPS_CALLS: Cell<usize> = const { Cell::new(0) };
}

/// How many times [`farthest_point_sampling`] has run on the current thread.
pub fn fps_call_count() -> usize {
    FPS_CALLS.with(|c| c.get())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy max-min selection of `m` rows of `x`.
///
/// Starts from row 0 and repeatedly adds the row farthest from everything
/// chosen so far; ties go to the lowest index. Returns indices in selection
/// order.
pub fn farthest_point_sampling(x: &Matrix, m: usize) -> Result<Vec<usize>> {
    FPS_CALLS.with(|c| c.set(c.get() + 1));
    let n = x.rows();
    if m > n {
        return Err(GpError::InvalidParameter(format!(
            "cannot select {m} inducing points from {n} rows"
        )));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut chosen = Vec::with_capacity(m);
    chosen.push(0);
    let first = x.row(0);
    let mut min_d = parallel::map_range(n, |i| sq_dist(x.row(i), first));
    min_d[0] = f64::NEG_INFINITY;

    while chosen.len() < m {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in min_d.iter().enumerate() {
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        chosen.push(best);
        let p = x.row(best);
        parallel::for_each_mut(&mut min_d, |i, d| {
            if *d != f64::NEG_INFINITY {
                *d = d.min(sq_dist(x.row(i), p));
            }
        });
        min_d[best] = f64::NEG_INFINITY;
    }
    Ok(chosen)
}
