//! Exhaustive vertex enumeration for small LPs.

use qap_exact::lp::{LinearProgram, LpStatus};

/// Large enough to exceed every vertex coordinate the generated data can
/// produce, so an optimum that moves with the box comes from a ray.
const BOX: [f64; 2] = [1e5, 2e5];

/// Rows `a·x ≤ b`, with equalities split into two rows.
fn inequality_rows(lp: &LinearProgram, big: f64) -> (Vec<(Vec<f64>, f64)>, usize) {
    let n = lp.num_vars;
    let mut rows = Vec::new();
    for (a, b) in &lp.eq_constraints {
        rows.push((a.clone(), *b));
    }
    let eq = rows.len();
    rows.extend(lp.ineq_constraints.iter().cloned());
    for (j, bd) in lp.bounds.iter().enumerate() {
        let unit = |s: f64| (0..n).map(|k| if k == j { s } else { 0.0 }).collect::<Vec<_>>();
        rows.push((unit(-1.0), -bd.lower.unwrap_or(-big)));
        rows.push((unit(1.0), bd.upper.unwrap_or(big)));
    }
    (rows, eq)
}

fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-9 {
            return None;
        }
        m.swap(c, p);
        rhs.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                rhs[r] -= f * rhs[c];
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

fn subsets(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::new(), f);
}

/// Minimum over all vertices of the boxed polytope, `None` when empty.
fn boxed_optimum(lp: &LinearProgram, big: f64) -> Option<f64> {
    let n = lp.num_vars;
    let (rows, eq) = inequality_rows(lp, big);
    let mut best: Option<f64> = None;
    // Equalities hold everywhere, so any `n` independent rows define a vertex.
    subsets(rows.len(), n, &mut |active| {
        let m = active.iter().map(|&r| rows[r].0.clone()).collect();
        let rhs = active.iter().map(|&r| rows[r].1).collect();
        let Some(x) = solve_square(m, rhs) else { return };
        let dot = |a: &[f64]| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>();
        let feasible = rows.iter().enumerate().all(|(r, (a, b))| {
            let v = dot(a) - b;
            if r < eq {
                v.abs() <= 1e-7
            } else {
                v <= 1e-7
            }
        });
        if feasible {
            let obj = dot(&lp.objective);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    });
    best
}

pub fn vertex_oracle(lp: &LinearProgram) -> (LpStatus, Option<f64>) {
    match (boxed_optimum(lp, BOX[0]), boxed_optimum(lp, BOX[1])) {
        (None, _) => (LpStatus::Infeasible, None),
        (Some(a), Some(b)) if (a - b).abs() <= 1e-6 * (1.0 + a.abs()) => (LpStatus::Optimal, Some(a)),
        _ => (LpStatus::Unbounded, None),
    }
}
