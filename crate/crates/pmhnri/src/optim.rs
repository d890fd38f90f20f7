//! Small-dimension minimizers: Nelder-Mead simplex and damped Gauss-Newton.

/// Iteration cap shared by both drivers.
pub const MAX_ITER: usize = 10_000;
/// Stop when the relative objective change falls below this.
pub const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted iteration.
    pub history: Vec<f64>,
}

/// Nelder-Mead simplex descent from `x0` with initial edge lengths `step`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: &[f64], max_iter: usize, rel_tol: f64) -> Minimum {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for k in 0..n {
        let mut p = x0.to_vec();
        p[k] += if step[k] != 0.0 { step[k] } else { 1e-3 };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let mut history = Vec::new();
    let mut it = 0;
    let mut converged = false;
    let mut stall = 0;
    while it < max_iter {
        it += 1;
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
        pts = idx.iter().map(|&k| pts[k].clone()).collect();
        vals = idx.iter().map(|&k| vals[k]).collect();
        history.push(vals[0]);
        let spread = (vals[n] - vals[0]).abs();
        if spread <= rel_tol * vals[0].abs() || spread == 0.0 || vals[0] == 0.0 {
            stall += 1;
            if stall >= 2 * n.max(1) || vals[0] == 0.0 {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
        let mut cen = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in cen.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> { cen.iter().zip(&pts[n]).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(-0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(0.5);
            let v = eval(&x);
            (x, v)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        let best = pts[0].clone();
        for k in 1..=n {
            pts[k] = best.iter().zip(&pts[k]).map(|(b, p)| b + 0.5 * (p - b)).collect();
            vals[k] = eval(&pts[k]);
        }
    }
    let k = (0..=n).min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal)).unwrap();
    Minimum { x: pts[k].clone(), value: vals[k], iterations: it, converged, history }
}

/// Levenberg-Marquardt on `½‖r(x)‖²` with an analytic Jacobian
/// (`jac(x)[i][j] = ∂r_i/∂x_j`). Only steps that lower the objective are
/// accepted.
pub fn levenberg_marquardt<R, J>(res: R, jac: J, x0: &[f64], max_iter: usize, rel_tol: f64) -> Minimum
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> Vec<Vec<f64>>,
{
    let n = x0.len();
    let cost = |r: &[f64]| 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    let mut x = x0.to_vec();
    let mut r = res(&x);
    let mut c = cost(&r);
    let mut history = vec![c];
    let mut lambda = 1e-3;
    let mut it = 0;
    let mut converged = false;
    while it < max_iter {
        it += 1;
        if c == 0.0 {
            converged = true;
            break;
        }
        let j = jac(&x);
        let mut a = vec![vec![0.0; n]; n];
        let mut g = vec![0.0; n];
        for (row, ri) in j.iter().zip(&r) {
            for p in 0..n {
                g[p] += row[p] * ri;
                for q in 0..n {
                    a[p][q] += row[p] * row[q];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut m = a.clone();
            for p in 0..n {
                m[p][p] += lambda * a[p][p].max(1e-300);
            }
            let Some(d) = solve(m, g.iter().map(|v| -v).collect()) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let rn = res(&xn);
            let cn = cost(&rn);
            if cn.is_finite() && cn < c {
                let rel = (c - cn) / c;
                x = xn;
                r = rn;
                c = cn;
                history.push(c);
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if rel < rel_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction left: at a minimum to working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Minimum { x, value: c, iterations: it, converged, history }
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &[0.1, 0.1], MAX_ITER, REL_TOL);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lm_exponential_fit() {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * (-1.3 * t).exp()).collect();
        let r = |p: &[f64]| t.iter().zip(&y).map(|(t, y)| p[0] * (-p[1] * t).exp() - y).collect::<Vec<_>>();
        let j = |p: &[f64]| t.iter().map(|t| vec![(-p[1] * t).exp(), -p[0] * t * (-p[1] * t).exp()]).collect::<Vec<_>>();
        let m = levenberg_marquardt(r, j, &[1.0, 0.5], MAX_ITER, REL_TOL);
        assert!((m.x[0] - 2.0).abs() < 1e-9 && (m.x[1] - 1.3).abs() < 1e-9);
        assert!(m.history.windows(2).all(|w| w[1] < w[0]));
    }
}
