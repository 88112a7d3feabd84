//! Nelder–Mead downhill simplex on an unconstrained domain.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iter: usize,
    /// Stop when `f_worst − f_best ≤ rel_tol·|f_best| + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            rel_tol: 1e-10,
            abs_tol: 1e-30,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as +∞.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult {
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let d = x0.len();
    if d == 0 {
        let v = eval(x0);
        return SimplexResult {
            x: Vec::new(),
            f: v,
            n_iter: 0,
            converged: true,
            trace: vec![v],
        };
    }

    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut n_iter = 0;

    while n_iter < opts.max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let (best, worst) = (vals[0], vals[d]);
        if worst - best <= opts.rel_tol * best.abs() + opts.abs_tol {
            converged = true;
            break;
        }
        n_iter += 1;

        let mut centroid = vec![0.0; d];
        for p in &pts[..d] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / d as f64;
            }
        }

        let xr = lerp(&centroid, &pts[d], -REFLECT);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = lerp(&centroid, &pts[d], -EXPAND);
            let fe = eval(&xe);
            if fe < fr {
                pts[d] = xe;
                vals[d] = fe;
            } else {
                pts[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            pts[d] = xr;
            vals[d] = fr;
        } else {
            // Outside contraction when the reflection helped at all.
            let xc = if fr < vals[d] {
                lerp(&centroid, &xr, CONTRACT)
            } else {
                lerp(&centroid, &pts[d], CONTRACT)
            };
            let fc = eval(&xc);
            if fc < vals[d].min(fr) {
                pts[d] = xc;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    pts[i] = lerp(&pts[0], &pts[i], SHRINK);
                    vals[i] = eval(&pts[i]);
                }
            }
        }
        trace.push(vals.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let best = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    SimplexResult {
        x: pts[best].clone(),
        f: vals[best],
        n_iter,
        converged,
        trace,
    }
}
