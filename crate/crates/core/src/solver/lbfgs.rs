//! Limited-memory BFGS with simple bounds, handled by projection.
//!
//! Variables at an active bound are frozen for the quasi-Newton step; the
//! step is then projected back onto the box and accepted by an Armijo test
//! along the projected path.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    pub tol_grad: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    pub proj_grad: f64,
}

/// `max |x - P(x - g)|`, zero exactly at a first-order point of the boxed
/// problem. Written without the subtraction so it stays exact for large `x`.
pub(crate) fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| {
            if gi.is_nan() {
                f64::INFINITY
            } else if gi > 0.0 {
                gi.min(xi - l)
            } else {
                (-gi).min(h - xi)
            }
        })
        .fold(0.0, f64::max)
}

/// Largest change of any coordinate in one step. Angles and per-unit
/// magnitudes never need to move further than this at once.
const MAX_STEP: f64 = 1.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn minimize<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let project = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;
    let mut pg = projected_gradient_norm(&x, &g, lo, hi);

    while iterations < opts.max_iter {
        if !fx.is_finite() {
            break;
        }
        if pg <= opts.tol_grad {
            return LbfgsOutcome {
                x,
                f: fx,
                iterations,
                converged: true,
                proj_grad: pg,
            };
        }
        iterations += 1;

        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let masked = |v: &[f64]| -> Vec<f64> { v.iter().zip(&free).map(|(&a, &m)| if m { a } else { 0.0 }).collect() };

        let mut accepted = None;
        for attempt in 0..2 {
            let use_memory = attempt == 0 && !memory.is_empty();
            let mut d = masked(&g);
            if use_memory {
                let mut alpha = Vec::with_capacity(memory.len());
                for (s, y, rho) in memory.iter().rev() {
                    let a = rho * dot(&masked(s), &d);
                    let ym = masked(y);
                    for i in 0..n {
                        d[i] -= a * ym[i];
                    }
                    alpha.push(a);
                }
                let (s, y, _) = memory.back().unwrap();
                let (sm, ym) = (masked(s), masked(y));
                let yy = dot(&ym, &ym);
                let gamma = if yy > 0.0 { dot(&sm, &ym) / yy } else { 1.0 };
                let gamma = if gamma.is_finite() && gamma > 0.0 { gamma } else { 1.0 };
                for v in &mut d {
                    *v *= gamma;
                }
                for ((s, y, rho), a) in memory.iter().zip(alpha.iter().rev()) {
                    let b = rho * dot(&masked(y), &d);
                    let sm = masked(s);
                    for i in 0..n {
                        d[i] += (a - b) * sm[i];
                    }
                }
            }
            for v in &mut d {
                *v = -*v;
            }
            if use_memory && dot(&d, &g) >= 0.0 {
                continue;
            }
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut step = (MAX_STEP / dmax.max(1e-300)).min(1.0);
            for _ in 0..60 {
                let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                project(&mut xn);
                let dx: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &dx);
                if decrease >= 0.0 && dx.iter().all(|v| *v == 0.0) {
                    break;
                }
                let (fn_, gn) = f(&xn);
                if !fn_.is_finite() {
                    step *= 0.5;
                    continue;
                }
                // Near a minimizer the decrease drops below the rounding
                // noise of `f`; a step that leaves `f` unchanged to within
                // that noise but shrinks the projected gradient is kept.
                let flat = fn_ <= fx + 1e-14 * (1.0 + fx.abs()) && projected_gradient_norm(&xn, &gn, lo, hi) < pg;
                if fn_ <= fx + 1e-4 * decrease || flat {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
                step *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            memory.clear();
        }

        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
        pg = projected_gradient_norm(&x, &g, lo, hi);
    }
    let converged = pg <= opts.tol_grad && fx.is_finite();
    LbfgsOutcome {
        x,
        f: fx,
        iterations,
        converged,
        proj_grad: pg,
    }
}
