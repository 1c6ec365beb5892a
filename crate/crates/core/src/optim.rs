//! Derivative-free minimisation (Nelder–Mead simplex).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the spread of simplex values falls below
    /// `ftol * (|f_best| + |f_worst|) / 2 + f_abs`.
    pub ftol: f64,
    pub f_abs: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            ftol: 1e-10,
            f_abs: 1e-300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub f_start: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimises `f` from `x0`, building the initial simplex by moving each
/// coordinate by `steps[i]`. NaN values are treated as `+inf`, so
/// infeasible regions can be fenced off by returning infinity.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let f_start = eval(x0);
    if n == 0 {
        return Minimum {
            x: Vec::new(),
            f: f_start,
            f_start,
            iterations: 0,
            evaluations,
            converged: true,
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f_start));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let point = |c: &[f64], worst: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(worst).map(|(ci, wi)| ci + t * (ci - wi)).collect()
    };
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best.is_finite() && worst.is_finite() && (worst - best).abs() <= opts.ftol * (best.abs() + worst.abs()) / 2.0 + opts.f_abs {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let xr = point(&centroid, &simplex[n].0, REFLECT);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = point(&centroid, &simplex[n].0, EXPAND);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        // contraction: outside if the reflection improved on the worst point
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = point(&centroid, &simplex[n].0, REFLECT * CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = point(&centroid, &simplex[n].0, -CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&x_best) {
                *xi = bi + SHRINK * (*xi - bi);
            }
            *fx = eval(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f_best) = simplex.swap_remove(0);
    Minimum {
        x,
        f: f_best,
        f_start,
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let m = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5 * (x[2] - 0.25).powi(2),
            &[0.0, 0.0, 0.0],
            &[0.1, 0.1, 0.1],
            NelderMeadOptions {
                max_iter: 2000,
                ftol: 1e-14,
                f_abs: 1e-20,
            },
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4);
        assert!((m.x[1] + 2.0).abs() < 1e-4);
        assert!((m.x[2] - 0.25).abs() < 1e-4);
        assert!(m.f <= m.f_start);
    }

    #[test]
    fn rosenbrock() {
        let m = nelder_mead(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.5, 0.5],
            NelderMeadOptions {
                max_iter: 5000,
                ftol: 1e-15,
                f_abs: 1e-30,
            },
        );
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn respects_infinite_barrier() {
        let m = nelder_mead(
            |x| if x[0].abs() >= 1.0 { f64::INFINITY } else { (x[0] - 2.0).powi(2) },
            &[0.0],
            &[0.1],
            NelderMeadOptions::default(),
        );
        assert!(m.x[0] < 1.0 && m.x[0] > 0.9);
    }

    #[test]
    fn zero_dimensional() {
        let m = nelder_mead(|_| 4.0, &[], &[], NelderMeadOptions::default());
        assert_eq!(m.f, 4.0);
        assert!(m.converged);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let m = nelder_mead(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.5, 0.5],
            NelderMeadOptions {
                max_iter: 5,
                ..Default::default()
            },
        );
        assert!(!m.converged);
        assert_eq!(m.iterations, 5);
        assert!(m.f <= m.f_start);
    }
}
