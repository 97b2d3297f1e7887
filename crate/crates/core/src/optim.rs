//! Derivative-free local minimization (Nelder–Mead with dimension-adaptive
//! coefficients).

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop once `f(worst) − f(best) < ftol` across the simplex.
    pub ftol: f64,
    /// Edge length of the initial simplex.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_iter: 200, ftol: 1e-9, step: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
}

/// Minimizes `f` from `x0`.
///
/// Coefficients follow Gao & Han's adaptive scheme (reflection 1,
/// expansion `1 + 2/n`, contraction `3/4 − 1/(2n)`, shrink `1 − 1/n`), which
/// behaves better than the classic constants beyond a handful of dimensions.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.step;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut iters = 0;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    while iters < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[n].1 - simplex[0].1 < opts.ftol {
            break;
        }
        iters += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let along = |coef: f64, worst: &[f64], out: &mut Vec<f64>| {
            for i in 0..n {
                out[i] = centroid[i] + coef * (centroid[i] - worst[i]);
            }
        };

        let worst = simplex[n].0.clone();
        let f_best = simplex[0].1;
        let f_second_worst = simplex[n - 1].1;
        let f_worst = simplex[n].1;

        along(alpha, &worst, &mut trial);
        let f_reflect = eval(&trial, &mut evals);

        if f_reflect < f_best {
            let reflected = trial.clone();
            along(alpha * gamma, &worst, &mut trial);
            let f_expand = eval(&trial, &mut evals);
            simplex[n] = if f_expand < f_reflect {
                (trial.clone(), f_expand)
            } else {
                (reflected, f_reflect)
            };
            continue;
        }
        if f_reflect < f_second_worst {
            simplex[n] = (trial.clone(), f_reflect);
            continue;
        }
        let (coef, target) = if f_reflect < f_worst {
            (alpha * rho, f_reflect)
        } else {
            (-rho, f_worst)
        };
        along(coef, &worst, &mut trial);
        let f_contract = eval(&trial, &mut evals);
        if f_contract <= target {
            simplex[n] = (trial.clone(), f_contract);
            continue;
        }

        let best = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&best) {
                *xi = bi + sigma * (*xi - bi);
            }
            *fx = eval(x, &mut evals);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Minimum { x, f, iters, evals }
}
