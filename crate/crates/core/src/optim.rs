//! Derivative-free minimization by the Nelder-Mead simplex method with
//! dimension-adaptive coefficients (Gao and Han).

/// Stopping rules for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evaluations: usize,
    /// Converged when the spread of objective values across the simplex is
    /// at most `relative_tolerance · max(1, |f_best|)`...
    pub relative_tolerance: f64,
    /// ...and the simplex fits in a box of this half-width.
    pub step_tolerance: f64,
    /// Initial edge length along each coordinate.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_evaluations: 2000,
            relative_tolerance: 1e-6,
            step_tolerance: 1e-3,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as
/// `+∞`, so infeasible regions simply repel the simplex. After the first
/// convergence the simplex is rebuilt once around the best point and the
/// search resumed, which guards against collapse onto a non-stationary
/// point.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> Minimum {
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut best_x = x0.to_vec();
    let mut best_v = eval(&best_x, &mut evaluations);
    let (x, v, mut converged) = run(&mut eval, &best_x, best_v, opts.initial_step, opts, &mut evaluations);
    if v <= best_v {
        best_x = x;
        best_v = v;
    }
    if converged {
        let (x, v, ok) = run(&mut eval, &best_x, best_v, 0.2 * opts.initial_step, opts, &mut evaluations);
        if v <= best_v {
            best_x = x;
            best_v = v;
        }
        converged = ok;
    }
    Minimum {
        x: best_x,
        value: best_v,
        evaluations,
        converged: converged && best_v.is_finite(),
    }
}

fn run<E: FnMut(&[f64], &mut usize) -> f64>(
    eval: &mut E,
    x0: &[f64],
    f0: f64,
    step: f64,
    opts: &SimplexOptions,
    evaluations: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    if n == 0 {
        return (Vec::new(), f0, true);
    }
    let nf = n as f64;
    let (reflect, expand) = (1.0, 1.0 + 2.0 / nf);
    let contract = 0.75 - 1.0 / (2.0 * nf);
    let shrink = 1.0 - 1.0 / nf;

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, evaluations);
        simplex.push((x, v));
    }

    let point = |centroid: &[f64], worst: &[f64], t: f64| -> Vec<f64> {
        centroid
            .iter()
            .zip(worst)
            .map(|(c, w)| c + t * (c - w))
            .collect()
    };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if best.is_finite()
            && worst - best <= opts.relative_tolerance * best.abs().max(1.0)
            && diameter <= opts.step_tolerance
        {
            return (simplex[0].0.clone(), best, true);
        }
        if *evaluations >= opts.max_evaluations {
            return (simplex[0].0.clone(), best, false);
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let xw = simplex[n].0.clone();
        let xr = point(&centroid, &xw, reflect);
        let fr = eval(&xr, evaluations);
        if fr < best {
            let xe = point(&centroid, &xw, expand);
            let fe = eval(&xe, evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = point(&centroid, &xw, contract);
            let fc = eval(&xc, evaluations);
            (xc, fc)
        } else {
            let xc = point(&centroid, &xw, -contract);
            let fc = eval(&xc, evaluations);
            (xc, fc)
        };
        if fc < worst.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&x_best) {
                *xi = bi + shrink * (*xi - bi);
            }
            *v = eval(x, evaluations);
        }
    }
}
