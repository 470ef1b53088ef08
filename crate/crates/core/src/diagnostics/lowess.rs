use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowessOptions {
    pub span: f64,
    pub robustness_iterations: usize,
}

impl Default for LowessOptions {
    fn default() -> Self {
        LowessOptions {
            span: 2.0 / 3.0,
            robustness_iterations: 3,
        }
    }
}

/// Cleveland's robust locally weighted linear regression with the given
/// span and the default three robustness iterations. Returns `(x, ŷ)`
/// sorted by `x`.
pub fn lowess(x: &[f64], y: &[f64], span: f64) -> Result<Vec<(f64, f64)>> {
    lowess_with(
        x,
        y,
        LowessOptions {
            span,
            ..LowessOptions::default()
        },
    )
}

pub fn lowess_with(x: &[f64], y: &[f64], opts: LowessOptions) -> Result<Vec<(f64, f64)>> {
    if x.len() != y.len() {
        return Err(Error::validation("lowess: x and y lengths differ"));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::validation("lowess needs at least 3 points"));
    }
    if !(opts.span > 0.0 && opts.span <= 1.0) {
        return Err(Error::validation(format!(
            "lowess span {} outside (0, 1]",
            opts.span
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::validation("lowess inputs must be finite"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    if xs[0] == xs[n - 1] {
        return Err(Error::validation("lowess: all x values are equal"));
    }

    let r = ((opts.span * n as f64).ceil() as usize).clamp(2, n);
    let mut robustness = vec![1.0; n];
    let mut fitted = vec![0.0; n];
    for iteration in 0..=opts.robustness_iterations {
        for i in 0..n {
            fitted[i] = local_fit(&xs, &ys, &robustness, i, r);
        }
        if iteration == opts.robustness_iterations {
            break;
        }
        let mut abs_res: Vec<f64> = (0..n).map(|i| (ys[i] - fitted[i]).abs()).collect();
        let mut sorted = abs_res.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let scale = 6.0 * median;
        if scale <= 1e-12 * sorted[n - 1].max(1.0) {
            break;
        }
        for (w, e) in robustness.iter_mut().zip(abs_res.iter_mut()) {
            let u = *e / scale;
            *w = if u < 1.0 { (1.0 - u * u).powi(2) } else { 0.0 };
        }
    }
    Ok(xs.into_iter().zip(fitted).collect())
}

/// Weighted local linear fit at `xs[i]` over its `r` nearest neighbours.
fn local_fit(xs: &[f64], ys: &[f64], robustness: &[f64], i: usize, r: usize) -> f64 {
    let n = xs.len();
    let x0 = xs[i];
    // Slide a window of r consecutive points so that it holds the r nearest.
    let mut lo = i.saturating_sub(r - 1).min(n - r);
    while lo + r < n && x0 - xs[lo] > xs[lo + r] - x0 {
        lo += 1;
    }
    let hi = lo + r;
    let h = (x0 - xs[lo]).max(xs[hi - 1] - x0);
    let h = if h > 0.0 { h * 1.000_000_1 } else { 1.0 };

    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    let mut weights = Vec::with_capacity(r);
    for j in lo..hi {
        let u = (xs[j] - x0).abs() / h;
        let tri = if u < 1.0 { (1.0 - u * u * u).powi(3) } else { 0.0 };
        let w = tri * robustness[j];
        weights.push(w);
        sw += w;
        sx += w * xs[j];
        sy += w * ys[j];
    }
    if sw <= 0.0 {
        return ys[i];
    }
    let xbar = sx / sw;
    let ybar = sy / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (k, j) in (lo..hi).enumerate() {
        let dx = xs[j] - xbar;
        sxx += weights[k] * dx * dx;
        sxy += weights[k] * dx * (ys[j] - ybar);
    }
    let range = xs[n - 1] - xs[0];
    if sxx.sqrt() > 1e-7 * range * sw.sqrt() {
        ybar + sxy / sxx * (x0 - xbar)
    } else {
        ybar
    }
}
