//! 2×2 matrix exponentials for two-state chain propagators.

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

fn norm_inf(m: &Mat2) -> f64 {
    (m[0][0].abs() + m[0][1].abs()).max(m[1][0].abs() + m[1][1].abs())
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Matrix exponential of a real 2×2 matrix.
///
/// Uses the closed form `e^m [f(s) I + g(s) (M - m I)]` with `m` the half
/// trace and `±s` the half eigenvalue gap. When the gap is below
/// `1e-8 * ||M||` the closed form loses accuracy and the routine falls back to
/// scaling-and-squaring with a degree-6 Padé approximant.
pub fn mat_exp_2x2(m: &Mat2) -> Result<Mat2> {
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::numeric(0, "matrix exponential of non-finite matrix"));
    }
    let norm = norm_inf(m);
    if norm == 0.0 {
        return Ok(IDENTITY);
    }
    let half_trace = 0.5 * (m[0][0] + m[1][1]);
    let half_diff = 0.5 * (m[0][0] - m[1][1]);
    let disc = half_diff * half_diff + m[0][1] * m[1][0];
    let gap = 2.0 * disc.abs().sqrt();
    if gap < 1e-8 * norm {
        return Ok(pade_exp(m));
    }
    let (f, g) = if disc > 0.0 {
        let s = disc.sqrt();
        let hi = (half_trace + s).exp();
        let lo = (half_trace - s).exp();
        (0.5 * (hi + lo), 0.5 * (hi - lo) / s)
    } else {
        let w = (-disc).sqrt();
        let e = half_trace.exp();
        (e * w.cos(), e * w.sin() / w)
    };
    Ok([
        [f + g * (m[0][0] - half_trace), g * m[0][1]],
        [g * m[1][0], f + g * (m[1][1] - half_trace)],
    ])
}

const PADE6: [f64; 7] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

fn pade_exp(m: &Mat2) -> Mat2 {
    let norm = norm_inf(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings);
    let a = [
        [m[0][0] * scale, m[0][1] * scale],
        [m[1][0] * scale, m[1][1] * scale],
    ];
    let mut num = [[0.0; 2]; 2];
    let mut den = [[0.0; 2]; 2];
    let mut power = IDENTITY;
    for (k, &c) in PADE6.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..2 {
            for j in 0..2 {
                num[i][j] += c * power[i][j];
                den[i][j] += sign * c * power[i][j];
            }
        }
        power = mat_mul(&power, &a);
    }
    let det = den[0][0] * den[1][1] - den[0][1] * den[1][0];
    let inv = [
        [den[1][1] / det, -den[0][1] / det],
        [-den[1][0] / det, den[0][0] / det],
    ];
    let mut r = mat_mul(&inv, &num);
    for _ in 0..squarings {
        r = mat_mul(&r, &r);
    }
    r
}

/// `exp(M)` for a matrix with non-negative off-diagonal entries, returned
/// as `(log_scale, K)` with `exp(M) = e^{log_scale} K` and the entries of `K`
/// bounded by 1 in magnitude. Used by the forward filter to stay in the log
/// domain.
pub(crate) fn scaled_exp_metzler(m: &Mat2) -> (f64, Mat2) {
    debug_assert!(m[0][1] >= 0.0 && m[1][0] >= 0.0);
    let half_trace = 0.5 * (m[0][0] + m[1][1]);
    let half_diff = 0.5 * (m[0][0] - m[1][1]);
    let s = (half_diff * half_diff + m[0][1] * m[1][0]).sqrt();
    let f = 0.5 * (1.0 + (-2.0 * s).exp());
    let g = if s > 0.0 {
        -(-2.0 * s).exp_m1() / (2.0 * s)
    } else {
        1.0
    };
    (
        half_trace + s,
        [
            [f + g * (m[0][0] - half_trace), g * m[0][1]],
            [g * m[1][0], f + g * (m[1][1] - half_trace)],
        ],
    )
}
