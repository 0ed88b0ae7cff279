//! Dense matrix functions: exponential by scaling and squaring with Padé
//! approximants, principal logarithm by inverse scaling and squaring.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

// Higham (2005) backward-error thresholds for Padé degrees 3, 5, 7, 9, 13.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Square roots are taken until `‖A − I‖₁` falls below this.
const LOG_SERIES_RADIUS: f64 = 0.25;
const LOG_QUADRATURE_NODES: usize = 10;
const MAX_SQRT: u32 = 60;

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn all_finite(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if !all_finite(a) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().lu().try_inverse().ok_or(Error::Singular)
}

fn solve(lhs: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    lhs.lu().solve(rhs).ok_or(Error::Singular)
}

/// Matrix exponential.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let norm = norm1(a);
    if norm == 0.0 {
        return Ok(ident);
    }

    let a2 = a * a;
    let (u, v, squarings) = if norm <= THETA_9 {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let a8 = &a6 * &a2;
        let powers = [&ident, &a2, &a4, &a6, &a8];
        let (b, terms): (&[f64], usize) = if norm <= THETA_3 {
            (&B3, 2)
        } else if norm <= THETA_5 {
            (&B5, 3)
        } else if norm <= THETA_7 {
            (&B7, 4)
        } else {
            (&B9, 5)
        };
        let mut odd = DMatrix::zeros(n, n);
        let mut even = DMatrix::zeros(n, n);
        for k in 0..terms {
            odd += powers[k] * b[2 * k + 1];
            even += powers[k] * b[2 * k];
        }
        (a * odd, even, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scale = 2f64.powi(-s);
        let a1 = a * scale;
        let a2 = &a2 * (scale * scale);
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let b = &B13;
        let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
        let u = &a1 * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
        let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
            + &a6 * b[6]
            + &a4 * b[4]
            + &a2 * b[2]
            + &ident * b[0];
        (u, v, s as u32)
    };

    let mut r = solve(&v - &u, &(&v + &u))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Principal square root by the product form of the Denman–Beavers iteration.
pub fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let mut m = a.clone();
    let mut y = a.clone();
    for _ in 0..100 {
        let m_inv = inverse(&m)?;
        let half = (&ident + &m_inv) * 0.5;
        y = &y * &half;
        m = (&ident * 2.0 + &m + &m_inv) * 0.25;
        if !all_finite(&m) {
            break;
        }
        if norm1(&(&m - &ident)) <= 1e-15 * (n as f64) {
            return Ok(y);
        }
    }
    Err(Error::NoRealLogarithm(
        "square-root iteration did not converge".into(),
    ))
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 1..=m {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

/// Checks that no eigenvalue lies on the closed negative real axis.
fn check_log_spectrum(a: &DMatrix<f64>) -> Result<()> {
    let scale = norm1(a).max(1.0);
    for ev in a.complex_eigenvalues().iter() {
        let modulus = ev.norm();
        if modulus <= 1e-13 * scale {
            return Err(Error::NoRealLogarithm("matrix is singular".into()));
        }
        if ev.re < 0.0 && ev.im.abs() <= 1e-12 * scale {
            return Err(Error::NoRealLogarithm(format!(
                "eigenvalue {:.6} lies on the negative real axis",
                ev.re
            )));
        }
    }
    Ok(())
}

/// Principal matrix logarithm.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    check_log_spectrum(a)?;
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);

    let mut r = a.clone();
    let mut roots = 0;
    while norm1(&(&r - &ident)) > LOG_SERIES_RADIUS {
        if roots == MAX_SQRT {
            return Err(Error::NoRealLogarithm(
                "too many square roots required".into(),
            ));
        }
        r = sqrtm(&r)?;
        roots += 1;
    }

    // log(I + X) = ∫₀¹ X (I + sX)⁻¹ ds, evaluated by Gauss–Legendre quadrature
    let x = &r - &ident;
    let mut log = DMatrix::zeros(n, n);
    for (node, weight) in gauss_legendre(LOG_QUADRATURE_NODES) {
        let denom = &ident + &x * node;
        log += solve(denom, &x)? * weight;
    }
    Ok(log * 2f64.powi(roots as i32))
}
