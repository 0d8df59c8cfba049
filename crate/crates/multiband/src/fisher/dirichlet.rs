//! Dirichlet kernel of the symmetric subcarrier grid and its first two
//! delay derivatives.
//!
//! For the index set `{-(N-1)/2, ..., (N-1)/2}`,
//! `gamma(dt) = sum_n cos(2π n f_s dt) = sin(π N f_s dt) / sin(π f_s dt)`.
//! `N` is accepted as a real number so the kernel stays smooth under the
//! optimizer's integer relaxation.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// `gamma` and its first two derivatives with respect to the delay
/// separation (units 1/ns and 1/ns²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletTriple {
    /// Kernel value `gamma`.
    pub value: f64,
    /// First derivative `gamma'` (1/ns).
    pub d1: f64,
    /// Second derivative `gamma''` (1/ns²).
    pub d2: f64,
}

/// Series/direct crossover: below this value of `N·|x|` the direct trig
/// quotient loses digits to cancellation while the series is exact to
/// machine precision.
const SERIES_THRESHOLD: f64 = 0.02;

/// Evaluate the kernel at delay separation `delta_ns` for a grid with `n_sub`
/// points spaced `spacing_ghz` apart.
///
/// The removable singularity at `f_s·dt = 0` (and, for integer `n_sub`, at
/// integer `f_s·dt`) is resolved by a series expansion; kernel zeros at
/// integer `N f_s dt` need no special handling.
pub fn dirichlet_gamma(n_sub: f64, spacing_ghz: f64, delta_ns: f64) -> Result<DirichletTriple> {
    if !(n_sub >= 2.0) {
        return Err(Error::InvalidInput(format!("Dirichlet kernel needs N >= 2, got {n_sub}")));
    }
    if !(spacing_ghz > 0.0) {
        return Err(Error::InvalidInput("Dirichlet kernel needs positive spacing".into()));
    }
    let k = PI * spacing_ghz; // d x / d dt
    let x = k * delta_ns;

    // Reduce to the nearest singular point of sin(x). Away from x = 0 the
    // reduction is only exact for integer N (the kernel is then pi-(anti)periodic).
    let m = (x / PI).round();
    let x_red = x - m * PI;
    let near_singularity = x_red.abs() * n_sub.max(1.0) < SERIES_THRESHOLD;

    if near_singularity && m == 0.0 {
        return Ok(series(n_sub, k, x));
    }
    if near_singularity && (n_sub - n_sub.round()).abs() < 1e-9 {
        // integer N: sin(N(x~ + m pi)) = (-1)^(N m) sin(N x~)
        let n_int = n_sub.round();
        let sign = if ((n_int + 1.0) * m).rem_euclid(2.0) == 0.0 { 1.0 } else { -1.0 };
        let t = series(n_sub, k, x_red);
        return Ok(DirichletTriple { value: sign * t.value, d1: sign * t.d1, d2: sign * t.d2 });
    }

    let (sx, cx) = x.sin_cos();
    let (sn, cn) = (n_sub * x).sin_cos();
    if sx == 0.0 {
        return Err(Error::NonFinite("dirichlet_gamma at a non-removable singularity"));
    }
    let value = sn / sx;
    let d1 = k * (n_sub * cn * sx - sn * cx) / (sx * sx);
    let d2 = k
        * k
        * (-(n_sub * n_sub - 1.0) * sn / sx - 2.0 * n_sub * cn * cx / (sx * sx)
            + 2.0 * sn * cx * cx / (sx * sx * sx));
    Ok(DirichletTriple { value, d1, d2 })
}

/// Maclaurin expansion around the removable singularity, accurate to a few
/// ulps for `N|x|` below the crossover threshold.
fn series(n: f64, k: f64, x: f64) -> DirichletTriple {
    let n2m1 = n * n - 1.0;
    let q4 = n2m1 * (3.0 * n * n - 7.0);
    let q6 = n2m1 * (3.0 * n.powi(4) - 18.0 * n * n + 31.0);
    let x2 = x * x;
    let x4 = x2 * x2;
    let value = n * (1.0 - n2m1 * x2 / 6.0 + q4 * x4 / 360.0 - q6 * x4 * x2 / 15120.0);
    let d1 = k * n * x * (-n2m1 / 3.0 + q4 * x2 / 90.0 - q6 * x4 / 2520.0);
    let d2 = k * k * n * (-n2m1 / 3.0 + q4 * x2 / 30.0 - q6 * x4 / 504.0);
    DirichletTriple { value, d1, d2 }
}
