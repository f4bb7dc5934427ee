//! Reference solution of viscous Burgers with `u(0,x) = −sin πx`,
//! `u(t,±1) = 0`, from two independent methods that must agree.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Gauss–Hermite nodes used by the quadrature oracle.
pub const QUADRATURE_NODES: usize = 400;
/// Minimum number of finite-difference intervals per axis.
pub const FD_MIN_INTERVALS: usize = 4096;
/// Maximum allowed disagreement between the two oracles.
pub const ORACLE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ReferenceField {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    /// `u[[i, k]] = u(t[i], x[k])`
    pub u: Array2<f64>,
}

impl ReferenceField {
    /// CSV with header `t,x,u`, one row per grid point, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x,u")?;
        for (i, t) in self.t.iter().enumerate() {
            for (k, x) in self.x.iter().enumerate() {
                writeln!(out, "{t:.16e},{x:.16e},{:.16e}", self.u[[i, k]])?;
            }
        }
        Ok(())
    }
}

/// Gauss–Hermite nodes and log-weights for `∫ f(z) e^{−z²} dz`.
///
/// Roots are found by Newton iteration on the orthonormal Hermite
/// recurrence, which keeps the tiny outer weights accurate in a relative
/// sense.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Jacobi matrix eigenvalues seed a Newton polish on the orthonormal recurrence.
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = off;
        jac[(k, k - 1)] = off;
    }
    let mut seeds: Vec<f64> = jac.symmetric_eigenvalues().iter().copied().collect();
    seeds.sort_by(|a, b| b.total_cmp(a));
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut lw = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = seeds[i].abs();
        if n % 2 == 1 && i == n / 2 {
            z = 0.0;
        }
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        let l = 2f64.ln() - 2.0 * pp.abs().ln();
        lw[i] = l;
        lw[n - 1 - i] = l;
    }
    (x, lw)
}

/// Cole–Hopf solution by Gauss–Hermite quadrature:
///
/// ```text
/// u(t,x) = −∫ sin π(x−az) e^{−cos π(x−az)/(2πν)} e^{−z²} dz
///          / ∫ e^{−cos π(x−az)/(2πν)} e^{−z²} dz,     a = √(4νt)
/// ```
///
/// evaluated with a log-sum-exp shift. The exact kernel is periodic, so
/// the Dirichlet data at `x = ±1` hold by symmetry.
pub fn burgers_quadrature(nu: f64, t: &[f64], x: &[f64], nodes: usize) -> Array2<f64> {
    let (z, lw) = gauss_hermite(nodes);
    let k = 1.0 / (2.0 * PI * nu);
    let mut u = Array2::zeros((t.len(), x.len()));
    let mut e = vec![0.0; nodes];
    for (i, &ti) in t.iter().enumerate() {
        let a = (4.0 * nu * ti).sqrt();
        for (c, &xc) in x.iter().enumerate() {
            if ti == 0.0 {
                u[[i, c]] = -(PI * xc).sin();
                continue;
            }
            let mut m = f64::NEG_INFINITY;
            for q in 0..nodes {
                e[q] = lw[q] - k * (PI * (xc - a * z[q])).cos();
                m = m.max(e[q]);
            }
            let (mut num, mut den) = (0.0, 0.0);
            for q in 0..nodes {
                let w = (e[q] - m).exp();
                num += (PI * (xc - a * z[q])).sin() * w;
                den += w;
            }
            u[[i, c]] = -num / den;
        }
    }
    u
}

/// Crank–Nicolson in time, central differences in space (conservative flux
/// `u²/2`), one Newton solve per step. Returns the field every
/// `t_stride` steps and `x_stride` intervals, starting at `t = 0`,
/// `x = −1`.
pub fn crank_nicolson(
    nu: f64,
    t_end: f64,
    steps: usize,
    intervals: usize,
    t_stride: usize,
    x_stride: usize,
) -> Array2<f64> {
    let h = 2.0 / intervals as f64;
    let dt = t_end / steps as f64;
    let m = intervals - 1;
    let xs: Vec<f64> = (1..intervals).map(|i| -1.0 + i as f64 * h).collect();
    let mut u: Vec<f64> = xs.iter().map(|x| -(PI * x).sin()).collect();

    let nrows = steps / t_stride + 1;
    let ncols = intervals / x_stride + 1;
    let mut out = Array2::zeros((nrows, ncols));
    let record = |out: &mut Array2<f64>, row: usize, u: &[f64]| {
        for c in 1..ncols - 1 {
            out[[row, c]] = u[c * x_stride - 1];
        }
    };
    record(&mut out, 0, &u);

    let (cd, cv) = (1.0 / (4.0 * h), nu / (h * h));
    // F_i(u) = (u_{i+1}² − u_{i−1}²)/(4h) − ν (u_{i+1} − 2u_i + u_{i−1})/h²
    let flux = |u: &[f64], f: &mut [f64]| {
        for i in 0..m {
            let l = if i > 0 { u[i - 1] } else { 0.0 };
            let r = if i + 1 < m { u[i + 1] } else { 0.0 };
            f[i] = cd * (r * r - l * l) - cv * (r - 2.0 * u[i] + l);
        }
    };
    let (mut f_old, mut f_new) = (vec![0.0; m], vec![0.0; m]);
    let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut cp = vec![0.0; m];
    for n in 1..=steps {
        flux(&u, &mut f_old);
        let mut v = u.clone();
        for _ in 0..20 {
            flux(&v, &mut f_new);
            for i in 0..m {
                rhs[i] = -(v[i] - u[i] + 0.5 * dt * (f_new[i] + f_old[i]));
                let l = if i > 0 { v[i - 1] } else { 0.0 };
                let r = if i + 1 < m { v[i + 1] } else { 0.0 };
                lo[i] = 0.5 * dt * (-2.0 * cd * l - cv);
                di[i] = 1.0 + 0.5 * dt * 2.0 * cv;
                up[i] = 0.5 * dt * (2.0 * cd * r - cv);
            }
            // Thomas algorithm
            cp[0] = up[0] / di[0];
            rhs[0] /= di[0];
            for i in 1..m {
                let den = di[i] - lo[i] * cp[i - 1];
                cp[i] = up[i] / den;
                rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / den;
            }
            for i in (0..m - 1).rev() {
                rhs[i] -= cp[i] * rhs[i + 1];
            }
            let mut delta = 0.0f64;
            for i in 0..m {
                v[i] += rhs[i];
                delta = delta.max(rhs[i].abs());
            }
            if delta < 1e-14 {
                break;
            }
        }
        u = v;
        if n % t_stride == 0 {
            record(&mut out, n / t_stride, &u);
        }
    }
    out
}

fn uniform(g: &[f64]) -> bool {
    if g.len() < 2 {
        return false;
    }
    let h = (g[g.len() - 1] - g[0]) / (g.len() - 1) as f64;
    h > 0.0
        && g.iter()
            .enumerate()
            .all(|(i, &v)| (v - (g[0] + i as f64 * h)).abs() <= 1e-12 * (1.0 + v.abs()))
}

/// Smallest multiple of `base` that is at least `min`.
fn aligned(base: usize, min: usize) -> usize {
    min.div_ceil(base) * base
}

/// Both oracles on an output grid. `t` must be uniform starting at 0 and
/// `x` uniform on `[−1, 1]`, so the finite-difference grid can contain
/// every output point.
pub fn reference_pair(nu: f64, t: &[f64], x: &[f64]) -> Result<(Array2<f64>, Array2<f64>)> {
    if !uniform(t) || t[0] != 0.0 || t[t.len() - 1] > 1.0 {
        return Err(Error::InvalidConfig("time grid must be uniform on [0, T], T ≤ 1".into()));
    }
    if !uniform(x) || x[0] != -1.0 || x[x.len() - 1] != 1.0 {
        return Err(Error::InvalidConfig("space grid must be uniform on [-1, 1]".into()));
    }
    let quad = burgers_quadrature(nu, t, x, QUADRATURE_NODES);
    let steps = aligned(t.len() - 1, FD_MIN_INTERVALS);
    let intervals = aligned(x.len() - 1, FD_MIN_INTERVALS);
    let fd = crank_nicolson(
        nu,
        t[t.len() - 1],
        steps,
        intervals,
        steps / (t.len() - 1),
        intervals / (x.len() - 1),
    );
    Ok((quad, fd))
}

/// Reference field on a `(t, x)` grid: the quadrature values, after
/// checking them against the finite-difference solve.
pub fn burgers_reference(t: &[f64], x: &[f64]) -> Result<ReferenceField> {
    let nu = 0.01 / PI;
    let (quad, fd) = reference_pair(nu, t, x)?;
    let max_diff = quad
        .iter()
        .zip(fd.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if !(max_diff < ORACLE_TOLERANCE) {
        return Err(Error::ReferenceInconsistency { max_diff });
    }
    Ok(ReferenceField {
        t: t.to_vec(),
        x: x.to_vec(),
        u: quad,
    })
}
