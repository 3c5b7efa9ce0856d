//! Jacobi-preconditioned BiCGSTAB for shifted systems (d ≥ 2).

use crate::error::{Error, Result};
use crate::linmap::{dot, norm2, C64};

pub struct BicgstabOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn bicgstab(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    diag: &[C64],
    b: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<BicgstabOutcome> {
    let n = b.len();
    let zero = C64::new(0.0, 0.0);
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok(BicgstabOutcome {
            x: vec![zero; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let precond = |v: &[C64]| -> Vec<C64> { v.iter().zip(diag).map(|(a, d)| a / d).collect() };
    let mut x = vec![zero; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) =
        (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.norm() < 1e-300 {
            return Err(Error::Breakdown("BiCGSTAB rho vanished".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = precond(&p);
        v = apply(&ph);
        alpha = rho_new / dot(&r0, &v);
        let s: Vec<C64> = r.iter().zip(&v).map(|(a, b)| a - alpha * b).collect();
        if norm2(&s) / bn < tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Ok(BicgstabOutcome {
                x,
                iterations: it,
                residual: norm2(&s) / bn,
            });
        }
        let sh = precond(&s);
        let t = apply(&sh);
        let tt = dot(&t, &t);
        if tt.norm() == 0.0 {
            return Err(Error::Breakdown("BiCGSTAB t vanished".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        let res = norm2(&r) / bn;
        if !res.is_finite() {
            return Err(Error::Breakdown(format!(
                "BiCGSTAB diverged at iteration {it}"
            )));
        }
        if res < tol {
            return Ok(BicgstabOutcome {
                x,
                iterations: it,
                residual: res,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "BiCGSTAB",
        iters: max_iter,
        last: 0.0,
        residual: norm2(&r) / bn,
    })
}
