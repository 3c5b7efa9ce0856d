//! Chebyshev expansions of e^{−itz} and smooth f(z) on a real enclosure.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Hamiltonian;
use crate::linmap::{check_len, norm2, LinearMap, C64, I};

/// p(z) = Σ c_k T_k((z − center)/half_width), truncated so that Σ_{dropped}|c_k| ≤ truncation_tol.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChebyshevPlan {
    pub center: f64,
    pub half_width: f64,
    pub coeffs: Vec<C64>,
    pub truncation_tol: f64,
}

/// Slack added to the Gershgorin half-width.
const ENCLOSURE_SLACK: f64 = 1e-3;

/// (center, half-width) of an interval containing the spectrum of a hermitian H.
pub fn enclosure(h: &Hamiltonian) -> (f64, f64) {
    let (lo, hi) = h.real_enclosure();
    let c = 0.5 * (lo + hi);
    let r = (0.5 * (hi - lo)).max(1e-12) * (1.0 + ENCLOSURE_SLACK);
    (c, r)
}

/// J_0(x), …, J_kmax(x) by Miller's backward recurrence.
pub fn bessel_j(x: f64, kmax: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut v = vec![0.0; kmax + 1];
        v[0] = 1.0;
        return v;
    }
    let start = (kmax + 40).max((x + 40.0 + 10.0 * x.cbrt()) as usize) | 1;
    let mut j = vec![0.0f64; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    j.truncate(kmax + 1);
    j.iter_mut().for_each(|v| *v /= norm);
    j
}

fn truncate(coeffs: &mut Vec<C64>, tol: f64) {
    let mut tail = 0.0;
    let mut keep = coeffs.len();
    while keep > 1 {
        let next = tail + coeffs[keep - 1].norm();
        if next > tol {
            break;
        }
        tail = next;
        keep -= 1;
    }
    coeffs.truncate(keep);
}

impl ChebyshevPlan {
    /// Coefficients of e^{−itz}: c_k = (2 − δ_k0)(−i)^k J_k(rt) e^{−ict}.
    pub fn propagator(center: f64, half_width: f64, t: f64, tol: f64) -> Result<Self> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Invalid(format!(
                "t = {t} must be finite and non-negative"
            )));
        }
        check_tol(tol)?;
        let x = half_width * t;
        let kmax = (x + 30.0 + 15.0 * x.cbrt()).ceil() as usize;
        let j = bessel_j(x, kmax);
        let phase = C64::from_polar(1.0, -center * t);
        let mut coeffs: Vec<C64> = j
            .iter()
            .enumerate()
            .map(|(k, jk)| {
                let w = if k == 0 { 1.0 } else { 2.0 };
                w * (-I).powu(k as u32) * jk * phase
            })
            .collect();
        if coeffs.iter().rev().take(4).map(|c| c.norm()).sum::<f64>() > tol {
            return Err(Error::Resolution {
                tail: coeffs.iter().rev().take(4).map(|c| c.norm()).sum(),
            });
        }
        truncate(&mut coeffs, tol);
        Ok(ChebyshevPlan {
            center,
            half_width,
            coeffs,
            truncation_tol: tol,
        })
    }

    /// Interpolates a real function at M Chebyshev nodes, doubling M until the
    /// upper half of the coefficients falls below `tol`.
    pub fn function(
        center: f64,
        half_width: f64,
        f: impl Fn(f64) -> f64,
        tol: f64,
    ) -> Result<Self> {
        check_tol(tol)?;
        let mut planner = FftPlanner::<f64>::new();
        let mut m = 64usize;
        loop {
            let vals: Vec<f64> = (0..m)
                .map(|j| f(center + half_width * (PI * (j as f64 + 0.5) / m as f64).cos()))
                .collect();
            let mut v: Vec<C64> = vals
                .iter()
                .chain(vals.iter().rev())
                .map(|x| C64::new(*x, 0.0))
                .collect();
            planner.plan_fft_forward(2 * m).process(&mut v);
            let mut coeffs: Vec<C64> = (0..m)
                .map(|k| {
                    let s = (C64::from_polar(1.0, -PI * k as f64 / (2 * m) as f64) * v[k]).re / 2.0;
                    let w = if k == 0 { 1.0 } else { 2.0 };
                    C64::new(w * s / m as f64, 0.0)
                })
                .collect();
            let tail: f64 = coeffs[m / 2..].iter().map(|c| c.norm()).sum();
            if tail <= tol {
                truncate(&mut coeffs, tol);
                return Ok(ChebyshevPlan {
                    center,
                    half_width,
                    coeffs,
                    truncation_tol: tol,
                });
            }
            if m >= 1 << 20 {
                return Err(Error::Resolution { tail });
            }
            m *= 2;
        }
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Evaluates the scalar expansion at z (for checks).
    pub fn eval(&self, z: f64) -> C64 {
        let x = (z - self.center) / self.half_width;
        let (mut t0, mut t1) = (1.0, x);
        let mut acc = self.coeffs[0];
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            if k > 1 {
                let t2 = 2.0 * x * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
            acc += c * t1;
        }
        acc
    }

    /// p(H)u for hermitian H; `conjugate` gives p̄(H)u = p(H)*u.
    pub fn apply(&self, h: &dyn LinearMap, u: &[C64], conjugate: bool) -> Result<Vec<C64>> {
        check_len(h.cols(), u)?;
        let coef = |k: usize| {
            if conjugate {
                self.coeffs[k].conj()
            } else {
                self.coeffs[k]
            }
        };
        let (c, r) = (self.center, self.half_width);
        let nu = norm2(u);
        let bound = 1.0 + 1e-6;
        let scaled = |v: &[C64]| -> Result<Vec<C64>> {
            let hv = h.apply(v)?;
            Ok(hv.iter().zip(v).map(|(a, b)| (a - c * b) / r).collect())
        };
        let mut out: Vec<C64> = u.iter().map(|x| coef(0) * x).collect();
        if self.coeffs.len() == 1 {
            return Ok(out);
        }
        let mut prev = u.to_vec();
        let mut cur = scaled(u)?;
        out.iter_mut()
            .zip(&cur)
            .for_each(|(o, x)| *o += coef(1) * x);
        for k in 2..self.coeffs.len() {
            let hc = scaled(&cur)?;
            let next: Vec<C64> = hc.iter().zip(&prev).map(|(a, b)| 2.0 * a - b).collect();
            if k % 16 == 0 && norm2(&next) > bound * nu {
                return Err(Error::Breakdown(format!(
                    "Chebyshev recurrence grew at term {k}: spectrum leaves the enclosure"
                )));
            }
            out.iter_mut()
                .zip(&next)
                .for_each(|(o, x)| *o += coef(k) * x);
            prev = cur;
            cur = next;
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Breakdown("non-finite Chebyshev result".into()));
        }
        Ok(out)
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Invalid(format!(
            "truncation tol = {tol} not in (0, 1)"
        )));
    }
    Ok(())
}
