//! The cutoff Φ and Ψ = Φ².

use serde::{Deserialize, Serialize};

fn b(r: f64) -> f64 {
    if r > 0.0 {
        (-1.0 / r).exp()
    } else {
        0.0
    }
}

fn db(r: f64) -> f64 {
    if r > 0.0 {
        (-1.0 / r).exp() / (r * r)
    } else {
        0.0
    }
}

/// Smooth ramp: 0 for r ≤ 0, 1 for r ≥ 1.
fn g(r: f64) -> f64 {
    let (p, q) = (b(r), b(1.0 - r));
    p / (p + q)
}

fn dg(r: f64) -> f64 {
    let (p, q) = (b(r), b(1.0 - r));
    let den = p + q;
    (db(r) * q + p * db(1.0 - r)) / (den * den)
}

/// Localised dip used to break monotonicity on purpose.
fn dip(s: f64) -> (f64, f64) {
    let u = (s - 0.65) / 0.08;
    if u.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let e = (1.0 - 1.0 / (1.0 - u * u)).exp();
    let de = e * (-2.0 * u / (1.0 - u * u).powi(2)) / 0.08;
    (e, de)
}

/// Φ(s) = 1 for s ≤ 1/2, 0 for s ≥ 1, decreasing in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Cutoff {
    #[default]
    Standard,
    /// Φ minus a dip of the given depth around s = 0.65, so Φ' > 0 somewhere.
    Sabotaged { depth: f64 },
}

impl Cutoff {
    pub fn phi(&self, s: f64) -> f64 {
        let base = g(2.0 * (1.0 - s));
        match self {
            Cutoff::Standard => base,
            Cutoff::Sabotaged { depth } => base - depth * dip(s).0,
        }
    }

    pub fn dphi(&self, s: f64) -> f64 {
        let base = -2.0 * dg(2.0 * (1.0 - s));
        match self {
            Cutoff::Standard => base,
            Cutoff::Sabotaged { depth } => base - depth * dip(s).1,
        }
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.phi(s).powi(2)
    }

    pub fn dpsi(&self, s: f64) -> f64 {
        2.0 * self.phi(s) * self.dphi(s)
    }
}

pub fn phi(s: f64) -> f64 {
    Cutoff::Standard.phi(s)
}

pub fn psi(s: f64) -> f64 {
    Cutoff::Standard.psi(s)
}

/// 0 for u ≤ 0, 1 for u ≥ 1.
pub fn smooth_step(u: f64) -> f64 {
    phi(1.0 - 0.5 * u)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutoffReport {
    pub plateau: bool,
    pub support: bool,
    pub positive: bool,
    pub monotone: bool,
    pub psi_monotone: bool,
    /// max over the grid of |finite-difference derivative| for orders 1..=4
    pub derivative_bounds: [f64; 4],
}

impl CutoffReport {
    pub fn ok(&self) -> bool {
        self.plateau
            && self.support
            && self.positive
            && self.monotone
            && self.psi_monotone
            && self.derivative_bounds.iter().all(|d| d.is_finite())
    }
}

/// Grid check of the four Φ properties on `n` points of [−0.5, 1.5].
pub fn check_cutoff(c: &Cutoff, n: usize) -> CutoffReport {
    let grid: Vec<f64> = (0..n)
        .map(|k| -0.5 + 2.0 * k as f64 / (n - 1) as f64)
        .collect();
    let mut r = CutoffReport {
        plateau: true,
        support: true,
        positive: true,
        monotone: true,
        psi_monotone: true,
        derivative_bounds: [0.0; 4],
    };
    for &s in &grid {
        let p = c.phi(s);
        if s <= 0.5 && p != 1.0 {
            r.plateau = false;
        }
        if s >= 1.0 && p != 0.0 {
            r.support = false;
        }
        // e^{-1/r} underflows within ~1e-3 of the support edge
        if s < 1.0 - 1e-3 && p <= 0.0 {
            r.positive = false;
        }
        if c.dphi(s) > 0.0 {
            r.monotone = false;
        }
        if c.dpsi(s) > 0.0 {
            r.psi_monotone = false;
        }
    }
    let step = 2.0 / (n - 1) as f64;
    let mut vals: Vec<f64> = grid.iter().map(|s| c.phi(*s)).collect();
    for k in 0..4 {
        vals = vals.windows(2).map(|w| (w[1] - w[0]) / step).collect();
        r.derivative_bounds[k] = vals.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    }
    r
}
