//! The escape-function ladder ψ₀, ψ₁, …, ψ_m and its pointwise transport checks.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::geometry::{reduce_angle, torus_dist};
use crate::lattice::Stencil;
use crate::linmap::C64;
use crate::quantize::{Symbol, SymbolClass};

/// Ladder around the path y(t) = h⁻¹x₂ + t v(ξ₂).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeLadder {
    pub stencil: Stencil,
    pub x2: Vec<f64>,
    pub xi2: Vec<f64>,
    pub delta1: f64,
    pub delta2: f64,
    pub h: f64,
    pub mu: f64,
    /// γ₁ < … < γ_m in (1, 2).
    pub gammas: Vec<f64>,
    /// C₁, …, C_m.
    pub constants: Vec<f64>,
    pub cutoff: Cutoff,
}

/// Default γ_j = 2 − 2^{−j}.
pub fn default_gammas(m: usize) -> Vec<f64> {
    (1..=m).map(|j| 2.0 - 2f64.powi(-(j as i32))).collect()
}

/// Smallest m with (m + 1)μ > 2N.
pub fn depth_for(n_target: f64, mu: f64) -> usize {
    let mut m = 0;
    while (m as f64 + 1.0) * mu <= 2.0 * n_target {
        m += 1;
    }
    m
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderInvariants {
    pub nesting: bool,
    /// max |v(ξ) − v(ξ₂)| over |ξ − ξ₂| ≤ 2δ₂, against δ₁/2.
    pub pinning_gap: f64,
    pub pinning: bool,
}

impl LadderInvariants {
    pub fn ok(&self) -> bool {
        self.nesting && self.pinning
    }
}

impl EscapeLadder {
    /// ψ₀ alone (m = 0).
    pub fn new(
        stencil: Stencil,
        x2: Vec<f64>,
        xi2: Vec<f64>,
        delta1: f64,
        delta2: f64,
        h: f64,
        mu: f64,
    ) -> Result<Self> {
        let d = stencil.dim();
        if x2.len() != d || xi2.len() != d {
            return Err(Error::Dim {
                expected: d,
                got: x2.len().min(xi2.len()),
            });
        }
        if !(delta1 > 0.0 && delta2 > 0.0 && h > 0.0 && h <= 1.0 && mu > 0.0 && mu <= 1.0) {
            return Err(Error::Invalid(format!(
                "ladder needs δ₁, δ₂ > 0, h ∈ (0, 1], μ ∈ (0, 1]; got {delta1}, {delta2}, {h}, {mu}"
            )));
        }
        Ok(EscapeLadder {
            stencil,
            x2,
            xi2: xi2.into_iter().map(reduce_angle).collect(),
            delta1,
            delta2,
            h,
            mu,
            gammas: Vec::new(),
            constants: Vec::new(),
            cutoff: Cutoff::Standard,
        })
    }

    /// Depth m with default γ_j and constants set to zero.
    pub fn with_depth(mut self, m: usize) -> Self {
        self.gammas = default_gammas(m);
        self.constants = vec![0.0; m];
        self
    }

    pub fn with_h(&self, h: f64) -> Self {
        EscapeLadder { h, ..self.clone() }
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    pub fn v2(&self) -> Vec<f64> {
        self.stencil.velocity(&self.xi2)
    }

    /// y(t) = h⁻¹x₂ + t v(ξ₂).
    pub fn center(&self, t: f64) -> Vec<f64> {
        let v = self.v2();
        self.x2
            .iter()
            .zip(&v)
            .map(|(x, v)| x / self.h + t * v)
            .collect()
    }

    /// γ_j with γ₀ = 1.
    pub fn gamma(&self, j: usize) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.gammas[j - 1]
        }
    }

    /// Spatial radius γ_j δ₁ (h⁻¹ + t) of O_j(t).
    pub fn radius(&self, j: usize, t: f64) -> f64 {
        self.gamma(j) * self.delta1 * (1.0 / self.h + t)
    }

    /// h^μ − (h⁻¹ + t)^{−μ} and its t-derivative.
    pub fn prefactor(&self, t: f64) -> (f64, f64) {
        let s = 1.0 / self.h + t;
        (
            self.h.powf(self.mu) - s.powf(-self.mu),
            self.mu * s.powf(-1.0 - self.mu),
        )
    }

    /// C_j h^{(j−1)μ}.
    fn weight(&self, j: usize) -> f64 {
        self.constants[j - 1] * self.h.powf((j as f64 - 1.0) * self.mu)
    }

    pub fn invariants(&self) -> LadderInvariants {
        let nesting = self.gammas.iter().all(|g| *g > 1.0 && *g < 2.0)
            && self.gammas.windows(2).all(|w| w[1] > w[0])
            && self.constants.len() == self.gammas.len()
            && self.constants.iter().all(|c| *c >= 0.0 && c.is_finite());
        let v2 = self.v2();
        let d = self.stencil.dim();
        let n: usize = if d == 1 { 2001 } else { 101 };
        let mut gap = 0.0f64;
        let mut idx = vec![0usize; d];
        let total = n.pow(d as u32);
        for _ in 0..total {
            let xi: Vec<f64> = idx
                .iter()
                .zip(&self.xi2)
                .map(|(k, c)| c + 2.0 * self.delta2 * (2.0 * *k as f64 / (n - 1) as f64 - 1.0))
                .collect();
            if torus_dist(&xi, &self.xi2) <= 2.0 * self.delta2 {
                let v = self.stencil.velocity(&xi);
                let dv: Vec<f64> = v.iter().zip(&v2).map(|(a, b)| a - b).collect();
                gap = gap.max(norm(&dv));
            }
            for k in idx.iter_mut() {
                *k += 1;
                if *k < n {
                    break;
                }
                *k = 0;
            }
        }
        LadderInvariants {
            nesting,
            pinning_gap: gap,
            pinning: gap < self.delta1 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let inv = self.invariants();
        if !inv.nesting {
            return Err(Error::Ladder(
                "γ_j must increase strictly inside (1, 2) with one C_j ≥ 0 each".into(),
            ));
        }
        if !inv.pinning {
            return Err(Error::Ladder(format!(
                "velocity pinning fails: |v(ξ) − v(ξ₂)| reaches {:.4} ≥ δ₁/2 = {:.4}",
                inv.pinning_gap,
                self.delta1 / 2.0
            )));
        }
        Ok(())
    }

    /// |y(t)| ≥ 3δ₁h⁻¹(1 + ht) on every listed t.
    pub fn separation_holds(&self, t_grid: &[f64]) -> bool {
        t_grid
            .iter()
            .all(|t| norm(&self.center(*t)) >= 3.0 * self.delta1 * (1.0 / self.h + t))
    }

    fn s_q(&self, j: usize, t: f64, x: &[f64], xi: &[f64]) -> (f64, f64, Vec<f64>) {
        let y = self.center(t);
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let s = norm(&dx) / self.radius(j, t);
        let q = torus_dist(xi, &self.xi2) / (self.gamma(j) * self.delta2);
        (s, q, dx)
    }

    /// ψ_j(t, x, ξ) with x in lattice units.
    pub fn psi_value(&self, j: usize, t: f64, x: &[f64], xi: &[f64]) -> f64 {
        let (s, q, _) = self.s_q(j, t, x, xi);
        let base = self.cutoff.psi(s) * self.cutoff.psi(q);
        if j == 0 {
            base
        } else {
            self.weight(j) * self.prefactor(t).0 * base
        }
    }

    /// (∂_t + v(ξ)·∇_x)ψ_j, by the chain rule.
    pub fn transport_value(&self, j: usize, t: f64, x: &[f64], xi: &[f64]) -> f64 {
        let (s, q, dx) = self.s_q(j, t, x, xi);
        let psi_q = self.cutoff.psi(q);
        if psi_q == 0.0 {
            return 0.0;
        }
        let big = 1.0 / self.h + t;
        let r = norm(&dx);
        let v = self.stencil.velocity(xi);
        let v2 = self.v2();
        // (∂_t + v·∇)s = [x̂·(v − v₂) − |x − y|/(h⁻¹ + t)] / (γ δ₁ (h⁻¹ + t))
        let along = if r == 0.0 {
            0.0
        } else {
            dx.iter()
                .zip(v.iter().zip(&v2))
                .map(|(d, (a, b))| d / r * (a - b))
                .sum::<f64>()
        };
        let ds = (along - r / big) / (self.gamma(j) * self.delta1 * big);
        let moving = self.cutoff.dpsi(s) * ds * psi_q;
        if j == 0 {
            moving
        } else {
            let (p, dp) = self.prefactor(t);
            self.weight(j) * (dp * self.cutoff.psi(s) * psi_q + p * moving)
        }
    }

    /// μ C_j h^{(j−1)μ} (h⁻¹ + t)^{−1−μ} Ψ(s_j) Ψ(q_j); zero for j = 0.
    pub fn lower_bound(&self, j: usize, t: f64, x: &[f64], xi: &[f64]) -> f64 {
        if j == 0 {
            return 0.0;
        }
        let (s, q, _) = self.s_q(j, t, x, xi);
        self.weight(j) * self.prefactor(t).1 * self.cutoff.psi(s) * self.cutoff.psi(q)
    }

    fn class(&self, t: f64) -> SymbolClass {
        SymbolClass::Sht {
            order: 0.0,
            h: self.h,
            t,
        }
    }

    fn position_part(&self, j: usize, t: f64) -> impl Fn(&[f64]) -> C64 + Send + Sync + 'static {
        let y = self.center(t);
        let r = self.radius(j, t);
        let c = self.cutoff;
        move |x: &[f64]| {
            let d = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            C64::new(c.psi(d / r), 0.0)
        }
    }

    fn momentum_part(&self, j: usize) -> impl Fn(&[f64]) -> C64 + Send + Sync + 'static {
        let xi2 = self.xi2.clone();
        let w = self.gamma(j) * self.delta2;
        let c = self.cutoff;
        move |xi: &[f64]| C64::new(c.psi(torus_dist(xi, &xi2) / w), 0.0)
    }

    /// ψ₀(t, ·, ·) = Ψ(|x − y(t)|/(δ₁(h⁻¹ + t))) Ψ(|ξ − ξ₂|/δ₂).
    pub fn build_psi0(&self, t: f64) -> Symbol {
        let d = self.stencil.dim();
        Symbol::separable(d, self.position_part(0, t), self.momentum_part(0))
            .with_class(self.class(t))
    }

    pub fn build_psi_j(&self, j: usize, t: f64) -> Result<Symbol> {
        if j == 0 {
            return Ok(self.build_psi0(t));
        }
        if j > self.depth() {
            return Err(Error::Invalid(format!(
                "ladder has depth {}, asked for j = {j}",
                self.depth()
            )));
        }
        let d = self.stencil.dim();
        let scale = self.weight(j) * self.prefactor(t).0;
        Ok(
            Symbol::separable(d, self.position_part(j, t), self.momentum_part(j))
                .scaled(C64::new(scale, 0.0))
                .with_class(self.class(t)),
        )
    }

    /// Σ_j ψ_j.
    pub fn build_sum(&self, t: f64) -> Result<Symbol> {
        let mut s = self.build_psi0(t);
        for j in 1..=self.depth() {
            s = s.plus(self.build_psi_j(j, t)?);
        }
        Ok(s.with_class(self.class(t)))
    }

    /// Analytic ∂_t Σ_j ψ_j as a symbol.
    pub fn build_dt_sum(&self, t: f64) -> Result<Symbol> {
        let d = self.stencil.dim();
        let mut out = Symbol::zero(d);
        for j in 0..=self.depth() {
            let y = self.center(t);
            let v2 = self.v2();
            let big = 1.0 / self.h + t;
            let r = self.radius(j, t);
            let gd = self.gamma(j) * self.delta1;
            let c = self.cutoff;
            // ∂_t Ψ(s) with s = |x − y|/r: Ψ'(s)(−x̂·v₂/r − |x − y|/(r big))
            let dpos = move |x: &[f64]| {
                let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let n = norm(&dx);
                let along = if n == 0.0 {
                    0.0
                } else {
                    dx.iter().zip(&v2).map(|(a, b)| a / n * b).sum::<f64>()
                };
                let ds = (-along - n / big) / (gd * big);
                C64::new(c.dpsi(n / r) * ds, 0.0)
            };
            let moving = Symbol::separable(d, dpos, self.momentum_part(j));
            if j == 0 {
                out = out.plus(moving);
            } else {
                let (p, dp) = self.prefactor(t);
                let w = self.weight(j);
                out = out.plus(moving.scaled(C64::new(w * p, 0.0)));
                let still = Symbol::separable(d, self.position_part(j, t), self.momentum_part(j));
                out = out.plus(still.scaled(C64::new(w * dp, 0.0)));
            }
        }
        Ok(out.with_class(self.class(t)))
    }
}

/// Sample grid for the transport check, spanning each O_j(t) with a 5% margin.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportGrid {
    pub t_values: Vec<f64>,
    pub nx: usize,
    pub nxi: usize,
}

impl Default for TransportGrid {
    fn default() -> Self {
        TransportGrid {
            t_values: (0..=20).map(|k| 2.0 * k as f64).collect(),
            nx: 241,
            nxi: 121,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportReport {
    pub j: usize,
    /// min over the grid of transport − lower bound.
    pub min_margin: f64,
    /// (t, x, ξ) at the minimum.
    pub argmin: (f64, Vec<f64>, Vec<f64>),
    /// Largest gap between the chain-rule value and a centred difference.
    pub fd_max_error: f64,
    pub pass: bool,
}

pub const TRANSPORT_TOL: f64 = -1e-12;

/// Checks the transport inequality for ψ_j after validating the ladder.
pub fn verify_transport(
    ladder: &EscapeLadder,
    j: usize,
    grid: &TransportGrid,
) -> Result<TransportReport> {
    ladder.validate()?;
    verify_transport_unchecked(ladder, j, grid)
}

/// Same grid search without the ladder invariants (for negative controls).
pub fn verify_transport_unchecked(
    ladder: &EscapeLadder,
    j: usize,
    grid: &TransportGrid,
) -> Result<TransportReport> {
    if j > ladder.depth() {
        return Err(Error::Invalid(format!(
            "ladder has depth {}, asked for j = {j}",
            ladder.depth()
        )));
    }
    if ladder.stencil.dim() != 1 {
        return Err(Error::Invalid(
            "transport grid search is implemented for d = 1".into(),
        ));
    }
    if grid.nx < 2 || grid.nxi < 2 || grid.t_values.is_empty() {
        return Err(Error::Invalid("transport grid is empty".into()));
    }
    let mut min = f64::INFINITY;
    let mut arg = (0.0, vec![0.0], vec![0.0]);
    for &t in &grid.t_values {
        let y = ladder.center(t)[0];
        let r = 1.05 * ladder.radius(j, t);
        let w = 1.05 * ladder.gamma(j) * ladder.delta2;
        for ix in 0..grid.nx {
            let x = [y - r + 2.0 * r * ix as f64 / (grid.nx - 1) as f64];
            for ik in 0..grid.nxi {
                let xi = [ladder.xi2[0] - w + 2.0 * w * ik as f64 / (grid.nxi - 1) as f64];
                let m = ladder.transport_value(j, t, &x, &xi) - ladder.lower_bound(j, t, &x, &xi);
                if m < min {
                    min = m;
                    arg = (t, x.to_vec(), xi.to_vec());
                }
            }
        }
    }
    let fd = fd_cross_check(ladder, j, grid, 100)?;
    Ok(TransportReport {
        j,
        min_margin: min,
        argmin: arg,
        fd_max_error: fd,
        pass: min >= TRANSPORT_TOL,
    })
}

/// max |chain rule − centred difference| at `count` seeded random points.
pub fn fd_cross_check(
    ladder: &EscapeLadder,
    j: usize,
    grid: &TransportGrid,
    count: usize,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A5E);
    let t_max = grid.t_values.iter().cloned().fold(0.0, f64::max);
    let step = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let t = step + rng.random::<f64>() * t_max.max(1.0);
        let y = ladder.center(t)[0];
        let r = ladder.radius(j, t);
        let x = y + (2.0 * rng.random::<f64>() - 1.0) * r;
        let xi =
            ladder.xi2[0] + (2.0 * rng.random::<f64>() - 1.0) * ladder.gamma(j) * ladder.delta2;
        let v = ladder.stencil.velocity(&[xi])[0];
        let f = |t: f64, x: f64| ladder.psi_value(j, t, &[x], &[xi]);
        let dt = (f(t + step, x) - f(t - step, x)) / (2.0 * step);
        let dx = (f(t, x + step) - f(t, x - step)) / (2.0 * step);
        let exact = ladder.transport_value(j, t, &[x], &[xi]);
        worst = worst.max((dt + v * dx - exact).abs());
    }
    Ok(worst)
}

/// C_j = safety · R_j / (μ κ_j) with κ_j = min of Ψ(s_j)Ψ(q_j) over O_{j−1}(t).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Constants {
    pub c: Vec<f64>,
    pub kappa: Vec<f64>,
    pub safety: f64,
}

pub fn nesting_margin(ladder: &EscapeLadder, j: usize) -> f64 {
    // on O_{j−1}, s_j = s_{j−1} γ_{j−1}/γ_j with s_{j−1} < 1; same for q
    let ratio = ladder.gamma(j - 1) / ladder.gamma(j);
    let n = 4000;
    let mut kmin = f64::INFINITY;
    for k in 0..=n {
        let s = ratio * k as f64 / n as f64;
        kmin = kmin.min(ladder.cutoff.psi(s));
    }
    kmin * kmin
}

pub fn choose_constants(
    ladder: &mut EscapeLadder,
    remainders: &[f64],
    safety: f64,
) -> Result<Constants> {
    let m = ladder.depth();
    if remainders.len() != m {
        return Err(Error::Invalid(format!(
            "need {m} remainder estimates, got {}",
            remainders.len()
        )));
    }
    if !(safety > 0.0) || remainders.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Invalid(
            "safety factor and remainders must be non-negative".into(),
        ));
    }
    let mut c = Vec::with_capacity(m);
    let mut kappa = Vec::with_capacity(m);
    for j in 1..=m {
        let k = nesting_margin(ladder, j);
        if !(k > 0.0) {
            return Err(Error::Ladder(format!(
                "nesting margin κ_{j} = {k} is not positive"
            )));
        }
        kappa.push(k);
        c.push(safety * remainders[j - 1] / (ladder.mu * k));
    }
    ladder.constants = c.clone();
    Ok(Constants { c, kappa, safety })
}

/// Lower and upper constants of 2δ₁h⁻¹(1 + ht) ≤ |x| ≤ C h⁻¹(1 + ht) on supp ψ₀.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportSandwich {
    pub lower_holds: bool,
    pub upper_constant: f64,
}

pub fn support_sandwich(ladder: &EscapeLadder, t_grid: &[f64]) -> SupportSandwich {
    let mut lower = true;
    let mut upper = 0.0f64;
    for &t in t_grid {
        let scale = 1.0 / ladder.h + t;
        let y = norm(&ladder.center(t));
        let r = ladder.radius(0, t);
        let (lo, hi) = ((y - r).max(0.0), y + r);
        lower &= lo >= 2.0 * ladder.delta1 * scale;
        upper = upper.max(hi / scale);
    }
    SupportSandwich {
        lower_holds: lower,
        upper_constant: upper,
    }
}

/// Grid sups of |ψ| and (h⁻¹ + t)|∂_xψ| for the ladder sum (d = 1).
pub fn class_bounds(ladder: &EscapeLadder, t_grid: &[f64], nx: usize) -> (f64, f64) {
    let mut sup = 0.0f64;
    let mut sup_dx = 0.0f64;
    let step = 1e-4;
    for &t in t_grid {
        let y = ladder.center(t)[0];
        let r = ladder.radius(ladder.depth(), t);
        for k in 0..nx {
            let x = y - r + 2.0 * r * k as f64 / (nx - 1) as f64;
            let xi = ladder.xi2.clone();
            let f = |x: f64| {
                (0..=ladder.depth())
                    .map(|j| ladder.psi_value(j, t, &[x], &xi))
                    .sum::<f64>()
            };
            sup = sup.max(f(x).abs());
            sup_dx = sup_dx
                .max((1.0 / ladder.h + t) * ((f(x + step) - f(x - step)) / (2.0 * step)).abs());
        }
    }
    (sup, sup_dx)
}

/// True if ζ = Ψ(2|x|/(δ₁(h⁻¹ + t))) never overlaps the ladder support on the grid.
pub fn zeta_disjoint(ladder: &EscapeLadder, t_grid: &[f64], nx: usize) -> bool {
    t_grid.iter().all(|&t| {
        let scale = 1.0 / ladder.h + t;
        let reach = ladder.delta1 * scale / 2.0;
        (0..nx).all(|k| {
            let x = -reach + 2.0 * reach * k as f64 / (nx - 1) as f64;
            let zeta = ladder.cutoff.psi(2.0 * x.abs() / (ladder.delta1 * scale));
            let total: f64 = (0..=ladder.depth())
                .map(|j| ladder.psi_value(j, t, &[x], &ladder.xi2))
                .sum();
            zeta == 0.0 || total == 0.0
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn standard() -> EscapeLadder {
        EscapeLadder::new(
            Stencil::laplacian(1),
            vec![3.0],
            vec![FRAC_PI_2],
            0.2,
            0.2,
            0.125,
            0.5,
        )
        .unwrap()
        .with_depth(2)
    }

    #[test]
    fn psi0_values() {
        let l = standard();
        let t = 4.0;
        let y = l.center(t);
        assert_eq!(l.psi_value(0, t, &y, &l.xi2), 1.0);
        let far = [y[0] + l.radius(0, t)];
        assert_eq!(l.psi_value(0, t, &far, &l.xi2), 0.0);
        // t = 0 is a₂(hn, ξ)² with a₂ the Φ bump at (x₂, ξ₂)
        let n = 25.0;
        let a2 = crate::escape::cutoff::phi((0.125 * n - 3.0f64).abs() / 0.2);
        assert!((l.psi_value(0, 0.0, &[n], &l.xi2) - a2 * a2).abs() < 1e-15);
        let s = l.build_psi0(t);
        assert!((s.eval(&y, &l.xi2).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_j_prefactor_and_radius() {
        let mut l = standard();
        l.constants = vec![1.0, 2.0];
        assert_eq!(l.psi_value(1, 0.0, &l.center(0.0), &l.xi2), 0.0);
        let (p, _) = l.prefactor(1e12);
        assert!((p - 0.125f64.powf(0.5)).abs() < 1e-6);
        assert!((l.radius(1, 8.0) - 4.8).abs() < 1e-12);
        let s = l.build_psi_j(2, 3.0).unwrap();
        let y = l.center(3.0);
        assert!((s.eval(&y, &l.xi2).re - l.psi_value(2, 3.0, &y, &l.xi2)).abs() < 1e-15);
        assert!(l.build_psi_j(3, 1.0).is_err());
    }

    #[test]
    fn transport_standard_configuration() {
        let mut l = standard();
        l.constants = vec![1.0, 1.0];
        for j in 0..=2 {
            let r = verify_transport(&l, j, &TransportGrid::default()).unwrap();
            assert!(r.pass, "j = {j}: {r:?}");
            assert!(r.fd_max_error < 1e-6, "j = {j}: fd {}", r.fd_max_error);
        }
    }

    #[test]
    fn broken_pinning_is_caught() {
        let l = EscapeLadder::new(
            Stencil::laplacian(1),
            vec![3.0],
            vec![FRAC_PI_2],
            0.2,
            1.2,
            0.125,
            0.5,
        )
        .unwrap();
        assert!(matches!(
            verify_transport(&l, 0, &TransportGrid::default()),
            Err(Error::Ladder(_))
        ));
        let r = verify_transport_unchecked(&l, 0, &TransportGrid::default()).unwrap();
        assert!(r.min_margin < 0.0 && !r.pass);
    }

    #[test]
    fn transport_vanishes_off_support() {
        let l = standard();
        let t = 2.0;
        let x = [l.center(t)[0] + 1.01 * l.radius(0, t)];
        assert_eq!(l.transport_value(0, t, &x, &l.xi2), 0.0);
    }

    #[test]
    fn analytic_time_derivative_matches_difference() {
        let mut l = standard();
        l.constants = vec![0.7, 0.3];
        let t = 3.0;
        let dt = l.build_dt_sum(t).unwrap();
        let (a, b) = (
            l.build_sum(t + 1e-5).unwrap(),
            l.build_sum(t - 1e-5).unwrap(),
        );
        let y = l.center(t)[0];
        for k in 0..50 {
            let x = [y - 5.0 + 0.2 * k as f64];
            let xi = [l.xi2[0] + 0.01 * (k as f64 - 25.0)];
            let fd = (a.eval(&x, &xi).re - b.eval(&x, &xi).re) / 2e-5;
            assert!((dt.eval(&x, &xi).re - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn constants_and_margins() {
        let mut l = standard();
        let c = choose_constants(&mut l, &[0.0, 0.0], 2.0).unwrap();
        assert_eq!(c.c, vec![0.0, 0.0]);
        assert!(c.kappa[0] > 0.0);
        // κ₁ = Ψ(γ₀/γ₁)² up to the grid
        let k = crate::escape::cutoff::psi(1.0 / 1.5).powi(2);
        assert!((c.kappa[0] - k).abs() < 1e-3);
        let a = choose_constants(&mut l, &[0.3, 0.1], 2.0).unwrap();
        let b = choose_constants(&mut l, &[0.3, 0.1], 4.0).unwrap();
        assert!((b.c[0] - 2.0 * a.c[0]).abs() < 1e-15 && (b.c[1] - 2.0 * a.c[1]).abs() < 1e-15);
        assert_eq!(depth_for(1.0, 0.5), 4);
        assert_eq!(depth_for(1.0, 1.0), 2);
    }

    #[test]
    fn geometric_invariants() {
        let mut l = standard();
        l.constants = vec![1.0, 1.0];
        let ts: Vec<f64> = (0..=20).map(|k| 5.0 * k as f64).collect();
        assert!(l.separation_holds(&ts));
        let s = support_sandwich(&l, &ts);
        assert!(s.lower_holds && s.upper_constant.is_finite(), "{s:?}");
        let (sup, sup_dx) = class_bounds(&l, &ts, 201);
        assert!(sup < 3.0 && sup_dx < 50.0, "{sup} {sup_dx}");
        assert!(zeta_disjoint(&l, &ts, 201));
        assert!(l.invariants().ok());
    }
}
