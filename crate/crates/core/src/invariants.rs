//! Calculus invariant suite: quantization identities, disjoint-support
//! composition, the resolvent identity, unitarity and the group law.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fit::DecayFit;
use crate::geometry::make_bump;
use crate::lattice::{LatticeBox, ModelSpec};
use crate::linmap::{compose, norm2, seeded_vector, LinearMap, Map, C64};
use crate::propagate::evolve;
use crate::quantize::{
    fourier_multiplier, op_h, op_h_map, operator_norm, position_weight, ResolutionPolicy, Symbol,
};
use crate::resolvent::{Branch, Resolvent, SolverKind};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    /// true: value must be ≤ tol; false: value must be ≥ tol.
    pub upper: bool,
    pub pass: bool,
}

impl InvariantCheck {
    fn at_most(name: &str, value: f64, tol: f64) -> Self {
        InvariantCheck {
            name: name.into(),
            value,
            tol,
            upper: true,
            pass: value <= tol,
        }
    }
    fn at_least(name: &str, value: f64, tol: f64) -> Self {
        InvariantCheck {
            name: name.into(),
            value,
            tol,
            upper: false,
            pass: value >= tol,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
    /// ‖op_h(a)∘op_h(b)‖ per h for the disjoint pair.
    pub composition: Vec<(f64, f64)>,
}

impl InvariantReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
}

fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Identity, pure-multiplier and pure-diagonal quantizations; largest entry error.
pub fn quantization_identities() -> Result<f64> {
    let bx = LatticeBox::new(1, 40);
    let u = seeded_vector(11, bx.len());
    let id = op_h(&Symbol::constant(1, C64::new(1.0, 0.0)), 0.25, bx)?;
    let mut worst = max_abs_diff(&id.apply(&u)?, &u);

    let c = |xi: &[f64]| C64::new(1.0 - xi[0].cos(), 0.2 * (2.0 * xi[0]).sin());
    let a = op_h(&Symbol::momentum(1, c), 0.125, bx)?;
    worst = worst.max(max_abs_diff(
        &a.apply(&u)?,
        &fourier_multiplier(c, bx).apply(&u)?,
    ));

    let h = 0.125;
    let b = |x: &[f64]| C64::new((-x[0] * x[0]).exp(), x[0].sin());
    let d = op_h(&Symbol::position(1, b), h, bx)?;
    let expect: Vec<C64> = bx
        .sites()
        .zip(&u)
        .map(|(n, v)| b(&[h * n[0] as f64]) * v)
        .collect();
    worst = worst.max(max_abs_diff(&d.apply(&u)?, &expect));

    let w = compose(vec![position_weight(1.7, bx), position_weight(-1.7, bx)]);
    worst = worst.max(max_abs_diff(&w.apply(&u)?, &u));
    Ok(worst)
}

pub const COMPOSITION_H: [f64; 5] = [0.125, 0.0625, 0.03125, 0.015625, 0.0078125];

/// ‖op_h(a)∘op_h(b)‖ for bumps at x = 0 and x = 2 (radius 0.5, gap 1) sharing ξ = π/2.
pub fn disjoint_composition() -> Result<(Vec<(f64, f64)>, DecayFit)> {
    disjoint_composition_with(2.0, 0.5, 1.0)
}

/// Same with the second bump at x1 and radii (δ₁, δ₂).
pub fn disjoint_composition_with(
    x1: f64,
    delta1: f64,
    delta2: f64,
) -> Result<(Vec<(f64, f64)>, DecayFit)> {
    let a = make_bump(vec![0.0], vec![FRAC_PI_2], delta1, delta2)?;
    let b = make_bump(vec![x1], vec![FRAC_PI_2], delta1, delta2)?;
    let rows = COMPOSITION_H
        .par_iter()
        .map(|&h| -> Result<(f64, f64)> {
            let radius = ((x1.abs() + 2.0 * delta1 + 1.0) / h).ceil() as usize;
            let bx = LatticeBox::new(1, radius);
            let m: Map = compose(vec![
                op_h_map(&a, h, bx, ResolutionPolicy::WarnOnly)?,
                op_h_map(&b, h, bx, ResolutionPolicy::WarnOnly)?,
            ]);
            Ok((h, operator_norm(m.as_ref(), 1e-6, 20_000)?.value))
        })
        .collect::<Result<Vec<_>>>()?;
    // norms at round-off carry no slope information
    let (hs, ns): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.1 > 1e-13).cloned().unzip();
    let fit = DecayFit::fit_min(&hs, &ns, 3)?;
    Ok((rows, fit))
}

/// R(z₁) − R(z₂) = (z₁ − z₂) R(z₁) R(z₂) for the CAP model; worst relative gap.
pub fn resolvent_identity() -> Result<f64> {
    let h = Arc::new(ModelSpec::reference_1d().hamiltonian(80)?);
    let (e1, e2) = (0.3, 0.05);
    let mut worst = 0.0f64;
    for solver in [SolverKind::BandedDirect, SolverKind::Iterative] {
        let r1 = Resolvent::new(h.clone(), 0.9, e1, Branch::Plus, solver)?;
        let r2 = Resolvent::new(h.clone(), 0.9, e2, Branch::Plus, solver)?;
        let dz = C64::new(0.0, e1 - e2);
        for seed in 0..3 {
            let v = seeded_vector(seed, h.rows());
            let lhs: Vec<C64> = r1
                .apply(&v)?
                .iter()
                .zip(r2.apply(&v)?)
                .map(|(a, b)| a - b)
                .collect();
            let rhs: Vec<C64> = r1.apply(&r2.apply(&v)?)?.iter().map(|x| dz * x).collect();
            worst = worst.max(rel_diff(&rhs, &lhs));
        }
    }
    Ok(worst)
}

/// (unitarity defect, group-law defect), both relative to ‖u‖.
pub fn unitarity_group_law() -> Result<(f64, f64)> {
    let h = ModelSpec::reference_1d().hermitian(128)?;
    let u = seeded_vector(5, h.rows());
    let nu = norm2(&u);
    let a = evolve(&h, &u, 3.3, 1e-13)?;
    let ab = evolve(&h, &a, 7.1, 1e-13)?;
    let direct = evolve(&h, &u, 10.4, 1e-13)?;
    let thirds = (0..3).try_fold(u.clone(), |v, _| evolve(&h, &v, 10.4 / 3.0, 1e-13))?;
    let unit = ((norm2(&a) - nu).abs() / nu).max((norm2(&direct) - nu).abs() / nu);
    let group = rel_diff(&ab, &direct).max(rel_diff(&thirds, &direct));
    Ok((unit, group))
}

pub fn run_invariant_suite() -> Result<InvariantReport> {
    let q = quantization_identities()?;
    let (composition, fit) = disjoint_composition()?;
    let r = resolvent_identity()?;
    let (unit, group) = unitarity_group_law()?;
    Ok(InvariantReport {
        checks: vec![
            InvariantCheck::at_most("quantization identities", q, 1e-13),
            InvariantCheck::at_least("disjoint-support composition slope", fit.slope, 3.0),
            InvariantCheck::at_most("resolvent identity", r, 1e-8),
            InvariantCheck::at_most("unitarity", unit, 1e-9),
            InvariantCheck::at_most("group law", group, 1e-9),
        ],
        composition,
    })
}
