//! Limiting-absorption resolvent solves and sandwiched norm probes.

mod banded;
mod krylov;

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use banded::BandLu;
pub use krylov::{bicgstab, BicgstabOutcome};

use crate::error::{Error, Result};
use crate::fit::DecayFit;
use crate::geometry::{
    classify, make_bump, make_cone_symbol, ConeSpec, Direction, KernelPoint, MembershipReport,
};
use crate::lattice::{Hamiltonian, LatticeBox, ModelSpec};
use crate::linmap::{
    adjoint, check_len, compose, norm2, seeded_vector, Dense, LinearMap, Map, C64, I,
};
use crate::quantize::{norm_seed, op_h_map, operator_norm, position_weight, ResolutionPolicy};

/// Plus is (H − λ − i0)^{-1}, Minus is (H − λ + i0)^{-1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(&self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Banded for 1D Dirichlet boxes, dense up to `DENSE_LIMIT` sites, else iterative.
    #[default]
    Auto,
    BandedDirect,
    DenseDirect,
    Iterative,
}

pub const DENSE_LIMIT: usize = 1500;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LapConfig {
    pub lambda: f64,
    pub epsilons: Vec<f64>,
    pub branch: Branch,
    #[serde(default)]
    pub solver: SolverKind,
    pub convergence_tol: f64,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
    #[serde(default = "default_krylov_iter")]
    pub krylov_max_iter: usize,
}

fn default_krylov_tol() -> f64 {
    1e-10
}
fn default_krylov_iter() -> usize {
    20_000
}

/// 2^{−k}, k = 3..=40.
pub fn default_epsilons() -> Vec<f64> {
    (3..=40).map(|k| 2f64.powi(-k)).collect()
}

impl LapConfig {
    pub fn new(lambda: f64, branch: Branch) -> Self {
        LapConfig {
            lambda,
            epsilons: default_epsilons(),
            branch,
            solver: SolverKind::Auto,
            convergence_tol: 1e-3,
            krylov_tol: default_krylov_tol(),
            krylov_max_iter: default_krylov_iter(),
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.convergence_tol = tol;
        self
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(Error::Invalid("lambda must be finite".into()));
        }
        if self.epsilons.is_empty() {
            return Err(Error::Invalid("epsilon sequence is empty".into()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Invalid("epsilons must be positive".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Invalid(
                "epsilons must be strictly decreasing".into(),
            ));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Invalid("convergence_tol must be positive".into()));
        }
        Ok(())
    }
}

enum Factor {
    Band {
        fwd: BandLu,
        adj: BandLu,
    },
    Dense {
        fwd: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
        adj: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    },
    Krylov {
        h: Arc<Hamiltonian>,
        tol: f64,
        max_iter: usize,
    },
}

/// R = (H − λ ∓ iε)^{-1} at a fixed ε, as a linear map.
///
/// With a CAP, H − iW is not hermitian; the minus branch is taken as the adjoint
/// of the plus branch so that both absorb at the box edge.
pub struct Resolvent {
    n: usize,
    branch: Branch,
    /// z = λ + iε; the plus-branch matrix is H − z.
    z: C64,
    factor: Factor,
}

impl Resolvent {
    pub fn new(
        h: Arc<Hamiltonian>,
        lambda: f64,
        epsilon: f64,
        branch: Branch,
        solver: SolverKind,
    ) -> Result<Self> {
        Self::with_krylov(
            h,
            lambda,
            epsilon,
            branch,
            solver,
            default_krylov_tol(),
            default_krylov_iter(),
        )
    }

    pub fn with_krylov(
        h: Arc<Hamiltonian>,
        lambda: f64,
        epsilon: f64,
        branch: Branch,
        solver: SolverKind,
        krylov_tol: f64,
        krylov_max_iter: usize,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Invalid(format!(
                "epsilon = {epsilon} must be positive"
            )));
        }
        let n = h.rows();
        let z = C64::new(lambda, epsilon);
        let kind = match solver {
            SolverKind::Auto => {
                if h.bandwidth().is_some() {
                    SolverKind::BandedDirect
                } else if n <= DENSE_LIMIT {
                    SolverKind::DenseDirect
                } else {
                    SolverKind::Iterative
                }
            }
            k => k,
        };
        let factor = match kind {
            SolverKind::BandedDirect => {
                let b = h.bandwidth().ok_or_else(|| {
                    Error::Invalid("banded solver needs a 1D Dirichlet box".into())
                })?;
                let width = 2 * b + 1;
                let mut band = vec![C64::new(0.0, 0.0); n * width];
                for i in 0..n {
                    band[i * width + b] += h.diag(i) - z;
                    for (j, c) in &h.hops()[i] {
                        band[i * width + (j + b - i)] += c;
                    }
                }
                let at = |i: usize, j: usize| {
                    if i.abs_diff(j) > b {
                        C64::new(0.0, 0.0)
                    } else {
                        band[i * width + (j + b - i)]
                    }
                };
                let fwd = BandLu::factor(n, b, b, at)?;
                let adj = BandLu::factor(n, b, b, |i, j| at(j, i).conj())?;
                Factor::Band { fwd, adj }
            }
            SolverKind::DenseDirect => {
                let mut m = h.to_dense();
                for i in 0..n {
                    m[(i, i)] -= z;
                }
                let adj = m.adjoint().lu();
                let fwd = m.lu();
                if !fwd.is_invertible() {
                    return Err(Error::Breakdown("singular shifted matrix".into()));
                }
                Factor::Dense { fwd, adj }
            }
            SolverKind::Iterative => Factor::Krylov {
                h,
                tol: krylov_tol,
                max_iter: krylov_max_iter,
            },
            SolverKind::Auto => unreachable!(),
        };
        Ok(Resolvent {
            n,
            branch,
            z,
            factor,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.z.im
    }

    /// (H − z)^{-1} b, or its adjoint.
    fn solve_plus(&self, b: &[C64], adjoint: bool) -> Result<Vec<C64>> {
        check_len(self.n, b)?;
        match &self.factor {
            Factor::Band { fwd, adj } => Ok(if adjoint { adj.solve(b) } else { fwd.solve(b) }),
            Factor::Dense { fwd, adj } => {
                let rhs = DVector::from_column_slice(b);
                let lu = if adjoint { adj } else { fwd };
                lu.solve(&rhs)
                    .map(|x| x.as_slice().to_vec())
                    .ok_or_else(|| Error::Breakdown("singular shifted matrix".into()))
            }
            Factor::Krylov { h, tol, max_iter } => {
                let zz = if adjoint { self.z.conj() } else { self.z };
                let diag: Vec<C64> = (0..self.n)
                    .map(|i| {
                        let d = h.diag(i);
                        (if adjoint { d.conj() } else { d }) - zz
                    })
                    .collect();
                let op = |x: &[C64]| -> Vec<C64> {
                    let hx = if adjoint {
                        h.adjoint_apply(x)
                    } else {
                        h.apply(x)
                    }
                    .expect("length checked");
                    hx.iter().zip(x).map(|(a, b)| a - zz * b).collect()
                };
                Ok(bicgstab(op, &diag, b, *tol, *max_iter)?.x)
            }
        }
    }
}

impl LinearMap for Resolvent {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.solve_plus(u, self.branch == Branch::Minus)
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.solve_plus(u, self.branch == Branch::Plus)
    }
}

#[derive(Clone, Debug)]
pub struct LapSolution {
    pub u: Vec<C64>,
    /// ε at which successive solves agreed.
    pub epsilon: f64,
    /// Number of ε values tried.
    pub steps: usize,
    /// Relative inner-region change at acceptance.
    pub last_change: f64,
}

/// Sites where the CAP vanishes.
pub fn inner_mask(h: &Hamiltonian) -> Vec<bool> {
    h.cap_values().iter().map(|w| *w == 0.0).collect()
}

fn masked_norm(u: &[C64], mask: &[bool]) -> f64 {
    u.iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(x, _)| x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Solves (H − λ ∓ iε)u = rhs down the ε sequence until the inner region settles.
pub fn lap_solve(h: &Arc<Hamiltonian>, cfg: &LapConfig, rhs: &[C64]) -> Result<LapSolution> {
    cfg.validate()?;
    check_len(h.rows(), rhs)?;
    let mask = inner_mask(h);
    let total = norm2(rhs);
    if total == 0.0 {
        return Ok(LapSolution {
            u: vec![C64::new(0.0, 0.0); rhs.len()],
            epsilon: cfg.epsilons[0],
            steps: 0,
            last_change: 0.0,
        });
    }
    let outside = rhs
        .iter()
        .zip(&mask)
        .filter(|(_, m)| !**m)
        .map(|(x, _)| x.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if outside > 1e-6 * total {
        return Err(Error::Invalid(
            "rhs must be supported in the CAP-free region".into(),
        ));
    }
    lap_solve_unchecked(h, cfg, rhs)
}

fn lap_solve_unchecked(h: &Arc<Hamiltonian>, cfg: &LapConfig, rhs: &[C64]) -> Result<LapSolution> {
    let mask = inner_mask(h);
    let mut prev: Option<Vec<C64>> = None;
    let mut last_change = f64::INFINITY;
    for (k, &eps) in cfg.epsilons.iter().enumerate() {
        let r = Resolvent::with_krylov(
            h.clone(),
            cfg.lambda,
            eps,
            cfg.branch,
            cfg.solver,
            cfg.krylov_tol,
            cfg.krylov_max_iter,
        )?;
        let u = r.apply(rhs)?;
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Breakdown(format!(
                "non-finite solution at eps = {eps:e}"
            )));
        }
        if let Some(p) = &prev {
            let diff: Vec<C64> = u.iter().zip(p).map(|(a, b)| a - b).collect();
            let base = masked_norm(p, &mask);
            last_change = if base == 0.0 {
                0.0
            } else {
                masked_norm(&diff, &mask) / base
            };
            if last_change < cfg.convergence_tol {
                return Ok(LapSolution {
                    u,
                    epsilon: eps,
                    steps: k + 1,
                    last_change,
                });
            }
        }
        prev = Some(u);
    }
    Err(Error::LapNoConvergence {
        eps_floor: *cfg.epsilons.last().expect("validated non-empty"),
        last_change,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SandwichNorm {
    pub norm: f64,
    pub epsilon: f64,
    pub iterations: usize,
}

/// ‖A_left R^± A_right‖ with ε fixed by a LAP solve on a probe vector.
pub fn sandwich_norm(
    a_left: Map,
    h: &Arc<Hamiltonian>,
    cfg: &LapConfig,
    a_right: Map,
    tol: f64,
) -> Result<SandwichNorm> {
    cfg.validate()?;
    let n = h.rows();
    if a_left.cols() != n || a_right.rows() != n {
        return Err(Error::Dim {
            expected: n,
            got: if a_left.cols() != n {
                a_left.cols()
            } else {
                a_right.rows()
            },
        });
    }
    let probe = a_right.apply(&seeded_vector(norm_seed(), a_right.cols()))?;
    if norm2(&probe) == 0.0 {
        return Ok(SandwichNorm {
            norm: 0.0,
            epsilon: cfg.epsilons[0],
            iterations: 0,
        });
    }
    let sol = lap_solve_unchecked(h, cfg, &probe)?;
    if norm2(&a_left.apply(&sol.u)?) == 0.0 {
        return Ok(SandwichNorm {
            norm: 0.0,
            epsilon: sol.epsilon,
            iterations: 0,
        });
    }
    let r: Map = Arc::new(Resolvent::with_krylov(
        h.clone(),
        cfg.lambda,
        sol.epsilon,
        cfg.branch,
        cfg.solver,
        cfg.krylov_tol,
        cfg.krylov_max_iter,
    )?);
    let m = compose(vec![a_left, r, a_right]);
    let est = operator_norm(m.as_ref(), tol, 2000)?;
    Ok(SandwichNorm {
        norm: est.value,
        epsilon: sol.epsilon,
        iterations: est.iterations,
    })
}

/// Whether the kernel point is expected off or on the outgoing sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Off,
    On,
    Any,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WfOptions {
    pub expectation: Expectation,
    /// Box radius is `box_factor · max(|x|, |y|) / min h`.
    pub box_factor: f64,
    pub convergence_tol: f64,
    pub norm_tol: f64,
}

impl Default for WfOptions {
    fn default() -> Self {
        WfOptions {
            expectation: Expectation::Off,
            box_factor: 8.0,
            convergence_tol: 1e-8,
            norm_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeRow {
    /// h for semiclassical probes, box radius L for the boundedness probes.
    pub param: f64,
    pub epsilon: f64,
    pub norm: f64,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WfProbe {
    pub rows: Vec<ProbeRow>,
    pub fit: DecayFit,
    pub membership: MembershipReport,
    pub radius: usize,
}

pub fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// Box radius from the wave-front box rule.
pub fn wf_radius(kp: &KernelPoint, h_min: f64, factor: f64) -> Result<usize> {
    if factor < 4.0 {
        return Err(Error::BoxTooSmall(format!(
            "box factor {factor} is below 4, scaled points would reach the CAP"
        )));
    }
    let reach = sup_abs(&kp.x).max(sup_abs(&kp.y)).max(1.0);
    Ok((factor * reach / h_min).ceil() as usize)
}

/// ‖Op^h(a₁) R⁺ Op^h(a₂)‖ against h, with a₁ at (x, ξ) and a₂ at (−y, η).
pub fn wf_probe(
    model: &ModelSpec,
    kp: &KernelPoint,
    lambda: f64,
    h_list: &[f64],
    delta1: f64,
    delta2: f64,
    opts: &WfOptions,
) -> Result<WfProbe> {
    if kp.dim() != model.dim() {
        return Err(Error::Dim {
            expected: model.dim(),
            got: kp.dim(),
        });
    }
    if h_list.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) || h_list.is_empty() {
        return Err(Error::Invalid("h values must lie in (0, 1]".into()));
    }
    let membership = classify(kp, &model.stencil, lambda, 3.0 * delta1)?;
    match opts.expectation {
        Expectation::Off if !membership.off_outgoing() => {
            return Err(Error::Hypothesis(format!(
                "kernel point lies within {} of Σ₀ ∪ Σ₊ ∪ Σ'₊",
                3.0 * delta1
            )))
        }
        Expectation::On if membership.off_outgoing() => {
            return Err(Error::Hypothesis(
                "control point is not on an outgoing set".into(),
            ))
        }
        _ => {}
    }
    let h_min = h_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let radius = wf_radius(kp, h_min, opts.box_factor)?;
    let ham = Arc::new(model.hamiltonian(radius)?);
    let bx = ham.lattice_box();
    let cfg = LapConfig::new(lambda, Branch::Plus).with_tol(opts.convergence_tol);
    let minus_y: Vec<f64> = kp.y.iter().map(|v| -v).collect();
    let a1 = make_bump(kp.x.clone(), kp.xi.clone(), delta1, delta2)?;
    let a2 = make_bump(minus_y, kp.eta.clone(), delta1, delta2)?;
    let mut rows = Vec::new();
    for &h in h_list {
        let t0 = Instant::now();
        let l = op_h_map(&a1, h, bx, ResolutionPolicy::Strict)?;
        let r = op_h_map(&a2, h, bx, ResolutionPolicy::Strict)?;
        let s = sandwich_norm(l, &ham, &cfg, r, opts.norm_tol)?;
        rows.push(ProbeRow {
            param: h,
            epsilon: s.epsilon,
            norm: s.norm,
            iterations: s.iterations,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.param).collect();
    let ns: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let fit = DecayFit::fit(&hs, &ns)?;
    Ok(WfProbe {
        rows,
        fit,
        membership,
        radius,
    })
}

/// Table of norms over box radii with the "last ≤ factor × min" rule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundednessTable {
    pub rows: Vec<ProbeRow>,
    pub ratio: f64,
    pub bounded: bool,
}

pub const BOUNDED_FACTOR: f64 = 1.2;

impl BoundednessTable {
    pub fn from_rows(rows: Vec<ProbeRow>) -> Self {
        let min = rows.iter().map(|r| r.norm).fold(f64::INFINITY, f64::min);
        let last = rows.last().map(|r| r.norm).unwrap_or(0.0);
        let ratio = if min > 0.0 {
            last / min
        } else if last == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        BoundednessTable {
            rows,
            ratio,
            bounded: ratio <= BOUNDED_FACTOR,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeOptions {
    pub window: (f64, f64),
    pub r0: f64,
    pub epsilon: f64,
    pub norm_tol: f64,
}

impl Default for ConeOptions {
    fn default() -> Self {
        ConeOptions {
            window: (0.8, 1.2),
            r0: 10.0,
            epsilon: 1e-9,
            norm_tol: 1e-6,
        }
    }
}

fn check_lambda_in(window: (f64, f64), lambda: f64) -> Result<()> {
    if !(lambda > window.0 && lambda < window.1) {
        return Err(Error::Invalid(format!(
            "lambda = {lambda} outside the cone window {window:?}"
        )));
    }
    Ok(())
}

fn fixed_resolvent(h: &Arc<Hamiltonian>, lambda: f64, eps: f64, branch: Branch) -> Result<Map> {
    Ok(Arc::new(Resolvent::new(
        h.clone(),
        lambda,
        eps,
        branch,
        SolverKind::Auto,
    )?))
}

/// ‖⟨n⟩^N A₋ R⁺ A₊* ⟨n⟩^N‖ for each radius; A∓ are incoming/outgoing cones
/// tapered off before the CAP.
pub fn ik_probe(
    model: &ModelSpec,
    lambda: f64,
    gamma_minus: f64,
    gamma_plus: f64,
    weight: f64,
    radii: &[usize],
    opts: &ConeOptions,
) -> Result<BoundednessTable> {
    if !(-1.0 < gamma_minus && gamma_minus < gamma_plus && gamma_plus < 1.0) {
        return Err(Error::Invalid(format!(
            "need -1 < gamma_minus < gamma_plus < 1, got {gamma_minus}, {gamma_plus}"
        )));
    }
    check_lambda_in(opts.window, lambda)?;
    let mut rows = Vec::new();
    for &l in radii {
        let t0 = Instant::now();
        let ham = Arc::new(model.hamiltonian(l)?);
        let bx = ham.lattice_box();
        let inner = ham
            .cap_values()
            .iter()
            .zip(bx.sites())
            .filter(|(w, _)| **w == 0.0)
            .map(|(_, s)| LatticeBox::sup_norm(&s))
            .max()
            .unwrap_or(0) as f64;
        let cone = |dir, g| -> Result<Map> {
            let spec = ConeSpec::new(dir, g, opts.window, opts.r0).with_outer(inner);
            op_h_map(
                &make_cone_symbol(&model.stencil, &spec)?,
                1.0,
                bx,
                ResolutionPolicy::WarnOnly,
            )
        };
        let a_minus = cone(Direction::Incoming, gamma_minus)?;
        let a_plus = cone(Direction::Outgoing, gamma_plus)?;
        let w = position_weight(weight, bx);
        let r = fixed_resolvent(&ham, lambda, opts.epsilon, Branch::Plus)?;
        let m = compose(vec![w.clone(), a_minus, r, adjoint(a_plus), w]);
        let est = operator_norm(m.as_ref(), opts.norm_tol, 2000)?;
        rows.push(ProbeRow {
            param: l as f64,
            epsilon: opts.epsilon,
            norm: est.value,
            iterations: est.iterations,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(BoundednessTable::from_rows(rows))
}

/// ‖⟨n⟩^{−ν} R^± Op(a_±) ⟨n⟩^{s}‖ for each radius. For the plus branch a₊ is the
/// outgoing cone {cos ≥ γ}; for minus, the mirrored incoming cone {cos ≤ −γ}.
#[allow(clippy::too_many_arguments)]
pub fn one_sided_probe(
    model: &ModelSpec,
    lambda: f64,
    branch: Branch,
    gamma: f64,
    nu: f64,
    s: f64,
    radii: &[usize],
    opts: &ConeOptions,
) -> Result<BoundednessTable> {
    if !(nu > 1.0) {
        return Err(Error::Invalid(format!("nu = {nu} must exceed 1")));
    }
    if !(s > 0.0 && s < nu - 1.0) {
        return Err(Error::Invalid(format!(
            "need 0 < s < nu - 1, got s = {s}, nu = {nu}"
        )));
    }
    if !(gamma > -1.0 && gamma < 1.0) {
        return Err(Error::Invalid(format!("gamma = {gamma} not in (-1, 1)")));
    }
    check_lambda_in(opts.window, lambda)?;
    let (dir, g) = match branch {
        Branch::Plus => (Direction::Outgoing, gamma),
        Branch::Minus => (Direction::Incoming, -gamma),
    };
    let mut rows = Vec::new();
    for &l in radii {
        let t0 = Instant::now();
        let ham = Arc::new(model.hamiltonian(l)?);
        let bx = ham.lattice_box();
        let spec = ConeSpec::new(dir, g, opts.window, opts.r0);
        let a = op_h_map(
            &make_cone_symbol(&model.stencil, &spec)?,
            1.0,
            bx,
            ResolutionPolicy::WarnOnly,
        )?;
        let r = fixed_resolvent(&ham, lambda, opts.epsilon, branch)?;
        let m = compose(vec![position_weight(-nu, bx), r, a, position_weight(s, bx)]);
        let est = operator_norm(m.as_ref(), opts.norm_tol, 2000)?;
        rows.push(ProbeRow {
            param: l as f64,
            epsilon: opts.epsilon,
            norm: est.value,
            iterations: est.iterations,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(BoundednessTable::from_rows(rows))
}

/// Kernel of (H₀ − λ ∓ i0)^{-1} for p₀ = 1 − cos ξ: ±i e^{±iθ|n|}/sin θ, θ = arccos(1 − λ).
pub fn free_kernel_1d(lambda: f64, branch: Branch, n: i64) -> Result<C64> {
    if !(lambda > 0.0 && lambda < 2.0) {
        return Err(Error::Invalid(format!(
            "lambda = {lambda} must lie strictly inside (0, 2)"
        )));
    }
    let theta = (1.0 - lambda).acos();
    let plus = I * C64::from_polar(1.0, theta * n.unsigned_abs() as f64) / theta.sin();
    Ok(match branch {
        Branch::Plus => plus,
        Branch::Minus => plus.conj(),
    })
}

/// Dense (H − z)^{-1} for small oracles.
pub fn dense_resolvent(h: &Hamiltonian, z: C64) -> Result<DMatrix<C64>> {
    let mut m = h.to_dense();
    for i in 0..m.nrows() {
        m[(i, i)] -= z;
    }
    m.try_inverse()
        .ok_or_else(|| Error::Breakdown("singular dense resolvent".into()))
}

/// Dense map wrapper, handy for tests and low-rank probes.
pub fn dense_map(m: DMatrix<C64>) -> Map {
    Arc::new(Dense(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, Potential, Stencil};
    use crate::linmap::{Identity, Zero};

    fn free(radius: usize, cap: bool) -> Arc<Hamiltonian> {
        let m = ModelSpec::free_1d();
        Arc::new(
            if cap {
                m.hamiltonian(radius)
            } else {
                m.hermitian(radius)
            }
            .unwrap(),
        )
    }

    fn delta0(h: &Hamiltonian) -> Vec<C64> {
        let bx = h.lattice_box();
        let mut d = vec![C64::new(0.0, 0.0); bx.len()];
        d[bx.index(&vec![0; bx.dim]).unwrap()] = C64::new(1.0, 0.0);
        d
    }

    #[test]
    fn free_kernel_values() {
        let k0 = free_kernel_1d(1.0, Branch::Plus, 0).unwrap();
        assert!((k0 - I).norm() < 1e-14);
        let k2 = free_kernel_1d(1.0, Branch::Plus, 2).unwrap();
        assert!((k2 + I).norm() < 1e-14);
        let m = free_kernel_1d(0.3, Branch::Minus, 5).unwrap();
        assert!((m - free_kernel_1d(0.3, Branch::Plus, 5).unwrap().conj()).norm() < 1e-15);
        assert!(free_kernel_1d(2.0, Branch::Plus, 1).is_err());
        assert!(free_kernel_1d(0.0, Branch::Plus, 1).is_err());
    }

    #[test]
    fn free_kernel_solves_the_difference_equation() {
        for lambda in [0.3, 1.0, 1.7] {
            let k = |n: i64| free_kernel_1d(lambda, Branch::Plus, n).unwrap();
            for n in -20i64..=20 {
                // (H₀ − λ)u(n) = (1 − λ)u(n) − (u(n+1) + u(n−1))/2
                let r = (1.0 - lambda) * k(n) - 0.5 * (k(n + 1) + k(n - 1));
                let expect = if n == 0 { 1.0 } else { 0.0 };
                assert!((r - expect).norm() < 1e-10, "lambda {lambda} n {n}: {r}");
            }
        }
    }

    #[test]
    fn lap_column_matches_free_oracle() {
        let h = free(512, true);
        let cfg = LapConfig::new(1.0, Branch::Plus).with_tol(1e-6);
        let sol = lap_solve(&h, &cfg, &delta0(&h)).unwrap();
        let bx = h.lattice_box();
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for (i, s) in bx.sites().enumerate() {
            if s[0].abs() <= 256 {
                let k = free_kernel_1d(1.0, Branch::Plus, s[0]).unwrap();
                err = err.max((sol.u[i] - k).norm());
                scale = scale.max(k.norm());
            }
        }
        assert!(err / scale < 1e-3, "relative error {}", err / scale);
    }

    #[test]
    fn off_spectrum_matches_dense() {
        let h = free(40, false);
        let cfg = LapConfig::new(3.0, Branch::Plus).with_tol(1e-10);
        let sol = lap_solve(&h, &cfg, &delta0(&h)).unwrap();
        let r = dense_resolvent(&h, C64::new(3.0, 0.0)).unwrap();
        let d = DVector::from_vec(delta0(&h));
        let exact = &r * d;
        let diff: f64 = sol
            .u
            .iter()
            .zip(exact.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-8 * exact.norm(), "diff {diff}");
        // exponential decay away from the source
        let mid = h.lattice_box().radius;
        assert!(sol.u[mid + 30].norm() < 1e-10 * sol.u[mid].norm());
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let h = free(32, true);
        let cfg = LapConfig::new(1.0, Branch::Plus);
        let sol = lap_solve(&h, &cfg, &vec![C64::new(0.0, 0.0); h.rows()]).unwrap();
        assert!(sol.u.iter().all(|x| *x == C64::new(0.0, 0.0)));
    }

    #[test]
    fn rhs_in_cap_rejected() {
        let h = free(32, true);
        let mut rhs = vec![C64::new(0.0, 0.0); h.rows()];
        rhs[0] = C64::new(1.0, 0.0);
        assert!(matches!(
            lap_solve(&h, &LapConfig::new(1.0, Branch::Plus), &rhs),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = LapConfig::new(1.0, Branch::Plus);
        cfg.epsilons = vec![0.1, 0.2];
        assert!(cfg.validate().is_err());
        cfg.epsilons = vec![];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn branch_symmetry_free() {
        let h = free(128, true);
        let d = delta0(&h);
        let p = lap_solve(&h, &LapConfig::new(1.0, Branch::Plus).with_tol(1e-6), &d).unwrap();
        let m = lap_solve(&h, &LapConfig::new(1.0, Branch::Minus).with_tol(1e-6), &d).unwrap();
        assert_eq!(p.epsilon, m.epsilon);
        let err: f64 =
            p.u.iter()
                .zip(&m.u)
                .map(|(a, b)| (a.conj() - b).norm())
                .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn eps_differences_shrink() {
        let h = free(256, true);
        let d = delta0(&h);
        let mask = inner_mask(&h);
        let sols: Vec<Vec<C64>> = (8..16)
            .map(|k| {
                Resolvent::new(
                    h.clone(),
                    1.0,
                    2f64.powi(-k),
                    Branch::Plus,
                    SolverKind::Auto,
                )
                .unwrap()
                .apply(&d)
                .unwrap()
            })
            .collect();
        let diffs: Vec<f64> = sols
            .windows(2)
            .map(|w| {
                let d: Vec<C64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
                masked_norm(&d, &mask)
            })
            .collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    }

    fn check_resolvent_identity(h: Arc<Hamiltonian>, solver: SolverKind) {
        let (e1, e2) = (0.3, 0.05);
        let r1 = Resolvent::new(h.clone(), 0.9, e1, Branch::Plus, solver).unwrap();
        let r2 = Resolvent::new(h.clone(), 0.9, e2, Branch::Plus, solver).unwrap();
        let dz = C64::new(0.0, e1 - e2);
        for seed in 0..3 {
            let v = seeded_vector(seed, h.rows());
            let lhs: Vec<C64> = r1
                .apply(&v)
                .unwrap()
                .iter()
                .zip(r2.apply(&v).unwrap())
                .map(|(a, b)| a - b)
                .collect();
            let rhs: Vec<C64> = r1
                .apply(&r2.apply(&v).unwrap())
                .unwrap()
                .iter()
                .map(|x| dz * x)
                .collect();
            let diff: Vec<C64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            assert!(
                norm2(&diff) < 1e-8 * norm2(&lhs),
                "{solver:?}: {}",
                norm2(&diff) / norm2(&lhs)
            );
        }
    }

    #[test]
    fn resolvent_identity_all_solvers() {
        let m = ModelSpec::reference_1d();
        check_resolvent_identity(
            Arc::new(m.hamiltonian(60).unwrap()),
            SolverKind::BandedDirect,
        );
        check_resolvent_identity(
            Arc::new(m.hamiltonian(60).unwrap()),
            SolverKind::DenseDirect,
        );
        let m2 = ModelSpec {
            stencil: Stencil::laplacian(2),
            potential: Potential::power_law(0.5, 0.5).unwrap(),
            cap: Some(Default::default()),
            boundary: Boundary::Dirichlet,
        };
        check_resolvent_identity(Arc::new(m2.hamiltonian(12).unwrap()), SolverKind::Iterative);
    }

    #[test]
    fn solvers_agree_and_adjoints_match() {
        let h = Arc::new(ModelSpec::reference_1d().hamiltonian(40).unwrap());
        let v = seeded_vector(7, h.rows());
        for branch in [Branch::Plus, Branch::Minus] {
            let b = Resolvent::new(h.clone(), 1.1, 0.05, branch, SolverKind::BandedDirect).unwrap();
            let d = Resolvent::new(h.clone(), 1.1, 0.05, branch, SolverKind::DenseDirect).unwrap();
            let k = Resolvent::new(h.clone(), 1.1, 0.05, branch, SolverKind::Iterative).unwrap();
            let (xb, xd, xk) = (
                b.apply(&v).unwrap(),
                d.apply(&v).unwrap(),
                k.apply(&v).unwrap(),
            );
            let e1: Vec<C64> = xb.iter().zip(&xd).map(|(a, b)| a - b).collect();
            let e2: Vec<C64> = xk.iter().zip(&xd).map(|(a, b)| a - b).collect();
            assert!(norm2(&e1) < 1e-10 * norm2(&xd));
            assert!(norm2(&e2) < 1e-7 * norm2(&xd));
            assert!(crate::linmap::adjoint_defect(&b, 3, 3).unwrap() < 1e-10);
            assert!(crate::linmap::adjoint_defect(&k, 3, 3).unwrap() < 1e-7);
        }
    }

    #[test]
    fn sandwich_identity_off_spectrum() {
        let h = free(200, false);
        let n = h.rows();
        let cfg = LapConfig::new(3.0, Branch::Plus);
        let id: Map = Arc::new(Identity(n));
        let s = sandwich_norm(id.clone(), &h, &cfg, id.clone(), 1e-4).unwrap();
        assert!((s.norm - 1.0).abs() < 0.02, "{}", s.norm);
        let z: Map = Arc::new(Zero { rows: n, cols: n });
        assert_eq!(sandwich_norm(z, &h, &cfg, id, 1e-4).unwrap().norm, 0.0);
    }

    #[test]
    fn one_sided_parameter_checks() {
        let m = ModelSpec::free_1d();
        let o = ConeOptions::default();
        assert!(matches!(
            one_sided_probe(&m, 1.0, Branch::Plus, -0.4, 3.0, 2.5, &[64], &o),
            Err(Error::Invalid(_))
        ));
        assert!(one_sided_probe(&m, 1.0, Branch::Plus, -0.4, 0.9, 0.1, &[64], &o).is_err());
        assert!(ik_probe(&m, 1.0, 0.3, -0.3, 1.0, &[64], &o).is_err());
    }

    #[test]
    fn wf_probe_rejects_small_box_and_wrong_expectation() {
        let m = ModelSpec::free_1d();
        let kp = KernelPoint::d1(-4.0, PI_2, -3.0, -PI_2);
        let opts = WfOptions {
            box_factor: 2.0,
            ..Default::default()
        };
        assert!(matches!(
            wf_probe(&m, &kp, 1.0, &[0.5, 0.25], 0.2, 0.2, &opts),
            Err(Error::BoxTooSmall(_))
        ));
        let on = KernelPoint::d1(4.0, PI_2, -3.0, PI_2);
        assert!(matches!(
            wf_probe(&m, &on, 1.0, &[0.5, 0.25], 0.2, 0.2, &WfOptions::default()),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn wf_probe_decays_off_set() {
        // small run; the full range lives in the acceptance target
        let m = ModelSpec::free_1d();
        let kp = KernelPoint::d1(-4.0, PI_2, -3.0, -PI_2);
        let p = wf_probe(
            &m,
            &kp,
            1.0,
            &[0.5, 0.25, 0.125, 1.0 / 16.0],
            0.2,
            1.0,
            &WfOptions::default(),
        )
        .unwrap();
        let n: Vec<f64> = p.rows.iter().map(|r| r.norm).collect();
        assert!(n[3] < n[2] && n[2] < n[1], "{n:?}");
    }

    const PI_2: f64 = std::f64::consts::FRAC_PI_2;
}
