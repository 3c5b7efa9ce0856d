//! Time evolution, functional calculus and the time-domain probes.

mod chebyshev;

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use chebyshev::{bessel_j, enclosure, ChebyshevPlan};

use crate::error::{Error, Result};
use crate::escape::cutoff::phi;
use crate::fit::DecayFit;
use crate::geometry::{classify, make_bump, KernelPoint, MembershipReport};
use crate::lattice::{for_each_torus_point, Hamiltonian, ModelSpec};
use crate::linmap::{check_len, compose, Dense, LinearMap, Map, C64};
use crate::quantize::{op_h_map, operator_norm, position_weight, ResolutionPolicy};
use crate::resolvent::{wf_radius, Expectation};

pub const DEFAULT_TOL: f64 = 1e-12;

/// f with f = 1 on [λ − ε_f, λ + ε_f] and supp f ⊂ [λ − 2ε_f, λ + 2ε_f].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCutoff {
    pub lambda: f64,
    pub eps_f: f64,
}

impl EnergyCutoff {
    pub fn new(lambda: f64, eps_f: f64) -> Result<Self> {
        if !(eps_f > 0.0 && lambda.is_finite()) {
            return Err(Error::Invalid(format!(
                "cutoff needs eps_f > 0, got {eps_f}"
            )));
        }
        Ok(EnergyCutoff { lambda, eps_f })
    }

    pub fn eval(&self, z: f64) -> f64 {
        phi((z - self.lambda).abs() / (2.0 * self.eps_f))
    }

    pub fn support(&self) -> (f64, f64) {
        (
            self.lambda - 2.0 * self.eps_f,
            self.lambda + 2.0 * self.eps_f,
        )
    }
}

fn require_hermitian(h: &Hamiltonian) -> Result<()> {
    if h.has_cap() {
        let w = h.cap_values().iter().fold(0.0f64, |a, b| a.max(*b));
        return Err(Error::NotHermitian(w));
    }
    Ok(())
}

/// e^{−itH}u for hermitian H.
pub fn evolve(h: &Hamiltonian, u: &[C64], t: f64, tol: f64) -> Result<Vec<C64>> {
    require_hermitian(h)?;
    check_len(h.rows(), u)?;
    if t == 0.0 {
        return Ok(u.to_vec());
    }
    let (c, r) = enclosure(h);
    ChebyshevPlan::propagator(c, r, t, tol)?.apply(h, u, false)
}

pub fn f_of_h_plan(h: &Hamiltonian, cutoff: &EnergyCutoff, tol: f64) -> Result<ChebyshevPlan> {
    require_hermitian(h)?;
    let (c, r) = enclosure(h);
    let cut = *cutoff;
    ChebyshevPlan::function(c, r, move |z| cut.eval(z), tol)
}

/// f(H)u for hermitian H.
pub fn apply_f_of_h(h: &Hamiltonian, cutoff: &EnergyCutoff, u: &[C64]) -> Result<Vec<C64>> {
    check_len(h.rows(), u)?;
    f_of_h_plan(h, cutoff, DEFAULT_TOL)?.apply(h, u, false)
}

/// p(H) as a linear map (hermitian H).
pub struct SpectralMap {
    h: Arc<Hamiltonian>,
    plan: ChebyshevPlan,
}

impl SpectralMap {
    pub fn new(h: Arc<Hamiltonian>, plan: ChebyshevPlan) -> Result<Self> {
        require_hermitian(&h)?;
        Ok(SpectralMap { h, plan })
    }
    pub fn plan(&self) -> &ChebyshevPlan {
        &self.plan
    }
}

impl LinearMap for SpectralMap {
    fn rows(&self) -> usize {
        self.h.rows()
    }
    fn cols(&self) -> usize {
        self.h.rows()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.plan.apply(self.h.as_ref(), u, false)
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.plan.apply(self.h.as_ref(), u, true)
    }
}

/// Largest |v(ξ)| over momenta with p₀(ξ) in the cutoff support.
pub fn max_velocity(model: &ModelSpec, cutoff: &EnergyCutoff) -> f64 {
    let (lo, hi) = cutoff.support();
    let mut vmax = 0.0f64;
    let n = crate::geometry::default_grid(model.dim());
    for_each_torus_point(model.dim(), n, |xi| {
        let p = model.stencil.p0(xi);
        if p > lo && p < hi {
            let v = model.stencil.velocity(xi);
            vmax = vmax.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
    });
    vmax
}

/// Largest t before packets in supp f can cross 0.8 of the box.
pub fn reflection_limit(model: &ModelSpec, cutoff: &EnergyCutoff, radius: usize) -> f64 {
    let v = max_velocity(model, cutoff);
    if v == 0.0 {
        f64::INFINITY
    } else {
        0.8 * radius as f64 / v
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeRow {
    pub h: f64,
    pub t: f64,
    pub norm: f64,
    pub chebyshev_terms: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalDecay {
    pub rows: Vec<TimeRow>,
    /// Fit of ln norm against ln⟨t⟩ over the tail half.
    pub fit: DecayFit,
    /// −slope of the fit.
    pub kappa: f64,
}

/// ‖⟨n⟩^{−ν} e^{−itH} f(H) ⟨n⟩^{−ν}‖ along `t_grid` on a CAP-free box.
pub fn local_decay_probe(
    model: &ModelSpec,
    cutoff: &EnergyCutoff,
    nu: f64,
    t_grid: &[f64],
    radius: usize,
) -> Result<LocalDecay> {
    if t_grid.len() < 2 * DecayFit::MIN_POINTS {
        return Err(Error::Fit {
            need: 2 * DecayFit::MIN_POINTS,
            got: t_grid.len(),
        });
    }
    if t_grid.iter().any(|t| *t < 0.0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid(
            "t grid must be non-negative and increasing".into(),
        ));
    }
    let limit = reflection_limit(model, cutoff, radius);
    let t_last = *t_grid.last().expect("non-empty");
    if t_last > limit {
        return Err(Error::ReflectionWindow { t: t_last, limit });
    }
    let h = Arc::new(model.hermitian(radius)?);
    let bx = h.lattice_box();
    let (c, r) = enclosure(&h);
    let f: Map = Arc::new(SpectralMap::new(
        h.clone(),
        f_of_h_plan(&h, cutoff, DEFAULT_TOL)?,
    )?);
    let w = position_weight(-nu, bx);
    let mut rows = Vec::new();
    for &t in t_grid {
        let t0 = Instant::now();
        let plan = ChebyshevPlan::propagator(c, r, t, DEFAULT_TOL)?;
        let terms = plan.terms();
        let u: Map = Arc::new(SpectralMap::new(h.clone(), plan)?);
        let m = compose(vec![w.clone(), u, f.clone(), w.clone()]);
        let est = operator_norm(m.as_ref(), 1e-6, 2000)?;
        rows.push(TimeRow {
            h: 1.0,
            t,
            norm: est.value,
            chebyshev_terms: terms,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    let tail = &rows[rows.len() / 2..];
    let x: Vec<f64> = tail.iter().map(|r| (1.0 + r.t * r.t).sqrt()).collect();
    let y: Vec<f64> = tail.iter().map(|r| r.norm).collect();
    let fit = DecayFit::fit(&x, &y)?;
    let kappa = -fit.slope;
    Ok(LocalDecay { rows, fit, kappa })
}

/// Time horizon per h.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    /// T(h) = h^{−2}, capped by the reflection window.
    InverseSquare,
    Fixed(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationOptions {
    pub delta1: f64,
    pub delta2: f64,
    pub eps_f: f64,
    pub box_factor: f64,
    pub time_points: usize,
    pub horizon: Horizon,
    pub expectation: Expectation,
    pub norm_tol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            delta1: 0.2,
            delta2: 1.0,
            eps_f: 0.2,
            box_factor: 8.0,
            time_points: 32,
            horizon: Horizon::InverseSquare,
            expectation: Expectation::Off,
            norm_tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupRow {
    pub h: f64,
    pub radius: usize,
    pub horizon: f64,
    pub sup_norm: f64,
    pub t_at_sup: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagationProbe {
    pub sup_rows: Vec<SupRow>,
    pub time_rows: Vec<TimeRow>,
    /// Present when there are enough h values to fit.
    pub fit: Option<DecayFit>,
    pub membership: MembershipReport,
}

/// 0 followed by `n − 1` log-spaced points in [1, T].
pub fn log_time_grid(horizon: f64, n: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    if n < 2 {
        return g;
    }
    let k = n - 1;
    for i in 0..k {
        let s = if k == 1 {
            1.0
        } else {
            i as f64 / (k - 1) as f64
        };
        g.push(horizon.max(1.0).powf(s));
    }
    g.dedup();
    g
}

/// Rows of a map restricted to `rows`, as a dense |rows| × cols matrix.
fn dense_rows(a: &dyn LinearMap, rows: &[usize]) -> Result<DMatrix<C64>> {
    let mut m = DMatrix::zeros(rows.len(), a.cols());
    let mut e = vec![C64::new(0.0, 0.0); a.rows()];
    for (r, &i) in rows.iter().enumerate() {
        e[i] = C64::new(1.0, 0.0);
        let col = a.adjoint_apply(&e)?;
        e[i] = C64::new(0.0, 0.0);
        for (j, v) in col.iter().enumerate() {
            m[(r, j)] = v.conj();
        }
    }
    Ok(m)
}

/// sup_t ‖Op^h(a₁) e^{−itH} f(H) Op^h(a₂)‖ per h, with a₁ at (x, ξ) and a₂ at (−y, η).
///
/// Op^h(a₂) = b(hn) c(hD) has rows only where b ≠ 0, so it factors as P*M
/// with P the restriction to that strip; only those columns of f(H) are evolved.
pub fn propagation_probe(
    model: &ModelSpec,
    kp: &KernelPoint,
    lambda: f64,
    h_list: &[f64],
    opts: &PropagationOptions,
) -> Result<PropagationProbe> {
    if kp.dim() != model.dim() {
        return Err(Error::Dim {
            expected: model.dim(),
            got: kp.dim(),
        });
    }
    if h_list.is_empty() || h_list.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) {
        return Err(Error::Invalid("h values must lie in (0, 1]".into()));
    }
    let membership = classify(kp, &model.stencil, lambda, 3.0 * opts.delta1)?;
    let shell_gap = (model.stencil.p0(&kp.xi) - lambda)
        .abs()
        .max((model.stencil.p0(&kp.eta) - lambda).abs());
    match opts.expectation {
        Expectation::Off if !membership.off_outgoing() || shell_gap > 1e-9 => {
            return Err(Error::Hypothesis(
                "kernel point must be on-shell and off Σ₀ ∪ Σ₊ ∪ Σ'₊".into(),
            ))
        }
        Expectation::On if membership.off_outgoing() => {
            return Err(Error::Hypothesis(
                "control point is not on an outgoing set".into(),
            ))
        }
        _ => {}
    }
    let cutoff = EnergyCutoff::new(lambda, opts.eps_f)?;
    let minus_y: Vec<f64> = kp.y.iter().map(|v| -v).collect();
    let a1 = make_bump(kp.x.clone(), kp.xi.clone(), opts.delta1, opts.delta2)?;
    let a2 = make_bump(minus_y.clone(), kp.eta.clone(), opts.delta1, opts.delta2)?;
    let mut sup_rows = Vec::new();
    let mut time_rows = Vec::new();
    for &hs in h_list {
        let start = Instant::now();
        let radius = wf_radius(kp, hs, opts.box_factor)?;
        let ham = Arc::new(model.hermitian(radius)?);
        let bx = ham.lattice_box();
        let limit = reflection_limit(model, &cutoff, radius);
        let horizon = match opts.horizon {
            Horizon::InverseSquare => hs.powi(-2),
            Horizon::Fixed(t) => t,
        }
        .min(limit);
        let grid = log_time_grid(horizon, opts.time_points);
        let op1 = op_h_map(&a1, hs, bx, ResolutionPolicy::Strict)?;
        let op2 = op_h_map(&a2, hs, bx, ResolutionPolicy::Strict)?;
        // strip where b(hn) ≠ 0
        let strip: Vec<usize> = bx
            .sites()
            .enumerate()
            .filter(|(_, n)| {
                let r = n
                    .iter()
                    .zip(&minus_y)
                    .map(|(a, b)| (hs * *a as f64 - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                r < opts.delta1
            })
            .map(|(i, _)| i)
            .collect();
        let rows_m = dense_rows(op2.as_ref(), &strip)?;
        let right: Map = Arc::new(Dense(rows_m));
        let (c, r) = enclosure(&ham);
        let fplan = f_of_h_plan(&ham, &cutoff, DEFAULT_TOL)?;
        let mut cols: Vec<Vec<C64>> = strip
            .iter()
            .map(|&j| {
                let mut e = vec![C64::new(0.0, 0.0); bx.len()];
                e[j] = C64::new(1.0, 0.0);
                fplan.apply(ham.as_ref(), &e, false)
            })
            .collect::<Result<_>>()?;
        let mut t_prev = 0.0;
        let (mut best, mut best_t) = (0.0f64, 0.0);
        for &t in &grid {
            let t0 = Instant::now();
            let mut terms = 0;
            if t > t_prev {
                let step = ChebyshevPlan::propagator(c, r, t - t_prev, DEFAULT_TOL)?;
                terms = step.terms();
                for col in cols.iter_mut() {
                    *col = step.apply(ham.as_ref(), col, false)?;
                }
                t_prev = t;
            }
            let mut k = DMatrix::zeros(bx.len(), strip.len());
            for (j, col) in cols.iter().enumerate() {
                let v = op1.apply(col)?;
                k.column_mut(j).copy_from_slice(&v);
            }
            let left: Map = Arc::new(Dense(k));
            let m = compose(vec![left, right.clone()]);
            let norm = if strip.is_empty() {
                0.0
            } else {
                operator_norm(m.as_ref(), opts.norm_tol, 2000)?.value
            };
            if norm > best {
                best = norm;
                best_t = t;
            }
            time_rows.push(TimeRow {
                h: hs,
                t,
                norm,
                chebyshev_terms: terms,
                seconds: t0.elapsed().as_secs_f64(),
            });
        }
        sup_rows.push(SupRow {
            h: hs,
            radius,
            horizon,
            sup_norm: best,
            t_at_sup: best_t,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let hs: Vec<f64> = sup_rows.iter().map(|r| r.h).collect();
    let ns: Vec<f64> = sup_rows.iter().map(|r| r.sup_norm).collect();
    let fit = if hs.len() >= DecayFit::MIN_POINTS {
        Some(DecayFit::fit(&hs, &ns)?)
    } else {
        None
    };
    Ok(PropagationProbe {
        sup_rows,
        time_rows,
        fit,
        membership,
    })
}

/// Arithmetic on the split ∫₀^T + ∫_T^∞ with T = h^{−τ}: the head costs
/// h^{slope − τ}, the tail h^{τ(κ − 1) − 2ν} (weights ⟨n⟩^ν ≈ h^{−ν} on each side).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplittingReport {
    pub slope_prop: f64,
    pub kappa: f64,
    pub nu: f64,
    pub m: f64,
    /// Exponent at the fixed horizon τ = M + 6.
    pub exponent_at_m: f64,
    /// Best τ and the exponent it gives.
    pub tau_opt: f64,
    pub exponent_opt: f64,
    pub inconclusive: bool,
    pub flags: Vec<String>,
}

pub fn t_splitting_bound(slope_prop: f64, kappa: f64, nu: f64, m: f64) -> Result<SplittingReport> {
    if !(slope_prop.is_finite() && kappa.is_finite() && nu.is_finite() && m.is_finite()) {
        return Err(Error::Invalid("splitting needs finite fit values".into()));
    }
    let exponent = |tau: f64| (slope_prop - tau).min(tau * (kappa - 1.0) - 2.0 * nu);
    let mut flags = Vec::new();
    let inconclusive = kappa <= 1.0;
    let (tau_opt, exponent_opt) = if inconclusive {
        flags.push("splitting inconclusive: local decay rate does not exceed 1".to_string());
        (f64::NAN, f64::NEG_INFINITY)
    } else {
        let tau = (slope_prop + 2.0 * nu) / kappa;
        (tau, exponent(tau))
    };
    if exponent_opt <= 0.0 {
        flags.push("no decay in h implied".to_string());
    }
    Ok(SplittingReport {
        slope_prop,
        kappa,
        nu,
        m,
        exponent_at_m: if inconclusive {
            f64::NEG_INFINITY
        } else {
            exponent(m + 6.0)
        },
        tau_opt,
        exponent_opt,
        inconclusive,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::linmap::{dot, norm2, seeded_vector};
    use nalgebra::DVector;
    use std::f64::consts::FRAC_PI_2;

    fn small() -> Hamiltonian {
        // 16 sites
        let mut m = ModelSpec::reference_1d();
        m.cap = None;
        let h = m.hermitian(8).unwrap();
        let bx = h.lattice_box();
        assert_eq!(bx.len(), 17);
        h
    }

    fn diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn evolve_matches_eigendecomposition() {
        let h = small();
        let dense = h.to_dense();
        let eig = nalgebra::SymmetricEigen::new(dense.map(|z| z.re));
        let u = seeded_vector(3, h.rows());
        let t = 5.0;
        let q = eig.eigenvectors.map(|x| C64::new(x, 0.0));
        let ph = DMatrix::from_diagonal(&eig.eigenvalues.map(|w| C64::from_polar(1.0, -t * w)));
        let exact = &q * ph * q.adjoint() * DVector::from_column_slice(&u);
        let got = evolve(&h, &u, t, 1e-13).unwrap();
        assert!(diff(&got, exact.as_slice()) < 1e-9 * norm2(&u));
        assert_eq!(evolve(&h, &u, 0.0, 1e-13).unwrap(), u);
        assert!(evolve(&h, &u, -1.0, 1e-13).is_err());
    }

    #[test]
    fn unitarity_group_law_energy() {
        let h = ModelSpec::reference_1d().hermitian(64).unwrap();
        let u = seeded_vector(5, h.rows());
        let a = evolve(&h, &u, 3.3, 1e-13).unwrap();
        let ab = evolve(&h, &a, 7.1, 1e-13).unwrap();
        let direct = evolve(&h, &u, 10.4, 1e-13).unwrap();
        assert!((norm2(&a) - norm2(&u)).abs() < 1e-10 * norm2(&u));
        assert!(diff(&ab, &direct) < 1e-9 * norm2(&u));
        let e0 = dot(&u, &h.apply(&u).unwrap());
        let e1 = dot(&ab, &h.apply(&ab).unwrap());
        assert!((e0 - e1).norm() < 1e-9 * e0.norm());
    }

    #[test]
    fn cap_is_rejected() {
        let h = ModelSpec::free_1d().hamiltonian(32).unwrap();
        let u = seeded_vector(1, h.rows());
        assert!(matches!(
            evolve(&h, &u, 1.0, 1e-12),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn f_of_h_commutes_with_evolution() {
        let h = ModelSpec::reference_1d().hermitian(64).unwrap();
        let cut = EnergyCutoff::new(1.0, 0.2).unwrap();
        let u = seeded_vector(9, h.rows());
        let a = apply_f_of_h(&h, &cut, &evolve(&h, &u, 4.0, 1e-13).unwrap()).unwrap();
        let b = evolve(&h, &apply_f_of_h(&h, &cut, &u).unwrap(), 4.0, 1e-13).unwrap();
        assert!(diff(&a, &b) < 1e-9 * norm2(&u));
    }

    #[test]
    fn cutoff_profile() {
        let c = EnergyCutoff::new(1.0, 0.2).unwrap();
        assert_eq!(c.eval(1.0), 1.0);
        assert_eq!(c.eval(1.19), 1.0);
        assert_eq!(c.eval(1.41), 0.0);
        assert!((0..100).all(|k| (0.0..=1.0).contains(&c.eval(k as f64 * 0.03))));
    }

    #[test]
    fn f_of_h_on_plane_waves() {
        let mut m = ModelSpec::free_1d();
        m.boundary = Boundary::Periodic;
        let h = m.hermitian(64).unwrap();
        let bx = h.lattice_box();
        let n = bx.len() as f64;
        // p₀(ξ) = λ exactly needs ξ on the grid; use the nearest grid momenta
        let wave = |k: usize| -> Vec<C64> {
            bx.sites()
                .map(|s| {
                    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * s[0] as f64 / n)
                })
                .collect()
        };
        let on = wave((n / 4.0).round() as usize);
        let cut = EnergyCutoff::new(1.0, 0.2).unwrap();
        let f_on = apply_f_of_h(&h, &cut, &on).unwrap();
        assert!(diff(&f_on, &on) < 1e-8 * norm2(&on));
        let off = wave(2);
        assert!(norm2(&apply_f_of_h(&h, &cut, &off).unwrap()) < 1e-8 * norm2(&off));
        // f ≡ 1 on the enclosure
        let wide = EnergyCutoff::new(1.0, 10.0).unwrap();
        let u = seeded_vector(2, h.rows());
        assert!(diff(&apply_f_of_h(&h, &wide, &u).unwrap(), &u) < 1e-10 * norm2(&u));
    }

    #[test]
    fn inner_cutoff_kills_complement() {
        let h = ModelSpec::reference_1d().hermitian(64).unwrap();
        let outer = EnergyCutoff::new(1.0, 0.2).unwrap();
        let inner = EnergyCutoff::new(1.0, 0.09).unwrap();
        let u = seeded_vector(4, h.rows());
        let fu = apply_f_of_h(&h, &outer, &u).unwrap();
        let rest: Vec<C64> = u.iter().zip(&fu).map(|(a, b)| a - b).collect();
        let v = apply_f_of_h(&h, &inner, &rest).unwrap();
        assert!(norm2(&v) < 1e-8 * norm2(&u));
    }

    #[test]
    fn splitting_arithmetic() {
        let r = t_splitting_bound(4.0, 2.0, 3.0, 1.0).unwrap();
        assert!((r.tau_opt - 5.0).abs() < 1e-12);
        assert!((r.exponent_opt - -1.0).abs() < 1e-12);
        assert!(t_splitting_bound(4.0, 0.9, 3.0, 1.0).unwrap().inconclusive);
        let z = t_splitting_bound(0.0, 2.0, 3.0, 1.0).unwrap();
        assert!(z.exponent_opt <= 0.0 && !z.flags.is_empty());
        let good = t_splitting_bound(12.0, 4.0, 1.0, 1.0).unwrap();
        assert!(good.exponent_opt > 0.0 && good.flags.is_empty());
    }

    #[test]
    fn local_decay_rejects_reflection() {
        let m = ModelSpec::free_1d();
        let cut = EnergyCutoff::new(1.0, 0.2).unwrap();
        let grid: Vec<f64> = (1..=8).map(|k| 20.0 * k as f64).collect();
        assert!(matches!(
            local_decay_probe(&m, &cut, 3.0, &grid, 64),
            Err(Error::ReflectionWindow { .. })
        ));
    }

    #[test]
    fn local_decay_t0_contracts_and_nu0_is_flat() {
        let m = ModelSpec::free_1d();
        let cut = EnergyCutoff::new(1.0, 0.2).unwrap();
        let grid: Vec<f64> = (0..8).map(|k| 5.0 * k as f64).collect();
        let p = local_decay_probe(&m, &cut, 3.0, &grid, 128).unwrap();
        assert!(p.rows[0].norm <= 1.0);
        let flat = local_decay_probe(&m, &cut, 0.0, &grid, 128).unwrap();
        assert!(
            flat.rows.iter().all(|r| (r.norm - 1.0).abs() < 1e-3),
            "{:?}",
            flat.rows
        );
    }

    #[test]
    fn propagation_off_shell_and_hypothesis() {
        let m = ModelSpec::reference_1d();
        let kp = KernelPoint::d1(-4.0, FRAC_PI_2, -3.0, -FRAC_PI_2);
        let on = KernelPoint::d1(4.0, FRAC_PI_2, -3.0, FRAC_PI_2);
        assert!(matches!(
            propagation_probe(&m, &on, 1.0, &[0.125], &PropagationOptions::default()),
            Err(Error::Hypothesis(_))
        ));
        // ξ₂ = 0 is off-shell and outside supp f: Case 1 smallness
        let off_shell = KernelPoint::d1(-4.0, FRAC_PI_2, -3.0, 0.0);
        let opts = PropagationOptions {
            expectation: Expectation::Any,
            delta1: 1.0,
            delta2: 0.5,
            time_points: 8,
            ..Default::default()
        };
        let p = propagation_probe(&m, &off_shell, 1.0, &[0.125, 0.0625], &opts).unwrap();
        assert!(p.fit.is_none());
        let s: Vec<f64> = p.sup_rows.iter().map(|r| r.sup_norm).collect();
        assert!(s[0] <= 1e-3 && s[1] < 0.1 * s[0], "{s:?}");
        // the off-set point is admissible and its t = 0 entry is small but non-zero
        let q = propagation_probe(
            &m,
            &kp,
            1.0,
            &[0.125],
            &PropagationOptions {
                time_points: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(q.time_rows[0].t == 0.0 && q.time_rows[0].norm < q.sup_rows[0].sup_norm + 1e-15);
    }
}
