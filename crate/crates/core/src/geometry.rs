//! Energy shells, the singular sets Σ₀, Σ±(λ), Σ'±(λ), and symbol factories.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::escape::cutoff::{phi, smooth_step};
use crate::lattice::Stencil;
use crate::linmap::C64;
use crate::quantize::{SupportMeta, Symbol, SymbolClass};

pub fn reduce_angle(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Flat torus distance: componentwise min(|Δ|, 2π − |Δ|), Euclidean combination.
pub fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            let d = (p - q).rem_euclid(TAU);
            d.min(TAU - d).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotr(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Distance from `p` to the ray {t v : sign·t ≥ 0}.
pub fn ray_dist(p: &[f64], v: &[f64], sign: f64) -> f64 {
    let vv = dotr(v, v);
    if vv == 0.0 {
        return norm(p);
    }
    let t = (dotr(p, v) / vv * sign).max(0.0) * sign;
    p.iter()
        .zip(v)
        .map(|(a, b)| (a - t * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// A point (x, ξ, y, η) of T*(M × M); the diagonal reads (x, ξ, −x, ξ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub y: Vec<f64>,
    pub eta: Vec<f64>,
}

impl KernelPoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>, y: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let d = x.len();
        if d == 0 || xi.len() != d || y.len() != d || eta.len() != d {
            return Err(Error::Invalid(
                "kernel point components must share one dimension".into(),
            ));
        }
        Ok(KernelPoint {
            x,
            xi: xi.into_iter().map(reduce_angle).collect(),
            y,
            eta: eta.into_iter().map(reduce_angle).collect(),
        })
    }

    pub fn d1(x: f64, xi: f64, y: f64, eta: f64) -> Self {
        KernelPoint::new(vec![x], vec![xi], vec![y], vec![eta]).expect("one-dimensional point")
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SetDistances {
    pub sigma0: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub sigma_prime_plus: f64,
    pub sigma_prime_minus: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipReport {
    pub in_sigma0: bool,
    pub in_sigma_plus: bool,
    pub in_sigma_minus: bool,
    pub in_sigma_prime_plus: bool,
    pub in_sigma_prime_minus: bool,
    pub distances: SetDistances,
    pub lambda: f64,
    pub tol: f64,
}

impl MembershipReport {
    /// Outside Σ₀ ∪ Σ₊ ∪ Σ'₊.
    pub fn off_outgoing(&self) -> bool {
        !(self.in_sigma0 || self.in_sigma_plus || self.in_sigma_prime_plus)
    }
}

/// Sampled energy shell {ξ : p₀(ξ) = λ}.
#[derive(Clone, Debug)]
pub struct Shell {
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Shell points from sign changes along the last axis, refined by bisection.
pub fn energy_shell(stencil: &Stencil, lambda: f64, grid_n: usize) -> Result<Shell> {
    let d = stencil.dim();
    let outer = grid_n.pow(d as u32 - 1);
    let mut points = Vec::new();
    let mut base = vec![0.0; d];
    for idx in 0..outer {
        let mut r = idx;
        for k in (0..d - 1).rev() {
            base[k] = TAU * (r % grid_n) as f64 / grid_n as f64;
            r /= grid_n;
        }
        let f = |t: f64| {
            let mut p = base.clone();
            p[d - 1] = t;
            stencil.p0(&p) - lambda
        };
        for k in 0..grid_n {
            let a = TAU * k as f64 / grid_n as f64;
            let b = TAU * (k + 1) as f64 / grid_n as f64;
            let (fa, fb) = (f(a), f(b));
            if fa == 0.0 || (fa < 0.0) != (fb < 0.0) && fb != 0.0 {
                let t = if fa == 0.0 { a } else { bisect(f, a, b) };
                let mut p = base.clone();
                p[d - 1] = reduce_angle(t);
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyShell {
            lo: lambda,
            hi: lambda,
        });
    }
    let velocities: Vec<Vec<f64>> = points.iter().map(|p| stencil.velocity(p)).collect();
    let min_v = velocities
        .iter()
        .map(|v| norm(v))
        .fold(f64::INFINITY, f64::min);
    if min_v < 1e-8 {
        return Err(Error::CriticalValue {
            lo: lambda,
            hi: lambda,
            min_v,
        });
    }
    Ok(Shell { points, velocities })
}

pub fn default_grid(dim: usize) -> usize {
    if dim == 1 {
        1 << 12
    } else {
        1 << 9
    }
}

pub fn classify(
    kp: &KernelPoint,
    stencil: &Stencil,
    lambda: f64,
    tol: f64,
) -> Result<MembershipReport> {
    classify_with_grid(kp, stencil, lambda, tol, default_grid(stencil.dim()))
}

pub fn classify_with_grid(
    kp: &KernelPoint,
    stencil: &Stencil,
    lambda: f64,
    tol: f64,
    grid_n: usize,
) -> Result<MembershipReport> {
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tol = {tol} must be positive")));
    }
    if kp.dim() != stencil.dim() {
        return Err(Error::Invalid(
            "kernel point and stencil dimensions differ".into(),
        ));
    }
    let shell = energy_shell(stencil, lambda, grid_n)?;
    let s: Vec<f64> = kp.x.iter().zip(&kp.y).map(|(a, b)| a + b).collect();
    let dxi = torus_dist(&kp.xi, &kp.eta);
    let sigma0 = (dotr(&s, &s) + dxi * dxi).sqrt() / 2f64.sqrt();

    let sigma_pm = |sign: f64| {
        shell
            .points
            .iter()
            .zip(&shell.velocities)
            .map(|(p, v)| {
                let r = ray_dist(&s, v, sign);
                (r * r / 2.0 + torus_dist(&kp.xi, p).powi(2) + torus_dist(&kp.eta, p).powi(2))
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let factor = |pos: &[f64], mom: &[f64], sign: f64| {
        shell
            .points
            .iter()
            .zip(&shell.velocities)
            .map(|(p, v)| (ray_dist(pos, v, sign).powi(2) + torus_dist(mom, p).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    // Σ'₊: (t v(ξ), ξ) with t ≥ 0 times (s v(η), η) with s ≥ 0; Σ'₋ flips both signs.
    let prime = |sign: f64| {
        (factor(&kp.x, &kp.xi, sign).powi(2) + factor(&kp.y, &kp.eta, sign).powi(2)).sqrt()
    };
    let distances = SetDistances {
        sigma0,
        sigma_plus: sigma_pm(1.0),
        sigma_minus: sigma_pm(-1.0),
        sigma_prime_plus: prime(1.0),
        sigma_prime_minus: prime(-1.0),
    };
    Ok(MembershipReport {
        in_sigma0: distances.sigma0 <= tol,
        in_sigma_plus: distances.sigma_plus <= tol,
        in_sigma_minus: distances.sigma_minus <= tol,
        in_sigma_prime_plus: distances.sigma_prime_plus <= tol,
        in_sigma_prime_minus: distances.sigma_prime_minus <= tol,
        distances,
        lambda,
        tol,
    })
}

/// a(x, ξ) = Φ(|x − x₀|/δ₁) Φ(|ξ − ξ₀|/δ₂).
pub fn make_bump(x0: Vec<f64>, xi0: Vec<f64>, delta1: f64, delta2: f64) -> Result<Symbol> {
    if !(delta1 > 0.0 && delta2 > 0.0) {
        return Err(Error::Invalid(format!(
            "bump radii must be positive, got ({delta1}, {delta2})"
        )));
    }
    if x0.len() != xi0.len() {
        return Err(Error::Invalid("bump centre dimensions differ".into()));
    }
    let d = x0.len();
    let xi0: Vec<f64> = xi0.into_iter().map(reduce_angle).collect();
    let meta = SupportMeta {
        x_center: x0.clone(),
        x_radius: Some(delta1),
        xi_center: xi0.clone(),
        xi_radius: Some(delta2),
    };
    let xc = x0.clone();
    let pc = xi0.clone();
    Ok(Symbol::separable(
        d,
        move |x| {
            let r = x
                .iter()
                .zip(&xc)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            C64::new(phi(r / delta1), 0.0)
        },
        move |xi| C64::new(phi(torus_dist(xi, &pc) / delta2), 0.0),
    )
    .with_support(meta))
}

pub fn make_bump_pair(
    p1: (Vec<f64>, Vec<f64>),
    p2: (Vec<f64>, Vec<f64>),
    delta1: f64,
    delta2: f64,
) -> Result<(Symbol, Symbol)> {
    Ok((
        make_bump(p1.0, p1.1, delta1, delta2)?,
        make_bump(p2.0, p2.1, delta1, delta2)?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Outgoing,
    Incoming,
}

impl Direction {
    pub fn sign(&self) -> f64 {
        match self {
            Direction::Outgoing => 1.0,
            Direction::Incoming => -1.0,
        }
    }
}

/// Shape parameters of a cone symbol.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeSpec {
    pub direction: Direction,
    pub gamma: f64,
    pub window: (f64, f64),
    pub r0: f64,
    /// Width of the angular transition.
    pub angle_width: f64,
    /// Optional taper to zero at this radius, over `taper_fraction` of it.
    pub outer_radius: Option<f64>,
    pub taper_fraction: f64,
}

impl ConeSpec {
    pub fn new(direction: Direction, gamma: f64, window: (f64, f64), r0: f64) -> Self {
        ConeSpec {
            direction,
            gamma,
            window,
            r0,
            angle_width: 0.2,
            outer_radius: None,
            taper_fraction: 0.25,
        }
    }

    pub fn with_outer(mut self, radius: f64) -> Self {
        self.outer_radius = Some(radius);
        self
    }
}

/// Smooth S⁰ symbol supported in {±x·v/(|x||v|) ≥ ±γ, p₀ ∈ window, |x| ≥ r0/2}.
pub fn make_cone_symbol(stencil: &Stencil, spec: &ConeSpec) -> Result<Symbol> {
    if !(spec.gamma > -1.0 && spec.gamma < 1.0) {
        return Err(Error::Invalid(format!(
            "gamma = {} not in (-1, 1)",
            spec.gamma
        )));
    }
    if !(spec.r0 > 0.0 && spec.angle_width > 0.0) {
        return Err(Error::Invalid(
            "cone needs r0 > 0 and a positive angular width".into(),
        ));
    }
    let (lo, hi) = spec.window;
    crate::lattice::validate_energy_window(
        stencil,
        lo,
        hi,
        4096.min(1 << (14 / stencil.dim())),
        1e-3,
    )?;
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let sgn = spec.direction.sign();
    let gamma = spec.gamma;
    let w = spec.angle_width;
    let r0 = spec.r0;
    let outer = spec.outer_radius;
    let frac = spec.taper_fraction;
    let radial = move |r: f64| {
        let mut v = smooth_step((r - r0 / 2.0) / (r0 / 2.0));
        if let Some(ro) = outer {
            v *= smooth_step((ro - r) / (frac * ro));
        }
        v
    };
    let energy = {
        let s = stencil.clone();
        move |xi: &[f64]| phi((s.p0(xi) - mid).abs() / half)
    };
    let angular = move |cos: f64| smooth_step((sgn * cos - sgn * gamma) / w);
    let class = SymbolClass::S { order: 0.0 };
    if stencil.dim() == 1 {
        // cos angle is sign(x)·sign(v), so the symbol splits over the two half-lines
        let mut sym = Symbol::zero(1);
        for sx in [1.0f64, -1.0] {
            let s = stencil.clone();
            let e = energy.clone();
            let term = Symbol::separable(
                1,
                move |x| {
                    if x[0] * sx > 0.0 {
                        C64::new(radial(x[0].abs()), 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                },
                move |xi| {
                    let v = s.velocity(xi)[0];
                    let cos = if v == 0.0 { 0.0 } else { sx * v.signum() };
                    C64::new(e(xi) * angular(cos), 0.0)
                },
            );
            sym = sym.plus(term);
        }
        return Ok(sym.with_class(class));
    }
    let s = stencil.clone();
    Ok(Symbol::joint(stencil.dim(), move |x, xi| {
        let v = s.velocity(xi);
        let (nx, nv) = (norm(x), norm(&v));
        let cos = if nx == 0.0 || nv == 0.0 {
            0.0
        } else {
            dotr(x, &v) / (nx * nv)
        };
        C64::new(radial(nx) * energy(xi) * angular(cos), 0.0)
    })
    .with_class(class))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Invariance {
    Holds,
    Fails,
    /// Precondition x·v ≥ γ|x||v| not met.
    Vacuous,
}

/// Checks (x + t v)·v ≥ γ|x + t v||v| for all listed t, with v = v(ξ).
pub fn cone_forward_invariance(
    x: &[f64],
    xi: &[f64],
    gamma: f64,
    stencil: &Stencil,
    t_list: &[f64],
) -> Invariance {
    let v = stencil.velocity(xi);
    cone_forward_invariance_v(x, &v, gamma, t_list)
}

pub fn cone_forward_invariance_v(x: &[f64], v: &[f64], gamma: f64, t_list: &[f64]) -> Invariance {
    let nv = norm(v);
    if dotr(x, v) < gamma * norm(x) * nv {
        return Invariance::Vacuous;
    }
    for &t in t_list {
        if t < 0.0 {
            return Invariance::Vacuous;
        }
        let z: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + t * b).collect();
        if dotr(&z, v) < gamma * norm(&z) * nv {
            return Invariance::Fails;
        }
    }
    Invariance::Holds
}

pub const HALF_PI: f64 = PI / 2.0;
