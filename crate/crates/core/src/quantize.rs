//! Symbols, semiclassical quantization, Fourier multipliers and norm estimation.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::BoxFft;
use crate::lattice::LatticeBox;
use crate::linmap::{
    check_len, dot, norm2, seeded_vector, Commutator, Diagonal, LinearMap, Map, C64,
};

pub type PositionFn = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;
pub type MomentumFn = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;
pub type JointFn = Arc<dyn Fn(&[f64], &[f64]) -> C64 + Send + Sync>;

/// Default seed for norm-estimation start vectors.
pub const NORM_SEED: u64 = 0x5EED;

static ACTIVE_SEED: AtomicU64 = AtomicU64::new(NORM_SEED);

/// Seed currently used for norm-estimation start vectors.
pub fn norm_seed() -> u64 {
    ACTIVE_SEED.load(Ordering::Relaxed)
}

/// Process-wide override, used by the experiment runner's `--seed`.
pub fn set_norm_seed(seed: u64) {
    ACTIVE_SEED.store(seed, Ordering::Relaxed);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SymbolClass {
    /// S^m, h-independent.
    S { order: f64 },
    /// S^m_h at fixed h.
    Sh { order: f64, h: f64 },
    /// S^m_{h,t} at fixed (h, t).
    Sht { order: f64, h: f64, t: f64 },
}

/// Numerical support: a(x, ξ) vanishes outside the product of balls (None = unbounded).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportMeta {
    pub x_center: Vec<f64>,
    pub x_radius: Option<f64>,
    pub xi_center: Vec<f64>,
    pub xi_radius: Option<f64>,
}

#[derive(Clone)]
pub enum Term {
    Separable {
        position: PositionFn,
        momentum: MomentumFn,
    },
    Joint(JointFn),
}

/// Phase-space function a(x, ξ) on R^d × T^d as a finite sum of terms.
#[derive(Clone)]
pub struct Symbol {
    dim: usize,
    terms: Vec<Term>,
    class: SymbolClass,
    support: Option<SupportMeta>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("dim", &self.dim)
            .field("terms", &self.terms.len())
            .field("class", &self.class)
            .field("support", &self.support)
            .finish()
    }
}

fn one(_: &[f64]) -> C64 {
    C64::new(1.0, 0.0)
}

impl Symbol {
    pub fn separable(
        dim: usize,
        position: impl Fn(&[f64]) -> C64 + Send + Sync + 'static,
        momentum: impl Fn(&[f64]) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Symbol {
            dim,
            terms: vec![Term::Separable {
                position: Arc::new(position),
                momentum: Arc::new(momentum),
            }],
            class: SymbolClass::S { order: 0.0 },
            support: None,
        }
    }

    pub fn momentum(dim: usize, c: impl Fn(&[f64]) -> C64 + Send + Sync + 'static) -> Self {
        Self::separable(dim, one, c)
    }

    pub fn position(dim: usize, b: impl Fn(&[f64]) -> C64 + Send + Sync + 'static) -> Self {
        Self::separable(dim, b, one)
    }

    pub fn joint(dim: usize, f: impl Fn(&[f64], &[f64]) -> C64 + Send + Sync + 'static) -> Self {
        Symbol {
            dim,
            terms: vec![Term::Joint(Arc::new(f))],
            class: SymbolClass::S { order: 0.0 },
            support: None,
        }
    }

    pub fn constant(dim: usize, c: C64) -> Self {
        Self::momentum(dim, move |_| c)
    }

    pub fn zero(dim: usize) -> Self {
        Symbol {
            dim,
            terms: Vec::new(),
            class: SymbolClass::S { order: 0.0 },
            support: None,
        }
    }

    pub fn with_class(mut self, class: SymbolClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_support(mut self, support: SupportMeta) -> Self {
        self.support = Some(support);
        self
    }

    /// Sum of two symbols; support metadata is dropped unless one side is empty.
    pub fn plus(mut self, other: Symbol) -> Self {
        if self.terms.is_empty() {
            return other;
        }
        if !other.terms.is_empty() {
            self.support = None;
        }
        self.terms.extend(other.terms);
        self
    }

    pub fn scaled(mut self, c: C64) -> Self {
        self.terms = self
            .terms
            .into_iter()
            .map(|t| match t {
                Term::Separable { position, momentum } => Term::Separable {
                    position: Arc::new(move |x| c * position(x)),
                    momentum,
                },
                Term::Joint(f) => Term::Joint(Arc::new(move |x, xi| c * f(x, xi))),
            })
            .collect();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }
    pub fn class(&self) -> &SymbolClass {
        &self.class
    }
    pub fn support(&self) -> Option<&SupportMeta> {
        self.support.as_ref()
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> C64 {
        self.terms
            .iter()
            .map(|t| match t {
                Term::Separable { position, momentum } => position(x) * momentum(xi),
                Term::Joint(f) => f(x, xi),
            })
            .sum()
    }
}

/// Multiplication by c(ξ) in momentum: inverse DFT ∘ c ∘ DFT.
pub struct FourierMultiplier {
    fft: BoxFft,
    c: Vec<C64>,
}

impl FourierMultiplier {
    pub fn new(c: impl Fn(&[f64]) -> C64, bx: LatticeBox) -> Self {
        let fft = BoxFft::new(bx);
        let c = (0..bx.len()).map(|k| c(&fft.xi_vec(k))).collect();
        FourierMultiplier { fft, c }
    }

    pub fn values(&self) -> &[C64] {
        &self.c
    }

    fn run(&self, u: &[C64], conj: bool) -> Vec<C64> {
        let mut v = u.to_vec();
        self.fft.forward(&mut v);
        for (x, c) in v.iter_mut().zip(&self.c) {
            *x *= if conj { c.conj() } else { *c };
        }
        self.fft.inverse(&mut v);
        v
    }
}

impl LinearMap for FourierMultiplier {
    fn rows(&self) -> usize {
        self.c.len()
    }
    fn cols(&self) -> usize {
        self.c.len()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.c.len(), u)?;
        Ok(self.run(u, false))
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.c.len(), u)?;
        Ok(self.run(u, true))
    }
    fn is_hermitian(&self) -> bool {
        self.c.iter().all(|c| c.im == 0.0)
    }
}

pub fn fourier_multiplier(c: impl Fn(&[f64]) -> C64, bx: LatticeBox) -> Map {
    Arc::new(FourierMultiplier::new(c, bx))
}

/// Diagonal map u(n) ↦ (1 + |n|²)^{s/2} u(n).
pub fn position_weight(s: f64, bx: LatticeBox) -> Map {
    Arc::new(Diagonal::real(bx.sites().map(|n| {
        let r2: f64 = n.iter().map(|x| (*x as f64).powi(2)).sum();
        (1.0 + r2).powf(s / 2.0)
    })))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Quantization {
    /// a(hn, D): position factor applied last.
    #[default]
    Left,
    /// a(hn', D): position factor applied first.
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ResolutionPolicy {
    /// Tail mass above 1e−6 is an error.
    #[default]
    Strict,
    /// Record the tail mass but never fail.
    WarnOnly,
}

pub const TAIL_WARN: f64 = 1e-10;
pub const TAIL_ERROR: f64 = 1e-6;

enum Part {
    Separable { b: Vec<C64>, c: FourierMultiplier },
    Joint(DMatrix<C64>),
}

/// Op^h(a) on a box.
pub struct QuantizedOp {
    n: usize,
    quant: Quantization,
    parts: Vec<Part>,
    tail_mass: f64,
}

impl QuantizedOp {
    /// Largest fraction of ℓ² mass of a(hn, ·)'s Fourier coefficients beyond |m| > N/4.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }
    pub fn resolution_warning(&self) -> bool {
        self.tail_mass > TAIL_WARN
    }
}

fn tail_fraction(coeffs: &[C64], bx: LatticeBox) -> f64 {
    let s = bx.side() as i64;
    let cut = s / 4;
    let mut total = 0.0;
    let mut tail = 0.0;
    for (idx, c) in coeffs.iter().enumerate() {
        let w = c.norm_sqr();
        total += w;
        let mut r = idx as i64;
        let mut outside = false;
        for _ in 0..bx.dim {
            let mut m = r % s;
            r /= s;
            if m > s / 2 {
                m -= s;
            }
            outside |= m.abs() > cut;
        }
        if outside {
            tail += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Periodic-difference flat index of (i − j) on the box grid.
fn diff_index(bx: LatticeBox, i: usize, j: usize) -> usize {
    let s = bx.side();
    let (mut a, mut b) = (i, j);
    let mut idx = 0;
    let mut mult = 1;
    for _ in 0..bx.dim {
        let d = (a % s + s - b % s) % s;
        idx += d * mult;
        mult *= s;
        a /= s;
        b /= s;
    }
    idx
}

pub fn op_h(a: &Symbol, h: f64, bx: LatticeBox) -> Result<QuantizedOp> {
    op_h_with(a, h, bx, Quantization::Left, ResolutionPolicy::Strict)
}

pub fn op_h_with(
    a: &Symbol,
    h: f64,
    bx: LatticeBox,
    quant: Quantization,
    policy: ResolutionPolicy,
) -> Result<QuantizedOp> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Invalid(format!("h = {h} not in (0, 1]")));
    }
    if a.dim() != bx.dim {
        return Err(Error::Invalid("symbol and box dimensions differ".into()));
    }
    let n = bx.len();
    let fft = BoxFft::new(bx);
    let scaled: Vec<Vec<f64>> = bx
        .sites()
        .map(|s| s.iter().map(|x| h * *x as f64).collect())
        .collect();
    let xis: Vec<Vec<f64>> = (0..n).map(|k| fft.xi_vec(k)).collect();
    let mut parts = Vec::new();
    let mut tail_mass = 0.0f64;
    for term in a.terms() {
        match term {
            Term::Separable { position, momentum } => {
                let b: Vec<C64> = scaled.iter().map(|x| position(x)).collect();
                let c = FourierMultiplier {
                    fft: fft.clone(),
                    c: xis.iter().map(|xi| momentum(xi)).collect(),
                };
                let mut hat = c.c.clone();
                fft.inverse(&mut hat);
                tail_mass = tail_mass.max(tail_fraction(&hat, bx));
                parts.push(Part::Separable { b, c });
            }
            Term::Joint(f) => {
                let mut m = DMatrix::zeros(n, n);
                for (p, x) in scaled.iter().enumerate() {
                    let mut g: Vec<C64> = xis.iter().map(|xi| f(x, xi)).collect();
                    fft.inverse(&mut g);
                    tail_mass = tail_mass.max(tail_fraction(&g, bx));
                    for q in 0..n {
                        match quant {
                            Quantization::Left => m[(p, q)] = g[diff_index(bx, p, q)],
                            Quantization::Right => m[(q, p)] = g[diff_index(bx, q, p)],
                        }
                    }
                }
                parts.push(Part::Joint(m));
            }
        }
    }
    if policy == ResolutionPolicy::Strict && tail_mass > TAIL_ERROR {
        return Err(Error::Resolution { tail: tail_mass });
    }
    Ok(QuantizedOp {
        n,
        quant,
        parts,
        tail_mass,
    })
}

impl LinearMap for QuantizedOp {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n, u)?;
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for p in &self.parts {
            match p {
                Part::Separable { b, c } => match self.quant {
                    Quantization::Left => {
                        let v = c.run(u, false);
                        for ((o, x), bi) in out.iter_mut().zip(&v).zip(b) {
                            *o += bi * x;
                        }
                    }
                    Quantization::Right => {
                        let bu: Vec<C64> = u.iter().zip(b).map(|(x, bi)| bi * x).collect();
                        for (o, x) in out.iter_mut().zip(c.run(&bu, false)) {
                            *o += x;
                        }
                    }
                },
                Part::Joint(m) => {
                    let v = m * nalgebra::DVector::from_column_slice(u);
                    for (o, x) in out.iter_mut().zip(v.iter()) {
                        *o += x;
                    }
                }
            }
        }
        Ok(out)
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n, u)?;
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for p in &self.parts {
            match p {
                Part::Separable { b, c } => match self.quant {
                    Quantization::Left => {
                        let bu: Vec<C64> = u.iter().zip(b).map(|(x, bi)| bi.conj() * x).collect();
                        for (o, x) in out.iter_mut().zip(c.run(&bu, true)) {
                            *o += x;
                        }
                    }
                    Quantization::Right => {
                        let v = c.run(u, true);
                        for ((o, x), bi) in out.iter_mut().zip(&v).zip(b) {
                            *o += bi.conj() * x;
                        }
                    }
                },
                Part::Joint(m) => {
                    let v = m.adjoint() * nalgebra::DVector::from_column_slice(u);
                    for (o, x) in out.iter_mut().zip(v.iter()) {
                        *o += x;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Convenience: quantize and wrap as a shared map.
pub fn op_h_map(a: &Symbol, h: f64, bx: LatticeBox, policy: ResolutionPolicy) -> Result<Map> {
    Ok(Arc::new(op_h_with(a, h, bx, Quantization::Left, policy)?))
}

pub fn commutator_action(a: Map, b: Map) -> Result<Map> {
    if a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols() {
        return Err(Error::Dim {
            expected: a.rows(),
            got: b.rows(),
        });
    }
    Ok(Arc::new(Commutator(a, b)))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    /// ‖A*A x − θx‖ / θ at exit.
    pub residual: f64,
}

/// ‖A‖ from the top eigenvalue of A*A, starting at the fixed seed.
pub fn operator_norm(a: &dyn LinearMap, tol: f64, max_iter: usize) -> Result<NormEstimate> {
    let start = seeded_vector(norm_seed(), a.cols());
    operator_norm_from(a, start, tol, max_iter)
}

/// Krylov space size between restarts.
const LANCZOS_BLOCK: usize = 24;

/// Power iteration on A*A accelerated by restarted Lanczos: each cycle builds a
/// short Krylov basis from the current iterate and restarts from its top Ritz
/// vector. `max_iter` counts applications of A*A. Accepts once the Ritz residual
/// ‖A*Ax − θx‖/θ is at most `tol`.
pub fn operator_norm_from(
    a: &dyn LinearMap,
    start: Vec<C64>,
    tol: f64,
    max_iter: usize,
) -> Result<NormEstimate> {
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(Error::Invalid(format!("tol = {tol} not in (0, 0.1]")));
    }
    check_len(a.cols(), &start)?;
    let nx = norm2(&start);
    if nx == 0.0 {
        return Err(Error::Invalid("zero start vector".into()));
    }
    let n = a.cols();
    let mut x: Vec<C64> = start.iter().map(|v| v / nx).collect();
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    let mut used = 0;
    while used < max_iter {
        let m = LANCZOS_BLOCK.min(n).min(max_iter - used).max(1);
        let mut basis: Vec<Vec<C64>> = vec![x.clone()];
        let mut alpha: Vec<f64> = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            let ax = a.apply(&basis[j])?;
            let mut w = a.adjoint_apply(&ax)?;
            used += 1;
            let aj = dot(&basis[j], &w).re;
            alpha.push(aj);
            // full reorthogonalisation, twice
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
                }
            }
            let b = norm2(&w);
            beta.push(b);
            if j + 1 == m || b <= 1e-14 * aj.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            basis.push(w.iter().map(|v| v / b).collect());
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i == j + 1 {
                beta[j]
            } else if j == i + 1 {
                beta[i]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (top, &val) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|p, q| p.1.total_cmp(q.1))
            .expect("non-empty tridiagonal");
        theta = val;
        let s = eig.eigenvectors.column(top);
        if theta <= 0.0 {
            let ax = a.apply(&x)?;
            if norm2(&ax) == 0.0 {
                return Ok(NormEstimate {
                    value: 0.0,
                    iterations: used,
                    residual: 0.0,
                });
            }
        }
        let mut y = vec![C64::new(0.0, 0.0); n];
        for (q, c) in basis.iter().zip(s.iter()) {
            y.iter_mut().zip(q).for_each(|(yi, qi)| *yi += *c * qi);
        }
        let ny = norm2(&y);
        y.iter_mut().for_each(|v| *v /= ny);
        residual = (beta[k - 1] * s[k - 1]).abs() / theta.abs().max(f64::MIN_POSITIVE);
        if residual <= tol {
            return Ok(NormEstimate {
                value: theta.max(0.0).sqrt(),
                iterations: used,
                residual,
            });
        }
        x = y;
    }
    Err(Error::NoConvergence {
        what: "power iteration",
        iters: max_iter,
        last: theta.max(0.0).sqrt(),
        residual,
    })
}
