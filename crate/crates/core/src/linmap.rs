//! Matrix-free linear maps on complex lattice vectors.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Map = Arc<dyn LinearMap>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A bounded linear operator C^cols -> C^rows with its adjoint.
pub trait LinearMap: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>>;
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>>;
    fn is_hermitian(&self) -> bool {
        false
    }
    fn bandwidth(&self) -> Option<usize> {
        None
    }
}

pub(crate) fn check_len(expected: usize, u: &[C64]) -> Result<()> {
    if u.len() != expected {
        return Err(Error::Dim {
            expected,
            got: u.len(),
        });
    }
    Ok(())
}

/// Conjugate-linear in the first slot.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Deterministic complex gaussian-ish vector.
pub fn seeded_vector(seed: u64, n: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a: f64 = rng.random::<f64>() - 0.5;
            let b: f64 = rng.random::<f64>() - 0.5;
            C64::new(a, b)
        })
        .collect()
}

pub struct Identity(pub usize);

impl LinearMap for Identity {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.0
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.0, u)?;
        Ok(u.to_vec())
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.apply(u)
    }
    fn is_hermitian(&self) -> bool {
        true
    }
    fn bandwidth(&self) -> Option<usize> {
        Some(0)
    }
}

pub struct Zero {
    pub rows: usize,
    pub cols: usize,
}

impl LinearMap for Zero {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.cols, u)?;
        Ok(vec![C64::new(0.0, 0.0); self.rows])
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.rows, u)?;
        Ok(vec![C64::new(0.0, 0.0); self.cols])
    }
    fn is_hermitian(&self) -> bool {
        self.rows == self.cols
    }
}

pub struct Diagonal(pub Vec<C64>);

impl Diagonal {
    pub fn real(d: impl IntoIterator<Item = f64>) -> Self {
        Diagonal(d.into_iter().map(|x| C64::new(x, 0.0)).collect())
    }
}

impl LinearMap for Diagonal {
    fn rows(&self) -> usize {
        self.0.len()
    }
    fn cols(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.0.len(), u)?;
        Ok(u.iter().zip(&self.0).map(|(x, d)| x * d).collect())
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.0.len(), u)?;
        Ok(u.iter().zip(&self.0).map(|(x, d)| x * d.conj()).collect())
    }
    fn is_hermitian(&self) -> bool {
        self.0.iter().all(|d| d.im == 0.0)
    }
    fn bandwidth(&self) -> Option<usize> {
        Some(0)
    }
}

pub struct Dense(pub DMatrix<C64>);

impl LinearMap for Dense {
    fn rows(&self) -> usize {
        self.0.nrows()
    }
    fn cols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.0.ncols(), u)?;
        let m = &self.0;
        let mut out = vec![C64::new(0.0, 0.0); m.nrows()];
        for (j, uj) in u.iter().enumerate() {
            if *uj == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, a) in out.iter_mut().zip(m.column(j).iter()) {
                *o += a * uj;
            }
        }
        Ok(out)
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.0.nrows(), u)?;
        Ok((0..self.0.ncols())
            .map(|j| dot(self.0.column(j).as_slice(), u))
            .collect())
    }
}

pub struct Scaled(pub C64, pub Map);

impl LinearMap for Scaled {
    fn rows(&self) -> usize {
        self.1.rows()
    }
    fn cols(&self) -> usize {
        self.1.cols()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let mut v = self.1.apply(u)?;
        v.iter_mut().for_each(|x| *x *= self.0);
        Ok(v)
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let mut v = self.1.adjoint_apply(u)?;
        let c = self.0.conj();
        v.iter_mut().for_each(|x| *x *= c);
        Ok(v)
    }
    fn is_hermitian(&self) -> bool {
        self.0.im == 0.0 && self.1.is_hermitian()
    }
}

pub struct Sum(pub Vec<Map>);

impl LinearMap for Sum {
    fn rows(&self) -> usize {
        self.0[0].rows()
    }
    fn cols(&self) -> usize {
        self.0[0].cols()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let mut acc = vec![C64::new(0.0, 0.0); self.rows()];
        for m in &self.0 {
            axpy(C64::new(1.0, 0.0), &m.apply(u)?, &mut acc);
        }
        Ok(acc)
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let mut acc = vec![C64::new(0.0, 0.0); self.cols()];
        for m in &self.0 {
            axpy(C64::new(1.0, 0.0), &m.adjoint_apply(u)?, &mut acc);
        }
        Ok(acc)
    }
    fn is_hermitian(&self) -> bool {
        self.0.iter().all(|m| m.is_hermitian())
    }
}

/// `Compose(vec![A, B, C])` applies C first: A∘B∘C.
pub struct Compose(pub Vec<Map>);

impl LinearMap for Compose {
    fn rows(&self) -> usize {
        self.0[0].rows()
    }
    fn cols(&self) -> usize {
        self.0[self.0.len() - 1].cols()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let mut v = u.to_vec();
        for m in self.0.iter().rev() {
            v = m.apply(&v)?;
        }
        Ok(v)
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let mut v = u.to_vec();
        for m in self.0.iter() {
            v = m.adjoint_apply(&v)?;
        }
        Ok(v)
    }
}

pub struct Adjoint(pub Map);

impl LinearMap for Adjoint {
    fn rows(&self) -> usize {
        self.0.cols()
    }
    fn cols(&self) -> usize {
        self.0.rows()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.0.adjoint_apply(u)
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.0.apply(u)
    }
    fn is_hermitian(&self) -> bool {
        self.0.is_hermitian()
    }
}

/// i(AB - BA).
pub struct Commutator(pub Map, pub Map);

impl LinearMap for Commutator {
    fn rows(&self) -> usize {
        self.0.rows()
    }
    fn cols(&self) -> usize {
        self.0.cols()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let ab = self.0.apply(&self.1.apply(u)?)?;
        let ba = self.1.apply(&self.0.apply(u)?)?;
        Ok(ab.iter().zip(&ba).map(|(x, y)| I * (x - y)).collect())
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        // (i(AB-BA))* = -i(B*A* - A*B*)
        let ba = self.1.adjoint_apply(&self.0.adjoint_apply(u)?)?;
        let ab = self.0.adjoint_apply(&self.1.adjoint_apply(u)?)?;
        Ok(ba.iter().zip(&ab).map(|(x, y)| -I * (x - y)).collect())
    }
    fn is_hermitian(&self) -> bool {
        self.0.is_hermitian() && self.1.is_hermitian()
    }
}

/// (A + A*)/2.
pub struct HermitianPart(pub Map);

impl LinearMap for HermitianPart {
    fn rows(&self) -> usize {
        self.0.rows()
    }
    fn cols(&self) -> usize {
        self.0.cols()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let a = self.0.apply(u)?;
        let b = self.0.adjoint_apply(u)?;
        Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect())
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.apply(u)
    }
    fn is_hermitian(&self) -> bool {
        true
    }
}

pub fn compose(maps: Vec<Map>) -> Map {
    Arc::new(Compose(maps))
}

pub fn sum(maps: Vec<Map>) -> Map {
    Arc::new(Sum(maps))
}

pub fn scaled(c: C64, m: Map) -> Map {
    Arc::new(Scaled(c, m))
}

pub fn adjoint(m: Map) -> Map {
    Arc::new(Adjoint(m))
}

pub fn hermitian_part(m: Map) -> Map {
    Arc::new(HermitianPart(m))
}

/// Materialise a map column by column.
pub fn to_dense(m: &dyn LinearMap) -> Result<DMatrix<C64>> {
    let (r, c) = (m.rows(), m.cols());
    let mut out = DMatrix::zeros(r, c);
    let mut e = vec![C64::new(0.0, 0.0); c];
    for j in 0..c {
        e[j] = C64::new(1.0, 0.0);
        let col = m.apply(&e)?;
        out.column_mut(j).copy_from_slice(&col);
        e[j] = C64::new(0.0, 0.0);
    }
    Ok(out)
}

/// Worst relative |<Au,v> - <u,A*v>| over `trials` seeded pairs.
pub fn adjoint_defect(m: &dyn LinearMap, seed: u64, trials: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..trials as u64 {
        let u = seeded_vector(seed.wrapping_add(2 * k), m.cols());
        let v = seeded_vector(seed.wrapping_add(2 * k + 1), m.rows());
        let lhs = dot(&v, &m.apply(&u)?);
        let rhs = dot(&m.adjoint_apply(&v)?, &u);
        let scale = norm2(&u) * norm2(&v) * (1.0 + lhs.norm());
        worst = worst.max((lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}
