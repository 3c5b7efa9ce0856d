//! Stencils, potentials, finite boxes and the truncated Hamiltonian.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmap::{check_len, LinearMap, C64};
use crate::quantize::{Symbol, SymbolClass};

/// Finite hopping rule H₀u(n) = Σ γ_m u(n − m).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stencil {
    dim: usize,
    offsets: Vec<Vec<i64>>,
    coeffs: Vec<C64>,
    bandwidth: usize,
}

impl Stencil {
    pub fn new(dim: usize, offsets: Vec<Vec<i64>>, coeffs: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Stencil("dimension must be at least 1".into()));
        }
        if offsets.is_empty() || offsets.len() != coeffs.len() {
            return Err(Error::Stencil(
                "offsets and coefficients must pair up".into(),
            ));
        }
        for (k, m) in offsets.iter().enumerate() {
            if m.len() != dim {
                return Err(Error::Stencil(format!("offset {m:?} has wrong dimension")));
            }
            if offsets[..k].contains(m) {
                return Err(Error::Stencil(format!("offset {m:?} repeated")));
            }
        }
        for (m, g) in offsets.iter().zip(&coeffs) {
            let neg: Vec<i64> = m.iter().map(|x| -x).collect();
            let partner = offsets
                .iter()
                .position(|o| *o == neg)
                .ok_or_else(|| Error::Stencil(format!("offset {m:?} has no partner {neg:?}")))?;
            if (coeffs[partner] - g.conj()).norm() > 1e-14 * (1.0 + g.norm()) {
                return Err(Error::Stencil(format!(
                    "coefficient at {neg:?} is not the conjugate of the one at {m:?}"
                )));
            }
        }
        let bandwidth = offsets
            .iter()
            .flat_map(|m| m.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0);
        Ok(Stencil {
            dim,
            offsets,
            coeffs,
            bandwidth,
        })
    }

    /// γ₀ = d, γ_{±e_k} = −1/2, so p₀(ξ) = Σ (1 − cos ξ_k).
    pub fn laplacian(dim: usize) -> Self {
        let mut offsets = vec![vec![0; dim]];
        let mut coeffs = vec![C64::new(dim as f64, 0.0)];
        for k in 0..dim {
            for s in [1, -1] {
                let mut m = vec![0; dim];
                m[k] = s;
                offsets.push(m);
                coeffs.push(C64::new(-0.5, 0.0));
            }
        }
        Stencil::new(dim, offsets, coeffs).expect("laplacian stencil is symmetric")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }
    pub fn abs_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Complex value of the torus symbol; plane waves e^{in·ξ} are eigenvectors
    /// with this eigenvalue.
    pub fn p0_complex(&self, xi: &[f64]) -> C64 {
        self.offsets
            .iter()
            .zip(&self.coeffs)
            .map(|(m, g)| {
                let ph: f64 = m.iter().zip(xi).map(|(a, b)| *a as f64 * b).sum();
                g * C64::new(0.0, -ph).exp()
            })
            .sum()
    }

    pub fn p0(&self, xi: &[f64]) -> f64 {
        self.p0_complex(xi).re
    }

    /// Complex gradient of the symbol; the imaginary part vanishes by symmetry.
    pub fn velocity_complex(&self, xi: &[f64]) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim];
        for (m, g) in self.offsets.iter().zip(&self.coeffs) {
            let ph: f64 = m.iter().zip(xi).map(|(a, b)| *a as f64 * b).sum();
            let e = g * C64::new(0.0, -ph).exp();
            for (vk, mk) in v.iter_mut().zip(m) {
                *vk += C64::new(0.0, -(*mk as f64)) * e;
            }
        }
        v
    }

    pub fn velocity(&self, xi: &[f64]) -> Vec<f64> {
        self.velocity_complex(xi).iter().map(|c| c.re).collect()
    }

    /// Range of p₀ sampled on a grid of `n` points per dimension.
    pub fn symbol_range(&self, n: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for_each_torus_point(self.dim, n, |xi| {
            let p = self.p0(xi);
            lo = lo.min(p);
            hi = hi.max(p);
        });
        (lo, hi)
    }
}

/// Visit every point of the uniform `n^dim` torus grid.
pub fn for_each_torus_point(dim: usize, n: usize, mut f: impl FnMut(&[f64])) {
    let total = n.pow(dim as u32);
    let mut xi = vec![0.0; dim];
    for idx in 0..total {
        let mut r = idx;
        for k in (0..dim).rev() {
            xi[k] = 2.0 * PI * (r % n) as f64 / n as f64;
            r /= n;
        }
        f(&xi);
    }
}

/// p₀ as a momentum-only symbol.
pub fn build_p0(stencil: &Stencil) -> Symbol {
    let s = stencil.clone();
    Symbol::momentum(stencil.dim(), move |xi| s.p0_complex(xi))
        .with_class(SymbolClass::S { order: 0.0 })
}

pub fn velocity(stencil: &Stencil, xi: &[f64]) -> Vec<f64> {
    stencil.velocity(xi)
}

/// min |v(ξ)| over {ξ : p₀(ξ) ∈ [lo, hi]} on a grid of `grid_n` points per dimension.
pub fn check_energy_window(stencil: &Stencil, lo: f64, hi: f64, grid_n: usize) -> Result<f64> {
    if grid_n < 64 {
        return Err(Error::Invalid(format!("grid_n = {grid_n} < 64")));
    }
    if !(lo <= hi) {
        return Err(Error::Invalid(format!("empty interval [{lo}, {hi}]")));
    }
    let mut best = f64::INFINITY;
    for_each_torus_point(stencil.dim(), grid_n, |xi| {
        let p = stencil.p0(xi);
        if p >= lo && p <= hi {
            let v = stencil.velocity(xi);
            best = best.min(v.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
    });
    if best.is_infinite() {
        return Err(Error::EmptyShell { lo, hi });
    }
    Ok(best)
}

/// Like [`check_energy_window`] but rejects windows whose min |v| is below `floor`.
pub fn validate_energy_window(
    stencil: &Stencil,
    lo: f64,
    hi: f64,
    grid_n: usize,
    floor: f64,
) -> Result<f64> {
    let min_v = check_energy_window(stencil, lo, hi, grid_n)?;
    if min_v < floor {
        return Err(Error::CriticalValue { lo, hi, min_v });
    }
    Ok(min_v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialForm {
    /// c (1 + |n|²)^{−μ/2}
    PowerLaw,
    /// c n₁ (1 + |n|²)^{−(μ+1)/2}
    Dipole,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Potential {
    Zero,
    Analytic {
        form: PotentialForm,
        amplitude: f64,
        mu: f64,
    },
    /// Values on a box of the given radius, row-major; zero outside.
    Table {
        dim: usize,
        radius: usize,
        values: Vec<f64>,
        mu: f64,
    },
}

impl Potential {
    pub fn power_law(amplitude: f64, mu: f64) -> Result<Self> {
        Self::analytic(PotentialForm::PowerLaw, amplitude, mu)
    }

    pub fn analytic(form: PotentialForm, amplitude: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::Invalid(format!(
                "decay exponent mu = {mu} not in (0, 1]"
            )));
        }
        Ok(Potential::Analytic {
            form,
            amplitude,
            mu,
        })
    }

    pub fn mu(&self) -> f64 {
        match self {
            Potential::Zero => 1.0,
            Potential::Analytic { mu, .. } | Potential::Table { mu, .. } => *mu,
        }
    }

    pub fn eval(&self, n: &[i64]) -> f64 {
        let r2: f64 = n.iter().map(|x| (*x as f64).powi(2)).sum();
        match self {
            Potential::Zero => 0.0,
            Potential::Analytic {
                form: PotentialForm::PowerLaw,
                amplitude,
                mu,
            } => amplitude * (1.0 + r2).powf(-mu / 2.0),
            Potential::Analytic {
                form: PotentialForm::Dipole,
                amplitude,
                mu,
            } => amplitude * n[0] as f64 * (1.0 + r2).powf(-(mu + 1.0) / 2.0),
            Potential::Table {
                dim,
                radius,
                values,
                ..
            } => {
                let b = LatticeBox::new(*dim, *radius);
                b.index(n).map(|i| values[i]).unwrap_or(0.0)
            }
        }
    }

    /// Smallest C with |V(n)| ≤ C (1 + |n|)^{−μ} on the box.
    pub fn decay_constant(&self, bx: &LatticeBox) -> f64 {
        let mu = self.mu();
        (0..bx.len())
            .map(|i| {
                let n = bx.site(i);
                let r = n.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
                self.eval(&n).abs() * (1.0 + r).powf(mu)
            })
            .fold(0.0, f64::max)
    }
}

/// Sites n ∈ Z^d with ‖n‖∞ ≤ L, row-major (first coordinate slowest).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub dim: usize,
    pub radius: usize,
}

impl LatticeBox {
    pub fn new(dim: usize, radius: usize) -> Self {
        LatticeBox { dim, radius }
    }
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }
    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn site(&self, mut idx: usize) -> Vec<i64> {
        let s = self.side();
        let mut n = vec![0i64; self.dim];
        for k in (0..self.dim).rev() {
            n[k] = (idx % s) as i64 - self.radius as i64;
            idx /= s;
        }
        n
    }
    pub fn index(&self, n: &[i64]) -> Option<usize> {
        let s = self.side() as i64;
        let l = self.radius as i64;
        let mut idx = 0i64;
        for x in n {
            if x.abs() > l {
                return None;
            }
            idx = idx * s + (x + l);
        }
        Some(idx as usize)
    }
    /// Index of the site after wrapping every coordinate into the box.
    pub fn wrapped_index(&self, n: &[i64]) -> usize {
        let s = self.side() as i64;
        let l = self.radius as i64;
        let mut idx = 0i64;
        for x in n {
            idx = idx * s + (x + l).rem_euclid(s);
        }
        idx as usize
    }
    pub fn sup_norm(n: &[i64]) -> i64 {
        n.iter().map(|x| x.abs()).max().unwrap_or(0)
    }
    pub fn sites(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(|i| self.site(i))
    }
}

/// Cubic absorbing ramp on the outer layer of the box.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CapProfile {
    pub width: usize,
    pub strength: f64,
}

impl CapProfile {
    pub fn new(width: usize, strength: f64) -> Result<Self> {
        if width == 0 || !(strength > 0.0) {
            return Err(Error::Invalid(format!(
                "CAP needs width > 0 and strength > 0, got ({width}, {strength})"
            )));
        }
        Ok(CapProfile { width, strength })
    }

    pub fn value(&self, n: &[i64], radius: usize) -> f64 {
        let inner = radius as f64 - self.width as f64;
        let r = LatticeBox::sup_norm(n) as f64;
        if r > inner {
            self.strength * ((r - inner) / self.width as f64).powi(3)
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Hops leaving the box are dropped.
    #[default]
    Dirichlet,
    Periodic,
}

/// H = H₀ + V − iW on a box, applied matrix-free.
pub struct Hamiltonian {
    stencil: Stencil,
    bx: LatticeBox,
    boundary: Boundary,
    potential: Vec<f64>,
    cap: Vec<f64>,
    /// Off-diagonal part per row: (column, coefficient), zero offset excluded.
    hops: Vec<Vec<(usize, C64)>>,
    onsite: C64,
}

impl Hamiltonian {
    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }
    pub fn lattice_box(&self) -> LatticeBox {
        self.bx
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn potential_values(&self) -> &[f64] {
        &self.potential
    }
    pub fn cap_values(&self) -> &[f64] {
        &self.cap
    }
    pub fn has_cap(&self) -> bool {
        self.cap.iter().any(|w| *w != 0.0)
    }
    pub fn hops(&self) -> &[Vec<(usize, C64)>] {
        &self.hops
    }
    /// Diagonal entry at site index i (stencil zero offset + V − iW).
    pub fn diag(&self, i: usize) -> C64 {
        self.onsite + C64::new(self.potential[i], -self.cap[i])
    }

    /// Same operator with the CAP removed.
    pub fn without_cap(&self) -> Hamiltonian {
        Hamiltonian {
            stencil: self.stencil.clone(),
            bx: self.bx,
            boundary: self.boundary,
            potential: self.potential.clone(),
            cap: vec![0.0; self.cap.len()],
            hops: self.hops.clone(),
            onsite: self.onsite,
        }
    }

    /// Interval containing the numerical range of the hermitian part (Gershgorin).
    pub fn real_enclosure(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, row) in self.hops.iter().enumerate() {
            let rad: f64 = row.iter().map(|(_, c)| c.norm()).sum();
            let d = self.diag(i).re;
            lo = lo.min(d - rad);
            hi = hi.max(d + rad);
        }
        (lo, hi)
    }

    /// Radius bound Σ|γ_m| + max|V| + max W.
    pub fn radius_bound(&self) -> f64 {
        let v = self.potential.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let w = self.cap.iter().fold(0.0f64, |a, b| a.max(*b));
        self.stencil.abs_sum() + v + w
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<C64> {
        let n = self.bx.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += self.diag(i);
            for (j, c) in &self.hops[i] {
                m[(i, *j)] += c;
            }
        }
        m
    }
}

impl LinearMap for Hamiltonian {
    fn rows(&self) -> usize {
        self.bx.len()
    }
    fn cols(&self) -> usize {
        self.bx.len()
    }
    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.bx.len(), u)?;
        Ok(self
            .hops
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut acc = self.diag(i) * u[i];
                for (j, c) in row {
                    acc += c * u[*j];
                }
                acc
            })
            .collect())
    }
    fn adjoint_apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        check_len(self.bx.len(), u)?;
        let mut out: Vec<C64> = (0..u.len()).map(|i| self.diag(i).conj() * u[i]).collect();
        for (i, row) in self.hops.iter().enumerate() {
            for (j, c) in row {
                out[*j] += c.conj() * u[i];
            }
        }
        Ok(out)
    }
    fn is_hermitian(&self) -> bool {
        !self.has_cap()
    }
    fn bandwidth(&self) -> Option<usize> {
        if self.bx.dim == 1 && self.boundary == Boundary::Dirichlet {
            Some(self.stencil.bandwidth())
        } else {
            None
        }
    }
}

pub fn assemble_hamiltonian(
    stencil: &Stencil,
    potential: &Potential,
    bx: LatticeBox,
    cap: Option<CapProfile>,
    boundary: Boundary,
) -> Result<Hamiltonian> {
    if stencil.dim() != bx.dim {
        return Err(Error::Invalid(format!(
            "stencil dimension {} differs from box dimension {}",
            stencil.dim(),
            bx.dim
        )));
    }
    let w = cap.map(|c| c.width).unwrap_or(0);
    if bx.radius <= stencil.bandwidth() + w {
        return Err(Error::BoxTooSmall(format!(
            "radius {} must exceed bandwidth {} + CAP width {w}",
            bx.radius,
            stencil.bandwidth()
        )));
    }
    if let Potential::Table {
        dim,
        radius,
        values,
        ..
    } = potential
    {
        if values.len() != LatticeBox::new(*dim, *radius).len() {
            return Err(Error::Invalid(
                "potential table has the wrong number of entries".into(),
            ));
        }
    }
    let n = bx.len();
    let mut potential_v = Vec::with_capacity(n);
    let mut cap_v = Vec::with_capacity(n);
    let mut hops = Vec::with_capacity(n);
    let mut onsite = C64::new(0.0, 0.0);
    for (m, g) in stencil.offsets().iter().zip(stencil.coeffs()) {
        if m.iter().all(|x| *x == 0) {
            onsite += g;
        }
    }
    for i in 0..n {
        let site = bx.site(i);
        let v = potential.eval(&site);
        if !v.is_finite() {
            return Err(Error::Invalid(format!("potential not finite at {site:?}")));
        }
        potential_v.push(v);
        cap_v.push(cap.map(|c| c.value(&site, bx.radius)).unwrap_or(0.0));
        let mut row = Vec::new();
        for (m, g) in stencil.offsets().iter().zip(stencil.coeffs()) {
            if m.iter().all(|x| *x == 0) {
                continue;
            }
            let src: Vec<i64> = site.iter().zip(m).map(|(a, b)| a - b).collect();
            let j = match boundary {
                Boundary::Dirichlet => bx.index(&src),
                Boundary::Periodic => Some(bx.wrapped_index(&src)),
            };
            if let Some(j) = j {
                row.push((j, *g));
            }
        }
        hops.push(row);
    }
    Ok(Hamiltonian {
        stencil: stencil.clone(),
        bx,
        boundary,
        potential: potential_v,
        cap: cap_v,
        hops,
        onsite,
    })
}

/// Shared handle used by the probes.
pub type SharedHamiltonian = Arc<Hamiltonian>;

/// CAP width as a fraction of the box radius.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapSpec {
    pub width_fraction: f64,
    pub strength: f64,
}

impl Default for CapSpec {
    fn default() -> Self {
        CapSpec {
            width_fraction: 0.25,
            strength: 1.0,
        }
    }
}

impl CapSpec {
    pub fn profile(&self, radius: usize) -> Result<CapProfile> {
        let w = ((radius as f64) * self.width_fraction).round().max(1.0) as usize;
        CapProfile::new(w, self.strength)
    }
}

/// Everything needed to assemble H on a box of any radius.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    pub stencil: Stencil,
    pub potential: Potential,
    pub cap: Option<CapSpec>,
    pub boundary: Boundary,
}

impl ModelSpec {
    /// d = 1, p₀ = 1 − cos ξ, V = 0.
    pub fn free_1d() -> Self {
        ModelSpec {
            stencil: Stencil::laplacian(1),
            potential: Potential::Zero,
            cap: Some(CapSpec::default()),
            boundary: Boundary::Dirichlet,
        }
    }

    /// d = 1, p₀ = 1 − cos ξ, V(n) = 0.5 (1 + n²)^{−1/4}.
    pub fn reference_1d() -> Self {
        ModelSpec {
            potential: Potential::power_law(0.5, 0.5).expect("valid exponent"),
            ..Self::free_1d()
        }
    }

    pub fn dim(&self) -> usize {
        self.stencil.dim()
    }

    pub fn hamiltonian(&self, radius: usize) -> Result<Hamiltonian> {
        let bx = LatticeBox::new(self.dim(), radius);
        let cap = self.cap.map(|c| c.profile(radius)).transpose()?;
        assemble_hamiltonian(&self.stencil, &self.potential, bx, cap, self.boundary)
    }

    /// H without absorbing layer.
    pub fn hermitian(&self, radius: usize) -> Result<Hamiltonian> {
        let bx = LatticeBox::new(self.dim(), radius);
        assemble_hamiltonian(&self.stencil, &self.potential, bx, None, self.boundary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmap::{adjoint_defect, dot, seeded_vector};

    fn lap1() -> Stencil {
        Stencil::laplacian(1)
    }

    #[test]
    fn p0_examples() {
        let s = lap1();
        assert!((s.p0(&[0.0])).abs() < 1e-15);
        assert!((s.p0(&[PI]) - 2.0).abs() < 1e-15);
        let s2 = Stencil::laplacian(2);
        assert!((s2.p0(&[PI / 2.0, PI / 2.0]) - 2.0).abs() < 1e-14);
        for k in 0..50 {
            let xi = 0.13 * k as f64;
            assert!(s.p0_complex(&[xi]).im.abs() < 1e-14);
            assert!(build_p0(&s).eval(&[0.0], &[xi]).im.abs() < 1e-14);
        }
    }

    #[test]
    fn velocity_examples() {
        let s = lap1();
        assert!((s.velocity(&[PI / 2.0])[0] - 1.0).abs() < 1e-14);
        assert!(s.velocity(&[0.0])[0].abs() < 1e-14);
        assert!((s.velocity(&[-PI / 2.0])[0] + 1.0).abs() < 1e-14);
        assert!(s.velocity_complex(&[0.7])[0].im.abs() < 1e-14);
    }

    #[test]
    fn asymmetric_stencil_rejected() {
        let r = Stencil::new(
            1,
            vec![vec![0], vec![1]],
            vec![C64::new(1.0, 0.0), C64::new(-0.5, 0.0)],
        );
        assert!(matches!(r, Err(Error::Stencil(_))));
        let r = Stencil::new(
            1,
            vec![vec![1], vec![-1]],
            vec![C64::new(0.0, 1.0), C64::new(0.0, 1.0)],
        );
        assert!(matches!(r, Err(Error::Stencil(_))));
    }

    #[test]
    fn energy_window_examples() {
        let s = lap1();
        let v = check_energy_window(&s, 0.9, 1.1, 1 << 20).unwrap();
        assert!((v - 0.99499).abs() < 1e-5, "{v}");
        assert!(matches!(
            validate_energy_window(&s, -0.1, 0.1, 4096, 0.05),
            Err(Error::CriticalValue { .. })
        ));
        assert!(matches!(
            check_energy_window(&s, 2.5, 3.0, 4096),
            Err(Error::EmptyShell { .. })
        ));
    }

    #[test]
    fn box_index_roundtrip() {
        for bx in [LatticeBox::new(1, 5), LatticeBox::new(2, 3)] {
            assert_eq!(bx.len(), bx.side().pow(bx.dim as u32));
            for i in 0..bx.len() {
                assert_eq!(bx.index(&bx.site(i)), Some(i));
            }
        }
        assert_eq!(LatticeBox::new(1, 5).index(&[6]), None);
    }

    #[test]
    fn hamiltonian_examples() {
        let bx = LatticeBox::new(1, 10);
        let h =
            assemble_hamiltonian(&lap1(), &Potential::Zero, bx, None, Boundary::Dirichlet).unwrap();
        let mut u = vec![C64::new(0.0, 0.0); bx.len()];
        u[bx.index(&[0]).unwrap()] = C64::new(1.0, 0.0);
        let hu = h.apply(&u).unwrap();
        for i in 0..bx.len() {
            let n = bx.site(i)[0];
            let expect = match n {
                0 => 1.0,
                1 | -1 => -0.5,
                _ => 0.0,
            };
            assert_eq!(hu[i], C64::new(expect, 0.0));
        }
        let ones = vec![C64::new(1.0, 0.0); bx.len()];
        let h1 = h.apply(&ones).unwrap();
        for i in 1..bx.len() - 1 {
            assert!(h1[i].norm() < 1e-15);
        }

        let v = Potential::power_law(1.0, 0.5).unwrap();
        let h = assemble_hamiltonian(&lap1(), &v, bx, None, Boundary::Dirichlet).unwrap();
        let mut u = vec![C64::new(0.0, 0.0); bx.len()];
        u[bx.index(&[5]).unwrap()] = C64::new(1.0, 0.0);
        let hu = h.apply(&u).unwrap();
        assert!((hu[bx.index(&[5]).unwrap()].re - (1.0 + 26f64.powf(-0.25))).abs() < 1e-14);
    }

    #[test]
    fn hermitian_and_dissipative() {
        let bx = LatticeBox::new(1, 40);
        let v = Potential::power_law(0.5, 0.5).unwrap();
        let h = assemble_hamiltonian(&lap1(), &v, bx, None, Boundary::Dirichlet).unwrap();
        assert!(h.is_hermitian());
        for k in 0..20 {
            let u = seeded_vector(100 + 2 * k, bx.len());
            let w = seeded_vector(101 + 2 * k, bx.len());
            let lhs = dot(&w, &h.apply(&u).unwrap());
            let rhs = dot(&h.apply(&w).unwrap(), &u);
            let scale = crate::linmap::norm2(&u) * crate::linmap::norm2(&w);
            assert!((lhs - rhs).norm() / scale < 1e-12);
        }
        let cap = CapProfile::new(5, 1.0).unwrap();
        let hc = assemble_hamiltonian(&lap1(), &v, bx, Some(cap), Boundary::Dirichlet).unwrap();
        assert!(!hc.is_hermitian());
        assert!(adjoint_defect(&hc, 3, 10).unwrap() < 1e-13);
        for k in 0..20 {
            let u = seeded_vector(500 + k, bx.len());
            assert!(dot(&u, &hc.apply(&u).unwrap()).im <= 1e-14);
        }
        assert!(hc.cap_values().iter().all(|w| *w >= 0.0));
        for i in 0..bx.len() {
            if bx.site(i)[0].abs() <= 35 {
                assert_eq!(hc.cap_values()[i], 0.0);
            }
        }
    }

    #[test]
    fn rayleigh_quotients_inside_symbol_range() {
        let bx = LatticeBox::new(1, 30);
        let h =
            assemble_hamiltonian(&lap1(), &Potential::Zero, bx, None, Boundary::Dirichlet).unwrap();
        let (lo, hi) = lap1().symbol_range(4096);
        for k in 0..20 {
            let u = seeded_vector(900 + k, bx.len());
            let q = dot(&u, &h.apply(&u).unwrap()).re / dot(&u, &u).re;
            assert!(q >= lo - 1e-10 && q <= hi + 1e-10);
        }
    }

    #[test]
    fn periodic_plane_wave_is_eigenvector() {
        let bx = LatticeBox::new(1, 8);
        let s = lap1();
        let h = assemble_hamiltonian(&s, &Potential::Zero, bx, None, Boundary::Periodic).unwrap();
        let n = bx.len();
        for k in 0..n {
            let xi = 2.0 * PI * k as f64 / n as f64;
            let u: Vec<C64> = bx
                .sites()
                .map(|m| C64::new(0.0, xi * m[0] as f64).exp())
                .collect();
            let hu = h.apply(&u).unwrap();
            let p = s.p0(&[xi]);
            for (a, b) in hu.iter().zip(&u) {
                assert!((a - p * b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn decay_constant_is_amplitude_scale() {
        let v = Potential::power_law(0.5, 0.5).unwrap();
        let c = v.decay_constant(&LatticeBox::new(1, 200));
        assert!(c > 0.5 && c < 0.5 * 2f64.sqrt() + 1e-12);
        assert!(Potential::power_law(1.0, 1.5).is_err());
    }
}
