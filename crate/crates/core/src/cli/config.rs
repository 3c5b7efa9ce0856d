//! Experiment configuration (TOML). Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::KernelPoint;
use crate::lattice::{Boundary, CapSpec, ModelSpec, Potential, PotentialForm, Stencil};
use crate::linmap::C64;
use crate::propagate::Horizon;
use crate::resolvent::{Branch, Expectation};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelBlock,
    pub probe: Option<ProbeBlock>,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub criteria: Vec<Criterion>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StencilKind {
    Laplacian,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Zero,
    PowerLaw,
    Dipole,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub dim: usize,
    pub stencil: StencilKind,
    /// Only for `stencil = "custom"`: hopping offsets and real coefficients.
    pub offsets: Vec<Vec<i64>>,
    pub coeffs: Vec<f64>,
    pub potential: PotentialKind,
    pub amplitude: f64,
    pub mu: f64,
    pub boundary: Boundary,
    pub cap: bool,
    pub cap_width_fraction: f64,
    pub cap_strength: f64,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            dim: 1,
            stencil: StencilKind::Laplacian,
            offsets: Vec::new(),
            coeffs: Vec::new(),
            potential: PotentialKind::PowerLaw,
            amplitude: 0.5,
            mu: 0.5,
            boundary: Boundary::Dirichlet,
            cap: true,
            cap_width_fraction: 0.25,
            cap_strength: 1.0,
        }
    }
}

impl ModelBlock {
    pub fn to_spec(&self) -> Result<ModelSpec> {
        if self.dim == 0 || self.dim > 3 {
            return Err(Error::Config(format!(
                "model.dim = {} not in 1..=3",
                self.dim
            )));
        }
        let stencil = match self.stencil {
            StencilKind::Laplacian => {
                if !self.offsets.is_empty() || !self.coeffs.is_empty() {
                    return Err(Error::Config(
                        "offsets/coeffs are only read with stencil = \"custom\"".into(),
                    ));
                }
                Stencil::laplacian(self.dim)
            }
            StencilKind::Custom => Stencil::new(
                self.dim,
                self.offsets.clone(),
                self.coeffs.iter().map(|c| C64::new(*c, 0.0)).collect(),
            )?,
        };
        let potential = match self.potential {
            PotentialKind::Zero => Potential::Zero,
            PotentialKind::PowerLaw => {
                Potential::analytic(PotentialForm::PowerLaw, self.amplitude, self.mu)?
            }
            PotentialKind::Dipole => {
                Potential::analytic(PotentialForm::Dipole, self.amplitude, self.mu)?
            }
        };
        if self.cap
            && !(self.cap_width_fraction > 0.0
                && self.cap_width_fraction < 0.5
                && self.cap_strength > 0.0)
        {
            return Err(Error::Config(format!(
                "cap needs width fraction in (0, 0.5) and positive strength, got {} and {}",
                self.cap_width_fraction, self.cap_strength
            )));
        }
        Ok(ModelSpec {
            stencil,
            potential,
            cap: self.cap.then_some(CapSpec {
                width_fraction: self.cap_width_fraction,
                strength: self.cap_strength,
            }),
            boundary: self.boundary,
        })
    }
}

fn default_lambda() -> f64 {
    1.0
}
fn default_h_list() -> Vec<f64> {
    vec![0.125, 0.0625, 0.03125, 0.015625]
}
fn default_radii() -> Vec<usize> {
    vec![128, 256, 512]
}

pub fn kernel_point(x: &[f64], xi: &[f64], y: &[f64], eta: &[f64]) -> Result<KernelPoint> {
    KernelPoint::new(x.to_vec(), xi.to_vec(), y.to_vec(), eta.to_vec())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProbeBlock {
    /// Semiclassical norms ‖Op(a₁) R(λ ± i0) Op(a₂)‖ over an h sweep.
    Wf {
        x: Vec<f64>,
        xi: Vec<f64>,
        y: Vec<f64>,
        eta: Vec<f64>,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_h_list")]
        h_list: Vec<f64>,
        delta1: f64,
        delta2: f64,
        expectation: Expectation,
    },
    /// LAP column against the closed-form free kernel (d = 1, V = 0).
    FreeKernel {
        #[serde(default = "default_lambda")]
        lambda: f64,
        branch: Branch,
        radius: usize,
        /// Compare on |n| ≤ compare_radius.
        compare_radius: usize,
    },
    /// Weighted incoming/outgoing cone bound over box radii.
    Ik {
        #[serde(default = "default_lambda")]
        lambda: f64,
        gamma_minus: f64,
        gamma_plus: f64,
        weight: f64,
        #[serde(default = "default_radii")]
        radii: Vec<usize>,
    },
    /// Weighted one-sided cone bound over box radii.
    OneSided {
        #[serde(default = "default_lambda")]
        lambda: f64,
        branch: Branch,
        gamma: f64,
        nu: f64,
        s: f64,
        #[serde(default = "default_radii")]
        radii: Vec<usize>,
    },
    /// ‖⟨n⟩^{−ν} e^{−itH} f(H) ⟨n⟩^{−ν}‖ on a log grid of times.
    LocalDecay {
        #[serde(default = "default_lambda")]
        lambda: f64,
        eps_f: f64,
        nu: f64,
        t_min: f64,
        t_max: f64,
        points: usize,
        radius: usize,
    },
    /// sup_t ‖Op(a₁) e^{−itH} f(H) Op(a₂)‖ over an h sweep.
    Propagation {
        x: Vec<f64>,
        xi: Vec<f64>,
        y: Vec<f64>,
        eta: Vec<f64>,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_h_list")]
        h_list: Vec<f64>,
        delta1: f64,
        delta2: f64,
        eps_f: f64,
        time_points: usize,
        /// Fixed horizon; omit for T(h) = h⁻².
        horizon: Option<f64>,
        expectation: Expectation,
    },
    /// Exponent bookkeeping for splitting the time integral.
    TSplitting {
        slope_prop: f64,
        kappa: f64,
        nu: f64,
        m: f64,
    },
    /// Escape ladder: transport, energy inequality and monotonicity.
    Escape {
        x2: f64,
        xi2: f64,
        delta1: f64,
        delta2: f64,
        h: f64,
        depth: usize,
        safety: f64,
        /// Energy check: ψ₀ at (energy_x2, xi2) with radii (energy_delta1, energy_delta2).
        energy_x2: f64,
        energy_delta1: f64,
        energy_delta2: f64,
        energy_radius: usize,
        energy_h_list: Vec<f64>,
        energy_t_samples: Vec<f64>,
        monotonicity_x2: f64,
        monotonicity_h: f64,
        monotonicity_t: Vec<f64>,
    },
    /// Quantization identities, disjoint composition, resolvent identity, unitarity.
    Invariants {},
}

impl ProbeBlock {
    pub fn kind(&self) -> &'static str {
        match self {
            ProbeBlock::Wf { .. } => "wf",
            ProbeBlock::FreeKernel { .. } => "free-kernel",
            ProbeBlock::Ik { .. } => "ik",
            ProbeBlock::OneSided { .. } => "one-sided",
            ProbeBlock::LocalDecay { .. } => "local-decay",
            ProbeBlock::Propagation { .. } => "propagation",
            ProbeBlock::TSplitting { .. } => "t-splitting",
            ProbeBlock::Escape { .. } => "escape",
            ProbeBlock::Invariants {} => "invariants",
        }
    }

    pub fn horizon(horizon: Option<f64>) -> Horizon {
        horizon
            .map(Horizon::Fixed)
            .unwrap_or(Horizon::InverseSquare)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsBlock {
    pub seed: u64,
    pub norm_tol: f64,
    pub convergence_tol: f64,
    pub box_factor: f64,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        NumericsBlock {
            seed: crate::quantize::NORM_SEED,
            norm_tol: 1e-6,
            convergence_tol: 1e-8,
            box_factor: 8.0,
            jobs: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: "out".into(),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

/// Pass iff `metric op value`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criterion {
    pub metric: String,
    pub op: Comparison,
    pub value: f64,
}

impl Criterion {
    pub fn holds(&self, x: f64) -> bool {
        match self.op {
            Comparison::Ge => x >= self.value,
            Comparison::Le => x <= self.value,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn probe(&self) -> Result<&ProbeBlock> {
        self.probe
            .as_ref()
            .ok_or_else(|| Error::Config("empty probe block".into()))
    }

    /// Schema checks that need no numerics.
    pub fn validate(&self) -> Result<()> {
        let model = self.model.to_spec()?;
        let probe = self.probe()?;
        let n = &self.numerics;
        if !(n.norm_tol > 0.0
            && n.norm_tol <= 0.1
            && n.convergence_tol > 0.0
            && n.box_factor >= 4.0)
        {
            return Err(Error::Config(
                "numerics need norm_tol in (0, 0.1], convergence_tol > 0 and box_factor ≥ 4".into(),
            ));
        }
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            if v.is_empty() || v.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
                return Err(Error::Config(format!(
                    "{name} must be a non-empty list in (0, 1]"
                )));
            }
            Ok(())
        };
        let d = model.dim();
        match probe {
            ProbeBlock::Wf {
                x,
                xi,
                y,
                eta,
                h_list,
                delta1,
                delta2,
                ..
            }
            | ProbeBlock::Propagation {
                x,
                xi,
                y,
                eta,
                h_list,
                delta1,
                delta2,
                ..
            } => {
                positive("h_list", h_list)?;
                if x.len() != d || xi.len() != d || y.len() != d || eta.len() != d {
                    return Err(Error::Config(format!(
                        "phase-space points must have {d} components"
                    )));
                }
                if !(*delta1 > 0.0 && *delta2 > 0.0) {
                    return Err(Error::Config("delta1 and delta2 must be positive".into()));
                }
            }
            ProbeBlock::FreeKernel {
                radius,
                compare_radius,
                ..
            } => {
                if d != 1 || !matches!(model.potential, Potential::Zero) {
                    return Err(Error::Config(
                        "free-kernel needs d = 1 and potential = \"zero\"".into(),
                    ));
                }
                if compare_radius >= radius {
                    return Err(Error::Config("compare_radius must be below radius".into()));
                }
            }
            ProbeBlock::Ik {
                radii,
                gamma_minus,
                gamma_plus,
                ..
            } => {
                if radii.is_empty() {
                    return Err(Error::Config("radii must not be empty".into()));
                }
                if !(-1.0 < *gamma_minus && gamma_minus < gamma_plus && *gamma_plus < 1.0) {
                    return Err(Error::Config(
                        "need -1 < gamma_minus < gamma_plus < 1".into(),
                    ));
                }
            }
            ProbeBlock::OneSided {
                radii,
                nu,
                s,
                gamma,
                ..
            } => {
                if radii.is_empty() {
                    return Err(Error::Config("radii must not be empty".into()));
                }
                if !(*nu > 1.0) {
                    return Err(Error::Config(format!(
                        "one-sided probe needs nu > 1, got {nu}"
                    )));
                }
                if !(*s > 0.0 && *s < nu - 1.0) {
                    return Err(Error::Config(format!(
                        "one-sided probe needs 0 < s < nu - 1, got s = {s}, nu = {nu}"
                    )));
                }
                if !(gamma.abs() < 1.0) {
                    return Err(Error::Config("gamma must lie in (-1, 1)".into()));
                }
            }
            ProbeBlock::LocalDecay {
                t_min,
                t_max,
                points,
                eps_f,
                ..
            } => {
                if !(*t_min > 0.0 && t_max > t_min && *points >= 8 && *eps_f > 0.0) {
                    return Err(Error::Config(
                        "local-decay needs 0 < t_min < t_max, points ≥ 8, eps_f > 0".into(),
                    ));
                }
            }
            ProbeBlock::Escape {
                depth,
                energy_h_list,
                energy_radius,
                monotonicity_t,
                ..
            } => {
                positive("energy_h_list", energy_h_list)?;
                if *depth > 8
                    || *energy_radius > crate::escape::energy::DENSE_RADIUS_MAX
                    || monotonicity_t.is_empty()
                {
                    return Err(Error::Config(
                        "escape needs depth ≤ 8, energy_radius ≤ 64 and a non-empty monotonicity_t"
                            .into(),
                    ));
                }
                if d != 1 {
                    return Err(Error::Config(
                        "escape checks are implemented for d = 1".into(),
                    ));
                }
            }
            ProbeBlock::TSplitting { .. } | ProbeBlock::Invariants {} => {}
        }
        let known = super::probes::metric_names(probe.kind());
        for c in &self.criteria {
            if !known.contains(&c.metric.as_str()) {
                return Err(Error::Config(format!(
                    "criterion metric '{}' is not reported by a {} probe (known: {})",
                    c.metric,
                    probe.kind(),
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
[probe]
kind = "t-splitting"
slope_prop = 4.0
kappa = 2.0
nu = 3.0
m = 1.0
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(MIN).unwrap();
        assert_eq!(c.probe().unwrap().kind(), "t-splitting");
        assert_eq!(c.numerics.seed, crate::quantize::NORM_SEED);
        assert!(c.model.to_spec().unwrap().cap.is_some());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{MIN}\nbogus = 1\n");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(Error::Config(_))
        ));
        let bad = MIN.replace("[probe]", "[model]\ncolour = 3\n[probe]");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_probe_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml("[model]\ndim = 1\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn one_sided_s_range() {
        let t =
            "[probe]\nkind = \"one-sided\"\nbranch = \"plus\"\ngamma = -0.4\nnu = 3.0\ns = 2.0\n";
        let e = ExperimentConfig::from_toml(t).unwrap_err();
        assert!(e.to_string().contains("nu - 1"), "{e}");
        assert!(ExperimentConfig::from_toml(&t.replace("s = 2.0", "s = 1.0")).is_ok());
    }
}
