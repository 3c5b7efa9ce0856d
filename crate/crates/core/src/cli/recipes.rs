//! Canned experiment configs, one per reproducible claim.

pub struct Recipe {
    pub name: &'static str,
    pub description: &'static str,
    /// The mathematical statement the recipe exercises.
    pub claim: &'static str,
    pub config: &'static str,
}

pub const RECIPES: &[Recipe] = &[
    Recipe {
        name: "free-wf-offset",
        description: "free model, kernel point off the outgoing sets: semiclassical norms decay fast",
        claim: "wave-front set of the outgoing resolvent kernel lies in the outgoing sets (free case)",
        config: r#"
[model]
potential = "zero"

[probe]
kind = "wf"
x = [-4.0]
xi = [1.5707963267948966]
y = [-3.0]
eta = [-1.5707963267948966]
delta1 = 0.2
delta2 = 0.2
expectation = "off"

[[criteria]]
metric = "slope"
op = ">="
value = 3.0
"#,
    },
    Recipe {
        name: "reference-wf-decay",
        description: "V = 0.5<n>^{-1/2}, same off-set point: slope >= 3 with a clean log-log fit",
        claim: "wave-front set of the outgoing resolvent kernel lies in the outgoing sets (long-range potential)",
        config: r#"
[probe]
kind = "wf"
x = [-4.0]
xi = [1.5707963267948966]
y = [-3.0]
eta = [-1.5707963267948966]
delta1 = 0.2
delta2 = 1.0
expectation = "off"

[[criteria]]
metric = "slope"
op = ">="
value = 3.0

[[criteria]]
metric = "max_residual"
op = "<="
value = 0.3

[[criteria]]
metric = "radius"
op = "<="
value = 4096
"#,
    },
    Recipe {
        name: "free-wf-onset",
        description: "free model, kernel point on the outgoing flow-out: norms do not decay",
        claim: "points of the outgoing flow-out belong to the wave-front set (sharpness of the inclusion)",
        config: r#"
[model]
potential = "zero"

[probe]
kind = "wf"
x = [4.0]
xi = [1.5707963267948966]
y = [-3.0]
eta = [1.5707963267948966]
delta1 = 0.2
delta2 = 0.2
expectation = "on"

[[criteria]]
metric = "slope"
op = "<="
value = 1.0
"#,
    },
    Recipe {
        name: "free-kernel-oracle",
        description: "CAP-truncated LAP column against i e^{i theta |n|} / sin(theta)",
        claim: "the free outgoing resolvent kernel at energy 1 in one dimension",
        config: r#"
[model]
potential = "zero"

[probe]
kind = "free-kernel"
branch = "plus"
radius = 512
compare_radius = 256

[numerics]
convergence_tol = 1e-6

[[criteria]]
metric = "relative_error"
op = "<="
value = 1e-3
"#,
    },
    Recipe {
        name: "ik-weighted",
        description: "incoming-to-outgoing cone sandwich with <n>^{-1} weight, boxes 128/256/512",
        claim: "Isozaki-Kitada: the outgoing resolvent is bounded from incoming to outgoing cones with any weight",
        config: r#"
[probe]
kind = "ik"
gamma_minus = -0.3
gamma_plus = 0.3
weight = 1.0

[[criteria]]
metric = "ratio"
op = "<="
value = 1.2
"#,
    },
    Recipe {
        name: "one-sided-outgoing",
        description: "<n>^{-3} R(1 + i0) <n>^{1} restricted to an outgoing cone, boxes 128/256/512",
        claim: "one-sided estimate: weights may be traded across the resolvent inside an outgoing cone",
        config: r#"
[probe]
kind = "one-sided"
branch = "plus"
gamma = -0.4
nu = 3.0
s = 1.0

[[criteria]]
metric = "ratio"
op = "<="
value = 1.2
"#,
    },
    Recipe {
        name: "propagation-offset",
        description: "sup over t of localized propagator norms, off the outgoing sets",
        claim: "propagation estimate: microlocalized evolution between unrelated phase-space points is O(h^N) uniformly in t",
        config: r#"
[probe]
kind = "propagation"
x = [-4.0]
xi = [1.5707963267948966]
y = [-3.0]
eta = [-1.5707963267948966]
delta1 = 0.2
delta2 = 1.0
eps_f = 0.2
time_points = 32
expectation = "off"

[numerics]
norm_tol = 1e-4

[[criteria]]
metric = "slope"
op = ">="
value = 3.0
"#,
    },
    Recipe {
        name: "local-decay",
        description: "weighted propagator norm on t in [10, 200], radius 512, nu = 3",
        claim: "local decay: <n>^{-nu} e^{-itH} f(H) <n>^{-nu} decays like <t>^{-kappa}",
        config: r#"
[model]
cap = false

[probe]
kind = "local-decay"
eps_f = 0.2
nu = 3.0
t_min = 10.0
t_max = 200.0
points = 32
radius = 512

[[criteria]]
metric = "kappa"
op = ">="
value = 1.5
"#,
    },
    Recipe {
        name: "t-splitting",
        description: "exponent bookkeeping when the time integral is split at t = h^{-tau}",
        claim: "combining the propagation estimate with local decay gives an O(h^N) resolvent bound",
        config: r#"
[probe]
kind = "t-splitting"
slope_prop = 6.0
kappa = 3.8
nu = 3.0
m = 1.0

[[criteria]]
metric = "exponent_opt"
op = ">="
value = 1.0
"#,
    },
    Recipe {
        name: "escape-ladder",
        description: "transport inequalities, energy defect exponent and Heisenberg monotonicity",
        claim: "escape-function ladder: positive commutator estimate with O(h^2N) remainder",
        config: r#"
[model]
potential = "zero"
cap = false

[probe]
kind = "escape"
x2 = 3.0
xi2 = 1.5707963267948966
delta1 = 0.2
delta2 = 0.2
h = 0.125
depth = 2
safety = 2.0
energy_x2 = 0.0
energy_delta1 = 1.5
energy_delta2 = 0.55
energy_radius = 48
energy_h_list = [0.25, 0.125, 0.0625]
energy_t_samples = [0.0, 1.0, 2.0, 4.0]
monotonicity_x2 = -2.0
monotonicity_h = 0.125
monotonicity_t = [1.0, 5.0, 20.0]

[[criteria]]
metric = "transport_min"
op = ">="
value = -1e-12

[[criteria]]
metric = "pinning_control_rejected"
op = ">="
value = 1.0

[[criteria]]
metric = "energy_exponent"
op = ">="
value = 1.5

[[criteria]]
metric = "monotonicity_pass"
op = ">="
value = 1.0
"#,
    },
    Recipe {
        name: "calculus-invariants",
        description: "quantization identities, disjoint composition, resolvent identity, unitarity",
        claim: "basic pseudodifferential calculus and spectral identities on the lattice",
        config: r#"
[probe]
kind = "invariants"

[[criteria]]
metric = "all_pass"
op = ">="
value = 1.0

[[criteria]]
metric = "composition_slope"
op = ">="
value = 3.0
"#,
    },
];

pub fn find(name: &str) -> Option<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::ExperimentConfig;

    #[test]
    fn all_recipes_parse_and_name_their_metrics() {
        assert!(RECIPES.len() >= 8);
        for r in RECIPES {
            let c =
                ExperimentConfig::from_toml(r.config).unwrap_or_else(|e| panic!("{}: {e}", r.name));
            assert!(!c.criteria.is_empty(), "{}", r.name);
            assert!(!r.claim.is_empty() && !r.description.is_empty());
        }
        assert!(find("free-wf-offset").is_some());
    }
}
