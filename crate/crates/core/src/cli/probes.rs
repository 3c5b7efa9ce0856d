//! Executes one probe block and flattens its result into CSV rows and metrics.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use super::config::{kernel_point, NumericsBlock, ProbeBlock};
use crate::error::{Error, Result};
use crate::escape::{
    choose_constants, energy_inequality_check, monotonicity_check, verify_transport,
    verify_transport_unchecked, Cutoff, EnergyOptions, EscapeLadder, TransportGrid,
};
use crate::invariants::run_invariant_suite;
use crate::lattice::{Boundary, ModelSpec};
use crate::linmap::C64;
use crate::propagate::{
    local_decay_probe, propagation_probe, t_splitting_bound, EnergyCutoff, PropagationOptions,
};
use crate::resolvent::{
    free_kernel_1d, ik_probe, lap_solve, one_sided_probe, wf_probe, BoundednessTable, ConeOptions,
    LapConfig, ProbeRow, WfOptions,
};

pub struct ProbeOutput {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub metrics: BTreeMap<String, f64>,
    /// Resolved options and wall-clock timings; goes to the manifest only.
    pub detail: Value,
}

/// Metric names each probe kind reports.
pub fn metric_names(kind: &str) -> &'static [&'static str] {
    match kind {
        "wf" => &[
            "slope",
            "max_residual",
            "radius",
            "off_outgoing",
            "norm_first",
            "norm_last",
        ],
        "free-kernel" => &["relative_error", "epsilon"],
        "ik" | "one-sided" => &["ratio", "bounded", "norm_min", "norm_last"],
        "local-decay" => &["kappa", "max_residual"],
        "propagation" => &["slope", "max_residual", "sup_max", "off_outgoing"],
        "t-splitting" => &["exponent_at_m", "tau_opt", "exponent_opt", "inconclusive"],
        "escape" => &[
            "transport_min",
            "fd_error",
            "pinning_control_rejected",
            "energy_exponent",
            "energy_fd_error",
            "monotonicity_pass",
            "monotonicity_min_margin",
            "sabotage_energy_exponent",
        ],
        "invariants" => &[
            "quantization_identities",
            "composition_slope",
            "resolvent_identity",
            "unitarity",
            "group_law",
            "all_pass",
        ],
        _ => &[],
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn e(x: f64) -> String {
    format!("{x:.12e}")
}

fn param_rows(rows: &[ProbeRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                e(r.param),
                e(r.epsilon),
                e(r.norm),
                r.iterations.to_string(),
            ]
        })
        .collect()
}

fn boundedness(t: BoundednessTable, detail: Value) -> ProbeOutput {
    let mut m = BTreeMap::new();
    m.insert("ratio".into(), t.ratio);
    m.insert("bounded".into(), flag(t.bounded));
    m.insert(
        "norm_min".into(),
        t.rows.iter().map(|r| r.norm).fold(f64::INFINITY, f64::min),
    );
    m.insert(
        "norm_last".into(),
        t.rows.last().map(|r| r.norm).unwrap_or(f64::NAN),
    );
    let secs: Vec<f64> = t.rows.iter().map(|r| r.seconds).collect();
    ProbeOutput {
        header: vec!["radius", "epsilon", "norm", "iterations"],
        rows: param_rows(&t.rows),
        metrics: m,
        detail: json!({ "options": detail, "seconds": secs }),
    }
}

pub fn execute(model: &ModelSpec, probe: &ProbeBlock, num: &NumericsBlock) -> Result<ProbeOutput> {
    let cone = ConeOptions {
        norm_tol: num.norm_tol,
        ..ConeOptions::default()
    };
    match probe {
        ProbeBlock::Wf {
            x,
            xi,
            y,
            eta,
            lambda,
            h_list,
            delta1,
            delta2,
            expectation,
        } => {
            let kp = kernel_point(x, xi, y, eta)?;
            let opts = WfOptions {
                expectation: *expectation,
                box_factor: num.box_factor,
                convergence_tol: num.convergence_tol,
                norm_tol: num.norm_tol,
            };
            let p = wf_probe(model, &kp, *lambda, h_list, *delta1, *delta2, &opts)?;
            let mut m = BTreeMap::new();
            m.insert("slope".into(), p.fit.slope);
            m.insert("max_residual".into(), p.fit.max_residual);
            m.insert("radius".into(), p.radius as f64);
            m.insert("off_outgoing".into(), flag(p.membership.off_outgoing()));
            m.insert(
                "norm_first".into(),
                p.rows.first().map(|r| r.norm).unwrap_or(f64::NAN),
            );
            m.insert(
                "norm_last".into(),
                p.rows.last().map(|r| r.norm).unwrap_or(f64::NAN),
            );
            let secs: Vec<f64> = p.rows.iter().map(|r| r.seconds).collect();
            Ok(ProbeOutput {
                header: vec!["h", "epsilon", "norm", "iterations"],
                rows: param_rows(&p.rows),
                metrics: m,
                detail: json!({ "options": opts, "membership": p.membership, "fit": p.fit, "seconds": secs }),
            })
        }
        ProbeBlock::FreeKernel {
            lambda,
            branch,
            radius,
            compare_radius,
        } => {
            let h = Arc::new(model.hamiltonian(*radius)?);
            let bx = h.lattice_box();
            let mut rhs = vec![C64::new(0.0, 0.0); bx.len()];
            rhs[bx.index(&[0]).expect("origin is in the box")] = C64::new(1.0, 0.0);
            let cfg = LapConfig::new(*lambda, *branch).with_tol(num.convergence_tol);
            let sol = lap_solve(&h, &cfg, &rhs)?;
            let (mut err, mut scale) = (0.0f64, 0.0f64);
            let mut rows = Vec::new();
            for (i, s) in bx.sites().enumerate() {
                if s[0].unsigned_abs() as usize <= *compare_radius {
                    let k = free_kernel_1d(*lambda, *branch, s[0])?;
                    err = err.max((sol.u[i] - k).norm());
                    scale = scale.max(k.norm());
                    rows.push(vec![
                        s[0].to_string(),
                        e(sol.u[i].re),
                        e(sol.u[i].im),
                        e(k.re),
                        e(k.im),
                    ]);
                }
            }
            let mut m = BTreeMap::new();
            m.insert("relative_error".into(), err / scale);
            m.insert("epsilon".into(), sol.epsilon);
            Ok(ProbeOutput {
                header: vec!["n", "lap_re", "lap_im", "exact_re", "exact_im"],
                rows,
                metrics: m,
                detail: json!({ "lap": cfg, "steps": sol.steps, "last_change": sol.last_change }),
            })
        }
        ProbeBlock::Ik {
            lambda,
            gamma_minus,
            gamma_plus,
            weight,
            radii,
        } => {
            let t = ik_probe(
                model,
                *lambda,
                *gamma_minus,
                *gamma_plus,
                *weight,
                radii,
                &cone,
            )?;
            Ok(boundedness(t, json!(cone)))
        }
        ProbeBlock::OneSided {
            lambda,
            branch,
            gamma,
            nu,
            s,
            radii,
        } => {
            let t = one_sided_probe(model, *lambda, *branch, *gamma, *nu, *s, radii, &cone)?;
            Ok(boundedness(t, json!(cone)))
        }
        ProbeBlock::LocalDecay {
            lambda,
            eps_f,
            nu,
            t_min,
            t_max,
            points,
            radius,
        } => {
            let grid: Vec<f64> = (0..*points)
                .map(|i| t_min * (t_max / t_min).powf(i as f64 / (*points - 1) as f64))
                .collect();
            let cut = EnergyCutoff::new(*lambda, *eps_f)?;
            let p = local_decay_probe(model, &cut, *nu, &grid, *radius)?;
            let mut m = BTreeMap::new();
            m.insert("kappa".into(), p.kappa);
            m.insert("max_residual".into(), p.fit.max_residual);
            let secs: Vec<f64> = p.rows.iter().map(|r| r.seconds).collect();
            Ok(ProbeOutput {
                header: vec!["t", "norm", "chebyshev_terms"],
                rows: p
                    .rows
                    .iter()
                    .map(|r| vec![e(r.t), e(r.norm), r.chebyshev_terms.to_string()])
                    .collect(),
                metrics: m,
                detail: json!({ "fit": p.fit, "seconds": secs }),
            })
        }
        ProbeBlock::Propagation {
            x,
            xi,
            y,
            eta,
            lambda,
            h_list,
            delta1,
            delta2,
            eps_f,
            time_points,
            horizon,
            expectation,
        } => {
            let kp = kernel_point(x, xi, y, eta)?;
            let opts = PropagationOptions {
                delta1: *delta1,
                delta2: *delta2,
                eps_f: *eps_f,
                box_factor: num.box_factor,
                time_points: *time_points,
                horizon: ProbeBlock::horizon(*horizon),
                expectation: *expectation,
                norm_tol: num.norm_tol,
            };
            let p = propagation_probe(model, &kp, *lambda, h_list, &opts)?;
            let mut m = BTreeMap::new();
            m.insert(
                "slope".into(),
                p.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN),
            );
            m.insert(
                "max_residual".into(),
                p.fit.as_ref().map(|f| f.max_residual).unwrap_or(f64::NAN),
            );
            m.insert(
                "sup_max".into(),
                p.sup_rows.iter().map(|r| r.sup_norm).fold(0.0, f64::max),
            );
            m.insert("off_outgoing".into(), flag(p.membership.off_outgoing()));
            let secs: Vec<f64> = p.sup_rows.iter().map(|r| r.seconds).collect();
            Ok(ProbeOutput {
                header: vec!["h", "t", "norm", "chebyshev_terms"],
                rows: p
                    .time_rows
                    .iter()
                    .map(|r| vec![e(r.h), e(r.t), e(r.norm), r.chebyshev_terms.to_string()])
                    .collect(),
                metrics: m,
                detail: json!({ "options": opts, "sup_rows": p.sup_rows, "fit": p.fit, "seconds": secs }),
            })
        }
        ProbeBlock::TSplitting {
            slope_prop,
            kappa,
            nu,
            m,
        } => {
            let r = t_splitting_bound(*slope_prop, *kappa, *nu, *m)?;
            let mut mm = BTreeMap::new();
            mm.insert("exponent_at_m".into(), r.exponent_at_m);
            mm.insert("tau_opt".into(), r.tau_opt);
            mm.insert("exponent_opt".into(), r.exponent_opt);
            mm.insert("inconclusive".into(), flag(r.inconclusive));
            Ok(ProbeOutput {
                header: vec!["tau", "exponent"],
                rows: vec![
                    vec![e(m + 6.0), e(r.exponent_at_m)],
                    vec![e(r.tau_opt), e(r.exponent_opt)],
                ],
                metrics: mm,
                detail: json!(r),
            })
        }
        ProbeBlock::Escape {
            x2,
            xi2,
            delta1,
            delta2,
            h,
            depth,
            safety,
            energy_x2,
            energy_delta1,
            energy_delta2,
            energy_radius,
            energy_h_list,
            energy_t_samples,
            monotonicity_x2,
            monotonicity_h,
            monotonicity_t,
        } => escape(
            model,
            EscapeParams {
                x2: *x2,
                xi2: *xi2,
                delta1: *delta1,
                delta2: *delta2,
                h: *h,
                depth: *depth,
                safety: *safety,
            },
            EnergyParams {
                x2: *energy_x2,
                delta1: *energy_delta1,
                delta2: *energy_delta2,
                opts: EnergyOptions {
                    radius: *energy_radius,
                    h_list: energy_h_list.clone(),
                    t_samples: energy_t_samples.clone(),
                    ..EnergyOptions::default()
                },
                mono_x2: *monotonicity_x2,
                mono_h: *monotonicity_h,
                mono_t: monotonicity_t.clone(),
            },
        ),
        ProbeBlock::Invariants {} => {
            let r = run_invariant_suite()?;
            let mut m = BTreeMap::new();
            let keys = [
                "quantization_identities",
                "composition_slope",
                "resolvent_identity",
                "unitarity",
                "group_law",
            ];
            for (k, c) in keys.iter().zip(&r.checks) {
                m.insert(k.to_string(), c.value);
            }
            m.insert("all_pass".into(), flag(r.pass()));
            Ok(ProbeOutput {
                header: vec!["h", "composition_norm"],
                rows: r
                    .composition
                    .iter()
                    .map(|(h, n)| vec![e(*h), e(*n)])
                    .collect(),
                metrics: m,
                detail: json!(r.checks),
            })
        }
    }
}

struct EscapeParams {
    x2: f64,
    xi2: f64,
    delta1: f64,
    delta2: f64,
    h: f64,
    depth: usize,
    safety: f64,
}

struct EnergyParams {
    x2: f64,
    delta1: f64,
    delta2: f64,
    opts: EnergyOptions,
    mono_x2: f64,
    mono_h: f64,
    mono_t: Vec<f64>,
}

fn escape(model: &ModelSpec, p: EscapeParams, q: EnergyParams) -> Result<ProbeOutput> {
    let stencil = model.stencil.clone();
    let mu = model.potential.mu();
    let mut ladder = EscapeLadder::new(
        stencil.clone(),
        vec![p.x2],
        vec![p.xi2],
        p.delta1,
        p.delta2,
        p.h,
        mu,
    )?
    .with_depth(p.depth);
    choose_constants(&mut ladder, &vec![1.0; p.depth], p.safety)?;
    let grid = TransportGrid::default();
    let mut rows = Vec::new();
    let (mut tmin, mut fd) = (f64::INFINITY, 0.0f64);
    for j in 0..=p.depth {
        let r = verify_transport(&ladder, j, &grid)?;
        tmin = tmin.min(r.min_margin);
        fd = fd.max(r.fd_max_error);
        rows.push(vec![
            "transport".into(),
            j.to_string(),
            e(r.argmin.0),
            e(r.min_margin),
        ]);
    }
    // negative control: momentum width large enough to break velocity pinning
    let broken = EscapeLadder::new(
        stencil.clone(),
        vec![p.x2],
        vec![p.xi2],
        p.delta1,
        6.0 * p.delta2,
        p.h,
        mu,
    )?;
    let rejected = verify_transport(&broken, 0, &grid).is_err()
        && !verify_transport_unchecked(&broken, 0, &grid)?.pass;

    // dense checks run on the CAP-free periodic box
    let dense = ModelSpec {
        cap: None,
        boundary: Boundary::Periodic,
        ..model.clone()
    };
    let h0 = q.opts.h_list[0];
    let psi0 = EscapeLadder::new(stencil, vec![q.x2], vec![p.xi2], q.delta1, q.delta2, h0, mu)?;
    let energy = energy_inequality_check(&dense, &psi0, &q.opts)?;
    for r in &energy.rows {
        rows.push(vec!["energy".into(), e(r.h), e(r.t), e(r.lambda_min)]);
    }
    let sabotaged = psi0.clone().with_cutoff(Cutoff::Sabotaged { depth: 0.5 });
    let sab = energy_inequality_check(&dense, &sabotaged, &q.opts)?;
    let bound = energy.bound.ok_or_else(|| {
        Error::Hypothesis("energy defect vanished at every h; nothing to bound".into())
    })?;
    let mono_ladder = EscapeLadder {
        x2: vec![q.mono_x2],
        ..psi0.with_h(q.mono_h)
    };
    let mono = monotonicity_check(&dense, &mono_ladder, &q.mono_t, &bound, q.opts.radius)?;
    for r in &mono.rows {
        rows.push(vec![
            "monotonicity".into(),
            e(q.mono_h),
            e(r.t),
            e(r.margin),
        ]);
    }
    let mut m = BTreeMap::new();
    m.insert("transport_min".into(), tmin);
    m.insert("fd_error".into(), fd);
    m.insert("pinning_control_rejected".into(), flag(rejected));
    m.insert(
        "energy_exponent".into(),
        energy.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN),
    );
    m.insert("energy_fd_error".into(), energy.max_fd_error);
    m.insert("monotonicity_pass".into(), flag(mono.pass));
    m.insert(
        "monotonicity_min_margin".into(),
        mono.rows
            .iter()
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min),
    );
    m.insert(
        "sabotage_energy_exponent".into(),
        sab.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN),
    );
    Ok(ProbeOutput {
        header: vec!["check", "a", "b", "value"],
        rows,
        metrics: m,
        detail: json!({
            "ladder": ladder,
            "energy_options": q.opts,
            "defect_bound": bound,
            "f0_discrepancy": energy.f0_discrepancy,
            "monotonicity": mono.rows,
        }),
    })
}
