//! Projected gradient descent on the discrete α-energy.

use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::energy::{alpha_energy, alpha_tension_field, check_alpha};
use crate::error::{Error, Result};
use crate::fields::{MapField, Section};

pub const ARMIJO_C: f64 = 1e-4;
pub const ARMIJO_SHRINK: f64 = 0.5;
pub const INITIAL_STEP: f64 = 1.0;
pub const MIN_STEP: f64 = 1e-14;
/// Energy drop required by [`perturb_and_descend`] to report a decrease.
pub const DECREASE_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
    Stall,
    /// Energy or tension became non-finite; the terminal map is the last
    /// finite state.
    NumericFailure,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowStep {
    pub iter: usize,
    pub energy: f64,
    pub tension_l2: f64,
    /// Accepted step size (0 on the final record).
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub log: Vec<FlowStep>,
    pub terminal: Arc<MapField>,
    pub reason: Termination,
    pub alpha: f64,
}

impl FlowTrace {
    pub fn final_energy(&self) -> f64 {
        self.log.last().map(|s| s.energy).unwrap_or(f64::NAN)
    }

    pub fn final_tension(&self) -> f64 {
        self.log.last().map(|s| s.tension_l2).unwrap_or(f64::NAN)
    }

    /// Accepted steps.
    pub fn steps(&self) -> usize {
        self.log.iter().filter(|s| s.step > 0.0).count()
    }
}

fn l2_sq(map: &MapField, field: &[DVector<f64>]) -> f64 {
    let src = map.source();
    let tgt = map.target();
    let values = map.discrete_values().expect("discrete map");
    src.weights()
        .iter()
        .zip(field)
        .zip(values)
        .map(|((w, t), y)| w * tgt.norm_sq(y, t))
        .sum()
}

fn step_map(map: &MapField, tau: &[DVector<f64>], s: f64) -> Result<MapField> {
    let values = map.discrete_values().expect("discrete map");
    let moved = values.iter().zip(tau).map(|(y, t)| y + t * s).collect();
    MapField::discrete(map.source().clone(), map.target().clone(), moved)
}

/// Armijo-backtracked descent `ψ ← Π(ψ + s τ_α)` with node-weight
/// preconditioning. Analytic maps on torus sources are sampled first.
pub fn flow(map0: &MapField, alpha: f64, tol: f64, max_iter: usize) -> Result<FlowTrace> {
    check_alpha(alpha)?;
    if !map0.source().is_torus() {
        return Err(Error::Precondition("flow needs a torus source".into()));
    }
    let mut map = Arc::new(if map0.is_discrete() { map0.clone() } else { map0.discretize()? });
    let mut log = Vec::new();
    let mut energy = alpha_energy(&map, alpha)?.value;
    if !energy.is_finite() {
        return Err(Error::Numeric("initial energy is not finite".into()));
    }
    for iter in 0.. {
        let tau = alpha_tension_field(&map, alpha)?;
        let norm_sq = l2_sq(&map, &tau);
        let tension_l2 = norm_sq.sqrt();
        if !tension_l2.is_finite() {
            log.push(FlowStep { iter, energy, tension_l2, step: 0.0 });
            return Ok(FlowTrace { log, terminal: map, reason: Termination::NumericFailure, alpha });
        }
        let stop = if tension_l2 <= tol {
            Some(Termination::Converged)
        } else if iter >= max_iter {
            Some(Termination::MaxIter)
        } else {
            None
        };
        if let Some(reason) = stop {
            log.push(FlowStep { iter, energy, tension_l2, step: 0.0 });
            return Ok(FlowTrace { log, terminal: map, reason, alpha });
        }
        // directional derivative along τ_α is −Σ w h(τ, τ)
        let mut s = INITIAL_STEP;
        let accepted = loop {
            if s < MIN_STEP {
                break None;
            }
            let candidate = step_map(&map, &tau, s)?;
            let e = alpha_energy(&candidate, alpha)?.value;
            if !e.is_finite() {
                log.push(FlowStep { iter, energy, tension_l2, step: 0.0 });
                return Ok(FlowTrace { log, terminal: map, reason: Termination::NumericFailure, alpha });
            }
            if e <= energy - ARMIJO_C * s * norm_sq {
                break Some((candidate, e));
            }
            s *= ARMIJO_SHRINK;
        };
        match accepted {
            Some((next, e)) => {
                log.push(FlowStep { iter, energy, tension_l2, step: s });
                map = Arc::new(next);
                energy = e;
            }
            None => {
                log.push(FlowStep { iter, energy, tension_l2, step: 0.0 });
                return Ok(FlowTrace { log, terminal: map, reason: Termination::Stall, alpha });
            }
        }
    }
    unreachable!()
}

#[derive(Debug, Clone)]
pub struct PerturbOutcome {
    pub energy_before: f64,
    pub energy_after: f64,
    pub decrease: bool,
    pub trace: FlowTrace,
}

/// Flows from `Π(ψ + ε v)` and compares the terminal energy with `E_α(ψ)`.
/// Both energies are taken on the node sampling of the map.
pub fn perturb_and_descend(
    map: &Arc<MapField>,
    alpha: f64,
    witness: &Section,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PerturbOutcome> {
    check_alpha(alpha)?;
    if !Arc::ptr_eq(witness.base(), map) {
        return Err(Error::MismatchedBase);
    }
    let sampled = if map.is_discrete() { (**map).clone() } else { map.discretize()? };
    let energy_before = alpha_energy(&sampled, alpha)?.value;
    let start = if epsilon == 0.0 {
        sampled
    } else {
        let discrete_witness = if map.is_discrete() {
            witness.clone()
        } else {
            Section::discrete(map.clone(), witness.sample())?
        };
        let values = sampled.discrete_values().expect("discrete map");
        let moved = values
            .iter()
            .zip(discrete_witness.sample())
            .map(|(y, v)| y + v * epsilon)
            .collect();
        MapField::discrete(map.source().clone(), map.target().clone(), moved)?
    };
    let trace = flow(&start, alpha, tol, max_iter)?;
    let energy_after = trace.final_energy();
    Ok(PerturbOutcome {
        energy_before,
        energy_after,
        decrease: energy_after < energy_before - DECREASE_MARGIN,
        trace,
    })
}

/// Default flow budget.
pub const DEFAULT_MAX_ITER: usize = 5000;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ManifoldBackend, TorusMetric};

    fn torus(m: usize, n: usize) -> Arc<ManifoldBackend> {
        Arc::new(ManifoldBackend::build_torus(m, n, TorusMetric::Flat).unwrap())
    }

    #[test]
    fn wiggle_converges_to_affine_map() {
        let t = torus(1, 32);
        let map = MapField::torus_wiggle(t.clone(), t, 0.1, 1).unwrap();
        let trace = flow(&map, 2.0, 1e-6, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(trace.reason, Termination::Converged, "{:?}", trace.log.last());
        assert!((trace.final_energy() - 4.0).abs() < 1e-6);
        assert!(trace.log.windows(2).all(|w| w[1].energy <= w[0].energy));
    }

    #[test]
    fn identity_is_already_critical() {
        let t = torus(2, 8);
        let id = MapField::identity(t);
        let trace = flow(&id, 2.0, 1e-8, 10).unwrap();
        assert_eq!(trace.reason, Termination::Converged);
        assert_eq!(trace.steps(), 0);
    }

    #[test]
    fn near_constant_seed_collapses() {
        let t = torus(1, 16);
        let s = Arc::new(ManifoldBackend::build_sphere(2, 4).unwrap());
        let values = t
            .nodes()
            .iter()
            .map(|p| {
                let a = 0.05 * (2.0 * std::f64::consts::PI * p[0]).sin();
                DVector::from_vec(vec![a, 0.02 * a, 1.0])
            })
            .collect();
        let map = MapField::discrete(t, s, values).unwrap();
        let trace = flow(&map, 2.0, 1e-6, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(trace.reason, Termination::Converged);
        assert!((trace.final_energy() - 1.0).abs() < 1e-6);
        let vals = trace.terminal.discrete_values().unwrap();
        assert!(vals.iter().all(|y| (y.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unstable_loop_descends() {
        let t = torus(1, 32);
        let s = Arc::new(ManifoldBackend::build_sphere(2, 4).unwrap());
        let map = Arc::new(MapField::circle_loop(t, s, 1).unwrap());
        let v = Section::constant(map.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        let out = perturb_and_descend(&map, 2.0, &v, 1e-2, 1e-8, 200).unwrap();
        assert!(out.decrease);
        let same = perturb_and_descend(&map, 2.0, &v, 0.0, 1e-8, 200).unwrap();
        assert_eq!(same.energy_before, same.energy_after);
    }

    #[test]
    fn flat_identity_does_not_descend() {
        let t = torus(2, 8);
        let id = Arc::new(MapField::identity(t));
        let v = Section::fourier(id.clone(), vec![1, 0], true, 1).unwrap();
        let out = perturb_and_descend(&id, 2.0, &v, 1e-2, 1e-8, DEFAULT_MAX_ITER).unwrap();
        assert!(!out.decrease);
    }
}
