//! Evaluation of the bending/Frank/length energy and its closed-form facts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{turning_number, CurveState, DirectorField, ModelParams, Vec2};

/// Term-wise energy of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `1/2 \oint (kappa + delta div eta)^2 ds`
    pub bending: f64,
    /// `lambda/2 \oint |grad eta|^2 ds`
    pub frank: f64,
    pub length: f64,
    /// `bending + frank`
    pub total_e: f64,
    /// `total_e + length`
    pub total_elm: f64,
}

/// Pointwise ingredients of the energy density, shared with the variation code.
#[derive(Debug, Clone)]
pub(crate) struct DensityTerms {
    /// `d_s eta`
    pub ds_eta: Vec<Vec2>,
    /// `div eta = <d_s eta, tau>`
    pub div: Vec<f64>,
    /// `z = kappa + delta div eta`
    pub z: Vec<f64>,
    /// `|d_s eta|^2`
    pub grad_sq: Vec<f64>,
}

impl DensityTerms {
    pub(crate) fn new(curve: &CurveState, field: &DirectorField, params: &ModelParams) -> Result<Self> {
        if field.len() != curve.n() {
            return Err(Error::DegenerateCurve(format!(
                "director has {} samples, curve has {}",
                field.len(),
                curve.n()
            )));
        }
        let ds_eta = curve.ds(&field.vectors);
        let div: Vec<f64> = ds_eta.iter().zip(curve.tangents()).map(|(a, t)| a.dot(t)).collect();
        let z = curve
            .curvature()
            .iter()
            .zip(&div)
            .map(|(k, d)| k + params.delta * d)
            .collect();
        let grad_sq = ds_eta.iter().map(|a| a.norm_squared()).collect();
        Ok(Self {
            ds_eta,
            div,
            z,
            grad_sq,
        })
    }
}

/// Evaluates `E` and `E_LM` by trapezoidal quadrature against the arc-length weights.
pub fn energy_elm(curve: &CurveState, field: &DirectorField, params: &ModelParams) -> Result<EnergyBreakdown> {
    let terms = DensityTerms::new(curve, field, params)?;
    let w = curve.arc_weights();
    let bending = 0.5 * terms.z.iter().zip(w).map(|(z, w)| z * z * w).sum::<f64>();
    let frank = 0.5 * params.lambda * terms.grad_sq.iter().zip(w).map(|(q, w)| q * w).sum::<f64>();
    let length = curve.length();
    let total_e = bending + frank;
    Ok(EnergyBreakdown {
        bending,
        frank,
        length,
        total_e,
        total_elm: total_e + length,
    })
}

/// `2 pi sqrt(2 lambda / (lambda + delta^2))`, the infimum of `E_LM`.
pub fn lower_bound(params: &ModelParams) -> f64 {
    2.0 * PI * (2.0 * params.lambda / (params.lambda + params.delta * params.delta)).sqrt()
}

/// The unique (up to rigid motion) minimizer of `E_LM`: a circle with a
/// constant multiple of its normal as director.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleMinimizer {
    pub radius: f64,
    /// Coefficient `a` in `eta = a nu`.
    pub director_magnitude: f64,
    pub energy: f64,
}

impl CircleMinimizer {
    pub fn for_params(params: &ModelParams) -> Self {
        let (l, d) = (params.lambda, params.delta);
        let s = l + d * d;
        Self {
            radius: (l / (2.0 * s)).sqrt(),
            director_magnitude: d / s,
            energy: 2.0 * PI * (2.0 * l / s).sqrt(),
        }
    }
}

/// Samples the minimizing circle (counterclockwise, centred at the origin)
/// and its director on an `n`-point grid.
pub fn circle_minimizer(params: &ModelParams, n: usize) -> Result<(CurveState, DirectorField, CircleMinimizer)> {
    params.validate()?;
    let m = CircleMinimizer::for_params(params);
    let curve = CurveState::from_fn(n, |x| Vec2::new(m.radius * x.cos(), m.radius * x.sin()))?.centered();
    let field = DirectorField::new(curve.normals().iter().map(|v| v * m.director_magnitude).collect());
    Ok((curve, field, m))
}

/// Which branch of the length estimate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurningBranch {
    /// Nonzero turning number: total curvature is at least `2 pi`.
    Winding(i64),
    /// Turning number zero, or not resolvable: the length lower bound is reported only.
    TotalCurvatureBelowTwoPi,
}

/// Audit of the a-priori bounds at energy level `C0 = E_LM(state)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub energy_level: f64,
    /// `\oint kappa^2 ds`
    pub kappa_sq: f64,
    /// `2 (lambda + delta^2) / lambda * C0`
    pub kappa_sq_bound: f64,
    pub length: f64,
    /// `2 pi^2 lambda / (C0 (lambda + delta^2))`
    pub length_lower: f64,
    /// `C0`
    pub length_upper: f64,
    pub slack: f64,
    pub branch: TurningBranch,
    pub violations: Vec<String>,
}

impl AprioriReport {
    pub fn satisfied(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the curvature and length bounds implied by an energy level.
///
/// Violations are flagged beyond `1e-8 + C0 h^2` where `h` is the grid step.
pub fn apriori_bounds(
    breakdown: &EnergyBreakdown,
    curve: &CurveState,
    params: &ModelParams,
) -> AprioriReport {
    apriori_bounds_at_level(breakdown.total_elm, curve, params)
}

/// As [`apriori_bounds`] with an explicit energy level `c0`, e.g. the
/// initial energy of a trajectory.
pub fn apriori_bounds_at_level(c0: f64, curve: &CurveState, params: &ModelParams) -> AprioriReport {
    let (l, d) = (params.lambda, params.delta);
    let s = l + d * d;
    let kappa_sq = curve.integrate(|i| curve.curvature()[i].powi(2));
    let kappa_sq_bound = 2.0 * s / l * c0;
    let length = curve.length();
    let length_lower = 2.0 * PI * PI * l / (c0 * s);
    let slack = 1e-8 + c0 * curve.grid_step().powi(2);
    let branch = match turning_number(curve) {
        Ok(0) | Err(_) => TurningBranch::TotalCurvatureBelowTwoPi,
        Ok(k) => TurningBranch::Winding(k),
    };
    let mut violations = Vec::new();
    if kappa_sq > kappa_sq_bound + slack {
        violations.push(format!("curvature L2 bound: {kappa_sq:.12e} > {kappa_sq_bound:.12e}"));
    }
    if length > c0 + slack {
        violations.push(format!("length upper bound: {length:.12e} > {c0:.12e}"));
    }
    if matches!(branch, TurningBranch::Winding(_)) && length < length_lower - slack {
        violations.push(format!("length lower bound: {length:.12e} < {length_lower:.12e}"));
    }
    AprioriReport {
        energy_level: c0,
        kappa_sq,
        kappa_sq_bound,
        length,
        length_lower,
        length_upper: c0,
        slack,
        branch,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize, r: f64) -> CurveState {
        CurveState::from_fn(n, |x| Vec2::new(r * x.cos(), r * x.sin())).unwrap()
    }

    #[test]
    fn unit_circle_without_director() {
        let c = circle(128, 1.0);
        let h2 = c.grid_step().powi(2);
        for delta in [0.0, 0.7, -2.0] {
            let p = ModelParams::new(1.0, delta).unwrap();
            let e = energy_elm(&c, &DirectorField::zeros(128), &p).unwrap();
            assert!((e.bending - PI).abs() < PI * h2);
            assert_eq!(e.frank, 0.0);
            assert!((e.length - 2.0 * PI).abs() < 2.0 * PI * h2);
            assert!((e.total_elm - 3.0 * PI).abs() < 3.0 * PI * h2);
            assert_eq!(e.total_e, e.bending + e.frank);
            assert_eq!(e.total_elm, e.total_e + e.length);
        }
    }

    #[test]
    fn lower_bound_values() {
        let lb = |l, d| lower_bound(&ModelParams::new(l, d).unwrap());
        assert!((lb(1.0, 0.0) - 2.0 * PI * 2f64.sqrt()).abs() < 1e-14);
        assert!((lb(1.0, 1.0) - 2.0 * PI).abs() < 1e-14);
        assert!((lb(3.0, 1.0) - 2.0 * PI * 1.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn circle_minimizer_closed_forms() {
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let (_, eta, m) = circle_minimizer(&p, 64).unwrap();
        assert!((m.radius - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(eta.vectors.iter().all(|v| v.norm() == 0.0));
        assert!((m.energy - 2.0 * PI * 2f64.sqrt()).abs() < 1e-14);

        let p = ModelParams::new(1.0, 1.0).unwrap();
        let (c, eta, m) = circle_minimizer(&p, 64).unwrap();
        assert!((m.radius - 0.5).abs() < 1e-15);
        assert!(eta.vectors.iter().all(|v| (v.norm() - 0.5).abs() < 1e-14));
        assert!(c.centroid().norm() < 1e-14);
        assert!((m.energy - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn minimizer_energy_meets_lower_bound() {
        for (l, d) in [(1.0, 0.0), (1.0, 1.0), (3.0, 1.0), (0.5, -2.0)] {
            let p = ModelParams::new(l, d).unwrap();
            let gap = |n| {
                let (c, eta, _) = circle_minimizer(&p, n).unwrap();
                (energy_elm(&c, &eta, &p).unwrap().total_elm - lower_bound(&p)).abs()
            };
            let (g64, g128) = (gap(64), gap(128));
            assert!(g64 < 2e-2 * lower_bound(&p), "{l} {d}: {g64}");
            assert!(g64 / g128 > 3.5);
        }
    }

    #[test]
    fn scaling_identity_is_exact() {
        let c = CurveState::from_fn(64, |x| Vec2::new(1.3 * x.cos(), 0.8 * x.sin() + 0.1 * (3.0 * x).cos())).unwrap();
        let eta = DirectorField::from_fn(64, |i| {
            let x = c.grid_step() * i as f64;
            Vec2::new((2.0 * x).sin(), 0.3 * x.cos())
        });
        let p = ModelParams::new(1.5, -0.7).unwrap();
        let e = energy_elm(&c, &eta, &p).unwrap();
        for r in [0.5, 2.0, 4.0] {
            let s = energy_elm(&c.scaled(r), &eta, &p).unwrap();
            assert!((s.total_e - e.total_e / r).abs() <= 1e-10 * e.total_e / r);
            assert!((s.length - r * e.length).abs() <= 1e-10 * r * e.length);
        }
        let c = circle(64, 1.0);
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let e1 = energy_elm(&c, &DirectorField::zeros(64), &p).unwrap();
        let e2 = energy_elm(&c.scaled(2.0), &DirectorField::zeros(64), &p).unwrap();
        assert!((e2.total_e - e1.total_e / 2.0).abs() < 1e-12);
        assert!((e2.length - 2.0 * e1.length).abs() < 1e-12);
    }

    #[test]
    fn apriori_bounds_hold_on_circles() {
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let c = circle(128, 1.0);
        let e = energy_elm(&c, &DirectorField::zeros(128), &p).unwrap();
        let r = apriori_bounds(&e, &c, &p);
        assert!(r.satisfied(), "{:?}", r.violations);
        assert!((r.kappa_sq - 2.0 * PI).abs() < 1e-2);
        assert!((r.kappa_sq_bound - 2.0 * e.total_elm).abs() < 1e-14);
        assert_eq!(r.branch, TurningBranch::Winding(1));

        let p = ModelParams::new(1.0, 1.0).unwrap();
        let (c, eta, _) = circle_minimizer(&p, 128).unwrap();
        let e = energy_elm(&c, &eta, &p).unwrap();
        let r = apriori_bounds(&e, &c, &p);
        assert!(r.satisfied());
        assert!(r.kappa_sq < r.kappa_sq_bound);
        assert!(r.length > r.length_lower && r.length < r.length_upper);
    }

    #[test]
    fn figure_eight_uses_informational_branch() {
        let c = CurveState::from_fn(128, |x| Vec2::new(x.sin(), x.sin() * x.cos())).unwrap();
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let e = energy_elm(&c, &DirectorField::zeros(128), &p).unwrap();
        let r = apriori_bounds(&e, &c, &p);
        assert_eq!(r.branch, TurningBranch::TotalCurvatureBelowTwoPi);
    }

    #[test]
    fn negative_control_flags_low_energy_level() {
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let c = circle(64, 1.0);
        let r = apriori_bounds_at_level(1.0, &c, &p);
        assert!(!r.satisfied());
    }
}
