//! Independent oracles: finite-difference gradients, invariance checks,
//! convergence-order studies and trajectory audits.
//!
//! Every reference value here is computed without the derivative stencils
//! of the quantity under test: variations are compared against differences
//! of the energy, closed forms against quadrature.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{circle_minimizer, energy_elm, lower_bound};
use crate::error::Result;
use crate::evolve::FlowDiagnostics;
use crate::geometry::{resample_uniform_with_field, CurveState, DirectorField, ModelParams, Vec2};
use crate::spline::PeriodicSpline;
use crate::variation::{first_variation_eta, first_variation_gamma, gradient_fields, Functional};

/// Outcome of one check. `pass` holds exactly when `|measured - reference| <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    /// Least-squares slope of `log error` against `log N`, for convergence studies.
    pub order_estimate: Option<f64>,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, measured: f64, reference: f64, tolerance: f64) -> Self {
        let pass = (measured - reference).abs() <= tolerance;
        Self {
            name: name.into(),
            measured,
            reference,
            tolerance,
            order_estimate: None,
            pass,
        }
    }

    /// Relative check with tolerance `rel * max(|reference|, floor)`.
    pub fn relative(name: impl Into<String>, measured: f64, reference: f64, rel: f64, floor: f64) -> Self {
        Self::new(name, measured, reference, rel * reference.abs().max(floor))
    }

    fn failed(name: impl Into<String>, message: &str) -> Self {
        let mut r = Self::new(format!("{} ({message})", name.into()), f64::NAN, 0.0, 0.0);
        r.pass = false;
        r
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: measured={:.12e} reference={:.12e} tolerance={:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.reference,
            self.tolerance
        )?;
        if let Some(o) = self.order_estimate {
            write!(f, " order={o:.3}")?;
        }
        Ok(())
    }
}

/// Argument of the energy being varied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Gamma,
    Eta,
}

/// Default step ladder for finite differences.
pub const EPS_LADDER: [f64; 3] = [1e-4, 1e-5, 1e-6];

/// Polynomial extrapolation to `eps = 0` of central differences, which
/// are even in `eps` (Neville's scheme in the variable `eps^2`).
fn richardson(eps: &[f64], values: &[f64]) -> f64 {
    let x: Vec<f64> = eps.iter().map(|e| e * e).collect();
    let mut p = values.to_vec();
    let m = p.len();
    for k in 1..m {
        for i in 0..m - k {
            p[i] = (x[i + k] * p[i] - x[i] * p[i + 1]) / (x[i + k] - x[i]);
        }
    }
    p[0]
}

fn perturbed_energy(
    curve: &CurveState,
    field: &DirectorField,
    params: &ModelParams,
    direction: &[Vec2],
    which: Which,
    eps: f64,
    functional: Functional,
) -> Result<f64> {
    let e = match which {
        Which::Gamma => {
            let pts = curve.points().iter().zip(direction).map(|(p, d)| p + d * eps).collect();
            energy_elm(&CurveState::new(pts)?, field, params)?
        }
        Which::Eta => {
            let v = field.vectors.iter().zip(direction).map(|(p, d)| p + d * eps).collect();
            energy_elm(curve, &DirectorField::new(v), params)?
        }
    };
    Ok(match functional {
        Functional::E => e.total_e,
        Functional::Elm => e.total_elm,
    })
}

/// Compares the analytic first variation with a Richardson-extrapolated
/// central difference of the energy.
///
/// The tolerance is `1e-6` relative to the finite-difference value, with
/// an absolute floor of `1e-8` for (near-)critical states.
#[allow(clippy::too_many_arguments)]
pub fn fd_variation_check(
    name: &str,
    curve: &CurveState,
    field: &DirectorField,
    params: &ModelParams,
    direction: &[Vec2],
    which: Which,
    eps: &[f64],
    functional: Functional,
) -> OracleReport {
    let ladder_ok = eps.len() >= 2 && eps.windows(2).all(|w| w[1] < w[0]) && eps[eps.len() - 1] > 0.0;
    if !ladder_ok {
        return OracleReport::failed(name, "eps ladder must be positive and strictly decreasing");
    }
    let analytic = match which {
        Which::Gamma => first_variation_gamma(curve, field, params, direction, functional),
        Which::Eta => first_variation_eta(curve, field, params, direction),
    };
    let diffs: Result<Vec<f64>> = eps
        .iter()
        .map(|&e| {
            let plus = perturbed_energy(curve, field, params, direction, which, e, functional)?;
            let minus = perturbed_energy(curve, field, params, direction, which, -e, functional)?;
            Ok((plus - minus) / (2.0 * e))
        })
        .collect();
    match (analytic, diffs) {
        (Ok(a), Ok(d)) => {
            let reference = richardson(eps, &d);
            OracleReport::new(name, a, reference, (1e-6 * reference.abs()).max(1e-8))
        }
        (Err(e), _) | (_, Err(e)) => OracleReport::failed(name, &e.to_string()),
    }
}

/// Deterministic random smooth state: a radial Fourier perturbation of the
/// unit circle (modes 1..=5, coefficients at most `0.1 / k`) carrying a
/// Fourier director field (modes 0..=5, coefficients at most 0.1, plus a
/// constant offset), resampled to equal chords.
pub fn random_state(n: usize, rng: &mut impl Rng) -> Result<(CurveState, DirectorField)> {
    let mut coef = |bound: f64| rng.gen_range(-bound..=bound);
    let radial: Vec<(f64, f64)> = (1..=5).map(|k| (coef(0.1 / k as f64), coef(0.1 / k as f64))).collect();
    let shift = Vec2::new(coef(0.5), coef(0.5));
    let offset = Vec2::new(coef(0.5), coef(0.5));
    let eta_modes: Vec<(Vec2, Vec2)> = (0..=5)
        .map(|_| (Vec2::new(coef(0.1), coef(0.1)), Vec2::new(coef(0.1), coef(0.1))))
        .collect();
    let curve = CurveState::from_fn(n, |x| {
        let r = 1.0
            + radial
                .iter()
                .enumerate()
                .map(|(k, (a, b))| a * ((k + 1) as f64 * x).cos() + b * ((k + 1) as f64 * x).sin())
                .sum::<f64>();
        Vec2::new(r * x.cos(), r * x.sin()) + shift
    })?;
    let h = 2.0 * PI / n as f64;
    let field = DirectorField::from_fn(n, |i| {
        let x = i as f64 * h;
        eta_modes
            .iter()
            .enumerate()
            .fold(offset, |acc, (k, (a, b))| acc + a * (k as f64 * x).cos() + b * (k as f64 * x).sin())
    });
    resample_uniform_with_field(&curve, &field)
}

/// Deterministic smooth vector field with modes 0..=5 and coefficients at most 0.1.
pub fn random_direction(n: usize, rng: &mut impl Rng) -> Vec<Vec2> {
    let modes: Vec<(Vec2, Vec2)> = (0..=5)
        .map(|_| {
            (
                Vec2::new(rng.gen_range(-0.1..=0.1), rng.gen_range(-0.1..=0.1)),
                Vec2::new(rng.gen_range(-0.1..=0.1), rng.gen_range(-0.1..=0.1)),
            )
        })
        .collect();
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|i| {
            let x = i as f64 * h;
            modes
                .iter()
                .enumerate()
                .fold(Vec2::zeros(), |acc, (k, (a, b))| acc + a * (k as f64 * x).cos() + b * (k as f64 * x).sin())
        })
        .collect()
}

/// A seeded test corpus of random smooth states.
pub fn random_corpus(count: usize, n: usize, seed: u64) -> Result<Vec<(CurveState, DirectorField)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_state(n, &mut rng)).collect()
}

/// Seed of the shipped corpus.
pub const CORPUS_SEED: u64 = 20_240_611;

/// Finite-difference certification of both variations on a random corpus,
/// for `E_LM` and, in the curve argument, for `E`.
pub fn gradient_suite(count: usize, n: usize, seed: u64) -> Result<Vec<OracleReport>> {
    let corpus = random_corpus(count, n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let jobs: Vec<_> = corpus
        .into_iter()
        .enumerate()
        .map(|(k, (c, e))| {
            let params = ModelParams {
                lambda: rng.gen_range(0.5..=2.0),
                delta: rng.gen_range(0.0..=2.0),
            };
            let phi = random_direction(n, &mut rng);
            let psi = random_direction(n, &mut rng);
            (k, c, e, params, phi, psi)
        })
        .collect();
    let reports = jobs
        .par_iter()
        .flat_map_iter(|(k, c, e, p, phi, psi)| {
            [
                fd_variation_check(
                    &format!("grad/corpus{k:02}/gamma/elm"),
                    c,
                    e,
                    p,
                    phi,
                    Which::Gamma,
                    &EPS_LADDER,
                    Functional::Elm,
                ),
                fd_variation_check(
                    &format!("grad/corpus{k:02}/gamma/e"),
                    c,
                    e,
                    p,
                    phi,
                    Which::Gamma,
                    &EPS_LADDER,
                    Functional::E,
                ),
                fd_variation_check(
                    &format!("grad/corpus{k:02}/eta"),
                    c,
                    e,
                    p,
                    psi,
                    Which::Eta,
                    &EPS_LADDER,
                    Functional::Elm,
                ),
            ]
        })
        .collect();
    Ok(reports)
}

/// Checks with closed-form values: the outward dilation of the unit circle
/// and stationarity of the circle minimizer.
pub fn gradient_closed_forms() -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    let n = 256;
    let unit = CurveState::from_fn(n, |x| Vec2::new(x.cos(), x.sin()))?;
    let zero = DirectorField::zeros(n);
    let p0 = ModelParams::new(1.0, 0.0)?;
    let outward: Vec<Vec2> = unit.normals().iter().map(|v| -v).collect();
    let d = first_variation_gamma(&unit, &zero, &p0, &outward, Functional::Elm)?;
    let h2 = unit.grid_step().powi(2);
    // closed form: d/dR (pi/R + 2 pi R) at R = 1
    out.push(OracleReport::new("grad/unit_circle_dilation", d, PI, PI * h2));
    let fd = fd_variation_check(
        "grad/unit_circle_dilation_fd",
        &unit,
        &zero,
        &p0,
        &outward,
        Which::Gamma,
        &EPS_LADDER,
        Functional::Elm,
    );
    out.push(fd);

    let p = ModelParams::new(1.0, 1.0)?;
    let (c, e, _) = circle_minimizer(&p, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let phi = random_direction(n, &mut rng);
    let psi = random_direction(n, &mut rng);
    let dg = first_variation_gamma(&c, &e, &p, &phi, Functional::Elm)?;
    let de = first_variation_eta(&c, &e, &p, &psi)?;
    // stationary up to the discretization error of the sampled minimizer
    out.push(OracleReport::new("grad/minimizer_stationary/gamma", dg, 0.0, 10.0 * h2));
    out.push(OracleReport::new("grad/minimizer_stationary/eta", de, 0.0, 10.0 * h2));
    Ok(out)
}

/// Reparametrization `x -> x + a sin x` of a sampled state through
/// periodic cubic interpolation in the grid parameter, then resampled to
/// equal chords.
pub fn reparametrized(curve: &CurveState, field: &DirectorField, a: f64) -> Result<(CurveState, DirectorField)> {
    let n = curve.n();
    let h = curve.grid_step();
    let knots: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let gs = PeriodicSpline::new(knots.clone(), curve.points().to_vec(), 2.0 * PI);
    let es = PeriodicSpline::new(knots.clone(), field.vectors.clone(), 2.0 * PI);
    let t: Vec<f64> = knots.iter().map(|&x| x + a * x.sin()).collect();
    let pulled = CurveState::new(t.iter().map(|&s| gs.eval(s)).collect())?;
    let eta = DirectorField::new(t.iter().map(|&s| es.eval(s)).collect());
    resample_uniform_with_field(&pulled, &eta)
}

/// Reparametrization, scaling, rotation and reversal checks on one state.
///
/// Reparametrization carries a `c / N^2` tolerance with `c = (2 pi)^2 E`; the
/// exact identities are held to `1e-10` relative.
pub fn invariance_suite(
    name: &str,
    curve: &CurveState,
    field: &DirectorField,
    params: &ModelParams,
) -> Result<Vec<OracleReport>> {
    let base = energy_elm(curve, field, params)?;
    let mut out = Vec::new();
    let h2 = curve.grid_step().powi(2);

    let (rc, re) = reparametrized(curve, field, 0.3)?;
    let er = energy_elm(&rc, &re, params)?;
    out.push(OracleReport::new(
        format!("invariance/{name}/reparametrization"),
        er.total_elm,
        base.total_elm,
        base.total_elm * h2,
    ));

    for r in [0.5, 2.0] {
        let s = energy_elm(&curve.scaled(r), field, params)?;
        out.push(OracleReport::relative(
            format!("invariance/{name}/scaling_E/R={r}"),
            s.total_e,
            base.total_e / r,
            1e-10,
            1.0,
        ));
        out.push(OracleReport::relative(
            format!("invariance/{name}/scaling_L/R={r}"),
            s.length,
            base.length * r,
            1e-10,
            1.0,
        ));
    }

    let angle = PI / 5.0;
    let rot = energy_elm(&curve.rotated(angle), &field.rotated(angle), params)?;
    out.push(OracleReport::relative(
        format!("invariance/{name}/rotation"),
        rot.total_elm,
        base.total_elm,
        1e-10,
        1.0,
    ));

    let rev = energy_elm(&curve.reversed(), &field.reversed().scaled(-1.0), params)?;
    out.push(OracleReport::relative(
        format!("invariance/{name}/reversal"),
        rev.total_elm,
        base.total_elm,
        1e-10,
        1.0,
    ));
    Ok(out)
}

/// Invariance checks on the circle minimizer, an ellipse with a director,
/// and part of the random corpus.
pub fn invariance_checks(n: usize) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    let p = ModelParams::new(1.0, 1.0)?;
    let (c, e, _) = circle_minimizer(&p, n)?;
    out.extend(invariance_suite("circle_minimizer", &c, &e, &p)?);

    let ellipse = CurveState::from_fn(n, |x| Vec2::new(2.0 * x.cos(), x.sin()))?;
    let eta = DirectorField::from_fn(n, |i| {
        let x = i as f64 * 2.0 * PI / n as f64;
        Vec2::new(0.3 * x.cos(), 0.2 + 0.1 * (2.0 * x).sin())
    });
    let (ellipse, eta) = resample_uniform_with_field(&ellipse, &eta)?;
    out.extend(invariance_suite("ellipse", &ellipse, &eta, &ModelParams::new(1.5, 0.7)?)?);

    for (k, (c, e)) in random_corpus(5, n, CORPUS_SEED)?.into_iter().enumerate() {
        out.extend(invariance_suite(&format!("corpus{k:02}"), &c, &e, &p)?);
    }
    Ok(out)
}

/// Quantity and exact reference for a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceFamily {
    /// `max |kappa - 1|` on the unit circle.
    CurvatureUnitCircle,
    /// `max |kappa - kappa_exact|` on the ellipse `(2 cos t, sin t)`.
    CurvatureEllipse,
    /// `|E_LM - 2 pi sqrt(2 lambda/(lambda+delta^2))|` on the sampled circle minimizer.
    EnergyCircleMinimizer { lambda: f64, delta: f64 },
    /// `max |V - 1/2|` on the unit circle, `eta = 0`, `lambda = 1`, `delta = 0`.
    NormalVelocityUnitCircle,
    /// `max |W - nu|` on the unit circle, `eta = 0`, `lambda = 1`, `delta = 1`.
    DirectorVelocityUnitCircle,
}

impl ConvergenceFamily {
    pub fn name(&self) -> String {
        match self {
            Self::CurvatureUnitCircle => "curvature/unit_circle".into(),
            Self::CurvatureEllipse => "curvature/ellipse".into(),
            Self::EnergyCircleMinimizer { lambda, delta } => {
                format!("energy/circle_minimizer/lambda={lambda}/delta={delta}")
            }
            Self::NormalVelocityUnitCircle => "V/unit_circle".into(),
            Self::DirectorVelocityUnitCircle => "W/unit_circle".into(),
        }
    }

    /// Error of the discrete quantity at grid size `n`.
    pub fn error(&self, n: usize) -> Result<f64> {
        let unit = || CurveState::from_fn(n, |x| Vec2::new(x.cos(), x.sin()));
        let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
        Ok(match *self {
            Self::CurvatureUnitCircle => max(&mut unit()?.curvature().iter().map(|k| (k - 1.0).abs())),
            Self::CurvatureEllipse => {
                let (a, b) = (2.0, 1.0);
                let c = CurveState::from_fn(n, |t| Vec2::new(a * t.cos(), b * t.sin()))?;
                let h = c.grid_step();
                max(&mut c.curvature().iter().enumerate().map(|(i, k)| {
                    let t = i as f64 * h;
                    let exact = a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5);
                    (k - exact).abs()
                }))
            }
            Self::EnergyCircleMinimizer { lambda, delta } => {
                let p = ModelParams::new(lambda, delta)?;
                let (c, e, _) = circle_minimizer(&p, n)?;
                (energy_elm(&c, &e, &p)?.total_elm - lower_bound(&p)).abs()
            }
            Self::NormalVelocityUnitCircle => {
                let f = gradient_fields(&unit()?, &DirectorField::zeros(n), &ModelParams::new(1.0, 0.0)?, Functional::Elm)?;
                max(&mut f.v.iter().map(|v| (v - 0.5).abs()))
            }
            Self::DirectorVelocityUnitCircle => {
                let c = unit()?;
                let f = gradient_fields(&c, &DirectorField::zeros(n), &ModelParams::new(1.0, 1.0)?, Functional::Elm)?;
                max(&mut f.w.iter().zip(c.normals()).map(|(w, nu)| (w - nu).norm()))
            }
        })
    }
}

/// Least-squares slope of `log(error)` against `log(N)`; passes when the
/// slope is within 0.1 of -2.
pub fn convergence_study(family: ConvergenceFamily, ns: &[usize]) -> OracleReport {
    let name = format!("convergence/{}", family.name());
    if ns.len() < 3 {
        return OracleReport::failed(name, "need at least three grid sizes");
    }
    let errors: Result<Vec<f64>> = ns.iter().map(|&n| family.error(n)).collect();
    let errors = match errors {
        Ok(e) if e.iter().all(|x| *x > 0.0 && x.is_finite()) => e,
        Ok(_) => return OracleReport::failed(name, "zero or non-finite error"),
        Err(e) => return OracleReport::failed(name, &e.to_string()),
    };
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let mut r = OracleReport::new(name, slope, -2.0, 0.1);
    r.order_estimate = Some(-slope);
    r
}

/// Grid sizes of the shipped convergence studies.
pub const CONVERGENCE_NS: [usize; 4] = [32, 64, 128, 256];

pub fn convergence_checks() -> Vec<OracleReport> {
    [
        ConvergenceFamily::CurvatureUnitCircle,
        ConvergenceFamily::CurvatureEllipse,
        ConvergenceFamily::EnergyCircleMinimizer { lambda: 1.0, delta: 0.0 },
        ConvergenceFamily::EnergyCircleMinimizer { lambda: 1.0, delta: 1.0 },
        ConvergenceFamily::EnergyCircleMinimizer { lambda: 3.0, delta: 1.0 },
        ConvergenceFamily::NormalVelocityUnitCircle,
        ConvergenceFamily::DirectorVelocityUnitCircle,
    ]
    .par_iter()
    .map(|f| convergence_study(*f, &CONVERGENCE_NS))
    .collect()
}

/// Slack `c / N^2` used by trajectory audits, with `c = (2 pi)^2 * scale`.
pub fn grid_slack(n: usize, scale: f64) -> f64 {
    (2.0 * PI / n as f64).powi(2) * scale
}

/// Trajectory audits: monotone energy, the lower bound, and the curvature
/// and length bounds implied by the initial energy `E0`.
///
/// Each report carries the worst violation over the trajectory as
/// `measured` (zero when satisfied) against reference 0.
pub fn audit_run(diagnostics: &FlowDiagnostics, params: &ModelParams) -> Vec<OracleReport> {
    let recs = &diagnostics.records;
    let Some(first) = recs.first() else {
        return vec![OracleReport::failed("audit", "empty diagnostics")];
    };
    let e0 = first.energy.total_elm;
    let (l, d) = (params.lambda, params.delta);
    let s = l + d * d;
    let slack = 1e-8 + grid_slack(diagnostics.n.max(8), e0);

    let rise = recs
        .windows(2)
        .map(|w| w[1].energy.total_elm - w[0].energy.total_elm)
        .fold(0.0, f64::max);
    let lb = lower_bound(params);
    let below = recs
        .iter()
        .map(|r| lb - r.energy.total_elm)
        .fold(0.0, f64::max);
    let kappa_bound = 2.0 * s / l * e0;
    let kappa_excess = recs.iter().map(|r| r.kappa_sq - kappa_bound).fold(0.0, f64::max);
    let upper = recs.iter().map(|r| r.energy.length - e0).fold(0.0, f64::max);
    let lower_len = 2.0 * PI * PI * l / (e0 * s);
    let winding = recs.iter().all(|r| matches!(r.turning, Some(k) if k != 0));
    let lower = if winding {
        recs.iter().map(|r| lower_len - r.energy.length).fold(0.0, f64::max)
    } else {
        0.0
    };
    let dissipation = recs.iter().map(|r| r.dissipation).fold(f64::NEG_INFINITY, f64::max).max(0.0);

    vec![
        OracleReport::new("audit/energy_monotone", rise, 0.0, 1e-12),
        OracleReport::new("audit/lower_bound", below, 0.0, grid_slack(diagnostics.n.max(8), lb)),
        OracleReport::new("audit/curvature_l2_bound", kappa_excess, 0.0, 1e-6),
        OracleReport::new("audit/length_upper", upper, 0.0, slack),
        OracleReport::new(
            if winding {
                "audit/length_lower"
            } else {
                "audit/length_lower (turning number 0, not applicable)"
            },
            lower,
            0.0,
            slack,
        ),
        OracleReport::new("audit/dissipation_nonpositive", dissipation, 0.0, 0.0),
    ]
}

/// Named groups of checks run by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Grad,
    Invariance,
    Convergence,
}

/// Runs a suite; failures are reported, only setup errors are returned.
pub fn run_suite(suite: Suite) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::All | Suite::Grad) {
        out.extend(gradient_closed_forms()?);
        out.extend(gradient_suite(20, 64, CORPUS_SEED)?);
    }
    if matches!(suite, Suite::All | Suite::Invariance) {
        out.extend(invariance_checks(128)?);
    }
    if matches!(suite, Suite::All | Suite::Convergence) {
        out.extend(convergence_checks());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_removes_even_terms() {
        let eps = [0.1f64, 0.05, 0.025];
        let v: Vec<f64> = eps.iter().map(|e| 3.0 + 2.0 * e * e - 5.0 * e.powi(4)).collect();
        assert!((richardson(&eps, &v) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = random_corpus(3, 32, 1).unwrap();
        let b = random_corpus(3, 32, 1).unwrap();
        for ((c1, e1), (c2, e2)) in a.iter().zip(&b) {
            assert_eq!(c1.points(), c2.points());
            assert_eq!(e1.vectors, e2.vectors);
        }
    }

    #[test]
    fn bad_ladder_is_reported() {
        let c = CurveState::from_fn(32, |x| Vec2::new(x.cos(), x.sin())).unwrap();
        let e = DirectorField::zeros(32);
        let r = fd_variation_check(
            "x",
            &c,
            &e,
            &ModelParams::new(1.0, 0.0).unwrap(),
            c.normals(),
            Which::Gamma,
            &[1e-6, 1e-5],
            Functional::Elm,
        );
        assert!(!r.pass);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        // the curve variation checked against the director difference quotient
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (c, e) = random_state(64, &mut rng).unwrap();
        let p = ModelParams::new(1.0, 1.0).unwrap();
        let phi = random_direction(64, &mut rng);
        let good = fd_variation_check("g", &c, &e, &p, &phi, Which::Gamma, &EPS_LADDER, Functional::Elm);
        assert!(good.pass, "{good}");
        let analytic_eta = first_variation_eta(&c, &e, &p, &phi).unwrap();
        let bad = OracleReport::new("b", analytic_eta, good.reference, good.tolerance);
        assert!(!bad.pass);
    }

    #[test]
    fn closed_form_gradients() {
        for r in gradient_closed_forms().unwrap() {
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn unit_circle_scaling_parts() {
        let c = CurveState::from_fn(64, |x| Vec2::new(x.cos(), x.sin())).unwrap();
        let e = DirectorField::zeros(64);
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let base = energy_elm(&c, &e, &p).unwrap();
        let s = energy_elm(&c.scaled(2.0), &e, &p).unwrap();
        assert!((s.total_e - base.total_e / 2.0).abs() < 1e-12);
        assert!((s.length - 2.0 * base.length).abs() < 1e-12);
        let h2 = c.grid_step().powi(2);
        assert!((s.total_e - PI / 2.0).abs() < PI * h2);
        assert!((s.length - 4.0 * PI).abs() < 4.0 * PI * h2);
    }

    #[test]
    fn rotation_of_minimizer_is_exact() {
        let p = ModelParams::new(1.0, 1.0).unwrap();
        let (c, e, _) = circle_minimizer(&p, 64).unwrap();
        let a = energy_elm(&c, &e, &p).unwrap().total_elm;
        let b = energy_elm(&c.rotated(PI / 5.0), &e.rotated(PI / 5.0), &p).unwrap().total_elm;
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn reparametrization_error_is_second_order() {
        let p = ModelParams::new(1.5, 0.7).unwrap();
        let err = |n: usize| {
            let c = CurveState::from_fn(n, |x| Vec2::new(2.0 * x.cos(), x.sin())).unwrap();
            let e = DirectorField::zeros(n);
            let (c, e) = resample_uniform_with_field(&c, &e).unwrap();
            let (rc, re) = reparametrized(&c, &e, 0.3).unwrap();
            (energy_elm(&rc, &re, &p).unwrap().total_elm - energy_elm(&c, &e, &p).unwrap().total_elm).abs()
        };
        let (a, b) = (err(64), err(128));
        assert!(a < 1e-2, "{a}");
        assert!(b < a / 3.0 || b < 1e-10, "{a} {b}");
    }

    #[test]
    fn convergence_orders() {
        for r in convergence_checks() {
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn short_ladder_of_sizes_is_reported() {
        assert!(!convergence_study(ConvergenceFamily::CurvatureUnitCircle, &[32, 64]).pass);
    }
}
