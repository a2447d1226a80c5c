//! Discrete differential geometry of closed plane curves sampled on a
//! uniform periodic parameter grid `x_i = 2*pi*i/N`.
//!
//! Derivatives in the grid parameter use second-order central stencils;
//! arc-length derivatives divide by the discrete speed `|D1 gamma|`.
//! Curvature follows the determinant formula `det(g', g'') / |g'|^3`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::PeriodicSpline;

pub type Vec2 = Vector2<f64>;

/// Smallest admissible sample count.
pub const MIN_SAMPLES: usize = 8;

const DEGENERATE_CHORD: f64 = 1e-14;

/// Counterclockwise quarter turn.
#[inline]
pub fn rot90(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub fn det(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Central first difference `(f[i+1] - f[i-1]) / 2h`, indices mod N.
pub(crate) fn central_d1<T>(f: &[T], h: f64) -> Vec<T>
where
    T: Copy + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = f.len();
    let s = 0.5 / h;
    (0..n).map(|i| (f[(i + 1) % n] - f[(i + n - 1) % n]) * s).collect()
}

/// Central second difference `(f[i+1] - 2 f[i] + f[i-1]) / h^2`, indices mod N.
pub(crate) fn central_d2<T>(f: &[T], h: f64) -> Vec<T>
where
    T: Copy + Sub<Output = T> + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = f.len();
    let s = 1.0 / (h * h);
    (0..n)
        .map(|i| (f[(i + 1) % n] + f[(i + n - 1) % n] - f[i] * 2.0) * s)
        .collect()
}

/// The constants `lambda > 0` and `delta` of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub delta: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, delta: f64) -> Result<Self> {
        let p = Self { lambda, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParams(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParams(format!("delta must be finite, got {}", self.delta)));
        }
        Ok(())
    }
}

/// A closed plane curve sampled at `N` periodic grid points, with cached
/// frames and curvature.
#[derive(Debug, Clone)]
pub struct CurveState {
    points: Vec<Vec2>,
    h: f64,
    d1: Vec<Vec2>,
    d2: Vec<Vec2>,
    speed: Vec<f64>,
    tangent: Vec<Vec2>,
    normal: Vec<Vec2>,
    curvature: Vec<f64>,
    chords: Vec<f64>,
    weights: Vec<f64>,
}

impl CurveState {
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        let n = points.len();
        if n < MIN_SAMPLES || n % 2 != 0 {
            return Err(Error::DegenerateCurve(format!(
                "sample count must be even and at least {MIN_SAMPLES}, got {n}"
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::DegenerateCurve("non-finite sample".into()));
        }
        let h = 2.0 * PI / n as f64;
        let chords: Vec<f64> = (0..n).map(|i| (points[(i + 1) % n] - points[i]).norm()).collect();
        let diameter = bounding_diagonal(&points);
        let min_chord = chords.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_chord > DEGENERATE_CHORD * diameter) {
            return Err(Error::DegenerateCurve(format!(
                "chord length {min_chord:.3e} below {DEGENERATE_CHORD:e} x diameter {diameter:.3e}"
            )));
        }
        let d1 = central_d1(&points, h);
        let d2 = central_d2(&points, h);
        let speed: Vec<f64> = d1.iter().map(|v| v.norm()).collect();
        if let Some(i) = speed.iter().position(|&s| !(s > DEGENERATE_CHORD * diameter)) {
            return Err(Error::DegenerateCurve(format!("vanishing central tangent at sample {i}")));
        }
        let tangent: Vec<Vec2> = d1.iter().zip(&speed).map(|(v, s)| v / *s).collect();
        let normal: Vec<Vec2> = tangent.iter().map(|&t| rot90(t)).collect();
        let curvature = d1
            .iter()
            .zip(&d2)
            .zip(&speed)
            .map(|((a, b), s)| det(*a, *b) / (s * s * s))
            .collect();
        let weights = (0..n).map(|i| 0.5 * (chords[(i + n - 1) % n] + chords[i])).collect();
        Ok(Self {
            points,
            h,
            d1,
            d2,
            speed,
            tangent,
            normal,
            curvature,
            chords,
            weights,
        })
    }

    /// Samples `f(x_i)` on the uniform grid.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Vec2) -> Result<Self> {
        let h = 2.0 * PI / n as f64;
        Self::new((0..n).map(|i| f(h * i as f64)).collect())
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Grid spacing `2*pi/N` in the curve parameter.
    pub fn grid_step(&self) -> f64 {
        self.h
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec2> {
        self.points
    }

    /// Central-difference parameter derivative `D1 gamma`.
    pub fn d1(&self) -> &[Vec2] {
        &self.d1
    }

    pub fn d2(&self) -> &[Vec2] {
        &self.d2
    }

    /// Discrete speed `|D1 gamma|`.
    pub fn speed(&self) -> &[f64] {
        &self.speed
    }

    pub fn tangents(&self) -> &[Vec2] {
        &self.tangent
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normal
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    /// Forward chord lengths `|gamma_{i+1} - gamma_i|`.
    pub fn chords(&self) -> &[f64] {
        &self.chords
    }

    /// Arc-length weights: the mean of the two chords adjacent to each sample.
    /// They sum to the polygon length.
    pub fn arc_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn length(&self) -> f64 {
        self.chords.iter().sum()
    }

    /// `A = -(1/2) \oint <gamma, J gamma'> dx`, evaluated as the polygon (shoelace) area.
    /// Positive for counterclockwise curves.
    pub fn signed_area(&self) -> f64 {
        let n = self.n();
        0.5 * (0..n)
            .map(|i| det(self.points[i], self.points[(i + 1) % n]))
            .sum::<f64>()
    }

    /// `max chord / min chord - 1`.
    pub fn chord_ratio_excess(&self) -> f64 {
        let (lo, hi) = self
            .chords
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
        hi / lo - 1.0
    }

    /// Sample mean of the points.
    pub fn centroid(&self) -> Vec2 {
        self.points.iter().sum::<Vec2>() / self.n() as f64
    }

    /// Translated so the sample mean vanishes.
    pub fn centered(&self) -> Self {
        let c = self.centroid();
        self.map_points(|p| p - c)
    }

    pub fn scaled(&self, r: f64) -> Self {
        self.map_points(|p| p * r)
    }

    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        self.map_points(|p| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y))
    }

    /// Same trace traversed backwards; sample 0 stays in place.
    pub fn reversed(&self) -> Self {
        Self::new(reverse_samples(&self.points)).expect("reversal preserves validity")
    }

    fn map_points(&self, f: impl Fn(Vec2) -> Vec2) -> Self {
        Self::new(self.points.iter().map(|&p| f(p)).collect()).expect("similarity preserves validity")
    }

    /// Arc-length derivative `D1 f / |D1 gamma|` of a sampled field.
    pub fn ds<T>(&self, f: &[T]) -> Vec<T>
    where
        T: Copy + Sub<Output = T> + Mul<f64, Output = T>,
    {
        central_d1(f, self.h)
            .into_iter()
            .zip(&self.speed)
            .map(|(v, s)| v * (1.0 / s))
            .collect()
    }

    /// Second arc-length derivative on the compact three-point stencil:
    /// `(D2 f - <D1g, D2g>/|D1g|^2 D1 f) / |D1g|^2`.
    pub fn dss<T>(&self, f: &[T]) -> Vec<T>
    where
        T: Copy + Sub<Output = T> + Add<Output = T> + Mul<f64, Output = T>,
    {
        let first = central_d1(f, self.h);
        let second = central_d2(f, self.h);
        (0..self.n())
            .map(|i| {
                let s2 = self.speed[i] * self.speed[i];
                let stretch = self.d1[i].dot(&self.d2[i]) / s2;
                (second[i] - first[i] * stretch) * (1.0 / s2)
            })
            .collect()
    }

    /// Trapezoidal integral `\oint f ds` with the arc-length weights.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| f(i) * w).sum()
    }
}

fn bounding_diagonal(points: &[Vec2]) -> f64 {
    let mut lo = Vec2::repeat(f64::INFINITY);
    let mut hi = Vec2::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

fn reverse_samples<T: Copy>(v: &[T]) -> Vec<T> {
    let n = v.len();
    (0..n).map(|i| v[(n - i) % n]).collect()
}

/// Director samples attached to the grid of a [`CurveState`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirectorField {
    pub vectors: Vec<Vec2>,
}

impl DirectorField {
    pub fn new(vectors: Vec<Vec2>) -> Self {
        Self { vectors }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Vec2::zeros(); n])
    }

    pub fn constant(n: usize, v: Vec2) -> Self {
        Self::new(vec![v; n])
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> Vec2) -> Self {
        Self::new((0..n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn mean(&self) -> Vec2 {
        self.vectors.iter().sum::<Vec2>() / self.len() as f64
    }

    /// Mean-free copy.
    pub fn centered(&self) -> Self {
        let m = self.mean();
        Self::new(self.vectors.iter().map(|v| v - m).collect())
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::new(self.vectors.iter().map(|v| v * a).collect())
    }

    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(
            self.vectors
                .iter()
                .map(|p| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y))
                .collect(),
        )
    }

    /// Sample order matching [`CurveState::reversed`].
    pub fn reversed(&self) -> Self {
        Self::new(reverse_samples(&self.vectors))
    }

    /// `max_i | |eta_i|^2 - 1 |`.
    pub fn unit_residual(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| (v.norm_squared() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.vectors.iter().all(|v| v.x.is_finite() && v.y.is_finite())
    }
}

/// Tangent, normal and curvature fields of a curve.
pub fn frames(curve: &CurveState) -> (Vec<Vec2>, Vec<Vec2>, Vec<f64>) {
    (
        curve.tangents().to_vec(),
        curve.normals().to_vec(),
        curve.curvature().to_vec(),
    )
}

pub fn length(curve: &CurveState) -> f64 {
    curve.length()
}

pub fn signed_area(curve: &CurveState) -> f64 {
    curve.signed_area()
}

fn check_grid(curve: &CurveState, field: &DirectorField) -> Result<()> {
    if field.len() != curve.n() {
        return Err(Error::DegenerateCurve(format!(
            "director has {} samples, curve has {}",
            field.len(),
            curve.n()
        )));
    }
    Ok(())
}

/// Arc-length derivative of the director, `D1 eta / |D1 gamma|`.
pub fn ds_director(curve: &CurveState, field: &DirectorField) -> Result<Vec<Vec2>> {
    check_grid(curve, field)?;
    Ok(curve.ds(&field.vectors))
}

/// `div_gamma eta = <d_s eta, tau>`.
pub fn div_gamma(curve: &CurveState, field: &DirectorField) -> Result<Vec<f64>> {
    let d = ds_director(curve, field)?;
    Ok(d.iter().zip(curve.tangents()).map(|(a, t)| a.dot(t)).collect())
}

/// `grad_gamma eta = (d_s eta) (x) tau`, one 2x2 matrix per sample.
pub fn grad_gamma(curve: &CurveState, field: &DirectorField) -> Result<Vec<Matrix2<f64>>> {
    let d = ds_director(curve, field)?;
    Ok(d.iter().zip(curve.tangents()).map(|(a, t)| a * t.transpose()).collect())
}

/// Sum of signed turning angles between consecutive central tangents.
/// Always an integer multiple of `2*pi` up to rounding for a closed sequence.
pub fn total_turning(curve: &CurveState) -> f64 {
    let t = curve.tangents();
    let n = t.len();
    (0..n)
        .map(|i| {
            let (a, b) = (t[i], t[(i + 1) % n]);
            det(a, b).atan2(a.dot(&b))
        })
        .sum()
}

/// Tangent winding number, `round(\oint kappa ds / 2 pi)`.
///
/// The total curvature is accumulated as turning angles between consecutive
/// tangents. A single turning angle above `pi/2` means the grid does not
/// resolve the curve and the result is refused.
pub fn turning_number(curve: &CurveState) -> Result<i64> {
    let t = curve.tangents();
    let n = t.len();
    let max_turn = (0..n)
        .map(|i| {
            let (a, b) = (t[i], t[(i + 1) % n]);
            det(a, b).atan2(a.dot(&b)).abs()
        })
        .fold(0.0, f64::max);
    let winding = total_turning(curve) / (2.0 * PI);
    let rounded = winding.round();
    let residual = (winding - rounded).abs();
    if residual > 1e-3 {
        return Err(Error::NonIntegralTurning {
            residual,
            reason: "total turning is not a multiple of 2 pi".into(),
        });
    }
    if max_turn > 0.5 * PI {
        return Err(Error::NonIntegralTurning {
            residual,
            reason: format!("turning angle {max_turn:.3} between neighbouring samples exceeds pi/2"),
        });
    }
    Ok(rounded as i64)
}

/// Resamples the curve to equal chord lengths along a periodic cubic spline
/// through the samples. Sample 0 is kept fixed.
pub fn resample_uniform(curve: &CurveState) -> Result<CurveState> {
    let (spline, params) = uniform_chord_parameters(curve)?;
    CurveState::new(params.iter().map(|&t| spline.eval(t)).collect())
}

/// [`resample_uniform`] with the director carried along by the same
/// spline parametrization.
pub fn resample_uniform_with_field(
    curve: &CurveState,
    field: &DirectorField,
) -> Result<(CurveState, DirectorField)> {
    check_grid(curve, field)?;
    let (spline, params) = uniform_chord_parameters(curve)?;
    let eta_spline = PeriodicSpline::new(spline.knots().to_vec(), field.vectors.clone(), spline.period());
    let curve = CurveState::new(params.iter().map(|&t| spline.eval(t)).collect())?;
    let field = DirectorField::new(params.iter().map(|&t| eta_spline.eval(t)).collect());
    Ok((curve, field))
}

fn uniform_chord_parameters(curve: &CurveState) -> Result<(PeriodicSpline, Vec<f64>)> {
    let n = curve.n();
    let chords = curve.chords();
    let mut knots = Vec::with_capacity(n);
    let mut acc = 0.0;
    for c in chords {
        knots.push(acc);
        acc += c;
    }
    let period = acc;
    let spline = PeriodicSpline::new(knots, curve.points().to_vec(), period);

    let closing = |c: f64| -> (f64, Vec<f64>) {
        match march(&spline, c, n) {
            Some(ts) => {
                let last = spline.eval(ts[n - 1]);
                ((spline.eval(period) - last).norm() - c, ts)
            }
            None => (-c, Vec::new()),
        }
    };

    let guess = period / n as f64;
    let (mut lo, mut hi) = (0.9 * guess, 1.02 * guess);
    let (mut g_lo, _) = closing(lo);
    let (mut g_hi, _) = closing(hi);
    let mut expand = 0;
    while g_lo <= 0.0 || g_hi >= 0.0 {
        expand += 1;
        if expand > 40 {
            return Err(Error::DegenerateCurve("equal-chord resampling failed to bracket".into()));
        }
        if g_lo <= 0.0 {
            lo *= 0.7;
            g_lo = closing(lo).0;
        }
        if g_hi >= 0.0 {
            hi *= 1.1;
            g_hi = closing(hi).0;
        }
    }
    // Illinois false position
    let mut side = 0i8;
    let mut best = (f64::INFINITY, Vec::new());
    for _ in 0..200 {
        let c = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        let (g, ts) = closing(c);
        if g.abs() < best.0 && !ts.is_empty() {
            best = (g.abs(), ts);
        }
        if g.abs() <= 1e-15 * c || hi - lo <= 1e-15 * c {
            break;
        }
        if g > 0.0 {
            lo = c;
            g_lo = g;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = c;
            g_hi = g;
            if side == -1 {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    if best.1.is_empty() {
        return Err(Error::DegenerateCurve("equal-chord resampling did not converge".into()));
    }
    Ok((spline, best.1))
}

/// Root of `f` in `[lo, hi]` with `f(lo) < 0 <= f(hi)` by Illinois false position.
fn bracketed_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, xtol: f64, ftol: f64) -> f64 {
    let (mut f_lo, mut f_hi) = (f(lo), f(hi));
    let mut side = 0i8;
    for _ in 0..100 {
        if hi - lo <= xtol {
            break;
        }
        let mut t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let ft = f(t);
        if ft.abs() <= ftol {
            return t;
        }
        if ft < 0.0 {
            lo = t;
            f_lo = ft;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            f_hi = ft;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    if f_lo.abs() < f_hi.abs() {
        lo
    } else {
        hi
    }
}

/// Marches along the spline placing samples at chord distance `c`.
/// Returns `None` when the march runs past the period.
fn march(spline: &PeriodicSpline, c: f64, n: usize) -> Option<Vec<f64>> {
    let period = spline.period();
    let mut ts = Vec::with_capacity(n);
    ts.push(0.0);
    let mut prev_t = 0.0;
    let mut prev_p = spline.eval(0.0);
    for _ in 1..n {
        let dist = |t: f64| (spline.eval(t) - prev_p).norm();
        let mut lo = prev_t;
        let mut hi = prev_t + c;
        while dist(hi) < c {
            lo = hi;
            hi += 0.5 * c;
            if hi > prev_t + period {
                return None;
            }
        }
        let t = bracketed_root(|t| dist(t) - c, lo, hi, 1e-15 * period, 1e-16 * c);
        if t >= period {
            return None;
        }
        prev_t = t;
        prev_p = spline.eval(t);
        ts.push(t);
    }
    Some(ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize, r: f64) -> CurveState {
        CurveState::from_fn(n, |x| Vec2::new(r * x.cos(), r * x.sin())).unwrap()
    }

    fn ellipse(n: usize, a: f64, b: f64) -> CurveState {
        CurveState::from_fn(n, |x| Vec2::new(a * x.cos(), b * x.sin())).unwrap()
    }

    fn figure_eight(n: usize) -> CurveState {
        CurveState::from_fn(n, |x| Vec2::new(x.sin(), x.sin() * x.cos())).unwrap()
    }

    #[test]
    fn rejects_bad_sample_counts() {
        assert!(matches!(
            CurveState::new(vec![Vec2::zeros(); 6]),
            Err(Error::DegenerateCurve(_))
        ));
        let odd = CurveState::from_fn(9, |x| Vec2::new(x.cos(), x.sin()));
        assert!(odd.is_err());
    }

    #[test]
    fn rejects_repeated_points() {
        let mut pts = circle(16, 1.0).into_points();
        pts[3] = pts[2];
        assert!(matches!(CurveState::new(pts), Err(Error::DegenerateCurve(_))));
    }

    #[test]
    fn frames_are_orthonormal() {
        let c = ellipse(64, 2.0, 1.0);
        for (t, nu) in c.tangents().iter().zip(c.normals()) {
            assert!((t.norm() - 1.0).abs() < 1e-12);
            assert_eq!(t.dot(nu), 0.0);
            assert_eq!(*nu, rot90(*t));
        }
    }

    #[test]
    fn unit_circle_curvature() {
        for n in [32, 64, 128] {
            let c = circle(n, 1.0);
            let h = c.grid_step();
            for k in c.curvature() {
                assert!((k - 1.0).abs() < h * h);
            }
        }
    }

    #[test]
    fn clockwise_circle_has_negative_curvature() {
        let c = CurveState::from_fn(64, |x| Vec2::new(2.0 * x.cos(), -2.0 * x.sin())).unwrap();
        let h = c.grid_step();
        for k in c.curvature() {
            assert!((k + 0.5).abs() < h * h);
        }
    }

    #[test]
    fn ellipse_vertex_curvature() {
        // ab / (a^2 sin^2 t + b^2 cos^2 t)^{3/2} at t = 0 is a / b^2
        let errs: Vec<f64> = [64, 128]
            .iter()
            .map(|&n| (ellipse(n, 2.0, 1.0).curvature()[0] - 2.0).abs())
            .collect();
        assert!(errs[0] < 0.02);
        assert!(errs[0] / errs[1] > 3.5);
    }

    #[test]
    fn curvature_error_is_second_order() {
        let err = |n| {
            circle(n, 1.0)
                .curvature()
                .iter()
                .map(|k| (k - 1.0).abs())
                .fold(0.0, f64::max)
        };
        for n in [32, 64, 128] {
            assert!(err(n) / err(2 * n) >= 3.5);
        }
    }

    #[test]
    fn length_and_area_of_circles() {
        let c = circle(128, 1.0);
        let h2 = c.grid_step().powi(2);
        assert!((c.length() - 2.0 * PI).abs() < h2 * 2.0 * PI);
        assert!((c.signed_area() - PI).abs() < h2 * PI);
        let r = circle(128, 0.5);
        assert!((r.length() - PI).abs() < h2 * PI);
        assert!((c.reversed().signed_area() + PI).abs() < h2 * PI);
    }

    #[test]
    fn figure_eight_area_and_turning() {
        let c = figure_eight(128);
        assert!(c.signed_area().abs() < 1e-12);
        assert_eq!(turning_number(&c).unwrap(), 0);
    }

    #[test]
    fn turning_numbers() {
        assert_eq!(turning_number(&circle(64, 1.0)).unwrap(), 1);
        assert_eq!(turning_number(&circle(64, 1.0).reversed()).unwrap(), -1);
        let c = CurveState::from_fn(64, |x| Vec2::new((2.0 * x).cos(), (2.0 * x).sin())).unwrap();
        assert_eq!(turning_number(&c).unwrap(), 2);
    }

    #[test]
    fn under_resolved_turning_is_refused() {
        // the central tangents at samples 2 and 3 differ by about 140 degrees
        let pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, -0.1), (0.0, -1.0), (-1.0, -1.0), (-1.0, 0.0)]
            .iter()
            .map(|&(x, y)| Vec2::new(x, y))
            .collect();
        let c = CurveState::new(pts).unwrap();
        assert!(matches!(turning_number(&c), Err(Error::NonIntegralTurning { .. })));
    }

    #[test]
    fn divergence_and_gradient_on_circle() {
        let c = circle(128, 1.0);
        let h2 = c.grid_step().powi(2);
        let constant = DirectorField::constant(128, Vec2::new(0.3, -2.0));
        assert!(div_gamma(&c, &constant).unwrap().iter().all(|d| d.abs() < 1e-12));
        assert!(grad_gamma(&c, &constant).unwrap().iter().all(|m| m.norm() < 1e-12));

        let nu = DirectorField::new(c.normals().to_vec());
        for d in div_gamma(&c, &nu).unwrap() {
            assert!((d + 1.0).abs() < h2);
        }
        for m in grad_gamma(&c, &nu).unwrap() {
            assert!((m.norm() - 1.0).abs() < h2);
        }
        let tau = DirectorField::new(c.tangents().to_vec());
        for d in div_gamma(&c, &tau).unwrap() {
            assert!(d.abs() < h2);
        }
    }

    #[test]
    fn gradient_norm_of_scaled_normal_field() {
        let (lambda, delta, r) = (1.0, 1.0, 0.7);
        let c = circle(128, r);
        let a = delta / (lambda + delta * delta);
        let eta = DirectorField::new(c.normals().iter().map(|v| v * a).collect());
        let expected = a / r;
        for m in grad_gamma(&c, &eta).unwrap() {
            assert!((m.norm() - expected).abs() < 1e-3 * expected);
        }
    }

    #[test]
    fn resample_keeps_uniform_circle() {
        let c = circle(64, 1.0);
        let r = resample_uniform(&c).unwrap();
        for (p, q) in c.points().iter().zip(r.points()) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn resample_clustered_circle() {
        let n = 128;
        let pts: Vec<Vec2> = (0..n)
            .map(|i| {
                let u = i as f64 / n as f64;
                let x = 2.0 * PI * (0.5 * u + 0.5 * u * u);
                Vec2::new(x.cos(), x.sin())
            })
            .collect();
        let c = CurveState::new(pts).unwrap();
        assert!(c.chord_ratio_excess() > 0.5);
        let r = resample_uniform(&c).unwrap();
        assert!(r.chord_ratio_excess() <= 1e-10);
        let h2 = r.grid_step().powi(2);
        assert!((r.length() - 2.0 * PI).abs() < 2.0 * PI * h2);
        assert!(r.signed_area() > 0.0);
        for p in r.points() {
            assert!((p.norm() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn resample_is_idempotent() {
        let c = ellipse(64, 2.0, 1.0);
        let once = resample_uniform(&c).unwrap();
        let twice = resample_uniform(&once).unwrap();
        for (p, q) in once.points().iter().zip(twice.points()) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn orientation_reversal_flips_signs() {
        let c = ellipse(64, 2.0, 1.0);
        let r = c.reversed();
        let n = c.n();
        for i in 0..n {
            let j = (n - i) % n;
            assert!((c.curvature()[i] + r.curvature()[j]).abs() < 1e-12);
            assert!((c.normals()[i] + r.normals()[j]).norm() < 1e-12);
        }
        assert!((c.length() - r.length()).abs() < 1e-12);
        assert!((c.signed_area() + r.signed_area()).abs() < 1e-12);
    }
}
