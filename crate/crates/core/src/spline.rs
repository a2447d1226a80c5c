//! Periodic cubic interpolation of closed point sequences.

use crate::geometry::Vec2;

/// Interpolating periodic cubic spline `t -> R^2` with non-uniform knots.
///
/// Knots are `t_0 = 0 < t_1 < ... < t_{n-1} < period`; the value at
/// `period` wraps back to the first sample.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    values: Vec<Vec2>,
    second: Vec<Vec2>,
    period: f64,
}

impl PeriodicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<Vec2>, period: f64) -> Self {
        let n = knots.len();
        assert_eq!(n, values.len());
        assert!(n >= 3, "periodic spline needs at least three knots");
        let step = |i: usize| -> f64 {
            if i + 1 < n {
                knots[i + 1] - knots[i]
            } else {
                period - knots[n - 1] + knots[0]
            }
        };
        let h: Vec<f64> = (0..n).map(step).collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![Vec2::zeros(); n];
        for i in 0..n {
            let hp = h[(i + n - 1) % n];
            let hi = h[i];
            sub[i] = hp;
            diag[i] = 2.0 * (hp + hi);
            sup[i] = hi;
            let next = values[(i + 1) % n];
            let prev = values[(i + n - 1) % n];
            rhs[i] = ((next - values[i]) / hi - (values[i] - prev) / hp) * 6.0;
        }
        let second = solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs);
        Self {
            knots,
            values,
            second,
            period,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn segment(&self, t: f64) -> (usize, f64, f64) {
        let n = self.knots.len();
        let t = t.rem_euclid(self.period);
        // last knot <= t
        let i = match self.knots.partition_point(|&k| k <= t) {
            0 => n - 1,
            p => p - 1,
        };
        let (t0, t1) = if i + 1 < n {
            (self.knots[i], self.knots[i + 1])
        } else {
            (self.knots[n - 1], self.period + self.knots[0])
        };
        let t = if t < t0 { t + self.period } else { t };
        (i, t - t0, t1 - t0)
    }

    pub fn eval(&self, t: f64) -> Vec2 {
        let n = self.knots.len();
        let (i, a, h) = self.segment(t);
        let j = (i + 1) % n;
        let b = h - a;
        let (m0, m1) = (self.second[i], self.second[j]);
        let (y0, y1) = (self.values[i], self.values[j]);
        m0 * (b * b * b / (6.0 * h))
            + m1 * (a * a * a / (6.0 * h))
            + (y0 / h - m0 * (h / 6.0)) * b
            + (y1 / h - m1 * (h / 6.0)) * a
    }
}

/// Solves a periodic tridiagonal system `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`
/// (indices mod n) via Sherman-Morrison around the Thomas algorithm.
pub(crate) fn solve_cyclic_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[Vec2],
) -> Vec<Vec2> {
    let n = diag.len();
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= sup[n - 1] * sub[0] / gamma;

    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = sup[n - 1];

    let x = thomas(sub, &b, sup, rhs);
    let z = thomas(sub, &b, sup, &u);
    let fact_num = x[0] + x[n - 1] * (sub[0] / gamma);
    let fact_den = 1.0 + z[0] + z[n - 1] * sub[0] / gamma;
    x.iter()
        .zip(&z)
        .map(|(&xi, &zi)| xi - fact_num * (zi / fact_den))
        .collect()
}

fn thomas<T>(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[T]) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Div<f64, Output = T>,
{
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d: Vec<T> = rhs.to_vec();
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        d[i] = (rhs[i] - d[i - 1] * sub[i]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - d[i + 1] * c[i];
    }
    d
}
