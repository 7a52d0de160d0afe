//! Natural cubic spline used for correlation peak refinement.

use crate::{Error, Real, Result};

#[derive(Debug, Clone)]
pub struct NaturalCubicSpline<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<T>,
}

impl<T: Real> NaturalCubicSpline<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(Error::DegeneratePeak);
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegeneratePeak);
        }
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let mut m = vec![T::zero(); n];
        let mut c_prime = vec![T::zero(); n];
        let mut d_prime = vec![T::zero(); n];
        let six = T::lit(6.0);
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            let a = h0;
            let b = T::two() * (h0 + h1);
            let c = h1;
            let d = six * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            let denom = b - a * c_prime[i - 1];
            c_prime[i] = c / denom;
            d_prime[i] = (d - a * d_prime[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d_prime[i] - c_prime[i] * m[i + 1];
        }
        Ok(Self { xs, ys, m })
    }

    fn segment(&self, x: T) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    pub fn eval(&self, x: T) -> T {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let six = T::lit(6.0);
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / six
    }

    pub fn derivative(&self, x: T) -> T {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        (self.ys[i + 1] - self.ys[i]) / h - (three * a * a - T::one()) / six * h * self.m[i]
            + (three * b * b - T::one()) / six * h * self.m[i + 1]
    }

    /// Zeros of the derivative inside segment `i`.
    fn stationary_points(&self, i: usize) -> Vec<T> {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let six = T::lit(6.0);
        // derivative as a quadratic in b = (x - x0)/h
        let qa = h * (m1 - m0) / T::two();
        let qb = h * m0;
        let qc = (self.ys[i + 1] - self.ys[i]) / h - h * (T::two() * m0 + m1) / six;
        let mut roots = Vec::with_capacity(2);
        if qa.abs() <= T::epsilon() * (qb.abs() + qc.abs()) {
            if qb != T::zero() {
                roots.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - T::lit(4.0) * qa * qc;
            if disc >= T::zero() {
                let s = disc.sqrt();
                // numerically stable pair
                let q = -(qb + qb.signum() * s) / T::two();
                if q != T::zero() {
                    roots.push(qc / q);
                }
                roots.push(q / qa);
            }
        }
        roots
            .into_iter()
            .filter(|b| *b >= T::zero() && *b <= T::one())
            .map(|b| x0 + b * h)
            .collect()
    }

    /// Resamples the spline at `points` uniformly spaced abscissae spanning
    /// the knots, takes the largest sample, then polishes it to the exact
    /// stationary point of the neighbouring cubic pieces. Returns
    /// `(x, value)`.
    pub fn maximize(&self, points: usize) -> (T, T) {
        let points = points.max(2);
        let lo = self.xs[0];
        let hi = *self.xs.last().unwrap();
        let step = (hi - lo) / T::from_usize(points - 1).unwrap();
        let (mut best_x, mut best_y) = (lo, self.eval(lo));
        for k in 1..points {
            let x = lo + step * T::from_usize(k).unwrap();
            let y = self.eval(x);
            if y > best_y {
                best_x = x;
                best_y = y;
            }
        }
        let seg = self.segment(best_x);
        let first = seg.saturating_sub(1);
        let last = (seg + 1).min(self.xs.len() - 2);
        for i in first..=last {
            for x in self.stationary_points(i) {
                if (x - best_x).abs() <= step {
                    let y = self.eval(x);
                    if y >= best_y {
                        best_x = x;
                        best_y = y;
                    }
                }
            }
        }
        (best_x, best_y)
    }

    pub fn knots(&self) -> &[T] {
        &self.xs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_straight_line_exactly() {
        let xs: Vec<f64> = (0..6).map(|k| k as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = NaturalCubicSpline::new(xs, ys).unwrap();
        for k in 0..50 {
            let x = k as f64 * 0.05;
            assert!((s.eval(x) - (3.0 * x - 1.0)).abs() < 1e-12);
            assert!((s.derivative(x) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_data_peaks_at_centre() {
        let xs: Vec<f64> = (-3..=3).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (0.5 * x).cos()).collect();
        let s = NaturalCubicSpline::new(xs, ys).unwrap();
        // 1000 grid points on [-3, 3] miss zero; the polish must find it
        let (x, y) = s.maximize(1000);
        assert!(x.abs() < 1e-12, "{x}");
        assert!((y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(NaturalCubicSpline::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(NaturalCubicSpline::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn interpolates_knots(ys in prop::collection::vec(-10.0f64..10.0, 3..12)) {
            let xs: Vec<f64> = (0..ys.len()).map(|k| k as f64 * 0.7).collect();
            let s = NaturalCubicSpline::new(xs.clone(), ys.clone()).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                prop_assert!((s.eval(*x) - y).abs() < 1e-9);
            }
        }

        #[test]
        fn polished_maximum_is_stationary(c in -0.9f64..0.9, w in 0.3f64..0.8) {
            let xs: Vec<f64> = (-3..=3).map(|k| k as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| (w * (x - c)).cos()).collect();
            let s = NaturalCubicSpline::new(xs, ys).unwrap();
            let (x, _) = s.maximize(1000);
            prop_assert!(s.derivative(x).abs() < 1e-9);
            prop_assert!((x - c).abs() < 0.05);
        }
    }
}
