//! Fixed-step integration helpers shared by the fluid and variance solvers.

/// One classical fourth-order Runge–Kutta step of `y' = f(t, y)`.
pub fn rk4_step<const D: usize, F>(f: &F, t: f64, y: &[f64; D], h: f64) -> [f64; D]
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let shift = |base: &[f64; D], k: &[f64; D], s: f64| {
        let mut out = *base;
        for (o, kk) in out.iter_mut().zip(k) {
            *o += s * kk;
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &shift(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &shift(y, &k2, 0.5 * h));
    let k4 = f(t + h, &shift(y, &k3, h));
    let mut out = *y;
    for i in 0..D {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Cubic Hermite interpolation on `[t0, t0 + h]` from end values and slopes.
pub fn hermite(h: f64, y0: f64, d0: f64, y1: f64, d1: f64, s: f64) -> f64 {
    let u = s / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Values and slopes of a scalar function on the uniform grid `t_i = i dt`,
/// read back through piecewise cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct GridFunction {
    dt: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl GridFunction {
    pub fn new(dt: f64, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert_eq!(values.len(), slopes.len());
        assert!(!values.is_empty());
        GridFunction { dt, values, slopes }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Interpolated value; outside the grid the first or last cubic piece is
    /// extended.
    pub fn eval(&self, t: f64) -> f64 {
        let last = self.values.len() - 1;
        if last == 0 {
            return self.values[0];
        }
        let i = ((t / self.dt).floor().max(0.0) as usize).min(last - 1);
        let s = t - i as f64 * self.dt;
        hermite(
            self.dt,
            self.values[i],
            self.slopes[i],
            self.values[i + 1],
            self.slopes[i + 1],
            s,
        )
    }

    /// First `t` at which the interpolant crosses `target` from below,
    /// located by bisection inside the first grid bracket.
    pub fn first_crossing(&self, target: f64) -> Option<f64> {
        if self.values[0] >= target {
            return Some(0.0);
        }
        let i = self.values.iter().position(|&v| v >= target)?;
        let (mut lo, mut hi) = ((i - 1) as f64 * self.dt, i as f64 * self.dt);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Return whichever end of the final bracket is closer to the target.
        if (self.eval(lo) - target).abs() < (self.eval(hi) - target).abs() {
            Some(lo)
        } else {
            Some(hi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_on_exponential_decay() {
        let f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let mut y = [1.0];
        let h = 0.01;
        for i in 0..100 {
            y = rk4_step(&f, i as f64 * h, &y, h);
        }
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |t: f64| 1.0 + 2.0 * t - t * t + 0.5 * t * t * t;
        let dp = |t: f64| 2.0 - 2.0 * t + 1.5 * t * t;
        let dt = 0.1;
        let values: Vec<f64> = (0..20).map(|i| p(i as f64 * dt)).collect();
        let slopes: Vec<f64> = (0..20).map(|i| dp(i as f64 * dt)).collect();
        let g = GridFunction::new(dt, values, slopes);
        for &t in &[0.0, 0.033, 0.5, 1.234, 1.9] {
            assert!((g.eval(t) - p(t)).abs() < 1e-12);
        }
        let root = g.first_crossing(p(0.777)).unwrap();
        assert!((root - 0.777).abs() < 1e-12);
    }
}
