//! Closed-form model families used by the protocol fits.

use std::sync::Arc;

type EvalFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// A parametric scalar model `y = f(params, x)` with optional box bounds,
/// fit by [`levenberg_marquardt`](super::levenberg_marquardt).
#[derive(Clone)]
pub struct ModelSpec {
    pub n_params: usize,
    pub bounds: Option<Vec<(f64, f64)>>,
    eval: EvalFn,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("n_params", &self.n_params)
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl ModelSpec {
    pub fn new(
        n_params: usize,
        eval: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ModelSpec {
            n_params,
            bounds: None,
            eval: Arc::new(eval),
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        assert_eq!(bounds.len(), self.n_params);
        for (lo, hi) in &bounds {
            assert!(lo < hi, "bound lo must be below hi");
        }
        self.bounds = Some(bounds);
        self
    }

    pub fn eval(&self, params: &[f64], x: f64) -> f64 {
        (self.eval)(params, x)
    }

    /// Residual vector `f(params, x_i) - y_i`.
    pub fn residuals(&self, params: &[f64], xs: &[f64], ys: &[f64]) -> Vec<f64> {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| self.eval(params, x) - y)
            .collect()
    }
}

/// `B + A / (1 + 4 (x - f0)^2 / w^2)`, params `[A, f0, w, B]`.
pub fn lorentzian() -> ModelSpec {
    ModelSpec::new(4, |p, x| {
        let (a, f0, w, b) = (p[0], p[1], p[2], p[3]);
        let u = 2.0 * (x - f0) / w;
        b + a / (1.0 + u * u)
    })
}

/// `B + A * exp(-x / T)`, params `[A, T, B]`.
pub fn exp_decay() -> ModelSpec {
    ModelSpec::new(3, |p, x| {
        let (a, t, b) = (p[0], p[1], p[2]);
        b + a * (-x / t).exp()
    })
}

/// `B + A * cos(2 pi f x + phi) * exp(-x / T)`, params `[A, f, phi, T, B]`.
pub fn damped_cos() -> ModelSpec {
    ModelSpec::new(5, |p, x| {
        let (a, f, phi, t, b) = (p[0], p[1], p[2], p[3], p[4]);
        b + a * (std::f64::consts::TAU * f * x + phi).cos() * (-x / t).exp()
    })
}

/// `B + A * cos(2 pi f x + phi)`, params `[A, f, phi, B]`.
pub fn cosine() -> ModelSpec {
    ModelSpec::new(4, |p, x| {
        let (a, f, phi, b) = (p[0], p[1], p[2], p[3]);
        b + a * (std::f64::consts::TAU * f * x + phi).cos()
    })
}

/// `c + a * (x - x0)^2`, params `[a, x0, c]`.
pub fn parabola() -> ModelSpec {
    ModelSpec::new(3, |p, x| {
        let (a, x0, c) = (p[0], p[1], p[2]);
        c + a * (x - x0) * (x - x0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorentzian_peak_value() {
        let m = lorentzian();
        let p = [1.0, 5.0e9, 2.0e6, 0.1];
        assert!((m.eval(&p, 5.0e9) - 1.1).abs() < 1e-12);
        // Half maximum at f0 +- w/2.
        assert!((m.eval(&p, 5.0e9 + 1.0e6) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn exp_decay_at_one_time_constant() {
        let m = exp_decay();
        let p = [1.0, 3.0, 0.2];
        assert!((m.eval(&p, 3.0) - (0.2 + 1.0 / std::f64::consts::E)).abs() < 1e-12);
    }

    #[test]
    fn cosine_half_period() {
        let m = cosine();
        let p = [1.0, 1.0, 0.0, 0.0];
        assert!((m.eval(&p, 0.5) - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn parabola_vertex() {
        let m = parabola();
        let p = [2.0, 0.12, 0.05];
        assert!((m.eval(&p, 0.12) - 0.05).abs() < 1e-12);
        assert!((m.eval(&p, 0.22) - (0.05 + 2.0 * 0.01)).abs() < 1e-12);
    }
}
