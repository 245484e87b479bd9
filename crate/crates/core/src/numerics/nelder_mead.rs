//! Nelder-Mead downhill simplex with the standard coefficients
//! (reflection 1, expansion 2, contraction 0.5, shrink 0.5).

use super::NumericsError;

#[derive(Debug, Clone)]
pub struct NelderMeadOutcome {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub evaluations: usize,
    /// Every evaluated point with its objective value, in evaluation order.
    pub history: Vec<(Vec<f64>, f64)>,
}

/// Minimize `objective` from `x0`, building the initial simplex from
/// `x0 + step[i] * e_i`. Terminates when the simplex function-value spread
/// drops below `tol` or the evaluation budget is exhausted.
pub fn nelder_mead(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    max_evals: usize,
    tol: f64,
) -> Result<NelderMeadOutcome, NumericsError> {
    let dim = x0.len();
    if step.len() != dim {
        return Err(NumericsError::Precondition(
            "step length must match dimension".into(),
        ));
    }
    if step.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(NumericsError::Precondition(
            "step entries must be non-zero and finite".into(),
        ));
    }
    if max_evals < dim + 1 {
        return Err(NumericsError::Precondition(format!(
            "max_evals must be at least dim + 1 = {}",
            dim + 1
        )));
    }

    let mut history: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], history: &mut Vec<(Vec<f64>, f64)>, evals: &mut usize| {
        let f = objective(x);
        history.push((x.to_vec(), f));
        *evals += 1;
        f
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(x0, &mut history, &mut evals);
    if !f0.is_finite() {
        return Err(NumericsError::NonFiniteObjective);
    }
    simplex.push((x0.to_vec(), f0));
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += step[i];
        let f = eval(&v, &mut history, &mut evals);
        if !f.is_finite() {
            return Err(NumericsError::NonFiniteObjective);
        }
        simplex.push((v, f));
    }

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[dim].1 - simplex[0].1;
        if spread < tol || evals >= max_evals {
            break;
        }

        // Centroid of all vertices except the worst.
        let mut centroid = vec![0.0; dim];
        for (v, _) in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let worst = simplex[dim].clone();

        let reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + ALPHA * (c - w))
            .collect();
        let f_reflected = eval(&reflected, &mut history, &mut evals);

        if f_reflected < simplex[0].1 {
            if evals < max_evals {
                let expanded: Vec<f64> = centroid
                    .iter()
                    .zip(&reflected)
                    .map(|(c, r)| c + GAMMA * (r - c))
                    .collect();
                let f_expanded = eval(&expanded, &mut history, &mut evals);
                simplex[dim] = if f_expanded < f_reflected {
                    (expanded, f_expanded)
                } else {
                    (reflected, f_reflected)
                };
            } else {
                simplex[dim] = (reflected, f_reflected);
            }
            continue;
        }
        if f_reflected < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_reflected);
            continue;
        }
        if evals >= max_evals {
            break;
        }
        let contracted: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + RHO * (w - c))
            .collect();
        let f_contracted = eval(&contracted, &mut history, &mut evals);
        if f_contracted < worst.1 {
            simplex[dim] = (contracted, f_contracted);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let shrunk: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + SIGMA * (v - b))
                .collect();
            let f = eval(&shrunk, &mut history, &mut evals);
            *vertex = (shrunk, f);
            if evals >= max_evals {
                break;
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(NelderMeadOutcome {
        x_best: simplex[0].0.clone(),
        f_best: simplex[0].1,
        evaluations: evals,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_shifted_quadratic() {
        let mut f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let out = nelder_mead(&mut f, &[0.0, 0.0], &[1.0, 1.0], 600, 1e-12).unwrap();
        assert!((out.x_best[0] - 3.0).abs() < 1e-4, "{:?}", out.x_best);
        assert!((out.x_best[1] + 1.0).abs() < 1e-4, "{:?}", out.x_best);
    }

    #[test]
    fn constant_objective_returns_start() {
        let mut f = |_: &[f64]| 7.0;
        let out = nelder_mead(&mut f, &[2.0, 5.0], &[1.0, 1.0], 100, 1e-9).unwrap();
        assert_eq!(out.x_best, vec![2.0, 5.0]);
        assert_eq!(out.evaluations, 3);
    }

    #[test]
    fn exhausted_budget_returns_best_initial_vertex() {
        let mut f = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let out = nelder_mead(&mut f, &[1.0, 1.0], &[-1.0, 0.5], 3, 1e-12).unwrap();
        assert_eq!(out.evaluations, 3);
        // Vertices: (1,1) -> 2, (0,1) -> 1, (1,1.5) -> 3.25; best is (0,1).
        assert_eq!(out.x_best, vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_non_finite_initial_vertex() {
        let mut f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { 0.0 };
        let err = nelder_mead(&mut f, &[0.0], &[1.0], 10, 1e-9).unwrap_err();
        assert!(matches!(err, NumericsError::NonFiniteObjective));
    }

    #[test]
    fn random_convex_quadratics_reach_minimum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        for _ in 0..10 {
            let dim = rng.gen_range(1..=4);
            let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let scale: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.5..4.0)).collect();
            let offset: f64 = rng.gen_range(-1.0..1.0);
            let c = center.clone();
            let s = scale.clone();
            let mut f = move |x: &[f64]| {
                offset
                    + x.iter()
                        .zip(&c)
                        .zip(&s)
                        .map(|((x, c), s)| s * (x - c) * (x - c))
                        .sum::<f64>()
            };
            let x0 = vec![0.0; dim];
            let step = vec![0.7; dim];
            let out = nelder_mead(&mut f, &x0, &step, 2000, 1e-13).unwrap();
            assert!(
                (out.f_best - offset).abs() < 1e-6,
                "dim {dim}: f_best {} vs {offset}",
                out.f_best
            );
        }
    }
}
