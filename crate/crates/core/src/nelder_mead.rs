//! Derivative-free downhill simplex minimisation.

/// Stopping rules and initial simplex size.
#[derive(Debug, Clone)]
pub struct NelderMead {
    /// Offset of vertex `i + 1` from the start along coordinate `i`.
    pub initial_step: Vec<f64>,
    /// Converged once every vertex lies within this distance (max-norm) of the best.
    pub diameter_tolerance: f64,
    /// Converged once the best value drops below this.
    pub value_tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, start: &[f64]) -> Minimum {
        let dim = start.len();
        assert_eq!(self.initial_step.len(), dim, "one step per coordinate");
        let mut evaluations = 0;
        let mut eval = |x: &[f64]| {
            evaluations += 1;
            f(x)
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        simplex.push((start.to_vec(), eval(start)));
        for i in 0..dim {
            let mut x = start.to_vec();
            x[i] += self.initial_step[i];
            let fx = eval(&x);
            simplex.push((x, fx));
        }

        let mut iterations = 0;
        let mut converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if self.is_converged(&simplex) {
                converged = true;
                break;
            }
            if iterations >= self.max_iterations {
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|v| v.0[j]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let worst = simplex[dim].clone();
            let second = simplex[dim - 1].1;
            let best = simplex[0].1;

            let reflected = along(REFLECT, &worst.0);
            let fr = eval(&reflected);
            if fr < best {
                let expanded = along(EXPAND, &worst.0);
                let fe = eval(&expanded);
                simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < second {
                simplex[dim] = (reflected, fr);
                continue;
            }
            let (contracted, fc) = if fr < worst.1 {
                let x = along(CONTRACT, &worst.0);
                let fx = eval(&x);
                (x, fx)
            } else {
                let x = along(-CONTRACT, &worst.0);
                let fx = eval(&x);
                (x, fx)
            };
            if fc < fr.min(worst.1) {
                simplex[dim] = (contracted, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = anchor
                    .iter()
                    .zip(&vertex.0)
                    .map(|(a, v)| a + SHRINK * (v - a))
                    .collect();
                let fx = eval(&x);
                *vertex = (x, fx);
            }
        }

        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            iterations,
            evaluations,
            converged,
        }
    }

    fn is_converged(&self, sorted: &[(Vec<f64>, f64)]) -> bool {
        if sorted[0].1 < self.value_tolerance {
            return true;
        }
        let best = &sorted[0].0;
        let diameter = sorted[1..]
            .iter()
            .flat_map(|v| v.0.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        diameter < self.diameter_tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(step: f64) -> NelderMead {
        NelderMead {
            initial_step: vec![step; 2],
            diameter_tolerance: 1e-10,
            value_tolerance: f64::NEG_INFINITY,
            max_iterations: 5000,
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = solver(0.5).minimize(f, &[-1.2, 1.0]);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn quadratic_three_dims() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 4.0 * (x[1] + 2.0).powi(2) + (x[2] - 5.0).powi(2);
        let nm = NelderMead {
            initial_step: vec![1.0; 3],
            ..solver(1.0)
        };
        let m = nm.minimize(f, &[0.0, 0.0, 0.0]);
        assert!(m.value < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let nm = NelderMead {
            max_iterations: 3,
            ..solver(0.5)
        };
        let m = nm.minimize(f, &[-1.2, 1.0]);
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
        assert!(m.value <= f(&[-1.2, 1.0]));
    }

    #[test]
    fn value_tolerance_stops_early() {
        let f = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let nm = NelderMead {
            value_tolerance: 1e-4,
            ..solver(1e-3)
        };
        let m = nm.minimize(f, &[0.0, 0.0]);
        assert!(m.converged);
        assert_eq!(m.iterations, 0);
    }
}
