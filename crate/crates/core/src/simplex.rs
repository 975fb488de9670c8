//! Derivative-free Nelder-Mead simplex minimizer with restarts.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexSettings {
    /// Budget of objective evaluations shared by all restarts.
    pub max_evals: usize,
    /// Converged when the spread of simplex values is below
    /// `ftol * (1 + |f_best|)` ...
    pub ftol: f64,
    /// ... and every vertex is within `xtol * (1 + |x_best_i|)` of the best
    /// vertex in each coordinate.
    pub xtol: f64,
    /// Restarts from a simplex rebuilt around the current optimum with
    /// 10% coordinate perturbations.
    pub restarts: usize,
}

impl Default for SimplexSettings {
    fn default() -> Self {
        SimplexSettings {
            max_evals: 10_000,
            ftol: 1e-10,
            xtol: 1e-8,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration, across restarts.
    pub trace: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Counter<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counter<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` starting from `x0`, with initial simplex edges `steps`.
/// Non-finite objective values are treated as `+inf` (infeasible).
pub fn minimize<F>(f: F, x0: &[f64], steps: &[f64], settings: &SimplexSettings) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    let mut obj = Counter { f, evals: 0 };
    let mut trace = Vec::new();
    let mut iterations = 0;

    let (mut best_x, mut best_f, mut converged) =
        run(&mut obj, x0, steps, settings, &mut trace, &mut iterations);

    for _ in 0..settings.restarts {
        if obj.evals >= settings.max_evals {
            break;
        }
        let restart_steps: Vec<f64> = best_x
            .iter()
            .zip(steps)
            .map(|(&x, &s)| if x.abs() > 1e-12 { 0.1 * x.abs() } else { s })
            .collect();
        let (x, fx, conv) = run(&mut obj, &best_x.clone(), &restart_steps, settings, &mut trace, &mut iterations);
        if fx <= best_f {
            best_x = x;
            best_f = fx;
        }
        converged = conv;
    }

    Minimum {
        x: best_x,
        value: best_f,
        evaluations: obj.evals,
        iterations,
        converged,
        trace,
    }
}

fn run<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counter<F>,
    x0: &[f64],
    steps: &[f64],
    settings: &SimplexSettings,
    trace: &mut Vec<f64>,
    iterations: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| obj.eval(v)).collect();

    let mut converged = false;
    loop {
        // Sort ascending; ties keep vertex order so runs are reproducible.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[dim];
        if best.is_finite() {
            let f_ok = worst - best <= settings.ftol * (1.0 + best.abs());
            let x_ok = simplex[1..].iter().all(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .all(|(a, b)| (a - b).abs() <= settings.xtol * (1.0 + b.abs()))
            });
            if f_ok && x_ok {
                converged = true;
                break;
            }
        }
        if obj.evals >= settings.max_evals {
            break;
        }
        *iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = toward(REFLECT, &simplex[dim]);
        let f_r = obj.eval(&reflected);
        if f_r < values[0] {
            let expanded = toward(EXPAND, &simplex[dim]);
            let f_e = obj.eval(&expanded);
            if f_e < f_r {
                simplex[dim] = expanded;
                values[dim] = f_e;
            } else {
                simplex[dim] = reflected;
                values[dim] = f_r;
            }
        } else if f_r < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = f_r;
        } else {
            let (candidate, f_c, accept) = if f_r < values[dim] {
                let c = toward(CONTRACT, &simplex[dim]);
                let fc = obj.eval(&c);
                let ok = fc <= f_r;
                (c, fc, ok)
            } else {
                let c = toward(-CONTRACT, &simplex[dim]);
                let fc = obj.eval(&c);
                let ok = fc <= values[dim];
                (c, fc, ok)
            };
            if accept {
                simplex[dim] = candidate;
                values[dim] = f_c;
            } else {
                let anchor = simplex[0].clone();
                for i in 1..=dim {
                    for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                        *x = a + SHRINK * (*x - a);
                    }
                    values[i] = obj.eval(&simplex[i]);
                }
            }
        }
        let current = values.iter().copied().fold(f64::INFINITY, f64::min);
        let prev = trace.last().copied().unwrap_or(f64::INFINITY);
        trace.push(current.min(prev));
    }
    (simplex[0].clone(), values[0], converged)
}
