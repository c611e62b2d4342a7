//! Derivative-free simplex minimization (Nelder-Mead).
//!
//! Used by the certificate search, whose objective (a max of extreme
//! eigenvalues) is continuous but not smooth. Standard reflection /
//! expansion / contraction / shrink coefficients.

/// Termination and budget knobs.
#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub max_iters: usize,
    /// Stop when the simplex's objective spread falls below
    /// `ftol * (1 + |f_best|)`.
    pub ftol: f64,
    /// Stop when the simplex diameter falls below `xtol * (1 + |x_best|)`.
    pub xtol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iters: 2000,
            ftol: 1e-14,
            xtol: 1e-12,
        }
    }
}

/// Minimize `f` starting from `x0` with an axis-aligned initial simplex of
/// edge `step`. Returns the best point and its objective value.
pub fn minimize<F>(mut f: F, x0: &[f64], step: f64, opts: Options) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    if dim == 0 {
        let v = f(x0);
        return (x0.to_vec(), v);
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..opts.max_iters {
        // Order ascending by objective.
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite objective"));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let ord_vals: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = ordered;
        values = ord_vals;

        let f_best = values[0];
        let f_worst = values[dim];
        let spread = f_worst - f_best;
        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0f64, f64::max);
        let x_scale = 1.0 + simplex[0].iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        if spread <= opts.ftol * (1.0 + f_best.abs()) && diameter <= opts.xtol * x_scale {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[dim])
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[0] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&reflect)
                .map(|(c, r)| c + gamma * (r - c))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[dim] = expand;
                values[dim] = f_expand;
            } else {
                simplex[dim] = reflect;
                values[dim] = f_reflect;
            }
        } else if f_reflect < values[dim - 1] {
            simplex[dim] = reflect;
            values[dim] = f_reflect;
        } else {
            let contract_base = if f_reflect < values[dim] {
                &reflect
            } else {
                &simplex[dim]
            };
            let contract: Vec<f64> = centroid
                .iter()
                .zip(contract_base)
                .map(|(c, w)| c + rho * (w - c))
                .collect();
            let f_contract = f(&contract);
            if f_contract < values[dim].min(f_reflect) {
                simplex[dim] = contract;
                values[dim] = f_contract;
            } else {
                // Shrink toward the best vertex.
                for i in 1..=dim {
                    let best = simplex[0].clone();
                    for (x, b) in simplex[i].iter_mut().zip(&best) {
                        *x = b + sigma * (*x - b);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=dim {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 0.5).powi(2);
        let (x, v) = minimize(f, &[5.0, 5.0], 0.5, Options::default());
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(x[1], -0.5, epsilon = 1e-6);
        assert!(v < 1e-12);
    }

    #[test]
    fn rosenbrock_2d() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, _) = minimize(f, &[-1.2, 1.0], 0.5, Options::default());
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn nonsmooth_max_objective() {
        // max(|x|, |y - 1|) has its minimum at (0, 1).
        let f = |x: &[f64]| x[0].abs().max((x[1] - 1.0).abs());
        let (x, v) = minimize(f, &[3.0, -2.0], 1.0, Options::default());
        assert!(v < 1e-6, "value {v} at {x:?}");
    }

    #[test]
    fn zero_dimension_passthrough() {
        let (x, v) = minimize(|_: &[f64]| 7.0, &[], 1.0, Options::default());
        assert!(x.is_empty());
        assert_eq!(v, 7.0);
    }
}
