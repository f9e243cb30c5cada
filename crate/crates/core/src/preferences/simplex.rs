//! Nelder-Mead simplex minimization with dimension-adaptive coefficients
//! (reflection 1, expansion `1 + 2/n`, contraction `0.75 - 1/(2n)`,
//! shrink `1 - 1/n`).

#[derive(Clone, Debug)]
pub struct SimplexConfig {
    pub max_iterations: usize,
    /// Stop when the spread of objective values across the simplex is below this.
    pub f_tolerance: f64,
    /// ... and every vertex is within this distance (max-norm) of the best one.
    pub x_tolerance: f64,
    /// Initial simplex offset along each axis.
    pub initial_step: Vec<f64>,
}

impl SimplexConfig {
    pub fn new(dim: usize) -> Self {
        SimplexConfig {
            max_iterations: 2_000,
            f_tolerance: 1e-10,
            x_tolerance: 1e-7,
            initial_step: vec![0.5; dim],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], config: &SimplexConfig) -> SimplexResult {
    let n = x0.len();
    assert!(n > 0, "nothing to minimize over");
    assert_eq!(config.initial_step.len(), n, "one initial step per coordinate");
    let dim = n.max(1) as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / dim, 0.75 - 0.5 / dim, 1.0 - 1.0 / dim);

    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut points: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += config.initial_step[i];
        points.push(p);
    }
    let mut values: Vec<f64> = points.iter().map(|p| eval(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        // order best..worst; stable so ties keep insertion order
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        points = order.iter().map(|&i| points[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let size = points[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&points[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.abs() <= config.f_tolerance && size <= config.x_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| points[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&points[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(alpha);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(alpha * gamma);
            let fe = eval(&expanded);
            if fe < fr {
                points[n] = expanded;
                values[n] = fe;
            } else {
                points[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            points[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (candidate, fc) = if fr < values[n] {
            let outside = along(alpha * rho);
            let fo = eval(&outside);
            (outside, fo)
        } else {
            let inside = along(-rho);
            let fi = eval(&inside);
            (inside, fi)
        };
        if fc < values[n].min(fr) {
            points[n] = candidate;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        let best = points[0].clone();
        for i in 1..=n {
            let shrunk: Vec<f64> = best
                .iter()
                .zip(&points[i])
                .map(|(b, p)| b + sigma * (p - b))
                .collect();
            values[i] = eval(&shrunk);
            points[i] = shrunk;
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    SimplexResult {
        x: points[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    }
}
