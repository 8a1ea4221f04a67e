//! Derivative-free minimization.

#[derive(Clone, Debug)]
pub struct NelderMead {
    /// Initial simplex offset along each coordinate.
    pub step: Vec<f64>,
    /// Stop once `max f - min f` over the simplex falls below this.
    pub f_tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn new(step: Vec<f64>, f_tol: f64) -> Self {
        Self {
            step,
            f_tol,
            max_iter: 5000,
        }
    }

    /// Standard reflection/expansion/contraction/shrink scheme. Non-finite
    /// objective values are treated as `+inf`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };
        let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += self.step[i];
            pts.push(p);
        }
        let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            pts = order.iter().map(|&i| pts[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();
            let spread = vals[n] - vals[0];
            if spread.is_finite() && spread.abs() <= self.f_tol {
                let size = pts[1..]
                    .iter()
                    .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
                    .fold(0.0, f64::max);
                if size < 1e-6 || spread.abs() <= self.f_tol * 1e-3 {
                    converged = true;
                    break;
                }
            }
            iterations += 1;
            let mut centroid = vec![0.0; n];
            for p in &pts[..n] {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&pts[n])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };
            let xr = along(-1.0);
            let fr = eval(&xr);
            if fr < vals[0] {
                let xe = along(-2.0);
                let fe = eval(&xe);
                if fe < fr {
                    pts[n] = xe;
                    vals[n] = fe;
                } else {
                    pts[n] = xr;
                    vals[n] = fr;
                }
            } else if fr < vals[n - 1] {
                pts[n] = xr;
                vals[n] = fr;
            } else {
                let (xc, fc) = if fr < vals[n] {
                    let x = along(-0.5);
                    let v = eval(&x);
                    (x, v)
                } else {
                    let x = along(0.5);
                    let v = eval(&x);
                    (x, v)
                };
                if fc < vals[n].min(fr) {
                    pts[n] = xc;
                    vals[n] = fc;
                } else {
                    let best = pts[0].clone();
                    for i in 1..=n {
                        pts[i] = pts[i]
                            .iter()
                            .zip(&best)
                            .map(|(p, b)| b + 0.5 * (p - b))
                            .collect();
                        vals[i] = eval(&pts[i]);
                    }
                }
            }
        }
        let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        Minimum {
            x: pts[best].clone(),
            f: vals[best],
            iterations,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let nm = NelderMead {
            step: vec![0.5, 0.5],
            f_tol: 1e-14,
            max_iter: 20_000,
        };
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn one_dimensional_quadratic() {
        let nm = NelderMead::new(vec![1.0], 1e-12);
        let m = nm.minimize(|x| (x[0] - 3.0).powi(2), &[0.0]);
        assert!((m.x[0] - 3.0).abs() < 1e-5);
    }
}
