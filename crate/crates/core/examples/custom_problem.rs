//! Plug a new estimation problem into the robust loop: a straight-line fit
//! `y = a x + b` solved by weighted least squares, with gross outliers.

use nalgebra::{Matrix2, Vector2};
use robust_bayes::kernels::{run_robust, Method, RobustConfig, WeightedProblem};
use robust_bayes::{Error, Result};

struct LineFit {
    x: Vec<f64>,
    y: Vec<f64>,
    /// `1 / bound^2` for the largest inlier deviation.
    precision: f64,
}

impl WeightedProblem for LineFit {
    type Estimate = Vector2<f64>;

    fn measurement_count(&self) -> usize {
        self.x.len()
    }

    fn solve(&self, weights: &[f64], _warm_start: Option<&Vector2<f64>>) -> Result<Vector2<f64>> {
        let mut a = Matrix2::zeros();
        let mut b = Vector2::zeros();
        for ((x, y), w) in self.x.iter().zip(&self.y).zip(weights) {
            let row = Vector2::new(*x, 1.0);
            a += row * row.transpose() * *w;
            b += row * (*w * y);
        }
        a.lu().solve(&b).ok_or(Error::WeightSum { sum: weights.iter().sum() })
    }

    fn squared_residuals(&self, p: &Vector2<f64>) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(x, y)| self.precision * (y - p[0] * x - p[1]).powi(2))
            .collect()
    }
}

fn main() -> Result<()> {
    let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
    let mut y: Vec<f64> = x.iter().enumerate().map(|(i, x)| 2.0 * x - 1.0 + 0.01 * ((i * 7 % 5) as f64 - 2.0)).collect();
    for i in [3, 9, 10, 22, 30, 31, 35] {
        y[i] += 25.0 - 3.0 * i as f64;
    }
    let problem = LineFit { x, y, precision: 1.0 / (0.05f64).powi(2) };

    for method in Method::ALL {
        let out = run_robust(&problem, &RobustConfig::with_method(method), None)?;
        let p = out.estimate;
        println!("{:<8} slope {:>8.4}  intercept {:>8.4}  iters {}", method.name(), p[0], p[1], out.trace.iteration_count());
    }
    Ok(())
}
