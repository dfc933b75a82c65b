use crate::dense::Matrix;
use crate::error::{Error, Result};

use super::train::{ClassWeighting, TrainSplit};

/// Feature columns the baseline sees: degrees and transaction amounts, no
/// graph propagation and no alert counts.
pub const BASELINE_COLUMNS: [usize; 10] = [0, 1, 4, 5, 6, 7, 8, 9, 14, 15];

/// Binary logistic regression fitted by full-batch Adam on the train ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub columns: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    pub fn fit(
        x: &Matrix,
        columns: &[usize],
        split: &TrainSplit,
        weighting: ClassWeighting,
        epochs: usize,
        lr: f64,
    ) -> Result<Self> {
        if split.train.is_empty() {
            return Err(Error::EmptyTrainSet);
        }
        if let Some(&c) = columns.iter().find(|&&c| c >= x.cols()) {
            return Err(Error::Shape(format!("column {c} outside {} features", x.cols())));
        }
        let k = columns.len();
        let mut model = LogisticRegression {
            columns: columns.to_vec(),
            weights: vec![0.0; k],
            bias: 0.0,
        };
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let mut m = vec![0.0; k + 1];
        let mut v = vec![0.0; k + 1];
        let weights = weighting.example_weights(&split.train, &split.labels, 2);
        for step in 1..=epochs {
            let mut g = vec![0.0; k + 1];
            for &i in &split.train {
                let row = x.row(i as usize);
                let label = split.labels[i as usize];
                let err = weights[label as usize] * (model.score_row(row) - f64::from(label));
                for (gj, &c) in g.iter_mut().zip(columns) {
                    *gj += err * row[c];
                }
                g[k] += err;
            }
            let c1 = 1.0 - b1.powi(step as i32);
            let c2 = 1.0 - b2.powi(step as i32);
            for j in 0..=k {
                let gj = g[j];
                m[j] = b1 * m[j] + (1.0 - b1) * gj;
                v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                let delta = lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                if j < k {
                    model.weights[j] -= delta;
                } else {
                    model.bias -= delta;
                }
            }
        }
        Ok(model)
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        let z = self.bias + self.columns.iter().zip(&self.weights).map(|(&c, w)| w * row[c]).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }

    /// Suspicious-class probability for every row.
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.score_row(x.row(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_a_threshold_on_one_feature() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0 - 2.0, 1.0]).collect();
        let x = Matrix::from_rows(&rows);
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let split = TrainSplit {
            train: (0..40).collect(),
            val: vec![],
            test: vec![],
            labels: labels.clone(),
        };
        let lr = LogisticRegression::fit(&x, &[0], &split, ClassWeighting::Uniform, 500, 0.1).unwrap();
        let p = lr.predict(&x);
        assert!(p.iter().zip(&labels).all(|(&p, &l)| (p >= 0.5) == (l == 1)));
    }
}
