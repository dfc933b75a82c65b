use crate::dense::Matrix;

/// `log1p` of each (non-negative) entry, then per-column z-scores. Constant
/// columns become zero.
pub fn standardize(raw: &Matrix) -> Matrix {
    let mut x = raw.clone();
    x.map_inplace(|v| v.max(0.0).ln_1p());
    let (n, f) = x.shape();
    if n == 0 {
        return x;
    }
    for j in 0..f {
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for i in 0..n {
            let v = if sd > 1e-12 { (x.get(i, j) - mean) / sd } else { 0.0 };
            x.set(i, j, v);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_are_centered_and_scaled() {
        let raw = Matrix::from_rows(&[vec![0.0, 5.0], vec![10.0, 5.0], vec![100.0, 5.0]]);
        let x = standardize(&raw);
        let col: Vec<f64> = (0..3).map(|i| x.get(i, 0)).collect();
        assert!(col.iter().sum::<f64>().abs() < 1e-12);
        assert!((col.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        assert!((0..3).all(|i| x.get(i, 1) == 0.0));
    }
}
