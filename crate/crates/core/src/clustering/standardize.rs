use super::Matrix;
use crate::error::{Error, Result};

/// Per-feature centering and unit-variance scaling (population variance).
///
/// Constant features get `std_dev = 0` and map to exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Matrix) -> Result<Self> {
        let n = data.rows();
        if n < 2 {
            return Err(Error::Contract("standardizer needs at least 2 rows".into()));
        }
        let d = data.cols();
        let mut means = vec![0.0; d];
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in data.iter_rows() {
            for j in 0..d {
                means[j] += row[j];
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut vars = vec![0.0; d];
        for row in data.iter_rows() {
            for j in 0..d {
                let c = row[j] - means[j];
                vars[j] += c * c;
            }
        }
        let std_devs = (0..d)
            .map(|j| if lo[j] == hi[j] { 0.0 } else { (vars[j] / n as f64).sqrt() })
            .collect();
        Ok(Self { means, std_devs })
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = if self.std_devs[j] > 0.0 {
                (row[j] - self.means[j]) / self.std_devs[j]
            } else {
                0.0
            };
        }
    }

    pub fn transform(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.means.len() {
            return Err(Error::Contract("standardizer width mismatch".into()));
        }
        let mut out = Matrix::zeros(data.rows(), data.cols());
        for i in 0..data.rows() {
            self.transform_row(data.row(i), out.row_mut(i));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_maps_to_zero() {
        let m = Matrix::from_rows(&[[0.1, 1.0], [0.1, 2.0], [0.1, 3.0]]).unwrap();
        let s = Standardizer::fit(&m).unwrap();
        assert_eq!(s.std_devs[0], 0.0);
        let t = s.transform(&m).unwrap();
        assert!((0..3).all(|i| t.get(i, 0) == 0.0));
    }

    #[test]
    fn plus_minus_one_is_fixed_point() {
        let m = Matrix::from_rows(&[[-1.0, 1.0], [1.0, -1.0]]).unwrap();
        let t = Standardizer::fit(&m).unwrap().transform(&m).unwrap();
        assert_eq!(t, m);
    }

    #[test]
    fn needs_two_rows() {
        let m = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(Standardizer::fit(&m).is_err());
    }
}
