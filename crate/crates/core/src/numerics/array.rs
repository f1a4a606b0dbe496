use crate::error::{Error, Result};

/// Dense row-major array of f64 values.
///
/// The invariant `product(shape) == data.len()` is enforced at every
/// construction site; dimension sizes are always positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Array {
    pub fn zeros(shape: &[usize]) -> Array {
        let n = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Array {
        let n = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Array {
        Array {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Array> {
        let n: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "zero dimension in shape {shape:?}"
            )));
        }
        if n != data.len() {
            return Err(Error::InvalidInput(format!(
                "shape {shape:?} implies {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Array {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Internal constructor for callers that have already validated sizes.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Array {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Array { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The two dimensions of a rank-2 array.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            _ => Err(Error::ShapeMismatch {
                op,
                lhs: self.shape.clone(),
                rhs: vec![0, 0],
            }),
        }
    }

    /// Size of the last axis, the only axis ops broadcast or reduce over.
    pub fn last_dim(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[i * self.shape[1] + j]
    }

    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        debug_assert_eq!(self.rank(), 2);
        let c = self.shape[1];
        self.data[i * c + j] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Array {
        Array {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// In-place elementwise addition. Shapes must agree exactly.
    pub fn add_assign(&mut self, other: &Array) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("add_assign", &self.shape, &other.shape));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale_assign(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_element_count() {
        assert!(Array::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Array::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Array::from_vec(&[2, 0], vec![]).is_err());
    }

    #[test]
    fn row_major_indexing() {
        let a = Array::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.at2(0, 2), 3.0);
        assert_eq!(a.at2(1, 0), 4.0);
    }

    #[test]
    fn add_assign_rejects_shape_mismatch() {
        let mut a = Array::zeros(&[2, 2]);
        let b = Array::zeros(&[4]);
        assert!(a.add_assign(&b).is_err());
    }
}
