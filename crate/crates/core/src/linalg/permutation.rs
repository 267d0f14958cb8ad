use super::LinalgError;

/// A bijection on `0..n` stored together with its inverse.
///
/// `forward[k]` is the original index placed at position `k`;
/// `inverse[forward[k]] == k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            forward: (0..n).collect(),
            inverse: (0..n).collect(),
        }
    }

    pub fn new(forward: Vec<usize>) -> Result<Self, LinalgError> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (k, &i) in forward.iter().enumerate() {
            if i >= n || inverse[i] != usize::MAX {
                return Err(LinalgError::InvalidPermutation);
            }
            inverse[i] = k;
        }
        Ok(Self { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn inverted(&self) -> Self {
        Self {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// `y[k] = x[forward[k]]`.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.forward.iter().map(|&i| x[i]).collect()
    }

    /// Inverse of [`gather`](Self::gather): `y[forward[k]] = x[k]`.
    pub fn scatter(&self, x: &[f64]) -> Vec<f64> {
        self.inverse.iter().map(|&k| x[k]).collect()
    }
}
