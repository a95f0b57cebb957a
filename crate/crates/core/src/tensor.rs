//! Dense coordinate tensors of arbitrary rank over an `n`-dimensional chart.

use serde::Serialize;

/// Row-major storage for a rank-`rank` tensor with every index in `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tensor<T> {
    n: usize,
    rank: usize,
    data: Vec<T>,
}

/// Iterates every multi-index of a given rank in row-major order.
pub fn multi_indices(n: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(rank as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; rank];
        for slot in idx.iter_mut().rev() {
            *slot = flat % n;
            flat /= n;
        }
        idx
    })
}

impl<T> Tensor<T> {
    pub fn from_fn(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let data = multi_indices(n, rank).map(|idx| f(&idx)).collect();
        Tensor { n, rank, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.offset(idx)]
    }

    #[inline]
    pub fn get_mut(&mut self, idx: &[usize]) -> &mut T {
        let k = self.offset(idx);
        &mut self.data[k]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            n: self.n,
            rank: self.rank,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Tensor<T> {
    pub fn filled(n: usize, rank: usize, value: T) -> Self {
        Tensor {
            n,
            rank,
            data: vec![value; n.pow(rank as u32)],
        }
    }
}

impl Tensor<f64> {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Tensor::filled(n, rank, 0.0)
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &Tensor<f64>) -> Tensor<f64> {
        assert_eq!((self.n, self.rank), (other.n, other.rank));
        Tensor {
            n: self.n,
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Tensor<f64>) -> Tensor<f64> {
        assert_eq!((self.n, self.rank), (other.n, other.rank));
        Tensor {
            n: self.n,
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Tensor<f64> {
        self.map(|x| x * s)
    }

    /// Contracts slot `slot` with the matrix `m` (row-major `n×n`):
    /// `out[.., a, ..] = Σ_i m[a][i] · t[.., i, ..]`.
    pub fn transform_slot(&self, slot: usize, m: &[f64]) -> Tensor<f64> {
        let n = self.n;
        let mut out = Tensor::zeros(n, self.rank);
        let stride = n.pow((self.rank - 1 - slot) as u32);
        for (k, value) in self.data.iter().enumerate() {
            if *value == 0.0 {
                continue;
            }
            let i = (k / stride) % n;
            let base = k - i * stride;
            for a in 0..n {
                out.data[base + a * stride] += m[a * n + i] * value;
            }
        }
        out
    }

    /// Applies `m` to every slot; with `m = g⁻¹` this raises all indices.
    pub fn transform_all(&self, m: &[f64]) -> Tensor<f64> {
        (0..self.rank).fold(self.clone(), |t, s| t.transform_slot(s, m))
    }

    /// Norm induced by the metric whose inverse is `ginv` on fully covariant tensors.
    pub fn metric_norm(&self, ginv: &[f64]) -> f64 {
        let raised = self.transform_all(ginv);
        self.data
            .iter()
            .zip(&raised.data)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Components in a frame: `frame[a]` is the coordinate vector `e_a`.
    pub fn frame_components(&self, frame: &[Vec<f64>]) -> Tensor<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for (a, e) in frame.iter().enumerate() {
            for i in 0..n {
                m[a * n + i] = e[i];
            }
        }
        self.transform_all(&m)
    }

    /// Contracts slot `slot` with the vector `v`, lowering the rank by one.
    pub fn contract_vector(&self, slot: usize, v: &[f64]) -> Tensor<f64> {
        let n = self.n;
        let rank = self.rank - 1;
        Tensor::from_fn(n, rank, |idx| {
            let mut full = Vec::with_capacity(self.rank);
            full.extend_from_slice(&idx[..slot]);
            full.push(0);
            full.extend_from_slice(&idx[slot..]);
            (0..n)
                .map(|i| {
                    full[slot] = i;
                    v[i] * self.get(&full)
                })
                .sum()
        })
    }

    /// Nested `Vec` representation for serialization.
    pub fn to_nested(&self) -> NestedArray {
        fn build(t: &Tensor<f64>, prefix: &mut Vec<usize>) -> NestedArray {
            if prefix.len() == t.rank {
                return NestedArray::Scalar(*t.get(prefix));
            }
            let items = (0..t.n)
                .map(|i| {
                    prefix.push(i);
                    let item = build(t, prefix);
                    prefix.pop();
                    item
                })
                .collect();
            NestedArray::Array(items)
        }
        build(self, &mut Vec::new())
    }
}

/// Nested array view of a tensor, one level per index.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum NestedArray {
    Scalar(f64),
    Array(Vec<NestedArray>),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_row_major() {
        let t = Tensor::from_fn(3, 3, |i| (i[0] * 100 + i[1] * 10 + i[2]) as f64);
        assert_eq!(*t.get(&[2, 0, 1]), 201.0);
        assert_eq!(t.offset(&[1, 2, 0]), 15);
    }

    #[test]
    fn metric_norm_of_covector() {
        // g = diag(4, 1): |dx|² = g^{xx} = 1/4
        let t = Tensor::from_fn(2, 1, |i| if i[0] == 0 { 1.0 } else { 0.0 });
        let ginv = [0.25, 0.0, 0.0, 1.0];
        assert!((t.metric_norm(&ginv) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transform_slot_matches_direct_sum() {
        let t = Tensor::from_fn(3, 2, |i| (1 + i[0] * 3 + i[1]) as f64);
        let m = [1.0, 2.0, 0.0, 0.0, 1.0, -1.0, 3.0, 0.0, 1.0];
        let out = t.transform_slot(1, &m);
        for i in 0..3 {
            for a in 0..3 {
                let direct: f64 = (0..3).map(|j| m[a * 3 + j] * t.get(&[i, j])).sum();
                assert_eq!(*out.get(&[i, a]), direct);
            }
        }
    }
}
