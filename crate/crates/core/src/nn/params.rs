use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayViewMut2};
use rand::Rng as _;

use super::{CnnConfig, Scalar};
use crate::rng::{self, stream};

/// Every learnable tensor of the network, in declaration order. The same
/// type carries gradients and Adam moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams<T> {
    /// `(F, h, d)`: `conv_w[[f, j, k]]` weighs embedding coordinate `k` of the
    /// `j`-th word in the window.
    pub conv_w: Array3<T>,
    pub conv_b: Array1<T>,
    /// `(F, fc1)`
    pub fc1_w: Array2<T>,
    pub fc1_b: Array1<T>,
    /// `(fc1, fc2)`
    pub fc2_w: Array2<T>,
    pub fc2_b: Array1<T>,
    /// `(fc2, classes)`
    pub out_w: Array2<T>,
    pub out_b: Array1<T>,
}

pub(crate) const TENSOR_NAMES: [&str; 8] = [
    "conv_w", "conv_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b", "out_w", "out_b",
];

impl<T: Scalar> CnnParams<T> {
    pub fn zeros(c: &CnnConfig) -> Self {
        CnnParams {
            conv_w: Array3::zeros((c.filter_count, c.filter_width, c.embedding_dim)),
            conv_b: Array1::zeros(c.filter_count),
            fc1_w: Array2::zeros((c.filter_count, c.fc1_units)),
            fc1_b: Array1::zeros(c.fc1_units),
            fc2_w: Array2::zeros((c.fc1_units, c.fc2_units)),
            fc2_b: Array1::zeros(c.fc2_units),
            out_w: Array2::zeros((c.fc2_units, c.class_count)),
            out_b: Array1::zeros(c.class_count),
        }
    }

    /// Weights ~ U(-√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out))), biases 0.
    /// The convolution is treated as a dense map from an `h·d` window to `F`
    /// filter responses.
    pub fn glorot(c: &CnnConfig, seed: u64) -> Self {
        let mut p = Self::zeros(c);
        let mut rng = rng::seeded(rng::derive_seed(seed, stream::INIT));
        let mut fill = |values: &mut [T], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in values {
                *v = T::of(rng.random_range(-limit..limit));
            }
        };
        let window = c.filter_width * c.embedding_dim;
        fill(slice_mut(&mut p.conv_w), window, c.filter_count);
        fill(slice_mut(&mut p.fc1_w), c.filter_count, c.fc1_units);
        fill(slice_mut(&mut p.fc2_w), c.fc1_units, c.fc2_units);
        fill(slice_mut(&mut p.out_w), c.fc2_units, c.class_count);
        p
    }

    pub fn zeros_like(&self) -> Self {
        CnnParams {
            conv_w: Array3::zeros(self.conv_w.raw_dim()),
            conv_b: Array1::zeros(self.conv_b.raw_dim()),
            fc1_w: Array2::zeros(self.fc1_w.raw_dim()),
            fc1_b: Array1::zeros(self.fc1_b.raw_dim()),
            fc2_w: Array2::zeros(self.fc2_w.raw_dim()),
            fc2_b: Array1::zeros(self.fc2_b.raw_dim()),
            out_w: Array2::zeros(self.out_w.raw_dim()),
            out_b: Array1::zeros(self.out_b.raw_dim()),
        }
    }

    /// Convolution filters as an `(F, h·d)` matrix.
    pub fn conv_matrix(&self) -> ArrayView2<'_, T> {
        let (f, h, d) = self.conv_w.dim();
        self.conv_w
            .view()
            .into_shape_with_order((f, h * d))
            .expect("parameters are stored in standard layout")
    }

    pub(crate) fn conv_matrix_mut(&mut self) -> ArrayViewMut2<'_, T> {
        let (f, h, d) = self.conv_w.dim();
        self.conv_w
            .view_mut()
            .into_shape_with_order((f, h * d))
            .expect("parameters are stored in standard layout")
    }

    /// Tensors in declaration order.
    pub fn tensors(&self) -> [&[T]; 8] {
        [
            slice(&self.conv_w),
            slice(&self.conv_b),
            slice(&self.fc1_w),
            slice(&self.fc1_b),
            slice(&self.fc2_w),
            slice(&self.fc2_b),
            slice(&self.out_w),
            slice(&self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [T]; 8] {
        [
            slice_mut(&mut self.conv_w),
            slice_mut(&mut self.conv_b),
            slice_mut(&mut self.fc1_w),
            slice_mut(&mut self.fc1_b),
            slice_mut(&mut self.fc2_w),
            slice_mut(&mut self.fc2_b),
            slice_mut(&mut self.out_w),
            slice_mut(&mut self.out_b),
        ]
    }

    /// The weight matrices (biases excluded), i.e. the l2-regularized tensors.
    pub fn weight_tensors(&self) -> [&[T]; 4] {
        [
            slice(&self.conv_w),
            slice(&self.fc1_w),
            slice(&self.fc2_w),
            slice(&self.out_w),
        ]
    }

    /// Σ w² over the weight matrices.
    pub fn weight_sq_norm(&self) -> f64 {
        self.weight_tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|w| w.as_f64().powi(2))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Converts every entry to another scalar width.
    pub fn cast<U: Scalar>(&self) -> CnnParams<U> {
        let c = |x: &T| U::of(x.as_f64());
        CnnParams {
            conv_w: self.conv_w.map(c),
            conv_b: self.conv_b.map(c),
            fc1_w: self.fc1_w.map(c),
            fc1_b: self.fc1_b.map(c),
            fc2_w: self.fc2_w.map(c),
            fc2_b: self.fc2_b.map(c),
            out_w: self.out_w.map(c),
            out_b: self.out_b.map(c),
        }
    }
}

fn slice<T, D: ndarray::Dimension>(a: &ndarray::Array<T, D>) -> &[T] {
    a.as_slice()
        .expect("parameters are stored in standard layout")
}

fn slice_mut<T, D: ndarray::Dimension>(a: &mut ndarray::Array<T, D>) -> &mut [T] {
    a.as_slice_mut()
        .expect("parameters are stored in standard layout")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_config() {
        let c = CnnConfig {
            filter_count: 3,
            filter_width: 2,
            embedding_dim: 4,
            fc1_units: 5,
            fc2_units: 4,
            class_count: 3,
            ..Default::default()
        };
        let p = CnnParams::<f64>::glorot(&c, 1);
        assert_eq!(p.conv_w.dim(), (3, 2, 4));
        assert_eq!(p.conv_matrix().dim(), (3, 8));
        assert_eq!(p.out_w.dim(), (4, 3));
        assert_eq!(p.len(), c.parameter_count());
        assert!(p.conv_b.iter().all(|&b| b == 0.0));
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(p.conv_w.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn init_is_seeded() {
        let c = CnnConfig {
            filter_count: 4,
            fc1_units: 8,
            fc2_units: 8,
            embedding_dim: 6,
            ..Default::default()
        };
        assert_eq!(
            CnnParams::<f64>::glorot(&c, 5),
            CnnParams::<f64>::glorot(&c, 5)
        );
        assert_ne!(
            CnnParams::<f64>::glorot(&c, 5),
            CnnParams::<f64>::glorot(&c, 6)
        );
    }
}
