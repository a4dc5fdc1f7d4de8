use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ShapeBuilder};

use super::Scalar;
use crate::embeddings::SentenceMatrix;
use crate::error::{Error, Result};

/// All `N - h + 1` windows of the sentence as rows of an `(W, h·d)` matrix.
/// Consecutive rows overlap in memory; no data is copied.
pub(crate) fn window_matrix<T: Scalar>(
    m: &SentenceMatrix<T>,
    width: usize,
) -> Result<ArrayView2<'_, T>> {
    if m.len() < width {
        return Err(Error::SentenceTooShort {
            len: m.len(),
            width,
        });
    }
    let d = m.dim();
    let windows = m.len() - width + 1;
    let view = ArrayView2::from_shape((windows, width * d).strides((d, 1)), m.as_slice())
        .expect("window view lies inside the sentence buffer");
    Ok(view)
}

/// Window responses before bias and activation, as `(W, F)`.
pub(crate) fn window_responses<T: Scalar>(
    m: &SentenceMatrix<T>,
    filters: ArrayView2<'_, T>,
) -> Result<Array2<T>> {
    let width = filters.ncols() / m.dim();
    let windows = window_matrix(m, width)?;
    let mut out = Array2::zeros((windows.nrows(), filters.nrows()));
    general_mat_mul(T::one(), &windows, &filters.t(), T::zero(), &mut out);
    Ok(out)
}

/// Valid convolution with ReLU. `filters` is `(F, h·d)` (filter `f`'s
/// window weights row-major over word offset then embedding coordinate).
/// Returns the `(F, N - h + 1)` feature map.
pub fn conv_forward<T: Scalar>(
    m: &SentenceMatrix<T>,
    filters: ArrayView2<'_, T>,
    biases: ArrayView1<'_, T>,
) -> Result<Array2<T>> {
    assert_eq!(
        filters.ncols() % m.dim(),
        0,
        "filter size is not a multiple of d"
    );
    assert_eq!(filters.nrows(), biases.len());
    let responses = window_responses(m, filters)?;
    let mut map = responses.reversed_axes().as_standard_layout().into_owned();
    for (mut row, &b) in map.rows_mut().into_iter().zip(biases.iter()) {
        row.mapv_inplace(|x| (x + b).max(T::zero()));
    }
    Ok(map)
}

/// Global max of each row of an `(F, W)` map, with the first position
/// attaining it.
pub fn max_pool_over_time<T: Scalar>(map: ArrayView2<'_, T>) -> (Array1<T>, Vec<usize>) {
    assert!(map.ncols() >= 1, "pooling needs at least one position");
    let mut pooled = Array1::zeros(map.nrows());
    let mut argmax = Vec::with_capacity(map.nrows());
    for (f, row) in map.rows().into_iter().enumerate() {
        let (best, val) =
            row.iter().enumerate().fold(
                (0, row[0]),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        pooled[f] = val;
        argmax.push(best);
    }
    (pooled, argmax)
}

/// Numerically stable softmax of one row.
pub fn softmax_in_place<T: Scalar>(mut row: ArrayViewMut1<'_, T>) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    row.mapv_inplace(|x| x / sum);
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array};
    use rand::Rng as _;

    fn sentence(cols: &[[f64; 2]]) -> SentenceMatrix {
        SentenceMatrix::from_columns(2, cols.iter().flatten().copied().collect())
    }

    #[test]
    fn conv_sums_windows() {
        // d=2, words (1,0),(0,1),(1,1); one all-ones filter of width 2
        let m = sentence(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let filters = Array2::ones((1, 4));
        let map = conv_forward(&m, filters.view(), arr1(&[0.0]).view()).unwrap();
        assert_eq!(map, arr2(&[[2.0, 3.0]]));
    }

    #[test]
    fn conv_matches_direct_summation() {
        let mut rng = crate::rng::seeded(3);
        let (d, n, h, f) = (3, 7, 3, 4);
        let m = SentenceMatrix::from_columns(
            d,
            (0..d * n).map(|_| rng.random_range(-1.0f64..1.0)).collect(),
        );
        let filters = Array::from_shape_fn((f, h * d), |_| rng.random_range(-1.0..1.0));
        let biases = Array::from_shape_fn(f, |_| rng.random_range(-0.5..0.5));
        let map = conv_forward(&m, filters.view(), biases.view()).unwrap();
        for fi in 0..f {
            for i in 0..=n - h {
                let mut s = biases[fi];
                for j in 0..h {
                    for k in 0..d {
                        s += filters[[fi, j * d + k]] * m.get(k, i + j);
                    }
                }
                assert!((map[[fi, i]] - s.max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_filter_and_negative_bias_give_zero_map() {
        let m = sentence(&[[0.1, 0.2], [0.3, -0.1], [0.0, 0.05]]);
        let zero =
            conv_forward(&m, Array2::zeros((2, 4)).view(), arr1(&[0.0, 0.0]).view()).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        let clamped = conv_forward(&m, Array2::ones((1, 4)).view(), arr1(&[-10.0]).view()).unwrap();
        assert!(clamped.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn too_short_sentence() {
        let m = sentence(&[[1.0, 0.0]]);
        assert!(matches!(
            conv_forward(&m, Array2::ones((1, 4)).view(), arr1(&[0.0]).view()),
            Err(Error::SentenceTooShort { len: 1, width: 2 })
        ));
    }

    #[test]
    fn pooling_takes_row_maxima() {
        let (p, a) = max_pool_over_time(arr2(&[[1.0, 5.0, 2.0]]).view());
        assert_eq!((p, a), (arr1(&[5.0]), vec![1]));
        let (p, _) = max_pool_over_time(Array2::from_elem((3, 4), 0.7).view());
        assert_eq!(p, arr1(&[0.7, 0.7, 0.7]));

        let mut rng = crate::rng::seeded(8);
        let map = Array::from_shape_fn((4, 7), |_| rng.random_range(-3.0..3.0));
        let (p, a) = max_pool_over_time(map.view());
        for f in 0..4 {
            let mut best = f64::NEG_INFINITY;
            for i in 0..7 {
                best = best.max(map[[f, i]]);
            }
            assert_eq!(p[f], best);
            assert_eq!(map[[f, a[f]]], best);
        }
    }

    #[test]
    fn softmax_normalizes() {
        let mut row = arr1(&[1000.0, 1001.0, 999.0f64]);
        softmax_in_place(row.view_mut());
        assert!((row.sum() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&p| p >= 0.0));
        assert!(row[1] > row[0] && row[0] > row[2]);
    }
}
