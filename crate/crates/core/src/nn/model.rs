use std::io::{Read, Write};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng as _;

use super::layers::{softmax_in_place, window_responses};
use super::params::TENSOR_NAMES;
use super::{CnnConfig, CnnParams, Mode, Scalar, LOG_CLAMP};
use crate::embeddings::SentenceMatrix;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

pub const MODEL_MAGIC: &[u8; 8] = b"ADRCCNN1";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<T = f64> {
    pub config: CnnConfig,
    pub params: CnnParams<T>,
}

/// Activations of one forward pass over a batch, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace<'a, T> {
    inputs: Vec<&'a SentenceMatrix<T>>,
    /// `(B, F)` max-over-time of the rectified filter responses.
    pooled: Array2<T>,
    /// Window index attaining each pooled value, `B·F` row-major.
    argmax: Vec<usize>,
    /// Post-ReLU, pre-dropout activations and their dropout scale masks.
    h1: Array2<T>,
    mask1: Option<Array2<T>>,
    h1_out: Array2<T>,
    h2: Array2<T>,
    mask2: Option<Array2<T>>,
    h2_out: Array2<T>,
    /// `(B, classes)` softmax outputs.
    probs: Array2<T>,
}

impl<T: Scalar> ForwardTrace<'_, T> {
    pub fn probabilities(&self) -> &Array2<T> {
        &self.probs
    }

    pub fn batch_len(&self) -> usize {
        self.probs.nrows()
    }

    pub fn pooled(&self) -> &Array2<T> {
        &self.pooled
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }

    /// Index of the most probable class for each batch row (lowest index on ties).
    pub fn predictions(&self) -> Vec<usize> {
        self.probs
            .rows()
            .into_iter()
            .map(|r| argmax_row(r.iter().copied()))
            .collect()
    }
}

pub(crate) fn argmax_row<T: PartialOrd + Copy>(row: impl Iterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in row.enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i).unwrap_or(0)
}

fn dropout_mask<T: Scalar>(rows: usize, cols: usize, rate: f64, rng: &mut rng::Rng) -> Array2<T> {
    let keep = 1.0 - rate;
    let scale = T::of(1.0 / keep);
    Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < keep {
            scale
        } else {
            T::zero()
        }
    })
}

fn dense<T: Scalar>(x: &Array2<T>, w: &Array2<T>, b: &Array1<T>, relu: bool) -> Array2<T> {
    let mut z = Array2::zeros((x.nrows(), w.ncols()));
    general_mat_mul(T::one(), x, w, T::zero(), &mut z);
    for mut row in z.rows_mut() {
        row.zip_mut_with(b, |v, &bias| {
            *v = *v + bias;
            if relu {
                *v = v.max(T::zero());
            }
        });
    }
    z
}

impl<T: Scalar> CnnModel<T> {
    /// Glorot-initialized model seeded by `config.seed`.
    pub fn new(config: CnnConfig) -> Result<Self> {
        config.validate()?;
        let params = CnnParams::glorot(&config, config.seed);
        Ok(CnnModel { config, params })
    }

    pub fn from_parts(config: CnnConfig, params: CnnParams<T>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.parameter_count()
            || params.conv_w.dim()
                != (
                    config.filter_count,
                    config.filter_width,
                    config.embedding_dim,
                )
        {
            return Err(Error::InvalidConfig(
                "parameter shapes disagree with config".into(),
            ));
        }
        Ok(CnnModel { config, params })
    }

    /// Forward pass over one sentence.
    pub fn forward<'a>(
        &self,
        m: &'a SentenceMatrix<T>,
        mode: Mode,
        rng_seed: u64,
    ) -> Result<ForwardTrace<'a, T>> {
        self.forward_batch(&[m], mode, rng_seed)
    }

    /// Forward pass over a batch. Dropout masks (train mode only) are drawn
    /// from a generator seeded by `rng_seed`.
    pub fn forward_batch<'a>(
        &self,
        inputs: &[&'a SentenceMatrix<T>],
        mode: Mode,
        rng_seed: u64,
    ) -> Result<ForwardTrace<'a, T>> {
        let c = &self.config;
        let p = &self.params;
        let batch = inputs.len();
        let filters = p.conv_matrix();

        let mut pooled = Array2::zeros((batch, c.filter_count));
        let mut argmax = vec![0usize; batch * c.filter_count];
        for (b, m) in inputs.iter().enumerate() {
            if m.dim() != c.embedding_dim {
                return Err(Error::DimensionMismatch {
                    expected: c.embedding_dim,
                    got: m.dim(),
                });
            }
            let responses = window_responses(m, filters)?;
            let arg = &mut argmax[b * c.filter_count..(b + 1) * c.filter_count];
            let mut best = responses.row(0).to_owned();
            for (i, row) in responses.rows().into_iter().enumerate().skip(1) {
                for ((bv, a), &v) in best.iter_mut().zip(arg.iter_mut()).zip(row.iter()) {
                    if v > *bv {
                        *bv = v;
                        *a = i;
                    }
                }
            }
            // max_i ReLU(r_i + b) = ReLU(max_i r_i + b)
            Zip::from(pooled.row_mut(b))
                .and(&best)
                .and(&p.conv_b)
                .for_each(|o, &r, &bias| *o = (r + bias).max(T::zero()));
        }

        let dropout = mode == Mode::Train && c.dropout_rate > 0.0;
        let mut drng = rng::seeded(rng::derive_seed(rng_seed, stream::DROPOUT));

        let h1 = dense(&pooled, &p.fc1_w, &p.fc1_b, true);
        let mask1 = dropout.then(|| dropout_mask(batch, c.fc1_units, c.dropout_rate, &mut drng));
        let h1_out = match &mask1 {
            Some(m) => &h1 * m,
            None => h1.clone(),
        };
        let h2 = dense(&h1_out, &p.fc2_w, &p.fc2_b, true);
        let mask2 = dropout.then(|| dropout_mask(batch, c.fc2_units, c.dropout_rate, &mut drng));
        let h2_out = match &mask2 {
            Some(m) => &h2 * m,
            None => h2.clone(),
        };
        let mut probs = dense(&h2_out, &p.out_w, &p.out_b, false);
        for row in probs.rows_mut() {
            softmax_in_place(row);
        }

        Ok(ForwardTrace {
            inputs: inputs.to_vec(),
            pooled,
            argmax,
            h1,
            mask1,
            h1_out,
            h2,
            mask2,
            h2_out,
            probs,
        })
    }

    /// Cross-entropy of one example plus `(λ/2)·Σ w²` over weight matrices.
    pub fn loss(&self, trace: &ForwardTrace<'_, T>, label: usize) -> f64 {
        self.batch_loss(trace, &[label])
    }

    /// Mean cross-entropy over the batch plus the l2 penalty.
    pub fn batch_loss(&self, trace: &ForwardTrace<'_, T>, labels: &[usize]) -> f64 {
        assert_eq!(labels.len(), trace.batch_len());
        let ce: f64 = labels
            .iter()
            .enumerate()
            .map(|(b, &y)| -trace.probs[[b, y]].as_f64().max(LOG_CLAMP).ln())
            .sum::<f64>()
            / labels.len() as f64;
        ce + 0.5 * self.config.l2_coefficient * self.params.weight_sq_norm()
    }

    /// Gradient of [`CnnModel::batch_loss`] with respect to every parameter,
    /// reusing the trace's dropout masks and pooling positions.
    pub fn backward(&self, trace: &ForwardTrace<'_, T>, labels: &[usize]) -> CnnParams<T> {
        let c = &self.config;
        let p = &self.params;
        let batch = trace.batch_len();
        assert_eq!(labels.len(), batch);
        let inv_b = T::of(1.0 / batch as f64);
        let lambda = T::of(c.l2_coefficient);
        let mut g = p.zeros_like();

        // softmax + cross-entropy: dz = (p - onehot) / B
        let mut dz3 = trace.probs.clone();
        for (b, &y) in labels.iter().enumerate() {
            dz3[[b, y]] = dz3[[b, y]] - T::one();
        }
        dz3.mapv_inplace(|v| v * inv_b);

        general_mat_mul(T::one(), &trace.h2_out.t(), &dz3, T::zero(), &mut g.out_w);
        g.out_b = dz3.sum_axis(Axis(0));

        let dz2 = relu_dropout_backward(&dz3, &p.out_w, &trace.h2, trace.mask2.as_ref());
        general_mat_mul(T::one(), &trace.h1_out.t(), &dz2, T::zero(), &mut g.fc2_w);
        g.fc2_b = dz2.sum_axis(Axis(0));

        let dz1 = relu_dropout_backward(&dz2, &p.fc2_w, &trace.h1, trace.mask1.as_ref());
        general_mat_mul(T::one(), &trace.pooled.t(), &dz1, T::zero(), &mut g.fc1_w);
        g.fc1_b = dz1.sum_axis(Axis(0));

        let mut dpooled = Array2::zeros((batch, c.filter_count));
        general_mat_mul(T::one(), &dz1, &p.fc1_w.t(), T::zero(), &mut dpooled);

        // Max-over-time routes each pooled gradient to its argmax window only.
        let width = c.filter_width;
        let mut gconv = Array2::zeros((c.filter_count, width * c.embedding_dim));
        for (b, m) in trace.inputs.iter().enumerate() {
            for f in 0..c.filter_count {
                if trace.pooled[[b, f]] <= T::zero() {
                    continue;
                }
                let gf = dpooled[[b, f]];
                g.conv_b[f] = g.conv_b[f] + gf;
                let window = m.window(trace.argmax[b * c.filter_count + f], width);
                for (w, &x) in gconv.row_mut(f).iter_mut().zip(window) {
                    *w = *w + gf * x;
                }
            }
        }
        g.conv_matrix_mut().assign(&gconv);

        if lambda > T::zero() {
            g.conv_w.scaled_add(lambda, &p.conv_w);
            g.fc1_w.scaled_add(lambda, &p.fc1_w);
            g.fc2_w.scaled_add(lambda, &p.fc2_w);
            g.out_w.scaled_add(lambda, &p.out_w);
        }
        g
    }

    /// Class probabilities in inference mode, one row per input.
    pub fn predict_proba(&self, inputs: &[&SentenceMatrix<T>]) -> Result<Array2<T>> {
        const CHUNK: usize = 64;
        let mut out = Array2::zeros((inputs.len(), self.config.class_count));
        for (i, chunk) in inputs.chunks(CHUNK).enumerate() {
            let trace = self.forward_batch(chunk, Mode::Infer, 0)?;
            out.slice_mut(ndarray::s![i * CHUNK..i * CHUNK + chunk.len(), ..])
                .assign(&trace.probs);
        }
        Ok(out)
    }

    pub fn predict(&self, m: &SentenceMatrix<T>) -> Result<usize> {
        Ok(self.forward(m, Mode::Infer, 0)?.predictions()[0])
    }

    pub fn cast<U: Scalar>(&self) -> CnnModel<U> {
        CnnModel {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    /// Self-describing binary: magic, version, the full config, then each
    /// tensor in declaration order as an element count followed by
    /// little-endian `f64` values.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let c = &self.config;
        let mut buf = Vec::with_capacity(128 + 8 * (c.parameter_count() + 8));
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        for v in [
            c.filter_count,
            c.filter_width,
            c.embedding_dim,
            c.fc1_units,
            c.fc2_units,
        ] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        buf.extend_from_slice(&c.dropout_rate.to_le_bytes());
        buf.extend_from_slice(&(c.class_count as u64).to_le_bytes());
        buf.extend_from_slice(&c.l2_coefficient.to_le_bytes());
        buf.extend_from_slice(&c.learning_rate.to_le_bytes());
        buf.extend_from_slice(&(c.iterations as u64).to_le_bytes());
        buf.extend_from_slice(&(c.batch_size as u64).to_le_bytes());
        buf.extend_from_slice(&c.seed.to_le_bytes());
        for tensor in self.params.tensors() {
            buf.extend_from_slice(&(tensor.len() as u64).to_le_bytes());
            for x in tensor {
                buf.extend_from_slice(&x.as_f64().to_le_bytes());
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut raw = Vec::new();
        input.read_to_end(&mut raw)?;
        let mut r = ByteReader { buf: &raw, pos: 0 };
        if r.take(8)? != MODEL_MAGIC {
            return Err(Error::format("model", "bad magic"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::format(
                "model",
                format!("unsupported version {version}"),
            ));
        }
        let config = CnnConfig {
            filter_count: r.usize()?,
            filter_width: r.usize()?,
            embedding_dim: r.usize()?,
            fc1_units: r.usize()?,
            fc2_units: r.usize()?,
            dropout_rate: r.f64()?,
            class_count: r.usize()?,
            l2_coefficient: r.f64()?,
            learning_rate: r.f64()?,
            iterations: r.usize()?,
            batch_size: r.usize()?,
            seed: r.u64()?,
        };
        config
            .validate()
            .map_err(|e| Error::format("model", format!("embedded config: {e}")))?;
        let mut params = CnnParams::<T>::zeros(&config);
        for (name, tensor) in TENSOR_NAMES.iter().zip(params.tensors_mut()) {
            let n = r.usize()?;
            if n != tensor.len() {
                return Err(Error::format(
                    "model",
                    format!("{name} holds {n} values, config implies {}", tensor.len()),
                ));
            }
            for x in tensor.iter_mut() {
                *x = T::of(r.f64()?);
            }
        }
        if r.pos != raw.len() {
            return Err(Error::format("model", "trailing bytes after last tensor"));
        }
        Ok(CnnModel { config, params })
    }
}

fn relu_dropout_backward<T: Scalar>(
    upstream: &Array2<T>,
    weights: &Array2<T>,
    activation: &Array2<T>,
    mask: Option<&Array2<T>>,
) -> Array2<T> {
    let mut d = Array2::zeros((upstream.nrows(), weights.nrows()));
    general_mat_mul(T::one(), upstream, &weights.t(), T::zero(), &mut d);
    match mask {
        Some(m) => Zip::from(&mut d)
            .and(m)
            .and(activation)
            .for_each(|g, &s, &a| {
                *g = if a > T::zero() { *g * s } else { T::zero() };
            }),
        None => Zip::from(&mut d).and(activation).for_each(|g, &a| {
            if a <= T::zero() {
                *g = T::zero();
            }
        }),
    }
    d
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::format("model", "truncated file"));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::format("model", "size overflow"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
