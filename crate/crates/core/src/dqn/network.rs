use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::DqnError;
use crate::scalar::Scalar;

/// Fully connected layer, `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Per-layer parameter gradients, shaped like the network.
pub type Gradients<T> = Vec<Dense<T>>;

/// Feed-forward Q-network: ReLU hidden layers and a linear head with one
/// output per flat action.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<T> {
    layers: Vec<Dense<T>>,
}

impl<T: Scalar> QNetwork<T> {
    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, DqnError> {
        let mut net = Self::zeros(sizes)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.fan_in() as f64).sqrt();
            layer
                .weights
                .mapv_inplace(|_| T::of(rng.random_range(-bound..=bound)));
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self, DqnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(DqnError::BadArchitecture(sizes.to_vec()));
        }
        Ok(Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self, DqnError> {
        let ok = !layers.is_empty()
            && layers.iter().all(|l| l.bias.len() == l.fan_out())
            && layers.windows(2).all(|w| w[0].fan_out() == w[1].fan_in());
        if !ok {
            let sizes = layers.iter().map(|l| l.fan_out()).collect();
            return Err(DqnError::BadArchitecture(sizes));
        }
        Ok(Self { layers })
    }

    /// Input width followed by every layer's output width.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::fan_out))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    /// Overwrites all parameters with `other`'s (target sync).
    pub fn copy_from(&mut self, other: &Self) {
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.weights.assign(&src.weights);
            dst.bias.assign(&src.bias);
        }
    }

    /// Q-values of a single state.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, DqnError> {
        if input.len() != self.input_dim() {
            return Err(DqnError::InputDim {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut act = Array1::from(input.to_vec());
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            act = layer.weights.dot(&act) + &layer.bias;
            if idx < last {
                act.mapv_inplace(relu);
            }
        }
        Ok(act.to_vec())
    }

    /// Q-values of a batch, one state per row.
    pub fn forward_batch(&self, batch: ArrayView2<T>) -> Result<Array2<T>, DqnError> {
        self.check_batch(&batch)?;
        let last = self.layers.len() - 1;
        let mut act = batch.to_owned();
        for (idx, layer) in self.layers.iter().enumerate() {
            act = act.dot(&layer.weights.t()) + &layer.bias;
            if idx < last {
                act.mapv_inplace(relu);
            }
        }
        Ok(act)
    }

    fn check_batch(&self, batch: &ArrayView2<T>) -> Result<(), DqnError> {
        if batch.ncols() != self.input_dim() {
            return Err(DqnError::InputDim {
                expected: self.input_dim(),
                got: batch.ncols(),
            });
        }
        if batch.nrows() == 0 {
            return Err(DqnError::EmptyBatch);
        }
        Ok(())
    }

    /// Mean squared TD error over the batch, restricted to each sample's
    /// taken action, and its gradient. Targets are constants.
    pub fn loss_and_gradients(
        &self,
        states: ArrayView2<T>,
        actions: &[usize],
        targets: &[T],
    ) -> Result<(T, Gradients<T>), DqnError> {
        self.check_batch(&states)?;
        let b = states.nrows();
        if actions.len() != b || targets.len() != b {
            return Err(DqnError::BatchShape {
                states: b,
                actions: actions.len(),
                targets: targets.len(),
            });
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.output_dim()) {
            return Err(DqnError::ActionOutOfRange {
                action: a,
                num_actions: self.output_dim(),
            });
        }

        // Forward pass keeping every layer's input and pre-activation.
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = states.to_owned();
        for (idx, layer) in self.layers.iter().enumerate() {
            let z = act.dot(&layer.weights.t()) + &layer.bias;
            inputs.push(act);
            act = if idx < last { z.mapv(relu) } else { z.clone() };
            pre.push(z);
        }

        let scale = T::of(2.0) / T::of(b as f64);
        let mut loss = T::zero();
        let mut delta = Array2::<T>::zeros(act.raw_dim());
        for (row, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let err = act[[row, a]] - y;
            loss += err * err;
            delta[[row, a]] = scale * err;
        }
        loss /= T::of(b as f64);

        let mut grads: Vec<Dense<T>> = Vec::with_capacity(self.layers.len());
        for idx in (0..self.layers.len()).rev() {
            if idx < last {
                delta.zip_mut_with(&pre[idx], |d, &z| {
                    if z <= T::zero() {
                        *d = T::zero();
                    }
                });
            }
            let weights = delta.t().dot(&inputs[idx]);
            let bias = delta.sum_axis(Axis(0));
            if idx > 0 {
                delta = delta.dot(&self.layers[idx].weights);
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok((loss, grads))
    }
}

#[inline]
fn relu<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}
