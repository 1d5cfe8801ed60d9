use super::network::{Dense, Gradients, QNetwork};
use crate::scalar::Scalar;

/// One RMSProp update over flat slices:
/// `v = rho v + (1 - rho) g^2`, `theta -= lr g / (sqrt(v) + delta)`.
pub fn rmsprop_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    mean_square: &mut [T],
    learning_rate: T,
    rho: T,
    delta: T,
) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), mean_square.len());
    let keep = T::one() - rho;
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(mean_square.iter_mut()) {
        *v = rho * *v + keep * g * g;
        *p -= learning_rate * g / (v.sqrt() + delta);
    }
}

/// RMSProp state for a whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp<T> {
    pub learning_rate: T,
    pub rho: T,
    pub delta: T,
    mean_square: Vec<Dense<T>>,
}

impl<T: Scalar> RmsProp<T> {
    pub fn new(net: &QNetwork<T>, learning_rate: T, rho: T, delta: T) -> Self {
        let mean_square = net
            .layers()
            .iter()
            .map(|l| Dense::zeros(l.fan_in(), l.fan_out()))
            .collect();
        Self {
            learning_rate,
            rho,
            delta,
            mean_square,
        }
    }

    pub fn step(&mut self, net: &mut QNetwork<T>, grads: &Gradients<T>) {
        let (lr, rho, delta) = (self.learning_rate, self.rho, self.delta);
        for ((layer, g), v) in net
            .layers_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.mean_square)
        {
            rmsprop_step(
                layer.weights.as_slice_mut().expect("standard layout"),
                g.weights.as_slice().expect("standard layout"),
                v.weights.as_slice_mut().expect("standard layout"),
                lr,
                rho,
                delta,
            );
            rmsprop_step(
                layer.bias.as_slice_mut().expect("standard layout"),
                g.bias.as_slice().expect("standard layout"),
                v.bias.as_slice_mut().expect("standard layout"),
                lr,
                rho,
                delta,
            );
        }
    }
}
