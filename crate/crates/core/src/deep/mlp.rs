//! Fully connected network with tanh hidden layers and a linear output,
//! parameters stored in one flat vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T> {
    dims: Vec<usize>,
    /// Layer `l` occupies `W_l` (row-major, `dims[l+1] × dims[l]`) then `b_l`.
    params: Vec<T>,
}

/// Activations kept by [`Mlp::forward_cached`] for the backward pass.
#[derive(Clone, Debug)]
pub struct Cache<T> {
    /// `acts[0]` is the input, `acts[l]` the post-activation of layer `l`.
    acts: Vec<Vec<T>>,
}

impl<T> Cache<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn n_params(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl<T: Scalar> Mlp<T> {
    /// `dims = [input, hidden.., output]`; weights and biases drawn from
    /// `U[−1/√fan_in, 1/√fan_in]`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        let mut off = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[off..off + w[1] * w[0] + w[1]] {
                *p = T::lit(rng.random_range(-bound..=bound));
            }
            off += w[1] * w[0] + w[1];
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::contract("network needs at least two non-empty layers"));
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            params: vec![T::zero(); n_params(dims)],
        })
    }

    pub fn from_params(dims: &[usize], params: Vec<T>) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        if params.len() != net.params.len() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(x)?.acts.pop().unwrap())
    }

    pub fn forward_cached(&self, x: &[T]) -> Result<Cache<T>> {
        if x.len() != self.dims[0] {
            return Err(Error::contract(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.dims[0]
            )));
        }
        let layers = self.dims.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[off..off + n_out * n_in];
            let b = &self.params[off + n_out * n_in..off + n_out * n_in + n_out];
            let input = &acts[l];
            let mut out: Vec<T> = (0..n_out)
                .map(|o| {
                    w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(input)
                        .fold(b[o], |acc, (&wi, &xi)| acc + wi * xi)
                })
                .collect();
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
            off += n_out * n_in + n_out;
        }
        if acts[layers].iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch: 0,
                detail: "non-finite network output".into(),
            });
        }
        Ok(Cache { acts })
    }

    /// Accumulates `∂L/∂params` into `grad` and returns `∂L/∂input`, given
    /// `∂L/∂output`.
    pub fn backward(&self, cache: &Cache<T>, grad_out: &[T], grad: &mut [T]) -> Vec<T> {
        assert_eq!(grad.len(), self.params.len(), "gradient buffer length");
        self.backprop(cache, grad_out, Some(grad))
    }

    /// `∂L/∂input` alone.
    pub fn input_gradient(&self, cache: &Cache<T>, grad_out: &[T]) -> Vec<T> {
        self.backprop(cache, grad_out, None)
    }

    fn backprop(&self, cache: &Cache<T>, grad_out: &[T], mut grad: Option<&mut [T]>) -> Vec<T> {
        assert_eq!(grad_out.len(), self.output_dim(), "output gradient length");
        let layers = self.dims.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.dims.windows(2) {
            offsets.push(off);
            off += w[1] * w[0] + w[1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            if l + 1 < layers {
                // tanh' = 1 − tanh².
                for (d, &a) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= T::one() - a * a;
                }
            }
            let off = offsets[l];
            let input = &cache.acts[l];
            let w = &self.params[off..off + n_out * n_in];
            if let Some(grad) = grad.as_deref_mut() {
                for o in 0..n_out {
                    let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                    for (g, &xi) in row.iter_mut().zip(input) {
                        *g += delta[o] * xi;
                    }
                    grad[off + n_out * n_in + o] += delta[o];
                }
            }
            let mut prev = vec![T::zero(); n_in];
            for o in 0..n_out {
                for (p, &wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += wi * delta[o];
                }
            }
            delta = prev;
        }
        delta
    }

    /// `θ ← θ − lr · g`.
    pub fn descend(&mut self, grad: &[T], lr: T) {
        for (p, &g) in self.params.iter_mut().zip(grad) {
            *p -= lr * g;
        }
    }

    /// `θ' ← (1 − ρ) θ' + ρ θ`.
    pub fn soft_update(&mut self, source: &Mlp<T>, rho: T) -> Result<()> {
        if source.dims != self.dims {
            return Err(Error::contract("soft update between different architectures"));
        }
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = (T::one() - rho) * *t + rho * s;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        crate::scalar::all_finite(&self.params)
    }
}

pub fn l2_norm<T: Scalar>(xs: &[T]) -> T {
    xs.iter().map(|&x| x * x).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::<f64>::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(net.forward(&[0.3, -2.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let net = Mlp::<f64>::from_params(&[2, 2], vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5]).unwrap();
        let x = [0.7, -1.1];
        let cache = net.forward_cached(&x).unwrap();
        assert_eq!(cache.output(), &[1.0 * 0.7 - 2.0 * 1.1 + 0.5, 3.0 * 0.7 - 4.0 * 1.1 - 0.5]);
        let mut g = vec![0.0; 6];
        let gin = net.backward(&cache, &[1.0, 2.0], &mut g);
        assert_eq!(g, vec![0.7, -1.1, 1.4, -2.2, 1.0, 2.0]);
        assert_eq!(gin, vec![1.0 + 6.0, 2.0 + 8.0]);
    }

    #[test]
    fn parameter_count_matches_layout() {
        let mut r = rng::stream(0, rng::NETWORK_INIT);
        let net = Mlp::<f64>::new(&[5, 32, 32, 1], &mut r).unwrap();
        assert_eq!(net.n_params(), 5 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
        let bound = 1.0 / 5f64.sqrt();
        assert!(net.params()[..5 * 32].iter().all(|p| p.abs() <= bound));
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let net = Mlp::<f64>::zeros(&[3, 1]).unwrap();
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn nan_input_signals_divergence() {
        let net = Mlp::<f64>::from_params(&[1, 1], vec![1.0, 0.0]).unwrap();
        assert!(matches!(net.forward(&[f64::NAN]), Err(Error::Divergence { .. })));
    }

    #[test]
    fn soft_update_interpolates() {
        let mut t = Mlp::<f64>::from_params(&[1, 1], vec![0.0, 4.0]).unwrap();
        let s = Mlp::<f64>::from_params(&[1, 1], vec![2.0, 0.0]).unwrap();
        t.soft_update(&s, 0.25).unwrap();
        assert_eq!(t.params(), &[0.5, 3.0]);
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut r = rng::stream(11, rng::NETWORK_INIT);
        let net = Mlp::<f64>::new(&[3, 6, 4, 2], &mut r).unwrap();
        let x = [0.4, -0.9, 0.2];
        let w = [0.7, -1.3];
        let loss = |n: &Mlp<f64>, x: &[f64]| {
            let y = n.forward(x).unwrap();
            y[0] * w[0] + y[1] * w[1]
        };
        let cache = net.forward_cached(&x).unwrap();
        let mut g = vec![0.0; net.n_params()];
        let gx = net.backward(&cache, &w, &mut g);
        let h = 1e-5;
        for k in 0..net.n_params() {
            let (mut p, mut m) = (net.clone(), net.clone());
            p.params_mut()[k] += h;
            m.params_mut()[k] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-7 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", g[k]);
        }
        for k in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
            assert!((fd - gx[k]).abs() <= 1e-7 * (1.0 + fd.abs()));
        }
        assert_eq!(net.input_gradient(&cache, &w), gx);
    }
}
