use super::scalar::{gemm, Mat};
use super::Scalar;
use crate::error::{Error, Result};
use crate::rng::{unit, WizRng};

/// Fully connected network: ReLU hidden layers and a linear output layer.
///
/// All parameters live in one flat buffer. Layer `l` contributes its weight
/// matrix (`out × in`, row-major) followed by its bias, so optimizers and
/// checkpoints can treat a network as a single vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet<F> {
    sizes: Vec<usize>,
    params: Vec<F>,
}

/// Activations of a batched forward pass, needed by [`DenseNet::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache<F> {
    sizes: Vec<usize>,
    batch: usize,
    /// `activations[0]` is the input; the last entry is the network output.
    activations: Vec<Vec<F>>,
}

impl<F: Scalar> ForwardCache<F> {
    pub fn output(&self) -> &[F] {
        self.activations.last().expect("non-empty")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

#[derive(Clone, Debug)]
pub struct DenseGradients<F> {
    /// Same layout as [`DenseNet::params`].
    pub params: Vec<F>,
    pub input: Option<Vec<F>>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl<F: Scalar> DenseNet<F> {
    /// Zero-initialised network with layer widths `sizes` (input first).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::shape(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(DenseNet { sizes: sizes.to_vec(), params: vec![F::zero(); param_count(sizes)] })
    }

    /// He-uniform weights for ReLU layers, fan-in uniform for the output
    /// layer, zero biases.
    pub fn init(sizes: &[usize], rng: &mut WizRng) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let layers = net.num_layers();
        for l in 0..layers {
            let fan_in = net.sizes[l] as f64;
            let limit = if l + 1 < layers { (6.0 / fan_in).sqrt() } else { (3.0 / fan_in).sqrt() };
            let (w, _) = net.layer_mut(l);
            for x in w.iter_mut() {
                *x = F::from_f64((2.0 * unit(rng) - 1.0) * limit);
            }
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<F>) -> Result<Self> {
        let net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::shape(format!(
                "layer sizes {sizes:?} need {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        Ok(DenseNet { params, ..net })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    fn offset(&self, layer: usize) -> usize {
        param_count(&self.sizes[..=layer])
    }

    /// Weights (`out × in`) and bias of layer `layer`.
    pub fn layer(&self, layer: usize) -> (&[F], &[F]) {
        let (inp, out) = (self.sizes[layer], self.sizes[layer + 1]);
        let start = self.offset(layer);
        let (w, b) = self.params[start..start + out * inp + out].split_at(out * inp);
        (w, b)
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut [F], &mut [F]) {
        let (inp, out) = (self.sizes[layer], self.sizes[layer + 1]);
        let start = self.offset(layer);
        self.params[start..start + out * inp + out].split_at_mut(out * inp)
    }

    fn check_input(&self, input: &[F], batch: usize) -> Result<()> {
        if batch == 0 || input.len() != batch * self.input_dim() {
            return Err(Error::shape(format!(
                "input of {} values is not a batch of {batch} × {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn affine(&self, layer: usize, input: &[F], batch: usize, out: &mut Vec<F>) {
        let (inp, width) = (self.sizes[layer], self.sizes[layer + 1]);
        let (w, b) = self.layer(layer);
        out.clear();
        for _ in 0..batch {
            out.extend_from_slice(b);
        }
        gemm(Mat::new(input, batch, inp), Mat::new(w, width, inp).t(), F::one(), out);
        if layer + 1 < self.num_layers() {
            for x in out.iter_mut() {
                if *x < F::zero() {
                    *x = F::zero();
                }
            }
        }
    }

    /// Batched inference; `input` is `batch × input_dim`, row-major.
    pub fn forward(&self, input: &[F], batch: usize) -> Result<Vec<F>> {
        self.check_input(input, batch)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for l in 0..self.num_layers() {
            self.affine(l, &cur, batch, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass that keeps every activation for backpropagation.
    pub fn forward_train(&self, input: &[F], batch: usize) -> Result<ForwardCache<F>> {
        self.check_input(input, batch)?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        for l in 0..self.num_layers() {
            let mut out = Vec::new();
            self.affine(l, &activations[l], batch, &mut out);
            activations.push(out);
        }
        Ok(ForwardCache { sizes: self.sizes.clone(), batch, activations })
    }

    /// Reverse-mode gradients for the loss whose output gradient is `grad_out`.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        grad_out: &[F],
        want_input_grad: bool,
    ) -> Result<DenseGradients<F>> {
        if cache.sizes != self.sizes {
            return Err(Error::shape("forward cache belongs to a different architecture"));
        }
        let batch = cache.batch;
        if grad_out.len() != batch * self.output_dim() {
            return Err(Error::shape(format!(
                "output gradient of {} values, expected {batch} × {}",
                grad_out.len(),
                self.output_dim()
            )));
        }
        let mut grads = vec![F::zero(); self.params.len()];
        let mut delta = grad_out.to_vec();
        let mut input_grad = None;
        for l in (0..self.num_layers()).rev() {
            let (inp, out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < self.num_layers() {
                for (d, a) in delta.iter_mut().zip(&cache.activations[l + 1]) {
                    if *a <= F::zero() {
                        *d = F::zero();
                    }
                }
            }
            let start = self.offset(l);
            let (gw, gb) = grads[start..start + out * inp + out].split_at_mut(out * inp);
            gemm(Mat::new(&delta, batch, out).t(), Mat::new(&cache.activations[l], batch, inp), F::zero(), gw);
            for row in delta.chunks_exact(out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g = *g + *d;
                }
            }
            if l > 0 || want_input_grad {
                let (w, _) = self.layer(l);
                let mut prev = vec![F::zero(); batch * inp];
                gemm(Mat::new(&delta, batch, out), Mat::new(w, out, inp), F::zero(), &mut prev);
                if l == 0 {
                    input_grad = Some(prev);
                    break;
                }
                delta = prev;
            }
        }
        Ok(DenseGradients { params: grads, input: input_grad })
    }

    /// `self ← (1 − tau) · self + tau · online`.
    pub fn blend_from(&mut self, online: &DenseNet<F>, tau: F) -> Result<()> {
        if self.sizes != online.sizes {
            return Err(Error::shape("blending networks of different architecture"));
        }
        blend_parameters(&mut self.params, &online.params, tau)
    }

    pub fn cast<G: Scalar>(&self) -> DenseNet<G> {
        DenseNet { sizes: self.sizes.clone(), params: self.params.iter().map(|x| G::from_f64(x.as_f64())).collect() }
    }
}

/// Soft target update, elementwise `target ← (1 − tau) · target + tau · online`.
///
/// Evaluated as `target + tau · (online − target)` so equal inputs stay exact.
pub fn blend_parameters<F: Scalar>(target: &mut [F], online: &[F], tau: F) -> Result<()> {
    if target.len() != online.len() {
        return Err(Error::shape(format!("blend of {} and {} parameters", target.len(), online.len())));
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = *t + tau * (*o - *t);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_net_gives_zero_output() {
        let net = DenseNet::<f32>::zeros(&[4, 3, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5], 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net = DenseNet::<f64>::zeros(&[3, 3]).unwrap();
        let (w, _) = net.layer_mut(0);
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        assert_eq!(net.forward(&[0.5, -1.0, 2.0], 1).unwrap(), vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn hand_computed_two_two_one() {
        // h = relu([[1, -1], [0.5, 2]] x + [0, -1]); y = [2, -3] h + 0.5
        // x = [1, 2]: pre = [-1, 3.5] -> h = [0, 3.5] -> y = -10.5 + 0.5 = -10
        let net = DenseNet::<f64>::from_params(&[2, 2, 1], vec![1.0, -1.0, 0.5, 2.0, 0.0, -1.0, 2.0, -3.0, 0.5])
            .unwrap();
        assert_eq!(net.forward(&[1.0, 2.0], 1).unwrap(), vec![-10.0]);
        // x = [3, 1]: pre = [2, 2.5] -> y = 4 - 7.5 + 0.5 = -3
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 1.0], 2).unwrap(), vec![-10.0, -3.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = DenseNet::<f32>::zeros(&[4, 2]).unwrap();
        assert!(net.forward(&[1.0; 3], 1).is_err());
        let other = DenseNet::<f32>::zeros(&[4, 3, 2]).unwrap();
        let cache = other.forward_train(&[0.0; 4], 1).unwrap();
        assert!(net.backward(&cache, &[0.0; 2], false).is_err());
        assert!(DenseNet::<f32>::from_params(&[2, 2], vec![0.0; 5]).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let net = DenseNet::<f64>::init(&[5, 8, 3], &mut seeded(1)).unwrap();
        let cache = net.forward_train(&[0.1, 0.2, -0.3, 0.4, 0.5], 1).unwrap();
        let g = net.backward(&cache, &[0.0; 3], true).unwrap();
        assert!(g.params.iter().all(|&x| x == 0.0));
        assert!(g.input.unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dead_relu_unit_has_zero_weight_gradient() {
        // Hidden unit 1 has a large negative bias and never activates.
        let mut net = DenseNet::<f64>::init(&[3, 2, 1], &mut seeded(2)).unwrap();
        net.layer_mut(0).1[1] = -100.0;
        let cache = net.forward_train(&[0.3, -0.2, 0.9], 1).unwrap();
        let g = net.backward(&cache, &[1.0], false).unwrap();
        assert!(g.params[3..6].iter().all(|&x| x == 0.0));
        assert_eq!(g.params[7], 0.0);
    }

    #[test]
    fn blend_cases() {
        let online = vec![1.0f64; 4];
        let mut target = vec![0.0f64; 4];
        blend_parameters(&mut target, &online, 0.1).unwrap();
        assert!(target.iter().all(|&x| (x - 0.1).abs() < 1e-15));
        for _ in 1..10 {
            blend_parameters(&mut target, &online, 0.1).unwrap();
        }
        let want = 1.0 - 0.9f64.powi(10);
        assert!(target.iter().all(|&x| (x - want).abs() < 1e-12));
        assert!((want - 0.651).abs() < 1e-3);
        let mut same = online.clone();
        blend_parameters(&mut same, &online, 0.1).unwrap();
        assert_eq!(same, online);
        assert!(blend_parameters(&mut target, &[1.0], 0.1).is_err());
    }
}
