//! Small fully connected networks with hand-written backpropagation that
//! produces **per-example** parameter gradients.
//!
//! Ordinary reverse-mode autodiff sums gradients over the batch before
//! anyone can see them; per-example clipping needs the individual
//! contributions, so the backward pass here materializes one flattened
//! gradient vector per batch row. Parameters flatten in a fixed order —
//! for each layer in sequence, the weight matrix row-major, then the bias —
//! and [`FlatView`] describes that layout so external code can slice a flat
//! vector back into layers.
//!
//! Conventions that matter for reproducibility and for finite-difference
//! validation:
//! - `relu` derivative at exactly zero is 0 (the subgradient choice is
//!   pinned, not left to chance);
//! - `tanh` derivative is computed from the stored activation as
//!   `1 - a^2`;
//! - all contractions run through [`Matrix`] products with their pinned
//!   left-to-right accumulation, so batch composition never changes an
//!   individual example's gradient bits.

use crate::error::{Error, Result};
use crate::ndnum::{Matrix, RngStream};

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    /// No nonlinearity; the conventional choice for a critic's output layer.
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative given pre-activation `z` and post-activation `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }
}

/// One fully connected layer: `a = activation(W x + b)` with `W` stored as
/// `out x in` (each row feeds one output unit).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weight: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::Shape(format!(
                "weight has {} output rows but bias has {} entries",
                weight.rows(),
                bias.len()
            )));
        }
        if let Some(pos) = bias.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite bias entry {} at index {pos}",
                bias[pos]
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

/// Where one layer's parameters live inside the flattened vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatSegment {
    /// Offset of the layer's weight block (row-major `out x in`).
    pub weight_offset: usize,
    /// Number of weight entries.
    pub weight_len: usize,
    /// Offset of the layer's bias block.
    pub bias_offset: usize,
    /// Number of bias entries.
    pub bias_len: usize,
}

/// Layout map for the flattened parameter vector: per layer in order, the
/// weight matrix row-major, then the bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatView {
    segments: Vec<FlatSegment>,
    len: usize,
}

impl FlatView {
    pub fn segments(&self) -> &[FlatSegment] {
        &self.segments
    }

    /// Total flattened length.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Per-example flattened gradients: row `i` is the full parameter gradient
/// contributed by batch example `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerExampleGrads {
    grads: Matrix,
}

impl PerExampleGrads {
    /// Number of examples.
    pub fn examples(&self) -> usize {
        self.grads.rows()
    }

    /// Flattened parameter count.
    pub fn param_count(&self) -> usize {
        self.grads.cols()
    }

    /// Example `i`'s flattened gradient.
    pub fn example(&self, i: usize) -> &[f64] {
        self.grads.row(i)
    }

    /// Elementwise sum of two per-example gradient sets (paired rows).
    pub fn add(&self, other: &PerExampleGrads) -> Result<PerExampleGrads> {
        if self.grads.rows() != other.grads.rows() || self.grads.cols() != other.grads.cols() {
            return Err(Error::Shape(format!(
                "per-example gradient shapes disagree: {}x{} vs {}x{}",
                self.grads.rows(),
                self.grads.cols(),
                other.grads.rows(),
                other.grads.cols()
            )));
        }
        let data: Vec<f64> = self
            .grads
            .data()
            .iter()
            .zip(other.grads.data())
            .map(|(a, b)| a + b)
            .collect();
        Ok(PerExampleGrads {
            grads: Matrix::from_vec(self.grads.rows(), self.grads.cols(), data)?,
        })
    }
}

/// A multilayer perceptron: an ordered chain of [`Layer`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

impl MlpParams {
    /// Build from explicit layers; consecutive dimensions must chain.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("a network needs at least one layer".to_string()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer output dimension {} does not feed next layer input dimension {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Initialize a network with the given layer sizes and activations.
    ///
    /// `dims` lists `[input, hidden..., output]`; `activations[i]` applies to
    /// the map from `dims[i]` to `dims[i+1]`. Weights **and** biases draw
    /// uniformly from `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`, layer by layer,
    /// weights row-major then bias — one counter tick per parameter, so the
    /// stream position after init is exactly the parameter count.
    pub fn init(dims: &[usize], activations: &[Activation], stream: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape(
                "dims must list at least input and output sizes".to_string(),
            ));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::Shape(format!(
                "{} layer maps need {} activations, got {}",
                dims.len() - 1,
                dims.len() - 1,
                activations.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape("zero-width layers are not allowed".to_string()));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (i, &act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let limit = 1.0 / (fan_in as f64).sqrt();
            let weight_data: Vec<f64> = (0..fan_out * fan_in)
                .map(|_| stream.next_range(-limit, limit))
                .collect();
            let bias: Vec<f64> = (0..fan_out).map(|_| stream.next_range(-limit, limit)).collect();
            layers.push(Layer::new(
                Matrix::from_vec(fan_out, fan_in, weight_data)?,
                bias,
                act,
            )?);
        }
        Self::new(layers)
    }

    /// Default generator: latent -> hidden (relu) -> output (tanh), so
    /// samples land in `(-1, 1)` like normalized pixels.
    pub fn default_generator(
        latent_dim: usize,
        hidden: usize,
        d_out: usize,
        stream: &mut RngStream,
    ) -> Result<Self> {
        Self::init(
            &[latent_dim, hidden, d_out],
            &[Activation::Relu, Activation::Tanh],
            stream,
        )
    }

    /// Default critic: input -> hidden (relu) -> 1 (linear), an unbounded
    /// real-valued score.
    pub fn default_critic(d_in: usize, hidden: usize, stream: &mut RngStream) -> Result<Self> {
        Self::init(
            &[d_in, hidden, 1],
            &[Activation::Relu, Activation::Linear],
            stream,
        )
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Network input width.
    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Network output width.
    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Total parameter count (weights plus biases).
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Layer dimension chain `[input, hidden..., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.in_dim()];
        dims.extend(self.layers.iter().map(Layer::out_dim));
        dims
    }

    /// Activations per layer map, in order.
    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(Layer::activation).collect()
    }

    /// Layout of the flattened parameter vector.
    pub fn flat_view(&self) -> FlatView {
        let mut segments = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for layer in &self.layers {
            let weight_len = layer.weight.rows() * layer.weight.cols();
            let bias_len = layer.bias.len();
            segments.push(FlatSegment {
                weight_offset: offset,
                weight_len,
                bias_offset: offset + weight_len,
                bias_len,
            });
            offset += weight_len + bias_len;
        }
        FlatView {
            segments,
            len: offset,
        }
    }

    /// Flatten all parameters: per layer, weights row-major then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            flat.extend_from_slice(layer.weight.data());
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    /// Overwrite all parameters from a flat vector laid out as
    /// [`MlpParams::flatten`] produces. Length must match exactly.
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "flat vector of length {} cannot fill {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        if let Some(pos) = flat.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite parameter {} at flat index {pos}",
                flat[pos]
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let wlen = layer.weight.rows() * layer.weight.cols();
            layer
                .weight
                .data_mut()
                .copy_from_slice(&flat[offset..offset + wlen]);
            offset += wlen;
            let blen = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + blen]);
            offset += blen;
        }
        Ok(())
    }

    /// Apply a flat additive update: `params += step * delta`.
    pub fn apply_update(&mut self, delta: &[f64], step: f64) -> Result<()> {
        if delta.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "update of length {} cannot apply to {} parameters",
                delta.len(),
                self.param_count()
            )));
        }
        let mut flat = self.flatten();
        for (p, d) in flat.iter_mut().zip(delta) {
            *p += step * d;
        }
        self.unflatten(&flat)
    }

    /// Clamp every parameter into `[-bound, bound]` (critic weight
    /// clipping).
    pub fn clamp_params(&mut self, bound: f64) {
        for layer in &mut self.layers {
            for w in layer.weight.data_mut() {
                *w = w.clamp(-bound, bound);
            }
            for b in &mut layer.bias {
                *b = b.clamp(-bound, bound);
            }
        }
    }

    /// Batch forward pass: row `i` of the result is the network applied to
    /// row `i` of `batch`.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "batch width {} does not match network input width {}",
                batch.cols(),
                self.in_dim()
            )));
        }
        let mut a = batch.clone();
        for layer in &self.layers {
            a = layer_forward(layer, &a)?.1;
        }
        Ok(a)
    }

    /// Full per-example reverse pass with vector-valued upstream.
    ///
    /// `upstream` is `m x out_dim`: row `i` holds `dL/d output` for example
    /// `i`. Returns the per-example flattened parameter gradients and the
    /// `m x in_dim` matrix of input gradients (for chaining through a
    /// composed network).
    pub fn backward_batch(
        &self,
        batch: &Matrix,
        upstream: &Matrix,
    ) -> Result<(PerExampleGrads, Matrix)> {
        if batch.cols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "batch width {} does not match network input width {}",
                batch.cols(),
                self.in_dim()
            )));
        }
        if upstream.rows() != batch.rows() || upstream.cols() != self.out_dim() {
            return Err(Error::Shape(format!(
                "upstream shape {}x{} does not match {} examples by {} outputs",
                upstream.rows(),
                upstream.cols(),
                batch.rows(),
                self.out_dim()
            )));
        }
        let m = batch.rows();
        let view = self.flat_view();

        // Forward, retaining every layer's pre- and post-activations.
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(batch.clone());
        for layer in &self.layers {
            let (z, a) = layer_forward(layer, post.last().unwrap())?;
            pre.push(z);
            post.push(a);
        }

        // Backward. `delta` holds dL/d(pre-activation) for the current layer.
        let mut grads = Matrix::zeros(m, view.len());
        let mut delta = {
            let mut d = upstream.clone();
            let last = self.layers.len() - 1;
            apply_derivative(&mut d, self.layers[last].activation, &pre[last], &post[last + 1]);
            d
        };
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let seg = view.segments()[l];
            let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());
            let inputs = &post[l];
            // Per-example weight gradient is the outer product
            // delta_i (x) input_i; bias gradient is delta_i.
            for i in 0..m {
                let d_row = delta.row(i).to_vec();
                let x_row = inputs.row(i).to_vec();
                let g_row = grads.data_mut();
                let base = i * view.len();
                for r in 0..out_dim {
                    let dr = d_row[r];
                    let w_base = base + seg.weight_offset + r * in_dim;
                    for c in 0..in_dim {
                        g_row[w_base + c] = dr * x_row[c];
                    }
                    g_row[base + seg.bias_offset + r] = dr;
                }
            }
            // Propagate to the previous layer: delta_prev = (delta W) * phi'.
            if l > 0 {
                let mut prev = delta.matmul(&layer.weight)?;
                apply_derivative(&mut prev, self.layers[l - 1].activation, &pre[l - 1], &post[l]);
                delta = prev;
            } else {
                delta = delta.matmul(&layer.weight)?;
            }
        }
        Ok((PerExampleGrads { grads }, delta))
    }

    /// Per-example gradients of `upstream[i] * forward(batch row i)` for a
    /// scalar-output network. Row `i` of the result depends only on row `i`
    /// of the batch.
    pub fn backward_per_example(
        &self,
        batch: &Matrix,
        upstream: &[f64],
    ) -> Result<PerExampleGrads> {
        if self.out_dim() != 1 {
            return Err(Error::Shape(format!(
                "scalar-upstream backward needs a 1-output network, this one has {} outputs",
                self.out_dim()
            )));
        }
        if upstream.len() != batch.rows() {
            return Err(Error::Shape(format!(
                "{} upstream scalars for {} examples",
                upstream.len(),
                batch.rows()
            )));
        }
        let upstream_col = Matrix::from_vec(batch.rows(), 1, upstream.to_vec())?;
        let (grads, _) = self.backward_batch(batch, &upstream_col)?;
        Ok(grads)
    }
}

/// One layer's forward pass over a batch; returns (pre-activation,
/// post-activation).
fn layer_forward(layer: &Layer, input: &Matrix) -> Result<(Matrix, Matrix)> {
    let mut z = input.matmul_nt(&layer.weight)?;
    {
        let cols = z.cols();
        let data = z.data_mut();
        for (idx, value) in data.iter_mut().enumerate() {
            *value += layer.bias[idx % cols];
        }
    }
    let a_data: Vec<f64> = z.data().iter().map(|&v| layer.activation.apply(v)).collect();
    let a = Matrix::from_vec(z.rows(), z.cols(), a_data)?;
    Ok((z, a))
}

/// Multiply `delta` elementwise by the activation derivative evaluated at
/// the stored pre/post activations.
fn apply_derivative(delta: &mut Matrix, activation: Activation, pre: &Matrix, post: &Matrix) {
    let (z, a) = (pre.data(), post.data());
    for (idx, d) in delta.data_mut().iter_mut().enumerate() {
        *d *= activation.derivative(z[idx], a[idx]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_relu_layer(n: usize) -> Layer {
        Layer::new(Matrix::identity(n), vec![0.0; n], Activation::Relu).unwrap()
    }

    #[test]
    fn identity_relu_forward_kills_negative_coordinates() {
        let net = MlpParams::new(vec![identity_relu_layer(2)]).unwrap();
        let x = Matrix::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        let y = net.forward(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn flatten_layout_is_weights_then_bias_per_layer() {
        let layer = Layer::new(
            Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            vec![5.0, 6.0],
            Activation::Linear,
        )
        .unwrap();
        let net = MlpParams::new(vec![layer]).unwrap();
        assert_eq!(net.flatten(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn flatten_unflatten_round_trips_bitwise() {
        let mut stream = RngStream::new(7, 1);
        let net = MlpParams::init(
            &[3, 5, 2],
            &[Activation::Relu, Activation::Tanh],
            &mut stream,
        )
        .unwrap();
        let flat = net.flatten();
        let mut copy = net.clone();
        copy.unflatten(&flat).unwrap();
        assert_eq!(copy, net);
        assert_eq!(copy.flatten(), flat);
    }

    #[test]
    fn flat_view_covers_parameters_contiguously() {
        let mut stream = RngStream::new(8, 1);
        let net = MlpParams::init(
            &[4, 3, 2],
            &[Activation::Relu, Activation::Linear],
            &mut stream,
        )
        .unwrap();
        let view = net.flat_view();
        assert_eq!(view.len(), net.param_count());
        let segs = view.segments();
        assert_eq!(segs[0].weight_offset, 0);
        assert_eq!(segs[0].weight_len, 12);
        assert_eq!(segs[0].bias_offset, 12);
        assert_eq!(segs[0].bias_len, 3);
        assert_eq!(segs[1].weight_offset, 15);
        assert_eq!(segs[1].weight_len, 6);
        assert_eq!(segs[1].bias_offset, 21);
        assert_eq!(segs[1].bias_len, 2);
    }

    #[test]
    fn init_draws_one_tick_per_parameter_within_limits() {
        let mut stream = RngStream::new(9, 1);
        let net = MlpParams::init(
            &[4, 3, 2],
            &[Activation::Relu, Activation::Linear],
            &mut stream,
        )
        .unwrap();
        assert_eq!(stream.counter(), net.param_count() as u64);
        let limit0 = 1.0 / 2.0; // fan_in 4
        for &w in net.layers()[0].weight().data() {
            assert!(w.abs() <= limit0);
        }
        let limit1 = 1.0 / (3.0_f64).sqrt();
        for &w in net.layers()[1].weight().data() {
            assert!(w.abs() <= limit1);
        }
    }

    #[test]
    fn dimension_chain_is_validated() {
        let l1 = Layer::new(Matrix::zeros(3, 2), vec![0.0; 3], Activation::Relu).unwrap();
        let l2 = Layer::new(Matrix::zeros(2, 4), vec![0.0; 2], Activation::Linear).unwrap();
        assert!(MlpParams::new(vec![l1, l2]).is_err());
    }

    #[test]
    fn per_example_rows_are_independent_of_batch_composition() {
        // The gradient of example i must be bitwise identical whether it is
        // computed alone or alongside other examples.
        let mut stream = RngStream::new(31, 2);
        let net = MlpParams::init(
            &[3, 4, 1],
            &[Activation::Tanh, Activation::Linear],
            &mut stream,
        )
        .unwrap();
        let batch = Matrix::gaussian(5, 3, &mut stream, 0.0, 1.0);
        let upstream = [1.0, -0.5, 2.0, 0.25, -1.5];
        let together = net.backward_per_example(&batch, &upstream).unwrap();
        for i in 0..5 {
            let solo_batch = batch.select_rows(&[i]).unwrap();
            let solo = net
                .backward_per_example(&solo_batch, &upstream[i..=i])
                .unwrap();
            assert_eq!(together.example(i), solo.example(0), "example {i} differs");
        }
    }

    #[test]
    fn upstream_scaling_scales_gradients_linearly() {
        let mut stream = RngStream::new(77, 3);
        let net = MlpParams::init(
            &[2, 3, 1],
            &[Activation::Relu, Activation::Linear],
            &mut stream,
        )
        .unwrap();
        let batch = Matrix::gaussian(1, 2, &mut stream, 0.0, 1.0);
        let g1 = net.backward_per_example(&batch, &[1.0]).unwrap();
        let g3 = net.backward_per_example(&batch, &[3.0]).unwrap();
        for (a, b) in g1.example(0).iter().zip(g3.example(0)) {
            assert!((3.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    // ----- finite-difference oracle -----

    /// Central finite differences on the scalar map
    /// `flat -> sum_i upstream[i] * forward(batch)[i]`.
    fn numeric_gradient(net: &MlpParams, batch: &Matrix, upstream: &[f64], h: f64) -> Vec<f64> {
        let objective = |flat: &[f64]| -> f64 {
            let mut probe = net.clone();
            probe.unflatten(flat).unwrap();
            let out = probe.forward(batch).unwrap();
            out.data()
                .iter()
                .zip(upstream)
                .map(|(y, u)| u * y)
                .sum::<f64>()
        };
        let base = net.flatten();
        let mut grad = vec![0.0; base.len()];
        for j in 0..base.len() {
            let mut plus = base.clone();
            plus[j] += h;
            let mut minus = base.clone();
            minus[j] -= h;
            grad[j] = (objective(&plus) - objective(&minus)) / (2.0 * h);
        }
        grad
    }

    /// Smallest |pre-activation| across all relu layers — finite
    /// differences are only trustworthy away from the kink.
    fn relu_kink_margin(net: &MlpParams, batch: &Matrix) -> f64 {
        let mut margin = f64::INFINITY;
        let mut a = batch.clone();
        for layer in net.layers() {
            let (z, next) = super::layer_forward(layer, &a).unwrap();
            if layer.activation() == Activation::Relu {
                for &v in z.data() {
                    margin = margin.min(v.abs());
                }
            }
            a = next;
        }
        margin
    }

    #[test]
    fn analytic_gradients_match_finite_differences_on_random_nets() {
        let shapes: [(&[usize], &[Activation]); 3] = [
            (&[3, 4, 1], &[Activation::Relu, Activation::Linear]),
            (&[2, 3, 3], &[Activation::Tanh, Activation::Tanh]),
            (
                &[4, 3, 2, 1],
                &[Activation::Relu, Activation::Tanh, Activation::Linear],
            ),
        ];
        let h = 1e-5;
        for (case, (dims, acts)) in shapes.iter().enumerate() {
            // Deterministic rejection sampling keeps relu pre-activations
            // away from the kink so the FD oracle is valid.
            let mut attempt = 0;
            let (net, batch, upstream) = loop {
                let mut stream = RngStream::new(1000 + case as u64, attempt);
                let net = MlpParams::init(dims, acts, &mut stream).unwrap();
                let batch = Matrix::gaussian(3, dims[0], &mut stream, 0.0, 1.0);
                if relu_kink_margin(&net, &batch) > 1e-3 {
                    let upstream: Vec<f64> =
                        (0..3 * *dims.last().unwrap()).map(|_| stream.next_range(-2.0, 2.0)).collect();
                    break (net, batch, upstream);
                }
                attempt += 1;
                assert!(attempt < 100, "could not find a kink-free configuration");
            };
            let upstream_m = Matrix::from_vec(3, *dims.last().unwrap(), upstream.clone()).unwrap();
            let (per_example, _) = net.backward_batch(&batch, &upstream_m).unwrap();
            // Sum per-example rows: gradient of the summed objective.
            let mut analytic = vec![0.0; net.param_count()];
            for i in 0..3 {
                for (a, g) in analytic.iter_mut().zip(per_example.example(i)) {
                    *a += g;
                }
            }
            let numeric = numeric_gradient(&net, &batch, &upstream, h);
            for (j, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                let tol = 1e-5 * a.abs().max(n.abs()).max(1e-3);
                assert!(
                    (a - n).abs() <= tol,
                    "case {case}, parameter {j}: analytic {a} vs numeric {n}"
                );
            }
        }
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let mut stream = RngStream::new(555, 1);
        let net = MlpParams::init(
            &[3, 4, 2],
            &[Activation::Tanh, Activation::Tanh],
            &mut stream,
        )
        .unwrap();
        let batch = Matrix::gaussian(2, 3, &mut stream, 0.0, 1.0);
        let upstream = Matrix::gaussian(2, 2, &mut stream, 0.0, 1.0);
        let (_, input_grads) = net.backward_batch(&batch, &upstream).unwrap();

        let h = 1e-6;
        let objective = |b: &Matrix| -> f64 {
            let out = net.forward(b).unwrap();
            out.data()
                .iter()
                .zip(upstream.data())
                .map(|(y, u)| u * y)
                .sum()
        };
        for i in 0..2 {
            for j in 0..3 {
                let mut plus = batch.clone();
                plus.set(i, j, batch.get(i, j) + h);
                let mut minus = batch.clone();
                minus.set(i, j, batch.get(i, j) - h);
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let analytic = input_grads.get(i, j);
                assert!(
                    (analytic - numeric).abs() <= 1e-5 * analytic.abs().max(1.0),
                    "input grad ({i},{j}): {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn clamp_params_restricts_every_parameter() {
        let mut stream = RngStream::new(2, 2);
        let mut net = MlpParams::init(
            &[3, 3, 1],
            &[Activation::Relu, Activation::Linear],
            &mut stream,
        )
        .unwrap();
        net.apply_update(&vec![1.0; net.param_count()], 5.0).unwrap();
        net.clamp_params(0.01);
        assert!(net.flatten().iter().all(|w| w.abs() <= 0.01));
    }
}

#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        // flatten -> unflatten -> flatten is the identity on any net.
        #[test]
        fn flatten_round_trip(seed in 0u64..500, h1 in 1usize..6, h2 in 1usize..6) {
            let mut stream = RngStream::new(seed, 42);
            let net = MlpParams::init(
                &[3, h1, h2, 2],
                &[Activation::Relu, Activation::Tanh, Activation::Linear],
                &mut stream,
            ).unwrap();
            let flat = net.flatten();
            prop_assert_eq!(flat.len(), net.param_count());
            let mut other_stream = RngStream::new(seed.wrapping_add(1), 43);
            let mut other = MlpParams::init(
                &[3, h1, h2, 2],
                &[Activation::Relu, Activation::Tanh, Activation::Linear],
                &mut other_stream,
            ).unwrap();
            other.unflatten(&flat).unwrap();
            prop_assert_eq!(other.flatten(), flat);
        }

        // Forward output stays finite for bounded inputs and init weights.
        #[test]
        fn forward_is_finite_on_bounded_inputs(seed in 0u64..500, m in 1usize..5) {
            let mut stream = RngStream::new(seed, 77);
            let net = MlpParams::init(
                &[4, 6, 3],
                &[Activation::Relu, Activation::Tanh],
                &mut stream,
            ).unwrap();
            let batch = Matrix::gaussian(m, 4, &mut stream, 0.0, 10.0);
            let out = net.forward(&batch).unwrap();
            prop_assert!(out.data().iter().all(|x| x.is_finite()));
            // Final tanh layer bounds outputs in (-1, 1).
            prop_assert!(out.data().iter().all(|x| x.abs() < 1.0));
        }
    }
}
