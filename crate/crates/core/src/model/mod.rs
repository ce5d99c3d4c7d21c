//! Small convolutional extractor: terrain image → positive `k`×`k` weight grid,
//! plus an optional choice scalar for the hyper-blackbox.
//!
//! Pipeline: conv stages (ReLU between stages, average pooling after each) →
//! flatten → FC head → softplus + floor on the first `k²` outputs, logistic on
//! the extra output when the choice head is enabled.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::grid::WeightGrid;
use crate::{Error, Result, WEIGHT_FLOOR};

pub mod ops;

/// Range of the choice row entries in a freshly initialized hyper head.
pub const CHOICE_ROW_DELTA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: data.len(),
            });
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Tensor {
            dims,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &Tensor) {
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvStage {
    pub out_channels: usize,
    pub kernel: usize,
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureSpec {
    /// Grid side.
    pub k: usize,
    /// Tile size in pixels; the image is `k·p` square.
    pub p: usize,
    pub in_channels: usize,
    pub stages: Vec<ConvStage>,
    /// Adds the choice output row to the head.
    pub hyper: bool,
}

impl ArchitectureSpec {
    /// Three 3×3 stages with 8, 16 and 1 channels; the pooling factors
    /// multiply to `p` so the last map is exactly `k`×`k`.
    pub fn default_for(k: usize, p: usize, hyper: bool) -> Result<Self> {
        let pools = split_pool_factors(p, 3)?;
        let channels = [8, 16, 1];
        let stages = channels
            .iter()
            .zip(pools)
            .map(|(&out_channels, pool)| ConvStage {
                out_channels,
                kernel: 3,
                pool,
            })
            .collect();
        let spec = ArchitectureSpec {
            k,
            p,
            in_channels: 3,
            stages,
            hyper,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p == 0 || self.in_channels == 0 {
            return Err(Error::InvalidConfig(
                "k, p and input channels must be positive",
            ));
        }
        if self.stages.is_empty() {
            return Err(Error::InvalidConfig("at least one conv stage is required"));
        }
        if self
            .stages
            .iter()
            .any(|s| s.kernel % 2 == 0 || s.pool == 0 || s.out_channels == 0)
        {
            return Err(Error::InvalidConfig(
                "kernels must be odd, pools and channels positive",
            ));
        }
        if self.stages.last().map(|s| s.out_channels) != Some(1) {
            return Err(Error::InvalidConfig(
                "last conv stage must have one channel",
            ));
        }
        if self.stages.iter().map(|s| s.pool).product::<usize>() != self.p {
            return Err(Error::InvalidConfig(
                "pooling factors must multiply to the tile size",
            ));
        }
        Ok(())
    }

    pub fn image_side(&self) -> usize {
        self.k * self.p
    }

    pub fn cells(&self) -> usize {
        self.k * self.k
    }

    pub fn head_outputs(&self) -> usize {
        self.cells() + usize::from(self.hyper)
    }
}

/// Spreads the prime factors of `p` over `stages` pooling layers,
/// front-loaded; surplus factors collapse into the last stage.
fn split_pool_factors(p: usize, stages: usize) -> Result<Vec<usize>> {
    if p == 0 {
        return Err(Error::InvalidConfig("tile size must be positive"));
    }
    let mut primes = Vec::new();
    let (mut rest, mut d) = (p, 2);
    while rest > 1 {
        while rest % d == 0 {
            primes.push(d);
            rest /= d;
        }
        d += 1;
    }
    let mut pools = vec![1; stages];
    for (i, f) in primes.into_iter().enumerate() {
        pools[i.min(stages - 1)] *= f;
    }
    Ok(pools)
}

/// `(k²)×(k²)` identity, or in hyper mode `(k²+1)×(k²)` with the identity
/// block on top and a last row uniform in `[−delta, delta]`.
pub fn fc_head_init(k: usize, hyper: bool, delta: f64, rng: &mut impl Rng) -> Result<Tensor> {
    if k == 0 {
        return Err(Error::InvalidConfig("grid side must be at least 1"));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("choice row delta must be positive"));
    }
    let n = k * k;
    let rows = n + usize::from(hyper);
    let mut m = Tensor::zeros(vec![rows, n]);
    for i in 0..n {
        m.data[i * n + i] = 1.0;
    }
    if hyper {
        for j in 0..n {
            m.data[n * n + j] = rng.random_range(-delta..=delta);
        }
    }
    Ok(m)
}

/// Named parameter tensors plus a generation counter bumped on every update.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    tensors: Vec<(String, Tensor)>,
    generation: u64,
}

/// Initial head biases. A positive `weights` bias starts every predicted
/// weight at about `softplus(weights)`, away from the floor where the
/// softplus gradient vanishes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeadBias {
    pub weights: f64,
    pub choice: f64,
}

pub const HEAD_WEIGHT: &str = "head.weight";
pub const HEAD_BIAS: &str = "head.bias";

impl ModelParams {
    pub fn from_tensors(tensors: Vec<(String, Tensor)>) -> Self {
        ModelParams {
            tensors,
            generation: 0,
        }
    }

    /// He-normal conv kernels, zero conv biases, [`fc_head_init`] head and
    /// head biases from `bias`.
    pub fn init(spec: &ArchitectureSpec, seed: u64, bias: HeadBias) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::new();
        let mut cin = spec.in_channels;
        for (i, stage) in spec.stages.iter().enumerate() {
            let fan_in = (cin * stage.kernel * stage.kernel) as f64;
            let normal = Normal::new(0.0, libm::sqrt(2.0 / fan_in))
                .map_err(|_| Error::InvalidConfig("bad init scale"))?;
            let dims = vec![stage.out_channels, cin, stage.kernel, stage.kernel];
            let n = dims.iter().product();
            let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
            tensors.push((conv_name(i, "weight"), Tensor { dims, data }));
            tensors.push((
                conv_name(i, "bias"),
                Tensor::zeros(vec![stage.out_channels]),
            ));
            cin = stage.out_channels;
        }
        let head = fc_head_init(spec.k, spec.hyper, CHOICE_ROW_DELTA, &mut rng)?;
        let mut head_bias = Tensor::new(
            vec![spec.head_outputs()],
            vec![bias.weights; spec.head_outputs()],
        )?;
        if spec.hyper {
            head_bias.data[spec.cells()] = bias.choice;
        }
        tensors.push((HEAD_WEIGHT.to_string(), head));
        tensors.push((HEAD_BIAS.to_string(), head_bias));
        Ok(ModelParams {
            tensors,
            generation: 0,
        })
    }

    pub fn tensors(&self) -> &[(String, Tensor)] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.tensors.iter_mut().map(|(_, t)| t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(
            self.tensors
                .iter()
                .map(|(_, t)| Tensor::zeros(t.dims.clone()))
                .collect(),
        )
    }

    /// Σ|w| over every parameter.
    pub fn l1_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|(_, t)| &t.data)
            .map(|v| v.abs())
            .sum()
    }

    /// Checks the tensor layout against an architecture.
    pub fn check_spec(&self, spec: &ArchitectureSpec) -> Result<()> {
        let expected = 2 * spec.stages.len() + 2;
        if self.tensors.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: self.tensors.len(),
            });
        }
        let mut cin = spec.in_channels;
        for (i, stage) in spec.stages.iter().enumerate() {
            expect_dims(
                &self.tensors[2 * i].1,
                &[stage.out_channels, cin, stage.kernel, stage.kernel],
            )?;
            expect_dims(&self.tensors[2 * i + 1].1, &[stage.out_channels])?;
            cin = stage.out_channels;
        }
        expect_dims(
            &self.tensors[expected - 2].1,
            &[spec.head_outputs(), spec.cells()],
        )?;
        expect_dims(&self.tensors[expected - 1].1, &[spec.head_outputs()])
    }

    fn conv(&self, stage: usize) -> (&Tensor, &Tensor) {
        (&self.tensors[2 * stage].1, &self.tensors[2 * stage + 1].1)
    }

    fn head(&self) -> (&Tensor, &Tensor) {
        let n = self.tensors.len();
        (&self.tensors[n - 2].1, &self.tensors[n - 1].1)
    }
}

fn conv_name(stage: usize, part: &str) -> String {
    alloc::format!("conv{stage}.{part}")
}

fn expect_dims(t: &Tensor, dims: &[usize]) -> Result<()> {
    if t.dims != dims {
        let expected = dims.iter().product();
        return Err(Error::ShapeMismatch {
            expected,
            found: t.len(),
        });
    }
    Ok(())
}

/// Gradients aligned with [`ModelParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Tensor>);

impl Grads {
    pub fn accumulate(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }
}

/// Intermediate values recorded by [`model_forward`].
#[derive(Debug, Clone)]
pub struct Tape {
    generation: u64,
    /// Input of each conv stage.
    stage_inputs: Vec<Tensor>,
    /// Conv output before activation, per stage.
    pre_activation: Vec<Tensor>,
    /// Input of each pooling layer.
    pool_inputs: Vec<Tensor>,
    features: Vec<f64>,
    logits: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub weights: WeightGrid,
    pub choice: Option<f64>,
    pub tape: Tape,
}

/// Subtracted from every pixel so inputs are zero-centred; uncentred
/// `[0, 1]` inputs let the predicted weights drift onto the floor.
pub const INPUT_CENTER: f64 = 0.5;

/// Converts an interleaved `h×w×c` image in `[0, 1]` into a centred
/// `[c, h, w]` tensor.
pub fn image_to_tensor(pixels: &[f32], side: usize, channels: usize) -> Result<Tensor> {
    let n = side * side * channels;
    if pixels.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: pixels.len(),
        });
    }
    let mut data = vec![0.0; n];
    for (i, &v) in pixels.iter().enumerate() {
        let (pix, ch) = (i / channels, i % channels);
        data[ch * side * side + pix] = f64::from(v) - INPUT_CENTER;
    }
    Ok(Tensor {
        dims: vec![channels, side, side],
        data,
    })
}

pub fn model_forward(
    params: &ModelParams,
    image: &Tensor,
    spec: &ArchitectureSpec,
) -> Result<ForwardOutput> {
    let side = spec.image_side();
    if image.dims != [spec.in_channels, side, side] {
        return Err(Error::ShapeMismatch {
            expected: spec.in_channels * side * side,
            found: image.len(),
        });
    }
    let last = spec.stages.len() - 1;
    let mut x = image.clone();
    let mut tape = Tape {
        generation: params.generation,
        stage_inputs: Vec::with_capacity(spec.stages.len()),
        pre_activation: Vec::with_capacity(spec.stages.len()),
        pool_inputs: Vec::with_capacity(spec.stages.len()),
        features: Vec::new(),
        logits: Vec::new(),
    };
    for (i, stage) in spec.stages.iter().enumerate() {
        let (kernel, bias) = params.conv(i);
        let z = ops::conv2d(&x, kernel, bias);
        let a = if i == last { z.clone() } else { ops::relu(&z) };
        let pooled = ops::avg_pool(&a, stage.pool);
        tape.stage_inputs.push(x);
        tape.pre_activation.push(z);
        tape.pool_inputs.push(a);
        x = pooled;
    }
    let (hw, hb) = params.head();
    let features = x.data;
    let logits = ops::linear(hw, hb, &features);
    let n = spec.cells();
    let weights = logits[..n]
        .iter()
        .map(|&z| ops::softplus(z) + WEIGHT_FLOOR)
        .collect();
    let weights = WeightGrid::new(spec.k, weights)?;
    let choice = spec.hyper.then(|| ops::logistic(logits[n]));
    tape.features = features;
    tape.logits = logits;
    Ok(ForwardOutput {
        weights,
        choice,
        tape,
    })
}

/// Reverse pass from `dL/dweights` (and `dL/dchoice`) to every parameter.
pub fn model_backward(
    params: &ModelParams,
    tape: &Tape,
    spec: &ArchitectureSpec,
    grad_weights: &[f64],
    grad_choice: Option<f64>,
) -> Result<Grads> {
    if tape.generation != params.generation {
        return Err(Error::StaleTape {
            tape: tape.generation,
            params: params.generation,
        });
    }
    let n = spec.cells();
    if grad_weights.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: grad_weights.len(),
        });
    }
    let mut d_logits: Vec<f64> = tape.logits[..n]
        .iter()
        .zip(grad_weights)
        .map(|(&z, &g)| ops::softplus_backward(z, g))
        .collect();
    if spec.hyper {
        d_logits.push(ops::logistic_backward(
            tape.logits[n],
            grad_choice.unwrap_or(0.0),
        ));
    }

    let (hw, _) = params.head();
    let (d_hw, d_hb, d_features) = ops::linear_backward(hw, &tape.features, &d_logits);

    let mut grads = Vec::with_capacity(params.tensors.len());
    let last = spec.stages.len() - 1;
    let mut d_x = Tensor {
        dims: vec![1, spec.k, spec.k],
        data: d_features,
    };
    for (i, stage) in spec.stages.iter().enumerate().rev() {
        let d_a = ops::avg_pool_backward(&tape.pool_inputs[i].dims, stage.pool, &d_x);
        let d_z = if i == last {
            d_a
        } else {
            ops::relu_backward(&tape.pre_activation[i], &d_a)
        };
        let (kernel, _) = params.conv(i);
        let (d_in, d_k, d_b) = ops::conv2d_backward(&tape.stage_inputs[i], kernel, &d_z);
        grads.push(d_b);
        grads.push(d_k);
        d_x = d_in;
    }
    grads.reverse();
    grads.push(d_hw);
    grads.push(d_hb);
    Ok(Grads(grads))
}

/// SGD with an ℓ1 subgradient: `w ← w − lr·(g + α·sign(w))`, `sign(0) = 0`.
pub fn optimizer_step(
    params: &mut ModelParams,
    grads: &Grads,
    lr: f64,
    alpha_l1: f64,
) -> Result<()> {
    if grads.0.len() != params.tensors.len() {
        return Err(Error::ShapeMismatch {
            expected: params.tensors.len(),
            found: grads.0.len(),
        });
    }
    for ((_, p), g) in params.tensors.iter_mut().zip(&grads.0) {
        if p.len() != g.len() {
            return Err(Error::ShapeMismatch {
                expected: p.len(),
                found: g.len(),
            });
        }
        for (w, &dw) in p.data.iter_mut().zip(&g.data) {
            let sign = if *w > 0.0 {
                1.0
            } else if *w < 0.0 {
                -1.0
            } else {
                0.0
            };
            *w -= lr * (dw + alpha_l1 * sign);
        }
    }
    params.generation += 1;
    Ok(())
}

/// Update rule applied by the trainer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// [`optimizer_step`].
    Sgd,
    /// [`adam_step`].
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };

    pub fn validate(&self) -> Result<()> {
        if let Optimizer::Adam { beta1, beta2, eps } = *self {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !(unit(beta1) && unit(beta2) && eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidConfig(
                    "adam betas must lie in [0, 1) and eps be positive",
                ));
            }
        }
        Ok(())
    }
}

/// First and second moment estimates for [`adam_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    steps: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = params.zero_grads().0;
        AdamState {
            m: zeros.clone(),
            v: zeros,
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Bias-corrected Adam on `g + α·sign(w)`.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Grads,
    state: &mut AdamState,
    lr: f64,
    alpha_l1: f64,
    (beta1, beta2, eps): (f64, f64, f64),
) -> Result<()> {
    if grads.0.len() != params.tensors.len() || state.m.len() != params.tensors.len() {
        return Err(Error::ShapeMismatch {
            expected: params.tensors.len(),
            found: grads.0.len(),
        });
    }
    state.steps += 1;
    let c1 = 1.0 - libm::pow(beta1, state.steps as f64);
    let c2 = 1.0 - libm::pow(beta2, state.steps as f64);
    for (i, (_, p)) in params.tensors.iter_mut().enumerate() {
        let (g, m, v) = (&grads.0[i], &mut state.m[i], &mut state.v[i]);
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::ShapeMismatch {
                expected: p.len(),
                found: g.len(),
            });
        }
        for j in 0..p.len() {
            let w = p.data[j];
            let sign = if w > 0.0 {
                1.0
            } else if w < 0.0 {
                -1.0
            } else {
                0.0
            };
            let d = g.data[j] + alpha_l1 * sign;
            m.data[j] = beta1 * m.data[j] + (1.0 - beta1) * d;
            v.data[j] = beta2 * v.data[j] + (1.0 - beta2) * d * d;
            p.data[j] = w - lr * (m.data[j] / c1) / (libm::sqrt(v.data[j] / c2) + eps);
        }
    }
    params.generation += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_convs(spec: &ArchitectureSpec) -> ModelParams {
        let mut params = ModelParams::init(spec, 7, HeadBias::default()).unwrap();
        let n = params.tensors.len();
        for (_, t) in params.tensors.iter_mut().take(n - 2) {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        params
    }

    #[test]
    fn pool_factor_split() {
        assert_eq!(split_pool_factors(8, 3).unwrap(), vec![2, 2, 2]);
        assert_eq!(split_pool_factors(4, 3).unwrap(), vec![2, 2, 1]);
        assert_eq!(split_pool_factors(6, 3).unwrap(), vec![2, 3, 1]);
        assert_eq!(split_pool_factors(32, 3).unwrap(), vec![2, 2, 8]);
        assert_eq!(split_pool_factors(1, 3).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn identity_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = fc_head_init(12, false, 0.01, &mut rng).unwrap();
        assert_eq!(m.dims, vec![144, 144]);
        for r in 0..144 {
            for c in 0..144 {
                assert_eq!(m.data[r * 144 + c], if r == c { 1.0 } else { 0.0 });
            }
        }
        let m = fc_head_init(2, false, 0.01, &mut rng).unwrap();
        assert_eq!(
            m.data,
            vec![1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.]
        );

        let m = fc_head_init(12, true, 0.01, &mut rng).unwrap();
        assert_eq!(m.dims, vec![145, 144]);
        assert!(m.data[..144 * 144]
            .iter()
            .enumerate()
            .all(|(i, &v)| v == if i / 144 == i % 144 { 1.0 } else { 0.0 }));
        assert!(m.data[144 * 144..].iter().all(|v| v.abs() <= 0.01));
        assert!(m.data[144 * 144..].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn zero_features_give_uniform_weights() {
        let spec = ArchitectureSpec::default_for(4, 4, false).unwrap();
        let params = zero_convs(&spec);
        let img = Tensor::new(
            vec![3, 16, 16],
            (0..768).map(|i| (i % 7) as f64 / 7.0).collect(),
        )
        .unwrap();
        let out = model_forward(&params, &img, &spec).unwrap();
        let expected = core::f64::consts::LN_2 + WEIGHT_FLOOR;
        assert!(out.weights.as_slice().iter().all(|&w| w == expected));
        assert_eq!(out.choice, None);
    }

    #[test]
    fn zero_choice_row_routes_to_astar() {
        let spec = ArchitectureSpec::default_for(3, 2, true).unwrap();
        let mut params = ModelParams::init(&spec, 3, HeadBias::default()).unwrap();
        let (hw_idx, n) = (params.tensors.len() - 2, spec.cells());
        params.tensors[hw_idx].1.data[n * n..]
            .iter_mut()
            .for_each(|v| *v = 0.0);
        let img = Tensor::new(vec![3, 6, 6], vec![0.3; 108]).unwrap();
        let out = model_forward(&params, &img, &spec).unwrap();
        assert_eq!(out.choice, Some(0.5));
        let cfg = crate::hyper::HyperConfig::default();
        assert_eq!(
            crate::hyper::route(0.5, &out.weights, &cfg),
            crate::hyper::HYPER_ASTAR
        );
    }

    #[test]
    fn forward_is_positive_and_deterministic() {
        let spec = ArchitectureSpec::default_for(4, 4, true).unwrap();
        let a = ModelParams::init(&spec, 11, HeadBias::default()).unwrap();
        let b = ModelParams::init(&spec, 11, HeadBias::default()).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = Tensor::new(
            vec![3, 16, 16],
            (0..768).map(|_| rng.random::<f64>()).collect(),
        )
        .unwrap();
        let oa = model_forward(&a, &img, &spec).unwrap();
        let ob = model_forward(&b, &img, &spec).unwrap();
        assert_eq!(oa.weights, ob.weights);
        assert!(oa
            .weights
            .as_slice()
            .iter()
            .all(|&w| w.is_finite() && w > WEIGHT_FLOOR));
        let c = oa.choice.unwrap();
        assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let spec = ArchitectureSpec::default_for(3, 2, true).unwrap();
        let params = ModelParams::init(&spec, 2, HeadBias::default()).unwrap();
        let img = Tensor::new(vec![3, 6, 6], vec![0.5; 108]).unwrap();
        let out = model_forward(&params, &img, &spec).unwrap();
        let g = model_backward(&params, &out.tape, &spec, &[0.0; 9], Some(0.0)).unwrap();
        assert!(g.0.iter().all(|t| t.data.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn stale_tape_rejected() {
        let spec = ArchitectureSpec::default_for(2, 2, false).unwrap();
        let mut params = ModelParams::init(&spec, 2, HeadBias::default()).unwrap();
        let img = Tensor::new(vec![3, 4, 4], vec![0.5; 48]).unwrap();
        let out = model_forward(&params, &img, &spec).unwrap();
        let grads = params.zero_grads();
        optimizer_step(&mut params, &grads, 0.1, 0.0).unwrap();
        assert_eq!(
            model_backward(&params, &out.tape, &spec, &[0.0; 4], None).unwrap_err(),
            Error::StaleTape { tape: 0, params: 1 }
        );
    }

    #[test]
    fn optimizer_update_rule() {
        let scalar = |v: f64| {
            ModelParams::from_tensors(vec![("w".into(), Tensor::new(vec![1], vec![v]).unwrap())])
        };
        let grad = |v: f64| Grads(vec![Tensor::new(vec![1], vec![v]).unwrap()]);

        let mut p = scalar(2.0);
        optimizer_step(&mut p, &grad(1.0), 0.1, 0.5).unwrap();
        assert!((p.tensors[0].1.data[0] - 1.85).abs() < 1e-15);

        let mut p = scalar(2.0);
        optimizer_step(&mut p, &grad(1.0), 0.1, 0.0).unwrap();
        assert!((p.tensors[0].1.data[0] - 1.9).abs() < 1e-15);

        for v in [-3.0, 0.0, 3.0] {
            let mut p = scalar(v);
            optimizer_step(&mut p, &grad(0.0), 0.1, 0.5).unwrap();
            let expected = if v == 0.0 { 0.0 } else { v - 0.05 * v.signum() };
            assert!((p.tensors[0].1.data[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_steps() {
        let scalar = |v: f64| {
            ModelParams::from_tensors(vec![("w".into(), Tensor::new(vec![1], vec![v]).unwrap())])
        };
        let grad = |v: f64| Grads(vec![Tensor::new(vec![1], vec![v]).unwrap()]);
        let betas = (0.9, 0.999, 1e-8);

        // bias correction makes the first step lr·sign(g), whatever |g|
        for g in [0.02, 3.0, -250.0] {
            let mut p = scalar(2.0);
            let mut state = AdamState::new(&p);
            adam_step(&mut p, &grad(g), &mut state, 0.01, 0.0, betas).unwrap();
            assert!((p.tensors[0].1.data[0] - (2.0 - 0.01 * g.signum())).abs() < 1e-8);
            assert_eq!(state.steps(), 1);
        }

        // ℓ1 enters as part of the gradient: zero gradient still shrinks
        let mut p = scalar(-1.0);
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &grad(0.0), &mut state, 0.01, 0.5, betas).unwrap();
        assert!((p.tensors[0].1.data[0] + 0.99).abs() < 1e-9);

        let mut p = scalar(0.0);
        let mut state = AdamState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &grad(0.0), &mut state, 0.01, 0.5, betas).unwrap();
        }
        assert_eq!(p.tensors[0].1.data[0], 0.0);
        assert_eq!(p.generation(), 5);

        assert!(Optimizer::Adam {
            beta1: 1.0,
            beta2: 0.999,
            eps: 1e-8
        }
        .validate()
        .is_err());
        assert!(Optimizer::ADAM.validate().is_ok());
    }

    #[test]
    fn image_pixels_are_centred() {
        // 1×1 RGB image, interleaved
        let t = image_to_tensor(&[0.0, 0.5, 1.0], 1, 3).unwrap();
        assert_eq!(t.dims, vec![3, 1, 1]);
        assert_eq!(t.data, vec![-0.5, 0.0, 0.5]);
        assert!(image_to_tensor(&[0.0; 4], 1, 3).is_err());
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(ArchitectureSpec::default_for(4, 0, false).is_err());
        let mut spec = ArchitectureSpec::default_for(4, 4, false).unwrap();
        spec.stages[0].pool = 3;
        assert!(spec.validate().is_err());
        let spec = ArchitectureSpec::default_for(4, 4, false).unwrap();
        let params = ModelParams::init(&spec, 1, HeadBias::default()).unwrap();
        let wrong = Tensor::zeros(vec![3, 8, 8]);
        assert!(model_forward(&params, &wrong, &spec).is_err());
    }
}
