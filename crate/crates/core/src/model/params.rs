//! Parameter storage, layout, counting and initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::config::NetworkConfig;
use crate::ops::{ConvParams, DenseParams, DepthwiseParams};
use crate::tensor::{Scalar, Tensor};

/// The two fully-connected layers of the ICD path.
#[derive(Clone, Debug, PartialEq)]
pub struct IcdParams<T> {
    pub fc1: DenseParams<T>,
    pub fc2: DenseParams<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams<T> {
    pub conv1: ConvParams<T>,
    pub conv2: ConvParams<T>,
    pub icd: Option<IcdParams<T>>,
    pub csd: Option<DepthwiseParams<T>>,
}

/// Every learnable tensor of the network. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub head: ConvParams<T>,
    pub blocks: Vec<BlockParams<T>>,
    pub feat: ConvParams<T>,
    pub up: Vec<ConvParams<T>>,
    pub recon: ConvParams<T>,
}

/// Name and dimensions of one parameter tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Fan-in of the weight described by `spec`, or `None` for biases.
fn fan_in(spec: &ParamSpec) -> Option<usize> {
    match spec.dims.len() {
        4 => Some(spec.dims[1] * spec.dims[2] * spec.dims[3]),
        2 => Some(spec.dims[1]),
        _ => None,
    }
}

/// Ordered `(name, dims)` of every parameter tensor for `cfg`.
pub fn param_layout(cfg: &NetworkConfig) -> Vec<ParamSpec> {
    let c = cfg.channels;
    let mut out = Vec::new();
    let mut push = |name: String, dims: Vec<usize>| out.push(ParamSpec { name, dims });
    let conv = |push: &mut dyn FnMut(String, Vec<usize>), name: &str, co: usize, ci: usize| {
        push(format!("{name}.weight"), vec![co, ci, 3, 3]);
        push(format!("{name}.bias"), vec![co]);
    };
    conv(&mut push, "head", c, 3);
    for r in 0..cfg.blocks {
        conv(&mut push, &format!("blocks.{r}.conv1"), c, c);
        conv(&mut push, &format!("blocks.{r}.conv2"), c, c);
        if cfg.paths.icd {
            let h = cfg.icd_hidden();
            push(format!("blocks.{r}.icd.fc1.weight"), vec![h, c]);
            push(format!("blocks.{r}.icd.fc1.bias"), vec![h]);
            push(format!("blocks.{r}.icd.fc2.weight"), vec![c, h]);
            push(format!("blocks.{r}.icd.fc2.bias"), vec![c]);
        }
        if cfg.paths.csd {
            push(format!("blocks.{r}.csd.weight"), vec![c, 1, 3, 3]);
            push(format!("blocks.{r}.csd.bias"), vec![c]);
        }
    }
    conv(&mut push, "feat", c, c);
    for (i, (co, _)) in cfg.upscale_stages().into_iter().enumerate() {
        conv(&mut push, &format!("up.{i}"), co, c);
    }
    conv(&mut push, "recon", 3, c);
    out
}

/// Exact number of scalar parameters for `cfg`.
pub fn count_params(cfg: &NetworkConfig) -> usize {
    param_layout(cfg).iter().map(ParamSpec::numel).sum()
}

/// Parameter count grouped by layer (weight + bias), in layout order.
pub fn count_params_by_layer(cfg: &NetworkConfig) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for spec in param_layout(cfg) {
        let layer = spec.name.rsplit_once('.').map(|(l, _)| l.to_string()).unwrap_or_default();
        match out.last_mut() {
            Some((name, n)) if *name == layer => *n += spec.numel(),
            _ => out.push((layer, spec.numel())),
        }
    }
    out
}

/// Borrowed view of one named parameter tensor.
pub struct ParamView<'a, T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a [T],
}

pub struct ParamViewMut<'a, T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a mut [T],
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let c = cfg.channels;
        let conv = |co, ci| ConvParams::zeros(co, ci, 3);
        let blocks = (0..cfg.blocks)
            .map(|_| BlockParams {
                conv1: conv(c, c),
                conv2: conv(c, c),
                icd: cfg.paths.icd.then(|| IcdParams {
                    fc1: DenseParams::zeros(cfg.icd_hidden(), c),
                    fc2: DenseParams::zeros(c, cfg.icd_hidden()),
                }),
                csd: cfg.paths.csd.then(|| DepthwiseParams::zeros(c)),
            })
            .collect();
        Self {
            head: conv(c, 3),
            blocks,
            feat: conv(c, c),
            up: cfg.upscale_stages().into_iter().map(|(co, _)| conv(co, c)).collect(),
            recon: conv(3, c),
        }
    }

    /// He-normal weights (`std = sqrt(2 / fan_in)`) and zero biases, drawn in
    /// layout order from a ChaCha8 stream seeded with `seed`.
    pub fn init(cfg: &NetworkConfig, seed: u64) -> Self {
        let mut params = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for view in params.tensors_mut() {
            let spec = ParamSpec { name: view.name, dims: view.dims };
            if let Some(fan) = fan_in(&spec) {
                let normal = Normal::new(0.0f64, (2.0 / fan as f64).sqrt()).unwrap();
                for v in view.data.iter_mut() {
                    *v = T::from_f64_lossy(normal.sample(&mut rng));
                }
            }
        }
        params
    }

    fn visit<'a>(&'a self, f: &mut dyn FnMut(String, Vec<usize>, &'a [T])) {
        fn conv<'a, T: Scalar>(f: &mut dyn FnMut(String, Vec<usize>, &'a [T]), name: &str, p: &'a ConvParams<T>) {
            f(format!("{name}.weight"), p.weight.shape().dims().to_vec(), p.weight.data());
            f(format!("{name}.bias"), vec![p.bias.len()], &p.bias);
        }
        conv(f, "head", &self.head);
        for (r, b) in self.blocks.iter().enumerate() {
            conv(f, &format!("blocks.{r}.conv1"), &b.conv1);
            conv(f, &format!("blocks.{r}.conv2"), &b.conv2);
            if let Some(icd) = &b.icd {
                for (n, d) in [("fc1", &icd.fc1), ("fc2", &icd.fc2)] {
                    f(format!("blocks.{r}.icd.{n}.weight"), vec![d.rows, d.cols], &d.weight);
                    f(format!("blocks.{r}.icd.{n}.bias"), vec![d.rows], &d.bias);
                }
            }
            if let Some(csd) = &b.csd {
                f(format!("blocks.{r}.csd.weight"), csd.weight.shape().dims().to_vec(), csd.weight.data());
                f(format!("blocks.{r}.csd.bias"), vec![csd.bias.len()], &csd.bias);
            }
        }
        conv(f, "feat", &self.feat);
        for (i, u) in self.up.iter().enumerate() {
            conv(f, &format!("up.{i}"), u);
        }
        conv(f, "recon", &self.recon);
    }

    /// Named tensors in canonical (layout) order.
    pub fn tensors(&self) -> Vec<ParamView<'_, T>> {
        let mut out = Vec::new();
        self.visit(&mut |name, dims, data| out.push(ParamView { name, dims, data }));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        fn conv<'a, T: Scalar>(out: &mut Vec<ParamViewMut<'a, T>>, name: &str, p: &'a mut ConvParams<T>) {
            let dims = p.weight.shape().dims().to_vec();
            let blen = p.bias.len();
            out.push(ParamViewMut { name: format!("{name}.weight"), dims, data: p.weight.data_mut() });
            out.push(ParamViewMut { name: format!("{name}.bias"), dims: vec![blen], data: &mut p.bias });
        }
        let mut out = Vec::new();
        conv(&mut out, "head", &mut self.head);
        for (r, b) in self.blocks.iter_mut().enumerate() {
            conv(&mut out, &format!("blocks.{r}.conv1"), &mut b.conv1);
            conv(&mut out, &format!("blocks.{r}.conv2"), &mut b.conv2);
            if let Some(icd) = &mut b.icd {
                for (n, d) in [("fc1", &mut icd.fc1), ("fc2", &mut icd.fc2)] {
                    let (rows, cols) = (d.rows, d.cols);
                    out.push(ParamViewMut {
                        name: format!("blocks.{r}.icd.{n}.weight"),
                        dims: vec![rows, cols],
                        data: &mut d.weight,
                    });
                    out.push(ParamViewMut {
                        name: format!("blocks.{r}.icd.{n}.bias"),
                        dims: vec![rows],
                        data: &mut d.bias,
                    });
                }
            }
            if let Some(csd) = &mut b.csd {
                let dims = csd.weight.shape().dims().to_vec();
                let blen = csd.bias.len();
                out.push(ParamViewMut { name: format!("blocks.{r}.csd.weight"), dims, data: csd.weight.data_mut() });
                out.push(ParamViewMut { name: format!("blocks.{r}.csd.bias"), dims: vec![blen], data: &mut csd.bias });
            }
        }
        conv(&mut out, "feat", &mut self.feat);
        for (i, u) in self.up.iter_mut().enumerate() {
            conv(&mut out, &format!("up.{i}"), u);
        }
        conv(&mut out, "recon", &mut self.recon);
        out
    }

    pub fn specs(&self) -> Vec<ParamSpec> {
        self.tensors().into_iter().map(|v| ParamSpec { name: v.name, dims: v.dims }).collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|v| v.data.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for v in z.tensors_mut() {
            v.data.fill(T::zero());
        }
        z
    }

    /// All parameters concatenated in canonical order.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for v in self.tensors() {
            out.extend_from_slice(v.data);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten). Panics if `flat` has the wrong length.
    pub fn assign_flat(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter vector has wrong length");
        let mut offset = 0;
        for v in self.tensors_mut() {
            let n = v.data.len();
            v.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.data.iter_mut().zip(b.data) {
                *x = *x + y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|v| v.data.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let conv = |p: &ConvParams<T>| ConvParams { weight: p.weight.cast(), bias: cast_vec(&p.bias) };
        let dense = |d: &DenseParams<T>| DenseParams {
            rows: d.rows,
            cols: d.cols,
            weight: cast_vec(&d.weight),
            bias: cast_vec(&d.bias),
        };
        ModelParams {
            head: conv(&self.head),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockParams {
                    conv1: conv(&b.conv1),
                    conv2: conv(&b.conv2),
                    icd: b.icd.as_ref().map(|i| IcdParams { fc1: dense(&i.fc1), fc2: dense(&i.fc2) }),
                    csd: b.csd.as_ref().map(|d| DepthwiseParams { weight: d.weight.cast(), bias: cast_vec(&d.bias) }),
                })
                .collect(),
            feat: conv(&self.feat),
            up: self.up.iter().map(conv).collect(),
            recon: conv(&self.recon),
        }
    }
}

impl<T: Scalar> BlockParams<T> {
    pub fn zeros_like(&self) -> Self {
        BlockParams {
            conv1: ConvParams { weight: Tensor::zeros(self.conv1.weight.shape()), bias: vec![T::zero(); self.conv1.bias.len()] },
            conv2: ConvParams { weight: Tensor::zeros(self.conv2.weight.shape()), bias: vec![T::zero(); self.conv2.bias.len()] },
            icd: self.icd.as_ref().map(|i| IcdParams {
                fc1: DenseParams::zeros(i.fc1.rows, i.fc1.cols),
                fc2: DenseParams::zeros(i.fc2.rows, i.fc2.cols),
            }),
            csd: self.csd.as_ref().map(|d| DepthwiseParams::zeros(d.channels())),
        }
    }
}

fn cast_vec<T: Scalar, U: Scalar>(v: &[T]) -> Vec<U> {
    v.iter().map(|x| U::from_f64_lossy(x.to_f64().unwrap())).collect()
}
