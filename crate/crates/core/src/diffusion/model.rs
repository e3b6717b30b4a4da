use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::codec::CHANNELS;
use crate::numerics::{Graph, NumericsError, Params, Tensor, Var};

use super::DiffusionError;

/// Two-level U-Net shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub in_channels: usize,
    /// Channel width at full, half and quarter resolution.
    pub widths: [usize; 3],
    /// Sinusoidal time-embedding size (even).
    pub time_dim: usize,
    pub attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: CHANNELS,
            widths: [12, 24, 48],
            time_dim: 32,
            attention: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        if self.in_channels == 0 || self.widths.contains(&0) {
            return Err(DiffusionError::InvalidConfig("channel counts must be positive".into()));
        }
        if self.time_dim == 0 || self.time_dim % 2 != 0 {
            return Err(DiffusionError::InvalidConfig(format!(
                "time_dim must be positive and even, got {}",
                self.time_dim
            )));
        }
        Ok(())
    }

    fn embed_dim(&self) -> usize {
        4 * self.widths[0]
    }

    /// Every parameter name with its shape and init standard deviation.
    fn layout(&self) -> Vec<(String, Vec<usize>, f64)> {
        let [w0, w1, w2] = self.widths;
        let e = self.embed_dim();
        let mut out = Vec::new();
        let mut conv = |name: &str, co: usize, ci: usize, k: usize, gain: f64| {
            let fan_in = (ci * k * k) as f64;
            out.push((format!("{name}.w"), vec![co, ci, k, k], gain / fan_in.sqrt()));
            out.push((format!("{name}.b"), vec![co], 0.0));
        };
        conv("conv_in", w0, self.in_channels, 3, 1.0);
        for (name, ci, co) in [
            ("down0", w0, w0),
            ("down1", w1, w1),
            ("mid", w2, w2),
            ("up1", w2 + w1, w1),
            ("up0", w1 + w0, w0),
        ] {
            conv(&format!("{name}.conv1"), co, ci, 3, 1.0);
            conv(&format!("{name}.conv2"), co, co, 3, 0.5);
            if ci != co {
                conv(&format!("{name}.skip"), co, ci, 1, 1.0);
            }
        }
        conv("pool0", w1, w0, 3, 1.0);
        conv("pool1", w2, w1, 3, 1.0);
        if self.attention {
            for part in ["q", "k", "v", "proj"] {
                let gain = if part == "proj" { 0.5 } else { 1.0 };
                conv(&format!("attn.{part}"), w2, w2, 1, gain);
            }
        }
        conv("conv_out", self.in_channels, w0, 3, 0.1);
        let td = self.time_dim as f64;
        out.push(("time.l1.w".into(), vec![self.time_dim, e], 1.0 / td.sqrt()));
        out.push(("time.l1.b".into(), vec![e], 0.0));
        out.push(("time.l2.w".into(), vec![e, e], 1.0 / (e as f64).sqrt()));
        out.push(("time.l2.b".into(), vec![e], 0.0));
        for (name, c) in [("down0", w0), ("down1", w1), ("mid", w2), ("up1", w1), ("up0", w0)] {
            out.push((format!("{name}.temb.w"), vec![e, c], 1.0 / (e as f64).sqrt()));
            out.push((format!("{name}.temb.b"), vec![c], 0.0));
        }
        out
    }
}

/// ε-prediction network with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserModel {
    pub config: ModelConfig,
    pub params: Params,
}

fn sinusoidal(t: &[usize], dim: usize) -> Tensor {
    let half = dim / 2;
    let mut data = Vec::with_capacity(t.len() * dim);
    for &step in t {
        let step = step as f64;
        for i in 0..half {
            let freq = (-(10_000f64).ln() * i as f64 / half as f64).exp();
            data.push((step * freq).sin());
        }
        for i in 0..half {
            let freq = (-(10_000f64).ln() * i as f64 / half as f64).exp();
            data.push((step * freq).cos());
        }
    }
    Tensor::new(vec![t.len(), dim], data).expect("finite embedding")
}

struct Net<'a, 'g> {
    g: &'a Graph<'g>,
}

impl Net<'_, '_> {
    fn p(&self, name: &str) -> Result<Var, NumericsError> {
        self.g.param(name)
    }

    fn conv(&self, name: &str, x: Var, stride: usize) -> Result<Var, NumericsError> {
        let y = self.g.conv2d(x, self.p(&format!("{name}.w"))?, stride)?;
        self.g.add_bias(y, self.p(&format!("{name}.b"))?)
    }

    fn linear(&self, name: &str, x: Var) -> Result<Var, NumericsError> {
        let y = self.g.matmul(x, self.p(&format!("{name}.w"))?)?;
        self.g.add_bias(y, self.p(&format!("{name}.b"))?)
    }

    fn res_block(&self, name: &str, x: Var, temb: Var) -> Result<Var, NumericsError> {
        let g = self.g;
        let h = self.conv(&format!("{name}.conv1"), g.silu(x)?, 1)?;
        let t = self.linear(&format!("{name}.temb"), temb)?;
        let h = g.add_bias(h, t)?;
        let h = self.conv(&format!("{name}.conv2"), g.silu(h)?, 1)?;
        let skip = if g.params().get(&format!("{name}.skip.w")).is_some() {
            self.conv(&format!("{name}.skip"), x, 1)?
        } else {
            x
        };
        g.add(skip, h)
    }

    fn attention(&self, x: Var) -> Result<Var, NumericsError> {
        let g = self.g;
        let shape = g.shape(x);
        let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let flat = |v: Var| g.reshape(v, &[n, c, h * w]);
        let q = flat(self.conv("attn.q", x, 1)?)?;
        let k = flat(self.conv("attn.k", x, 1)?)?;
        let v = flat(self.conv("attn.v", x, 1)?)?;
        let scores = g.scale(g.bmm(g.transpose(q)?, k)?, 1.0 / (c as f64).sqrt())?;
        let weights = g.softmax(scores, 2)?;
        let mixed = g.bmm(v, g.transpose(weights)?)?;
        let mixed = g.reshape(mixed, &[n, c, h, w])?;
        g.add(x, self.conv("attn.proj", mixed, 1)?)
    }

    fn upsample_to(&self, x: Var, like: Var) -> Result<Var, NumericsError> {
        let g = self.g;
        let target = g.shape(like);
        let up = g.upsample2x(x)?;
        let up = g.slice(up, 2, 0, target[2])?;
        g.slice(up, 3, 0, target[3])
    }
}

impl DenoiserModel {
    /// Randomly initialized model.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, DiffusionError> {
        config.validate()?;
        let mut params = Params::new();
        for (name, shape, std) in config.layout() {
            let n = shape.iter().product();
            let data = (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
            params.insert(name, Tensor::new(shape, data)?);
        }
        Ok(Self { config, params })
    }

    /// Checks that `params` holds exactly the tensors `config` needs.
    pub fn from_parts(config: ModelConfig, params: Params) -> Result<Self, DiffusionError> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != params.len() {
            return Err(DiffusionError::Checkpoint(format!(
                "expected {} tensors, found {}",
                layout.len(),
                params.len()
            )));
        }
        for (name, shape, _) in layout {
            match params.get(&name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(DiffusionError::Checkpoint(format!(
                        "{name}: expected shape {shape:?}, found {:?}",
                        t.shape()
                    )))
                }
                None => return Err(DiffusionError::Checkpoint(format!("missing tensor {name}"))),
            }
        }
        Ok(Self { config, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.element_count()
    }

    /// Records `ε_θ(x_t, t)` on `g`, which must be built over `self.params`.
    /// `x` is `[N, C, S, K]` and `t` holds one step per sample.
    pub fn forward(&self, g: &Graph, x: Var, t: &[usize]) -> Result<Var, DiffusionError> {
        let shape = g.shape(x);
        if shape.len() != 4 || shape[1] != self.config.in_channels || shape[0] != t.len() {
            return Err(DiffusionError::Shape(format!(
                "expected [{}, {}, S, K], got {shape:?}",
                t.len(),
                self.config.in_channels
            )));
        }
        let net = Net { g };
        let temb = g.constant(sinusoidal(t, self.config.time_dim));
        let temb = net.linear("time.l1", temb)?;
        let temb = net.linear("time.l2", g.silu(temb)?)?;
        let temb = g.silu(temb)?;

        let h0 = net.conv("conv_in", x, 1)?;
        let h0 = net.res_block("down0", h0, temb)?;
        let h1 = net.conv("pool0", h0, 2)?;
        let h1 = net.res_block("down1", h1, temb)?;
        let h2 = net.conv("pool1", h1, 2)?;
        let mut h2 = net.res_block("mid", h2, temb)?;
        if self.config.attention {
            h2 = net.attention(h2)?;
        }
        let u1 = g.concat(&[net.upsample_to(h2, h1)?, h1], 1)?;
        let u1 = net.res_block("up1", u1, temb)?;
        let u0 = g.concat(&[net.upsample_to(u1, h0)?, h0], 1)?;
        let u0 = net.res_block("up0", u0, temb)?;
        Ok(net.conv("conv_out", g.silu(u0)?, 1)?)
    }

    /// Noise prediction for a batch without keeping the tape.
    pub fn predict(&self, x: &Tensor, t: &[usize]) -> Result<Tensor, DiffusionError> {
        let g = Graph::new(&self.params);
        let xv = g.constant(x.clone());
        let out = self.forward(&g, xv, t)?;
        Ok(g.value(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn output_shape_matches_input_for_odd_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let config = ModelConfig {
            widths: [4, 6, 8],
            time_dim: 8,
            ..ModelConfig::default()
        };
        let m = DenoiserModel::new(config, &mut rng).unwrap();
        for (s, k) in [(3, 16), (5, 7), (1, 1), (4, 16)] {
            let x = Tensor::randn(&[2, CHANNELS, s, k], &mut rng);
            let y = m.predict(&x, &[0, 17]).unwrap();
            assert_eq!(y.shape(), x.shape());
            assert!(y.all_finite());
        }
    }

    #[test]
    fn from_parts_rejects_missing_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = DenoiserModel::new(ModelConfig::default(), &mut rng).unwrap();
        let mut params = Params::new();
        for (name, t) in m.params.iter().skip(1) {
            params.insert(name.clone(), t.clone());
        }
        assert!(DenoiserModel::from_parts(m.config.clone(), params).is_err());
        assert!(DenoiserModel::from_parts(m.config.clone(), m.params.clone()).is_ok());
    }
}
