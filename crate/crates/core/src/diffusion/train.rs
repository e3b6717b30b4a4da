use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{freeze_layouts, hinge_graph, ConstraintSet};
use crate::domain::{encode, Catalog, DecodedLayout, Fixture, Planogram};
use crate::evaluation::{revenue_graph, revenue_scale, RevenueModel};
use crate::numerics::{clip_grad_norm, cosine_lr, Adam, Graph, Tensor, Var};

use super::{DenoiserModel, DiffusionError, NoiseSchedule, ScheduleConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Peak rate; annealed to zero over `steps` on a cosine.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub timesteps: usize,
    pub steps: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub rng_seed: u64,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 16,
            timesteps: 200,
            steps: 20_000,
            lambda1: 1.0,
            lambda2: 0.1,
            rng_seed: 0,
            grad_clip: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(DiffusionError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(DiffusionError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(nonneg(self.lambda1) && nonneg(self.lambda2) && nonneg(self.grad_clip)) {
            return Err(DiffusionError::InvalidConfig(
                "lambda1, lambda2 and grad_clip must be nonnegative".into(),
            ));
        }
        self.schedule().build().map(|_| ())
    }

    pub fn schedule(&self) -> ScheduleConfig {
        ScheduleConfig {
            timesteps: self.timesteps,
            ..ScheduleConfig::default()
        }
    }
}

/// One encoded planogram and the fixture it lives on.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    /// `[C, S, K]` grid.
    pub grid: Tensor,
    pub fixture: Fixture,
}

impl TrainingExample {
    pub fn from_planogram(planogram: &Planogram, catalog: &Catalog) -> Result<Self, DiffusionError> {
        Ok(Self {
            grid: encode(planogram, catalog)?.grid,
            fixture: planogram.fixture.clone(),
        })
    }
}

/// Examples grouped by grid shape, since a batch must share `S × K`.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    groups: Vec<Vec<TrainingExample>>,
}

impl TrainingSet {
    pub fn new(examples: Vec<TrainingExample>) -> Result<Self, DiffusionError> {
        if examples.is_empty() {
            return Err(DiffusionError::InvalidConfig("training set is empty".into()));
        }
        let mut by_shape: BTreeMap<(usize, usize), Vec<TrainingExample>> = BTreeMap::new();
        for e in examples {
            by_shape
                .entry((e.fixture.shelf_count, e.fixture.slot_columns))
                .or_default()
                .push(e);
        }
        Ok(Self {
            groups: by_shape.into_values().collect(),
        })
    }

    pub fn from_planograms<'a>(
        planograms: impl IntoIterator<Item = &'a Planogram>,
        catalog: &Catalog,
    ) -> Result<Self, DiffusionError> {
        Self::new(
            planograms
                .into_iter()
                .map(|p| TrainingExample::from_planogram(p, catalog))
                .collect::<Result<_, _>>()?,
        )
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn examples(&self) -> impl Iterator<Item = &TrainingExample> {
        self.groups.iter().flatten()
    }

    /// A same-shape batch: a shape group chosen in proportion to its size,
    /// then `size` examples drawn with replacement, with fresh `t` and `ε`.
    pub fn draw<R: Rng + ?Sized>(&self, size: usize, timesteps: usize, rng: &mut R) -> StepInputs {
        let mut pick = rng.random_range(0..self.len());
        let group = self
            .groups
            .iter()
            .find(|g| {
                if pick < g.len() {
                    true
                } else {
                    pick -= g.len();
                    false
                }
            })
            .expect("pick below total");
        let chosen: Vec<&TrainingExample> = (0..size).map(|_| &group[rng.random_range(0..group.len())]).collect();
        let mut shape = vec![size];
        shape.extend_from_slice(chosen[0].grid.shape());
        let data = chosen.iter().flat_map(|e| e.grid.data().iter().copied()).collect();
        let x0 = Tensor::new(shape.clone(), data).expect("encoded grids are finite");
        StepInputs {
            x0,
            t: (0..size).map(|_| rng.random_range(0..timesteps)).collect(),
            eps: Tensor::randn(&shape, rng),
            fixtures: chosen.iter().map(|e| e.fixture.clone()).collect(),
        }
    }
}

/// Everything one loss evaluation needs besides the model.
#[derive(Clone, Debug)]
pub struct StepInputs {
    /// `[N, C, S, K]` clean grids.
    pub x0: Tensor,
    pub t: Vec<usize>,
    /// Noise with the shape of `x0`.
    pub eps: Tensor,
    pub fixtures: Vec<Fixture>,
}

/// Problem data shared by every step.
#[derive(Clone, Copy, Debug)]
pub struct LossContext<'a> {
    pub catalog: &'a Catalog,
    pub constraints: &'a ConstraintSet,
    pub revenue_model: &'a RevenueModel,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Scalar loss nodes of one recorded evaluation.
#[derive(Clone, Debug)]
pub struct LossVars {
    pub total: Var,
    pub diffusion: Var,
    pub constraint: Var,
    pub revenue: Var,
    /// Layouts the constraint and revenue terms were frozen on; empty when
    /// both weights are zero.
    pub layouts: Vec<DecodedLayout>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub diffusion: f64,
    pub constraint: f64,
    pub revenue: f64,
    pub total: f64,
}

fn per_sample(values: Vec<f64>, inner: usize, shape: &[usize]) -> Result<Tensor, DiffusionError> {
    let data = values
        .into_iter()
        .flat_map(|v| std::iter::repeat_n(v, inner))
        .collect();
    Ok(Tensor::new(shape.to_vec(), data)?)
}

/// Records the total loss on `g`.
///
/// The diffusion term is the mean squared error of the noise prediction.
/// The constraint and revenue terms are read from the reconstruction
/// `x̂₀`; their discrete layouts come from `frozen` when given, otherwise
/// from `x̂₀` itself. A zero weight skips its term, which then reads 0.
pub fn loss_graph(
    g: &Graph,
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    ctx: &LossContext,
    inputs: &StepInputs,
    frozen: Option<&[DecodedLayout]>,
) -> Result<LossVars, DiffusionError> {
    let shape = inputs.x0.shape();
    let n = inputs.t.len();
    if shape.len() != 4 || shape[0] != n || inputs.fixtures.len() != n || n == 0 {
        return Err(DiffusionError::Shape(format!(
            "batch of {n} steps and {} fixtures for grids {shape:?}",
            inputs.fixtures.len()
        )));
    }
    if inputs.eps.shape() != shape {
        return Err(DiffusionError::Shape(format!(
            "noise {:?} vs grids {shape:?}",
            inputs.eps.shape()
        )));
    }
    if let Some(&bad) = inputs.t.iter().find(|&&t| t >= schedule.len()) {
        return Err(DiffusionError::Shape(format!("step {bad} outside 0..{}", schedule.len())));
    }
    let inner = inputs.x0.len() / n;
    let signal: Vec<f64> = inputs.t.iter().map(|&t| schedule.alpha_bar(t).sqrt()).collect();
    let noise: Vec<f64> = inputs.t.iter().map(|&t| (1.0 - schedule.alpha_bar(t)).sqrt()).collect();
    let a = per_sample(signal.clone(), inner, shape)?;
    let b = per_sample(noise.clone(), inner, shape)?;
    let x_t = inputs
        .x0
        .zip_map(&a, |x, a| a * x)?
        .zip_map(&inputs.eps.zip_map(&b, |e, b| b * e)?, |u, v| u + v)?;

    let eps_hat = model.forward(g, g.constant(x_t.clone()), &inputs.t)?;
    let diffusion = g.mean(g.square(g.sub(eps_hat, g.constant(inputs.eps.clone()))?)?)?;

    let zero = || g.constant(Tensor::scalar(0.0));
    let (mut constraint, mut revenue, mut layouts) = (zero(), zero(), Vec::new());
    if ctx.lambda1 > 0.0 || ctx.lambda2 > 0.0 {
        let base = x_t.zip_map(&a, |x, a| x / a)?;
        let ratio: Vec<f64> = signal.iter().zip(&noise).map(|(a, b)| -b / a).collect();
        let x0_hat = g.add(g.constant(base), g.mul(eps_hat, g.constant(per_sample(ratio, inner, shape)?))?)?;
        let fixtures: Vec<&Fixture> = inputs.fixtures.iter().collect();
        layouts = match frozen {
            Some(l) => l.to_vec(),
            None => freeze_layouts(&g.value(x0_hat), ctx.catalog, &fixtures)?,
        };
        if ctx.lambda1 > 0.0 {
            let h = hinge_graph(g, x0_hat, &layouts, &fixtures, ctx.constraints, ctx.catalog)?;
            constraint = g.mean(h)?;
        }
        if ctx.lambda2 > 0.0 {
            let per = revenue_graph(g, x0_hat, &layouts, &fixtures, ctx.catalog, ctx.revenue_model)?;
            let inv_scale: Vec<f64> = fixtures
                .iter()
                .map(|f| -1.0 / revenue_scale(f, ctx.catalog, ctx.revenue_model))
                .collect();
            revenue = g.mean(g.mul(per, g.constant(Tensor::new(vec![n], inv_scale)?))?)?;
        }
    }
    let mut total = diffusion;
    if ctx.lambda1 > 0.0 {
        total = g.add(total, g.scale(constraint, ctx.lambda1)?)?;
    }
    if ctx.lambda2 > 0.0 {
        total = g.add(total, g.scale(revenue, ctx.lambda2)?)?;
    }
    Ok(LossVars {
        total,
        diffusion,
        constraint,
        revenue,
        layouts,
    })
}

/// One optimizer update on a prepared batch. `step` is only used in
/// diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    model: &mut DenoiserModel,
    optimizer: &mut Adam,
    schedule: &NoiseSchedule,
    ctx: &LossContext,
    inputs: &StepInputs,
    learning_rate: f64,
    grad_clip: f64,
    step: usize,
) -> Result<LossBreakdown, DiffusionError> {
    let (breakdown, mut grads) = {
        let g = Graph::new(&model.params);
        let vars = loss_graph(&g, model, schedule, ctx, inputs, None)?;
        let read = |v: Var| g.value(v).item().unwrap_or(f64::NAN);
        let breakdown = LossBreakdown {
            diffusion: read(vars.diffusion),
            constraint: read(vars.constraint),
            revenue: read(vars.revenue),
            total: read(vars.total),
        };
        if !breakdown.total.is_finite() {
            return Err(DiffusionError::NonFiniteLoss {
                step,
                diffusion: breakdown.diffusion,
                constraint: breakdown.constraint,
                revenue: breakdown.revenue,
            });
        }
        (breakdown, g.backward(vars.total)?)
    };
    if grad_clip > 0.0 {
        clip_grad_norm(&mut grads, grad_clip);
    }
    optimizer.step(&mut model.params, &grads, learning_rate)?;
    Ok(breakdown)
}

/// Training loop state: model, optimizer, schedule and batch RNG.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: DenoiserModel,
    pub config: TrainConfig,
    pub history: Vec<LossBreakdown>,
    optimizer: Adam,
    schedule: NoiseSchedule,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(model: DenoiserModel, config: TrainConfig) -> Result<Self, DiffusionError> {
        config.validate()?;
        Ok(Self {
            schedule: config.schedule().build()?,
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            optimizer: Adam::default(),
            history: Vec::new(),
            model,
            config,
        })
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn steps_taken(&self) -> usize {
        self.history.len()
    }

    /// Draws a batch from `set` and applies one update.
    pub fn step(&mut self, set: &TrainingSet, ctx: &LossContext) -> Result<LossBreakdown, DiffusionError> {
        let step = self.history.len();
        let inputs = set.draw(self.config.batch_size, self.schedule.len(), &mut self.rng);
        let lr = cosine_lr(self.config.learning_rate, step, self.config.steps);
        let loss = train_step(
            &mut self.model,
            &mut self.optimizer,
            &self.schedule,
            ctx,
            &inputs,
            lr,
            self.config.grad_clip,
            step,
        )?;
        self.history.push(loss);
        Ok(loss)
    }

    /// Runs until `config.steps` updates have been applied, calling
    /// `progress` after each one.
    pub fn run(
        &mut self,
        set: &TrainingSet,
        ctx: &LossContext,
        mut progress: impl FnMut(usize, &LossBreakdown),
    ) -> Result<(), DiffusionError> {
        while self.history.len() < self.config.steps {
            let loss = self.step(set, ctx)?;
            progress(self.history.len() - 1, &loss);
        }
        Ok(())
    }
}
