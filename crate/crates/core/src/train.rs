//! The differentially private WGAN training loop.
//!
//! Each outer iteration runs `critic_iters` private critic steps followed
//! by one generator step. A private critic step is, in fixed order:
//!
//! 1. sample a mini-batch of real rows (with replacement) and a mini-batch
//!    of prior noise;
//! 2. compute **per-example** gradients of the critic objective
//!    `mean(f(x)) - mean(f(G(z)))` — one paired real/fake gradient per
//!    example;
//! 3. clip each per-example gradient to L2 norm `grad_clip`;
//! 4. sum the clipped gradients and add Gaussian noise with standard
//!    deviation `sigma_n * grad_clip` per coordinate (the clipped sum has
//!    L2 sensitivity `grad_clip` under single-record change);
//! 5. divide by the batch size, take a plain SGD **ascent** step, and
//!    clamp every critic weight to `[-weight_clip, weight_clip]`;
//! 6. record the step in the moment ledger.
//!
//! Before any of that, the step asks the ledger what one more step would
//! cost; if the answer exceeds `epsilon_target` the step is refused and
//! training halts with the pre-step state intact — the budget ceiling is
//! enforced, never merely reported.
//!
//! The generator step consumes only the critic's parameters and prior
//! noise: its signature ([`generator_step`]) admits no real data at all,
//! which is the post-processing guarantee made structural — a function
//! that cannot see the data cannot leak it beyond what the privatized
//! critic already encodes. The generator descends `-mean(f(G(z)))` with
//! its aggregate gradient clipped to `grad_clip`, and no noise.
//!
//! A clip-only reference path ([`Trainer::reference_cycle`]) runs the same
//! gradient and clipping code with the noise, ledger, and budget check
//! removed; with `sigma_n = 0` the private path reduces to it bitwise.

use crate::accountant::{MechanismStep, MomentLedger};
use crate::dp::{clip_l2, gaussian_mechanism, ClipSpec, GaussianMechanismSpec};
use crate::error::{Error, Result};
use crate::mlp::{MlpParams, PerExampleGrads};
use crate::ndnum::{l2_norm, Matrix, RngStream};

/// Child-stream tags under the training component stream.
const CHILD_GENERATOR_INIT: u64 = 1;
const CHILD_CRITIC_INIT: u64 = 2;
const CHILD_BATCH: u64 = 3;
const CHILD_PRIOR: u64 = 4;
const CHILD_NOISE: u64 = 5;

/// Everything the training loop needs to know, validated as a unit.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    /// Critic learning rate.
    pub alpha_d: f64,
    /// Generator learning rate.
    pub alpha_g: f64,
    /// Per-coordinate critic weight clamp `c`.
    pub weight_clip: f64,
    /// Per-example gradient clip bound `C` (also the noise sensitivity).
    pub grad_clip: f64,
    /// Mini-batch size `m`.
    pub batch: usize,
    /// Critic steps per generator step.
    pub critic_iters: u64,
    /// Total generator iterations.
    pub gen_iters: u64,
    /// Noise multiplier; per-coordinate noise std is `sigma_n * grad_clip`.
    pub sigma_n: f64,
    pub latent_dim: usize,
    pub delta: f64,
    /// Privacy budget ceiling; `f64::INFINITY` means non-private.
    pub epsilon_target: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive_finite = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Parameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
            Ok(())
        };
        positive_finite("alpha_d", self.alpha_d)?;
        positive_finite("alpha_g", self.alpha_g)?;
        positive_finite("weight_clip", self.weight_clip)?;
        positive_finite("grad_clip", self.grad_clip)?;
        if self.batch == 0 {
            return Err(Error::Parameter("batch must be at least 1".to_string()));
        }
        if self.critic_iters == 0 || self.gen_iters == 0 {
            return Err(Error::Parameter(
                "critic_iters and gen_iters must be at least 1".to_string(),
            ));
        }
        if self.latent_dim == 0 {
            return Err(Error::Parameter("latent_dim must be at least 1".to_string()));
        }
        if !self.sigma_n.is_finite() || self.sigma_n < 0.0 {
            return Err(Error::Parameter(format!(
                "sigma_n must be finite and nonnegative, got {}",
                self.sigma_n
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!(
                "delta must lie strictly between 0 and 1, got {}",
                self.delta
            )));
        }
        if self.epsilon_target.is_nan() || self.epsilon_target <= 0.0 {
            return Err(Error::Parameter(format!(
                "epsilon_target must be positive (or infinite), got {}",
                self.epsilon_target
            )));
        }
        if (self.sigma_n == 0.0) != self.epsilon_target.is_infinite() {
            return Err(Error::Parameter(format!(
                "sigma_n must be 0 exactly when epsilon_target is infinite: \
                 got sigma_n = {}, epsilon_target = {}",
                self.sigma_n, self.epsilon_target
            )));
        }
        Ok(())
    }

    /// True when the run adds noise and accounts for it.
    pub fn is_private(&self) -> bool {
        self.sigma_n > 0.0
    }
}

/// One iteration's worth of observable training state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    /// 1-based outer iteration this row describes.
    pub iteration: u64,
    /// Critic objective from the last inner critic step, pre-update.
    pub critic_loss: f64,
    /// Generator objective `-mean(f(G(z)))`, pre-update.
    pub gen_loss: f64,
    /// Mean per-example critic gradient norm before clipping, last inner
    /// step.
    pub grad_norm: f64,
    /// Accountant epsilon after this iteration; infinite on non-private
    /// runs (nothing is accounted there).
    pub eps_spent: f64,
}

/// Details of a budget-ceiling halt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetHalt {
    /// Epsilon the refused step would have spent.
    pub epsilon: f64,
    pub target: f64,
    /// 1-based outer iteration that was refused.
    pub iteration: u64,
}

/// What a complete [`Trainer::train`] call produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Outer iterations actually completed.
    pub iterations: u64,
    pub halted: Option<BudgetHalt>,
    /// Accountant epsilon at the configured delta; `None` on non-private
    /// runs.
    pub final_epsilon: Option<f64>,
    pub metrics: Vec<StepMetrics>,
}

/// The critic objective: estimated distance between real and generated
/// score distributions. The critic ascends this.
pub fn wgan_critic_objective(d_real: &[f64], d_fake: &[f64]) -> f64 {
    assert_eq!(
        d_real.len(),
        d_fake.len(),
        "objective needs equally sized score batches"
    );
    let m = d_real.len() as f64;
    let mean_real: f64 = d_real.iter().sum::<f64>() / m;
    let mean_fake: f64 = d_fake.iter().sum::<f64>() / m;
    mean_real - mean_fake
}

/// Per-example gradients of `f(x_i) - f(G(z)_i)` with respect to the
/// critic parameters: a real-batch backward pass with upstream +1 and a
/// fake-batch pass with upstream -1, added pairwise.
pub fn per_example_critic_grads(
    critic: &MlpParams,
    real: &Matrix,
    fake: &Matrix,
) -> Result<PerExampleGrads> {
    if real.rows() != fake.rows() {
        return Err(Error::Shape(format!(
            "paired batches disagree: {} real rows vs {} fake rows",
            real.rows(),
            fake.rows()
        )));
    }
    let ones = vec![1.0; real.rows()];
    let negs = vec![-1.0; fake.rows()];
    let real_grads = critic.backward_per_example(real, &ones)?;
    let fake_grads = critic.backward_per_example(fake, &negs)?;
    real_grads.add(&fake_grads)
}

/// Clip each per-example gradient to `clip` and sum them in ascending
/// example order.
pub fn clipped_grad_sum(grads: &PerExampleGrads, clip: &ClipSpec) -> Vec<f64> {
    let mut sum = vec![0.0; grads.param_count()];
    for i in 0..grads.examples() {
        let clipped = clip_l2(grads.example(i), clip);
        for (s, g) in sum.iter_mut().zip(&clipped) {
            *s += g;
        }
    }
    sum
}

/// Aggregate gradient of `-mean(f(G(z)))` with respect to the generator
/// parameters, plus the objective value itself.
pub fn generator_gradient(
    generator: &MlpParams,
    critic: &MlpParams,
    z: &Matrix,
) -> Result<(Vec<f64>, f64)> {
    let m = z.rows();
    let fake = generator.forward(z)?;
    let scores = critic.forward(&fake)?;
    let gen_loss = -scores.data().iter().sum::<f64>() / m as f64;
    // Chain through the critic to get d(loss)/d(fake), then through the
    // generator.
    let upstream = Matrix::from_vec(m, 1, vec![-1.0 / m as f64; m])?;
    let (_, dloss_dfake) = critic.backward_batch(&fake, &upstream)?;
    let (per_example, _) = generator.backward_batch(z, &dloss_dfake)?;
    let mut grad = vec![0.0; per_example.param_count()];
    for i in 0..m {
        for (g, p) in grad.iter_mut().zip(per_example.example(i)) {
            *g += p;
        }
    }
    Ok((grad, gen_loss))
}

/// One generator update: draw prior noise, descend the clipped aggregate
/// gradient of `-mean(f(G(z)))`. Returns the pre-update objective.
///
/// The signature is the privacy argument: no real data can reach this
/// function, so the generator only ever post-processes the privatized
/// critic.
pub fn generator_step(
    generator: &mut MlpParams,
    critic: &MlpParams,
    cfg: &TrainConfig,
    prior: &mut RngStream,
) -> Result<f64> {
    let z = Matrix::gaussian(cfg.batch, cfg.latent_dim, prior, 0.0, 1.0);
    let (grad, gen_loss) = generator_gradient(generator, critic, &z)?;
    let clip = ClipSpec::new(cfg.grad_clip)?;
    let clipped = clip_l2(&grad, &clip);
    generator.apply_update(&clipped, -cfg.alpha_g)?;
    Ok(gen_loss)
}

/// What one critic step computed before any privatization.
struct CriticCore {
    clipped_sum: Vec<f64>,
    critic_loss: f64,
    mean_grad_norm: f64,
}

/// Owns the full training state: networks, data, ledger, and the three
/// random streams (batch selection, prior noise, privacy noise).
pub struct Trainer {
    cfg: TrainConfig,
    data: Matrix,
    generator: MlpParams,
    critic: MlpParams,
    ledger: MomentLedger,
    /// Per-order log moments of one step, computed once — every step of a
    /// run shares the same `(q, sigma_n)`.
    unit_moments: Option<Vec<f64>>,
    iteration: u64,
    batch_stream: RngStream,
    prior_stream: RngStream,
    noise_stream: RngStream,
}

impl Trainer {
    /// Fresh trainer: networks initialized from the seed's training
    /// stream, empty ledger.
    pub fn new(
        cfg: TrainConfig,
        data: Matrix,
        gen_hidden: usize,
        critic_hidden: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        if gen_hidden == 0 || critic_hidden == 0 {
            return Err(Error::Parameter(
                "hidden layer widths must be at least 1".to_string(),
            ));
        }
        let d_out = data.cols();
        let base = RngStream::new(cfg.seed, crate::streams::TRAIN);
        let generator = MlpParams::default_generator(
            cfg.latent_dim,
            gen_hidden,
            d_out,
            &mut base.child(CHILD_GENERATOR_INIT),
        )?;
        let critic =
            MlpParams::default_critic(d_out, critic_hidden, &mut base.child(CHILD_CRITIC_INIT))?;
        Self::with_networks(cfg, data, generator, critic)
    }

    /// Trainer over explicitly provided networks (tests, restores).
    pub fn with_networks(
        cfg: TrainConfig,
        data: Matrix,
        generator: MlpParams,
        critic: MlpParams,
    ) -> Result<Self> {
        cfg.validate()?;
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::Data("training data is empty".to_string()));
        }
        if cfg.batch > data.rows() {
            return Err(Error::Parameter(format!(
                "batch size {} exceeds dataset size {}",
                cfg.batch,
                data.rows()
            )));
        }
        if generator.in_dim() != cfg.latent_dim {
            return Err(Error::Shape(format!(
                "generator consumes {} dims but latent_dim is {}",
                generator.in_dim(),
                cfg.latent_dim
            )));
        }
        if generator.out_dim() != data.cols() || critic.in_dim() != data.cols() {
            return Err(Error::Shape(format!(
                "data has {} columns; generator emits {}, critic consumes {}",
                data.cols(),
                generator.out_dim(),
                critic.in_dim()
            )));
        }
        if critic.out_dim() != 1 {
            return Err(Error::Shape(format!(
                "critic must emit a single score, emits {}",
                critic.out_dim()
            )));
        }
        let ledger = MomentLedger::new();
        let unit_moments = if cfg.is_private() {
            let q = cfg.batch as f64 / data.rows() as f64;
            let step = MechanismStep::new(q, cfg.sigma_n)?;
            Some(ledger.unit_moments(&step)?)
        } else {
            None
        };
        let base = RngStream::new(cfg.seed, crate::streams::TRAIN);
        Ok(Self {
            batch_stream: base.child(CHILD_BATCH),
            prior_stream: base.child(CHILD_PRIOR),
            noise_stream: base.child(CHILD_NOISE),
            cfg,
            data,
            generator,
            critic,
            ledger,
            unit_moments,
            iteration: 0,
        })
    }

    /// Rebuild a trainer mid-run from checkpointed state.
    #[allow(clippy::too_many_arguments)]
    pub fn restore(
        cfg: TrainConfig,
        data: Matrix,
        generator: MlpParams,
        critic: MlpParams,
        ledger: MomentLedger,
        iteration: u64,
        batch_counter: u64,
        prior_counter: u64,
        noise_counter: u64,
    ) -> Result<Self> {
        let mut trainer = Self::with_networks(cfg, data, generator, critic)?;
        trainer.ledger = ledger;
        trainer.iteration = iteration;
        trainer.batch_stream.set_counter(batch_counter);
        trainer.prior_stream.set_counter(prior_counter);
        trainer.noise_stream.set_counter(noise_counter);
        Ok(trainer)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn generator(&self) -> &MlpParams {
        &self.generator
    }

    pub fn critic(&self) -> &MlpParams {
        &self.critic
    }

    pub fn ledger(&self) -> &MomentLedger {
        &self.ledger
    }

    /// Completed outer iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Sampling ratio `q = m / N`.
    pub fn sampling_ratio(&self) -> f64 {
        self.cfg.batch as f64 / self.data.rows() as f64
    }

    pub fn batch_counter(&self) -> u64 {
        self.batch_stream.counter()
    }

    pub fn prior_counter(&self) -> u64 {
        self.prior_stream.counter()
    }

    pub fn noise_counter(&self) -> u64 {
        self.noise_stream.counter()
    }

    /// Shared gradient core of both critic paths: sample, differentiate
    /// per example, clip, sum.
    fn critic_core(&mut self) -> Result<CriticCore> {
        let m = self.cfg.batch;
        let n = self.data.rows();
        let indices: Vec<usize> = (0..m).map(|_| self.batch_stream.next_index(n)).collect();
        let x_real = self.data.select_rows(&indices)?;
        let z = Matrix::gaussian(m, self.cfg.latent_dim, &mut self.prior_stream, 0.0, 1.0);
        let x_fake = self.generator.forward(&z)?;
        let d_real = self.critic.forward(&x_real)?;
        let d_fake = self.critic.forward(&x_fake)?;
        let critic_loss = wgan_critic_objective(d_real.data(), d_fake.data());
        let grads = per_example_critic_grads(&self.critic, &x_real, &x_fake)?;
        let mean_grad_norm =
            (0..m).map(|i| l2_norm(grads.example(i))).sum::<f64>() / m as f64;
        let clip = ClipSpec::new(self.cfg.grad_clip)?;
        let clipped_sum = clipped_grad_sum(&grads, &clip);
        Ok(CriticCore {
            clipped_sum,
            critic_loss,
            mean_grad_norm,
        })
    }

    /// Apply the averaged gradient as an ascent step and clamp weights.
    fn ascend_critic(&mut self, mut aggregate: Vec<f64>) -> Result<()> {
        let m = self.cfg.batch as f64;
        for g in &mut aggregate {
            *g /= m;
        }
        self.critic.apply_update(&aggregate, self.cfg.alpha_d)?;
        self.critic.clamp_params(self.cfg.weight_clip);
        Ok(())
    }

    /// One private critic step. Refuses to run (budget error, state
    /// untouched) if the ledger says one more step would exceed the
    /// epsilon target.
    pub fn dp_critic_step(&mut self) -> Result<(f64, f64)> {
        if let Some(unit) = &self.unit_moments {
            let eps_next = self.ledger.eps_after(unit, self.cfg.delta)?;
            if eps_next > self.cfg.epsilon_target {
                return Err(Error::BudgetExceeded {
                    epsilon: eps_next,
                    target: self.cfg.epsilon_target,
                    iteration: self.iteration + 1,
                });
            }
        }
        let core = self.critic_core()?;
        let noised = if self.cfg.is_private() {
            let spec = GaussianMechanismSpec::new(self.cfg.sigma_n, self.cfg.grad_clip)?;
            gaussian_mechanism(&core.clipped_sum, &spec, &mut self.noise_stream)
        } else {
            core.clipped_sum
        };
        self.ascend_critic(noised)?;
        if let Some(unit) = self.unit_moments.clone() {
            self.ledger.accumulate_moments(&unit, 1)?;
        }
        Ok((core.critic_loss, core.mean_grad_norm))
    }

    /// One clip-only critic step: the same sampling, gradient, clipping,
    /// and update arithmetic with noise, ledger, and budget check removed.
    pub fn reference_critic_step(&mut self) -> Result<(f64, f64)> {
        let core = self.critic_core()?;
        self.ascend_critic(core.clipped_sum)?;
        Ok((core.critic_loss, core.mean_grad_norm))
    }

    /// One full private iteration: `critic_iters` private critic steps,
    /// then a generator step.
    pub fn cycle(&mut self) -> Result<StepMetrics> {
        self.cycle_inner(true)
    }

    /// One clip-only reference iteration.
    pub fn reference_cycle(&mut self) -> Result<StepMetrics> {
        self.cycle_inner(false)
    }

    fn cycle_inner(&mut self, private: bool) -> Result<StepMetrics> {
        let mut critic_loss = 0.0;
        let mut grad_norm = 0.0;
        for _ in 0..self.cfg.critic_iters {
            let (loss, norm) = if private {
                self.dp_critic_step()?
            } else {
                self.reference_critic_step()?
            };
            critic_loss = loss;
            grad_norm = norm;
        }
        let gen_loss = generator_step(
            &mut self.generator,
            &self.critic,
            &self.cfg,
            &mut self.prior_stream,
        )?;
        self.iteration += 1;
        if !critic_loss.is_finite() || !gen_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss at iteration {}: critic {critic_loss}, generator {gen_loss}",
                self.iteration
            )));
        }
        let eps_spent = if self.cfg.is_private() {
            self.ledger.eps_for_delta(self.cfg.delta)?
        } else {
            f64::INFINITY
        };
        Ok(StepMetrics {
            iteration: self.iteration,
            critic_loss,
            gen_loss,
            grad_norm,
            eps_spent,
        })
    }

    /// Run to `gen_iters` iterations or until the budget halts the run.
    /// Budget halts are an outcome, not an error; anything else aborts.
    pub fn train(&mut self) -> Result<TrainOutcome> {
        let mut metrics = Vec::new();
        let mut halted = None;
        while self.iteration < self.cfg.gen_iters {
            match self.cycle() {
                Ok(row) => metrics.push(row),
                Err(Error::BudgetExceeded {
                    epsilon,
                    target,
                    iteration,
                }) => {
                    halted = Some(BudgetHalt {
                        epsilon,
                        target,
                        iteration,
                    });
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let final_epsilon = if self.cfg.is_private() {
            Some(self.ledger.eps_for_delta(self.cfg.delta)?)
        } else {
            None
        };
        Ok(TrainOutcome {
            iterations: self.iteration,
            halted,
            final_epsilon,
            metrics,
        })
    }
}
