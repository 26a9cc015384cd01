//! Moments accountant: tight privacy accounting by log-moments of the
//! privacy loss.
//!
//! For a mechanism run on neighboring inputs, the privacy loss at outcome
//! `t` is `c(t) = ln(P[d](t) / P[d'](t))`. The accountant tracks, on a grid
//! of moment orders `lambda`, the log moment-generating function
//! `beta(lambda) = ln E[exp(lambda c)]`, which composes **additively**
//! across steps. A tail bound then converts accumulated moments into an
//! `(epsilon, delta)` statement:
//!
//! - `eps_for_delta`:  `epsilon = min_lambda (beta(lambda) + ln(1/delta)) / lambda`
//! - `delta_for_eps`:  `delta   = min_lambda exp(beta(lambda) - lambda epsilon)` (capped at 1)
//!
//! The workhorse moment is the subsampled Gaussian: with sampling ratio `q`
//! and noise multiplier `sigma` (sensitivity normalized to 1), one step
//! compares `mu0 = N(0, sigma^2)` against the mixture
//! `mu = (1-q) mu0 + q N(1, sigma^2)`. Both neighboring directions are
//! integrated and the larger moment is kept. The integrals are evaluated by
//! adaptive Simpson quadrature **in log space** — the integrand is shifted
//! by its probed maximum before exponentiation — so extreme parameter
//! combinations (tiny `sigma`, large `lambda`) account correctly instead of
//! overflowing. The quadrature's absolute tolerance (1e-10) applies to the
//! max-shifted integral.
//!
//! Discrete mechanisms are supported as an exhaustively enumerated test
//! harness ([`DiscreteMechanism`]); an outcome that is possible under one
//! input and impossible under the other has *infinite* privacy loss, which
//! is carried as an explicit sentinel — never as a float infinity inside
//! beta sums (a [`MomentLedger`]'s entries are always finite).

use crate::error::{Error, Result};

/// Absolute tolerance of the adaptive quadrature, applied to the
/// max-shifted integral.
const QUAD_ABS_TOL: f64 = 1e-10;

/// Integration reaches this many noise standard deviations past the
/// outermost peak; the truncated tail mass is below exp(-800).
const TAIL_SIGMAS: f64 = 40.0;

/// Maximum adaptive-bisection depth before the quadrature reports failure.
const MAX_DEPTH: u32 = 64;

/// Default moment-order grid: the integers 1 through 32.
pub const DEFAULT_LAMBDA_MAX: u32 = 32;

// ===== Privacy loss and discrete mechanisms =====

/// Privacy loss of a single outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyLoss {
    /// `ln(P[d](t) / P[d'](t))`, both probabilities positive.
    Finite(f64),
    /// Possible under `d`, impossible under `d'`: a distinguishing event.
    Infinite,
    /// Impossible under `d`: never observed, contributes nothing.
    NeverOccurs,
}

/// A log moment value: finite, or infinite because some distinguishing
/// outcome has positive probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogMoment {
    Finite(f64),
    Infinite,
}

impl LogMoment {
    /// Unwrap a finite moment or fail with a parameter error.
    pub fn finite(self) -> Result<f64> {
        match self {
            LogMoment::Finite(v) => Ok(v),
            LogMoment::Infinite => Err(Error::Parameter(
                "log moment is infinite (support mismatch)".to_string(),
            )),
        }
    }
}

/// A pair of outcome distributions for one mechanism on two neighboring
/// inputs, over a shared finite outcome space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMechanism {
    p: Vec<f64>,
    p_prime: Vec<f64>,
}

impl DiscreteMechanism {
    /// Build from explicit outcome distributions. Both must have the same
    /// nonzero length, nonnegative entries, and sum to 1 within 1e-9.
    pub fn new(p: Vec<f64>, p_prime: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() != p_prime.len() {
            return Err(Error::Shape(format!(
                "outcome spaces disagree: {} vs {} outcomes",
                p.len(),
                p_prime.len()
            )));
        }
        for (name, dist) in [("p", &p), ("p_prime", &p_prime)] {
            if dist.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::Parameter(format!(
                    "distribution {name} has a negative or non-finite entry"
                )));
            }
            let total: f64 = dist.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!(
                    "distribution {name} sums to {total}, not 1"
                )));
            }
        }
        Ok(Self { p, p_prime })
    }

    /// Randomized response with honesty probability `p`: the true bit is
    /// reported with probability `p`, flipped otherwise. Outcome 0 is
    /// "reported the first input's true value".
    pub fn randomized_response(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Parameter(format!(
                "randomized-response probability must lie in (0,1), got {p}"
            )));
        }
        Self::new(vec![p, 1.0 - p], vec![1.0 - p, p])
    }

    /// Outcome distribution under the first input.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Outcome distribution under the neighboring input.
    pub fn p_prime(&self) -> &[f64] {
        &self.p_prime
    }

    /// Number of outcomes.
    pub fn outcomes(&self) -> usize {
        self.p.len()
    }

    /// The mechanism with the two inputs swapped (the other neighboring
    /// direction).
    pub fn reversed(&self) -> Self {
        Self {
            p: self.p_prime.clone(),
            p_prime: self.p.clone(),
        }
    }
}

/// Privacy loss of outcome `outcome` under `mech`'s first input.
pub fn privacy_loss(mech: &DiscreteMechanism, outcome: usize) -> Result<PrivacyLoss> {
    if outcome >= mech.outcomes() {
        return Err(Error::Parameter(format!(
            "outcome {outcome} out of range for {} outcomes",
            mech.outcomes()
        )));
    }
    let (p, pp) = (mech.p[outcome], mech.p_prime[outcome]);
    Ok(if p == 0.0 {
        PrivacyLoss::NeverOccurs
    } else if pp == 0.0 {
        PrivacyLoss::Infinite
    } else {
        PrivacyLoss::Finite((p / pp).ln())
    })
}

/// `ln E_{t~p}[exp(lambda c(t))]` by exhaustive enumeration over outcomes.
///
/// Computed in log space (log-sum-exp over `ln p + lambda (ln p - ln p')`),
/// so large moment orders cannot overflow. Outcomes with `p = 0` contribute
/// nothing; an outcome with `p > 0 = p'` makes the moment infinite.
pub fn log_mgf_discrete(mech: &DiscreteMechanism, lambda: f64) -> Result<LogMoment> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Parameter(format!(
            "moment order lambda must be positive and finite, got {lambda}"
        )));
    }
    let mut terms = Vec::with_capacity(mech.outcomes());
    for i in 0..mech.outcomes() {
        match privacy_loss(mech, i)? {
            PrivacyLoss::NeverOccurs => {}
            PrivacyLoss::Infinite => return Ok(LogMoment::Infinite),
            PrivacyLoss::Finite(c) => terms.push(mech.p[i].ln() + lambda * c),
        }
    }
    Ok(LogMoment::Finite(log_sum_exp(&terms)))
}

/// Log-sum-exp with max shift; empty input yields negative infinity's
/// conventional stand-in via an error-free `-inf` is avoided by requiring
/// callers to pass at least one term.
fn log_sum_exp(terms: &[f64]) -> f64 {
    debug_assert!(!terms.is_empty());
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `ln(exp(a) + exp(b))` stable in both directions.
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

// ===== Subsampled Gaussian moments =====

/// One privatized step: sampling ratio `q` in `(0, 1]` and noise multiplier
/// `sigma > 0`, with sensitivity normalized to 1 (callers express sigma as a
/// multiple of their clip bound).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismStep {
    q: f64,
    sigma: f64,
}

impl MechanismStep {
    pub fn new(q: f64, sigma: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Parameter(format!(
                "sampling ratio q must lie in (0, 1], got {q}"
            )));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::Parameter(format!(
                "noise multiplier sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { q, sigma })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// `beta(lambda)` for one subsampled Gaussian step: the larger of the two
/// neighboring directions' log moments, floored at 0 (the true value is
/// nonnegative; the floor absorbs quadrature noise near zero).
///
/// Direction one integrates `E_{z~mu0}[ r(z)^(lambda+1) ]` and direction two
/// `E_{z~mu0}[ r(z)^(-lambda) ]`, where `r(z) = mu(z)/mu0(z)
/// = (1-q) + q exp((2z - 1) / (2 sigma^2))`.
pub fn log_mgf_subsampled_gaussian(step: &MechanismStep, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Parameter(format!(
            "moment order lambda must be positive and finite, got {lambda}"
        )));
    }
    let a = log_expectation_r_power(step.q, step.sigma, lambda + 1.0)?;
    let b = log_expectation_r_power(step.q, step.sigma, -lambda)?;
    Ok(a.max(b).max(0.0))
}

/// `ln E_{z ~ N(0, sigma^2)}[ r(z)^power ]` by max-shifted adaptive Simpson
/// quadrature.
fn log_expectation_r_power(q: f64, sigma: f64, power: f64) -> Result<f64> {
    let log_one_minus_q = if q >= 1.0 { f64::NEG_INFINITY } else { (1.0 - q).ln() };
    let log_q = q.ln();
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    // log integrand: log N(z; 0, sigma^2) + power * log r(z).
    let log_norm = -(sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let h = |z: f64| -> f64 {
        let s = (2.0 * z - 1.0) * inv_two_sigma_sq;
        let log_r = log_add_exp(log_one_minus_q, log_q + s);
        log_norm - z * z * inv_two_sigma_sq + power * log_r
    };

    // Every stationary point of h lies between 0 and `power` (the bulk peak
    // and the exponentially tilted peak); pad by the tail reach.
    let lo_peak = power.min(0.0);
    let hi_peak = power.max(0.0);
    let lo = lo_peak - TAIL_SIGMAS * sigma - 1.0;
    let hi = hi_peak + TAIL_SIGMAS * sigma + 1.0;

    // Probe for the maximum: coarse global grid plus sigma-scaled local
    // grids around both candidate peaks, so a narrow peak (sigma much
    // smaller than the interval) cannot be missed. The shift only needs to
    // land within a few hundred nats of the true maximum.
    let mut shift = f64::NEG_INFINITY;
    let coarse = 256;
    for i in 0..=coarse {
        let z = lo + (hi - lo) * (i as f64) / (coarse as f64);
        shift = shift.max(h(z));
    }
    for center in [0.0, power] {
        for k in -64i32..=64 {
            let z = center + f64::from(k) * sigma / 8.0;
            if z >= lo && z <= hi {
                shift = shift.max(h(z));
            }
        }
    }

    // Segment boundaries bracket the peaks so the adaptive rule starts from
    // intervals that already see the structure.
    let mut cuts = vec![
        lo,
        lo_peak - 10.0 * sigma,
        lo_peak,
        lo_peak + 10.0 * sigma,
        hi_peak - 10.0 * sigma,
        hi_peak,
        hi_peak + 10.0 * sigma,
        hi,
    ];
    cuts.retain(|z| z.is_finite());
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let cuts: Vec<f64> = cuts.into_iter().filter(|&z| z >= lo && z <= hi).collect();

    let f = |z: f64| (h(z) - shift).exp();
    let mut total = 0.0;
    let segments = cuts.len() - 1;
    for w in cuts.windows(2) {
        total += adaptive_simpson(&f, w[0], w[1], QUAD_ABS_TOL / segments as f64).map_err(
            |detail| {
                Error::Numeric(format!(
                    "subsampled-Gaussian quadrature failed to converge \
                     (q={q}, sigma={sigma}, power={power}, segment [{}, {}]): {detail}",
                    w[0], w[1]
                ))
            },
        )?;
    }
    if total <= 0.0 {
        return Err(Error::Numeric(format!(
            "subsampled-Gaussian quadrature collapsed to zero mass \
             (q={q}, sigma={sigma}, power={power})"
        )));
    }
    Ok(shift + total.ln())
}

/// Adaptive Simpson quadrature with Richardson acceptance; returns the
/// integral of `f` over `[a, b]` to absolute tolerance `tol`, or an error
/// string if the recursion exceeds [`MAX_DEPTH`].
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> std::result::Result<f64, String> {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> std::result::Result<f64, String> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth >= MAX_DEPTH {
            return Err(format!(
                "depth {depth} exceeded with residual {:.3e} > tolerance {:.3e}",
                delta.abs(),
                15.0 * tol
            ));
        }
        let l = recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)?;
        Ok(l + r)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 0)
}

// ===== The ledger =====

/// Accumulated log moments on a fixed grid of moment orders.
///
/// Entries are always finite and nonnegative; composition is entrywise
/// addition. The grid is part of the ledger's identity — comparing or
/// merging ledgers across different grids is not meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentLedger {
    lambda_grid: Vec<f64>,
    beta: Vec<f64>,
    steps: u64,
}

impl MomentLedger {
    /// Fresh ledger on the default integer grid `1..=32`.
    pub fn new() -> Self {
        Self::with_lambda_max(DEFAULT_LAMBDA_MAX)
    }

    /// Fresh ledger on the integer grid `1..=lambda_max`.
    pub fn with_lambda_max(lambda_max: u32) -> Self {
        let lambda_grid = (1..=lambda_max).map(f64::from).collect();
        Self {
            lambda_grid,
            beta: vec![0.0; lambda_max as usize],
            steps: 0,
        }
    }

    /// Fresh ledger on an explicit grid of positive, strictly increasing
    /// moment orders. An empty grid is legal but degenerate: it can answer
    /// no tail-bound query and reports zero spend.
    pub fn with_grid(lambda_grid: Vec<f64>) -> Result<Self> {
        for pair in lambda_grid.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Parameter(
                    "lambda grid must be strictly increasing".to_string(),
                ));
            }
        }
        if lambda_grid.iter().any(|&l| !l.is_finite() || l <= 0.0) {
            return Err(Error::Parameter(
                "lambda grid entries must be positive and finite".to_string(),
            ));
        }
        let beta = vec![0.0; lambda_grid.len()];
        Ok(Self {
            lambda_grid,
            beta,
            steps: 0,
        })
    }

    /// Rebuild a ledger from its parts (checkpoint restore).
    pub fn from_parts(lambda_grid: Vec<f64>, beta: Vec<f64>, steps: u64) -> Result<Self> {
        let mut ledger = Self::with_grid(lambda_grid)?;
        if beta.len() != ledger.lambda_grid.len() {
            return Err(Error::Shape(format!(
                "{} beta entries for {} grid points",
                beta.len(),
                ledger.lambda_grid.len()
            )));
        }
        if beta.iter().any(|&b| !b.is_finite() || b < 0.0) {
            return Err(Error::Parameter(
                "beta entries must be finite and nonnegative".to_string(),
            ));
        }
        ledger.beta = beta;
        ledger.steps = steps;
        Ok(ledger)
    }

    pub fn lambda_grid(&self) -> &[f64] {
        &self.lambda_grid
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Number of composed steps.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Per-order log moments of one step — the vector `accumulate` would
    /// add once. Callers composing the *same* step many times should compute
    /// this once and reuse it via [`MomentLedger::accumulate_moments`].
    pub fn unit_moments(&self, step: &MechanismStep) -> Result<Vec<f64>> {
        self.lambda_grid
            .iter()
            .map(|&lambda| log_mgf_subsampled_gaussian(step, lambda))
            .collect()
    }

    /// Compose `times` repetitions of `step`: `beta += times * beta_1`
    /// entrywise. `times` must be at least 1.
    pub fn accumulate(&mut self, step: &MechanismStep, times: u64) -> Result<()> {
        let unit = self.unit_moments(step)?;
        self.accumulate_moments(&unit, times)
    }

    /// Compose `times` repetitions of a step whose per-order log moments
    /// were already computed (entries must be finite and nonnegative, one
    /// per grid point).
    pub fn accumulate_moments(&mut self, unit: &[f64], times: u64) -> Result<()> {
        if times == 0 {
            return Err(Error::Parameter(
                "composing zero repetitions is not meaningful".to_string(),
            ));
        }
        if unit.len() != self.lambda_grid.len() {
            return Err(Error::Shape(format!(
                "{} moment entries for {} grid points",
                unit.len(),
                self.lambda_grid.len()
            )));
        }
        if unit.iter().any(|&m| !m.is_finite() || m < 0.0) {
            return Err(Error::Parameter(
                "per-step log moments must be finite and nonnegative".to_string(),
            ));
        }
        let factor = times as f64;
        for (b, m) in self.beta.iter_mut().zip(unit) {
            *b += factor * m;
        }
        self.steps += times;
        Ok(())
    }

    /// Smallest certified epsilon at the given delta:
    /// `min_lambda (beta(lambda) + ln(1/delta)) / lambda`.
    ///
    /// A degenerate ledger with an empty grid reports 0 (nothing spent,
    /// nothing to minimize over).
    pub fn eps_for_delta(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!(
                "delta must lie strictly between 0 and 1, got {delta}"
            )));
        }
        if self.lambda_grid.is_empty() {
            return Ok(0.0);
        }
        let lg = (1.0 / delta).ln();
        let eps = self
            .lambda_grid
            .iter()
            .zip(&self.beta)
            .map(|(&lambda, &beta)| (beta + lg) / lambda)
            .fold(f64::INFINITY, f64::min);
        Ok(eps)
    }

    /// Epsilon the ledger would report if one more step with the given unit
    /// moments were composed — the look-ahead used for budget enforcement,
    /// with nothing committed.
    pub fn eps_after(&self, unit: &[f64], delta: f64) -> Result<f64> {
        if unit.len() != self.lambda_grid.len() {
            return Err(Error::Shape(format!(
                "{} moment entries for {} grid points",
                unit.len(),
                self.lambda_grid.len()
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!(
                "delta must lie strictly between 0 and 1, got {delta}"
            )));
        }
        if self.lambda_grid.is_empty() {
            return Ok(0.0);
        }
        let lg = (1.0 / delta).ln();
        let eps = self
            .lambda_grid
            .iter()
            .zip(self.beta.iter().zip(unit))
            .map(|(&lambda, (&beta, &m))| (beta + m + lg) / lambda)
            .fold(f64::INFINITY, f64::min);
        Ok(eps)
    }

    /// Smallest certified delta at the given epsilon:
    /// `min_lambda exp(beta(lambda) - lambda epsilon)`, capped at 1.
    ///
    /// A degenerate ledger with an empty grid reports 0.
    pub fn delta_for_eps(&self, epsilon: f64) -> Result<f64> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::Parameter(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        if self.lambda_grid.is_empty() {
            return Ok(0.0);
        }
        let delta = self
            .lambda_grid
            .iter()
            .zip(&self.beta)
            .map(|(&lambda, &beta)| {
                let exponent = beta - lambda * epsilon;
                if exponent >= 0.0 {
                    1.0
                } else {
                    exponent.exp()
                }
            })
            .fold(f64::INFINITY, f64::min);
        Ok(delta.min(1.0))
    }

    /// Serialize to the plain-text key/value snapshot embedded in
    /// checkpoints. Floats print in round-trip form.
    pub fn to_text(&self) -> String {
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "steps = {}\nlambdas = {}\nbetas = {}\n",
            self.steps,
            join(&self.lambda_grid),
            join(&self.beta)
        )
    }

    /// Parse the snapshot produced by [`MomentLedger::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut steps: Option<u64> = None;
        let mut lambdas: Option<Vec<f64>> = None;
        let mut betas: Option<Vec<f64>> = None;
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("ledger snapshot line lacks '=': {line:?}"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let parse_floats = |v: &str| -> Result<Vec<f64>> {
                v.split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>().map_err(|_| {
                            Error::Format(format!("bad float {tok:?} in ledger snapshot"))
                        })
                    })
                    .collect()
            };
            match key {
                "steps" => {
                    steps = Some(value.parse().map_err(|_| {
                        Error::Format(format!("bad step count {value:?} in ledger snapshot"))
                    })?)
                }
                "lambdas" => lambdas = Some(parse_floats(value)?),
                "betas" => betas = Some(parse_floats(value)?),
                other => {
                    return Err(Error::Format(format!(
                        "unknown ledger snapshot key {other:?}"
                    )))
                }
            }
        }
        match (steps, lambdas, betas) {
            (Some(s), Some(l), Some(b)) => Self::from_parts(l, b, s),
            _ => Err(Error::Format(
                "ledger snapshot is missing steps, lambdas, or betas".to_string(),
            )),
        }
    }
}

impl Default for MomentLedger {
    fn default() -> Self {
        Self::new()
    }
}

/// The classic advanced-composition baseline the accountant is measured
/// against: `sqrt(2 T ln(1/delta)) eps0 + T eps0 (exp(eps0) - 1)` for `T`
/// compositions of an `eps0`-DP step.
pub fn strong_composition_epsilon(eps0: f64, steps: u64, delta: f64) -> Result<f64> {
    if !eps0.is_finite() || eps0 <= 0.0 {
        return Err(Error::Parameter(format!(
            "per-step epsilon must be positive and finite, got {eps0}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!(
            "delta must lie strictly between 0 and 1, got {delta}"
        )));
    }
    let t = steps as f64;
    Ok((2.0 * t * (1.0 / delta).ln()).sqrt() * eps0 + t * eps0 * (eps0.exp() - 1.0))
}
