//! Dynamical and observation models.
//!
//! The forced Lorenz-63 system is discretized with an explicit Euler step and
//! additive Gaussian model error drawn once per step:
//!
//! ```text
//! x' = σ(y − x) + λ cos θ
//! y' = ρx − y − xz + λ sin θ
//! z' = xy − βz
//! X_{t+1} = X_t + Δt f(X_t) + v_t,   v_t ~ N(0, σ_Q² I)
//! Y_t     = H X_t + w_t,             w_t ~ N(0, R)
//! ```
//!
//! Linear dynamics `X_{t+1} = M X_t + v_t` share the same observation model.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DadaError, Result};
use crate::linalg::{is_psd, psd_factor, LN_2PI};

/// Default number of steps discarded before a run is treated as stationary.
pub const DEFAULT_BURN_IN: usize = 10_000;

/// Parameters of the forced Lorenz-63 model. `theta_deg` is in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L63Params {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub lambda: f64,
    pub theta_deg: f64,
    pub dt: f64,
    pub sigma_q: f64,
}

impl Default for L63Params {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            lambda: 0.0,
            theta_deg: -140.0,
            dt: 0.01,
            sigma_q: 0.1,
        }
    }
}

impl L63Params {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma,
            self.rho,
            self.beta,
            self.lambda,
            self.theta_deg,
            self.dt,
            self.sigma_q,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(DadaError::Domain("L63 parameters must be finite".into()));
        }
        if self.dt <= 0.0 {
            return Err(DadaError::Domain(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.sigma_q < 0.0 {
            return Err(DadaError::Domain(format!("sigma_q must be >= 0, got {}", self.sigma_q)));
        }
        if self.lambda < 0.0 {
            return Err(DadaError::Domain(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// The same model with the forcing switched off.
    pub fn counterfactual(&self) -> Self {
        Self { lambda: 0.0, ..*self }
    }

    /// Constant forcing vector `(λ cos θ, λ sin θ, 0)`.
    pub fn forcing(&self) -> [f64; 3] {
        if self.lambda == 0.0 {
            return [0.0; 3];
        }
        let th = self.theta_deg.to_radians();
        [self.lambda * th.cos(), self.lambda * th.sin(), 0.0]
    }

    #[inline]
    fn drift3(&self, s: [f64; 3], forcing: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = s;
        [
            self.sigma * (y - x) + forcing[0],
            self.rho * x - y - x * z + forcing[1],
            x * y - self.beta * z + forcing[2],
        ]
    }
}

/// Right-hand side of the forced Lorenz-63 ODE.
pub fn l63_drift(state: &DVector<f64>, p: &L63Params) -> Result<DVector<f64>> {
    if state.len() != 3 {
        return Err(DadaError::Dimension(format!(
            "L63 state has 3 components, got {}",
            state.len()
        )));
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(DadaError::Domain("L63 state must be finite".into()));
    }
    let d = p.drift3([state[0], state[1], state[2]], p.forcing());
    Ok(DVector::from_row_slice(&d))
}

/// State-transition operator of an [`HmmSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Lorenz63(L63Params),
    Linear(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
enum NoiseFactor {
    Zero,
    Isotropic(f64),
    Full(DMatrix<f64>),
}

impl NoiseFactor {
    fn from_cov(cov: &DMatrix<f64>) -> Result<Self> {
        if cov.iter().all(|&v| v == 0.0) {
            return Ok(Self::Zero);
        }
        let n = cov.nrows();
        let d = cov[(0, 0)];
        if d > 0.0 && *cov == DMatrix::identity(n, n) * d {
            return Ok(Self::Isotropic(d.sqrt()));
        }
        Ok(Self::Full(psd_factor(cov)?))
    }

    fn add_sample<R: Rng + ?Sized>(&self, target: &mut DVector<f64>, rng: &mut R) {
        match self {
            Self::Zero => {}
            Self::Isotropic(s) => {
                for v in target.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += s * z;
                }
            }
            Self::Full(l) => {
                let z = DVector::from_fn(l.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                *target += l * z;
            }
        }
    }
}

/// A state-space model usable for simulation and assimilation.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmSpec {
    dynamics: Dynamics,
    h: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    q_factor: NoiseFactor,
    r_factor: NoiseFactor,
}

impl HmmSpec {
    /// Builds and validates a model. `Q` and `R` must be symmetric PSD;
    /// positive definiteness of the innovation covariance is checked by the
    /// filters when it is needed.
    pub fn new(dynamics: Dynamics, h: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = match &dynamics {
            Dynamics::Lorenz63(p) => {
                p.validate()?;
                3
            }
            Dynamics::Linear(m) => {
                if !m.is_square() || m.nrows() == 0 {
                    return Err(DadaError::Dimension("M must be square and nonempty".into()));
                }
                m.nrows()
            }
        };
        if h.ncols() != n || h.nrows() == 0 {
            return Err(DadaError::Dimension(format!(
                "H must be d x {n}, got {} x {}",
                h.nrows(),
                h.ncols()
            )));
        }
        let d = h.nrows();
        if q.shape() != (n, n) {
            return Err(DadaError::Dimension(format!("Q must be {n} x {n}")));
        }
        if r.shape() != (d, d) {
            return Err(DadaError::Dimension(format!("R must be {d} x {d}")));
        }
        let all_finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !all_finite(&h) || !all_finite(&q) || !all_finite(&r) {
            return Err(DadaError::Domain("model matrices must be finite".into()));
        }
        if let Dynamics::Linear(m) = &dynamics {
            if !all_finite(m) {
                return Err(DadaError::Domain("model matrices must be finite".into()));
            }
        }
        if !is_psd(&q) {
            return Err(DadaError::Domain("Q must be symmetric positive semidefinite".into()));
        }
        if !is_psd(&r) {
            return Err(DadaError::Domain("R must be symmetric positive semidefinite".into()));
        }
        let q_factor = NoiseFactor::from_cov(&q)?;
        let r_factor = NoiseFactor::from_cov(&r)?;
        Ok(Self {
            dynamics,
            h,
            q,
            r,
            q_factor,
            r_factor,
        })
    }

    /// Forced L63 testbed: `H = I`, `Q = σ_Q² I`, `R = σ_R² I`.
    pub fn l63(params: L63Params, sigma_r: f64) -> Result<Self> {
        if !(sigma_r >= 0.0) || !sigma_r.is_finite() {
            return Err(DadaError::Domain(format!("sigma_r must be >= 0, got {sigma_r}")));
        }
        let eye = DMatrix::identity(3, 3);
        let q = &eye * params.sigma_q.powi(2);
        Self::new(Dynamics::Lorenz63(params), eye.clone(), q, eye * sigma_r.powi(2))
    }

    pub fn linear(m: DMatrix<f64>, h: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        Self::new(Dynamics::Linear(m), h, q, r)
    }

    /// Replaces the observation operator and noise, keeping the dynamics.
    pub fn with_observation(&self, h: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        Self::new(self.dynamics.clone(), h, self.q.clone(), r)
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn state_dim(&self) -> usize {
        self.h.ncols()
    }
    pub fn obs_dim(&self) -> usize {
        self.h.nrows()
    }

    /// Model time per discrete step (1 for linear dynamics).
    pub fn dt(&self) -> f64 {
        match &self.dynamics {
            Dynamics::Lorenz63(p) => p.dt,
            Dynamics::Linear(_) => 1.0,
        }
    }

    pub fn l63_params(&self) -> Option<&L63Params> {
        match &self.dynamics {
            Dynamics::Lorenz63(p) => Some(p),
            Dynamics::Linear(_) => None,
        }
    }

    pub fn linear_operator(&self) -> Option<&DMatrix<f64>> {
        match &self.dynamics {
            Dynamics::Linear(m) => Some(m),
            Dynamics::Lorenz63(_) => None,
        }
    }

    /// Deterministic part of one step.
    pub fn propagate(&self, state: &DVector<f64>) -> DVector<f64> {
        match &self.dynamics {
            Dynamics::Lorenz63(p) => {
                let s = [state[0], state[1], state[2]];
                let d = p.drift3(s, p.forcing());
                DVector::from_fn(3, |i, _| s[i] + p.dt * d[i])
            }
            Dynamics::Linear(m) => m * state,
        }
    }

    /// Draws `v ~ N(0, Q)` into `target`.
    pub fn add_model_noise<R: Rng + ?Sized>(&self, target: &mut DVector<f64>, rng: &mut R) {
        self.q_factor.add_sample(target, rng);
    }

    /// Draws `w ~ N(0, R)` into `target`.
    pub fn add_obs_noise<R: Rng + ?Sized>(&self, target: &mut DVector<f64>, rng: &mut R) {
        self.r_factor.add_sample(target, rng);
    }

    /// `H x + w` for a single state.
    pub fn observe_state<R: Rng + ?Sized>(&self, state: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let mut y = &self.h * state;
        self.add_obs_noise(&mut y, rng);
        y
    }
}

/// A simulated state trajectory `x_0 … x_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub dt_per_step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
    /// Number of steps `T` (one less than the number of states).
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// Observations `y_0 … y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    pub obs: Vec<DVector<f64>>,
}

impl ObservationSequence {
    pub fn new(obs: Vec<DVector<f64>>) -> Result<Self> {
        if obs.is_empty() {
            return Err(DadaError::Insufficient("observation sequence is empty".into()));
        }
        let d = obs[0].len();
        for (t, y) in obs.iter().enumerate() {
            if y.len() != d {
                return Err(DadaError::Dimension(format!(
                    "observation {t} has length {}, expected {d}",
                    y.len()
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(DadaError::Domain(format!("observation {t} is not finite")));
            }
        }
        Ok(Self { obs })
    }
    pub fn len(&self) -> usize {
        self.obs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.obs.first().map_or(0, |y| y.len())
    }
}

/// One stochastic step `M(x) + v`.
///
/// A non-finite result is reported as [`DadaError::Diverged`] with `step = 0`;
/// callers iterating several steps relabel it with their own index.
pub fn step_stochastic<R: Rng + ?Sized>(state: &DVector<f64>, spec: &HmmSpec, rng: &mut R) -> Result<DVector<f64>> {
    if state.len() != spec.state_dim() {
        return Err(DadaError::Dimension(format!(
            "state has length {}, model expects {}",
            state.len(),
            spec.state_dim()
        )));
    }
    let mut next = spec.propagate(state);
    spec.add_model_noise(&mut next, rng);
    if next.iter().all(|v| v.is_finite() && v.abs() < 1e150) {
        Ok(next)
    } else {
        Err(DadaError::Diverged { step: 0 })
    }
}

/// Applies [`step_stochastic`] `steps` times from `x0`.
pub fn simulate<R: Rng + ?Sized>(spec: &HmmSpec, x0: &DVector<f64>, steps: usize, rng: &mut R) -> Result<Trajectory> {
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(DadaError::Domain("initial state must be finite".into()));
    }
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.clone());
    for t in 1..=steps {
        let next = step_stochastic(&states[t - 1], spec, rng).map_err(|e| relabel(e, t))?;
        states.push(next);
    }
    Ok(Trajectory {
        states,
        dt_per_step: spec.dt(),
    })
}

/// Advances `burn_in` steps without storing them and returns the final state.
pub fn burn_in<R: Rng + ?Sized>(spec: &HmmSpec, x0: &DVector<f64>, steps: usize, rng: &mut R) -> Result<DVector<f64>> {
    let mut x = x0.clone();
    for t in 1..=steps {
        x = step_stochastic(&x, spec, rng).map_err(|e| relabel(e, t))?;
    }
    Ok(x)
}

pub(crate) fn relabel(e: DadaError, step: usize) -> DadaError {
    match e {
        DadaError::Diverged { .. } => DadaError::Diverged { step },
        other => other,
    }
}

/// `y_t = H x_t + w_t` with independent `w_t ~ N(0, R)`.
pub fn observe<R: Rng + ?Sized>(traj: &Trajectory, spec: &HmmSpec, rng: &mut R) -> Result<ObservationSequence> {
    if traj.is_empty() {
        return Err(DadaError::Insufficient("trajectory is empty".into()));
    }
    if traj.states[0].len() != spec.state_dim() {
        return Err(DadaError::Dimension(format!(
            "H has {} columns but states have length {}",
            spec.state_dim(),
            traj.states[0].len()
        )));
    }
    let obs = traj.states.iter().map(|x| spec.observe_state(x, rng)).collect();
    Ok(ObservationSequence { obs })
}

/// Vector autoregression `Y_{t+1} = A Y_t + w_t`, `w_t ~ N(0, s² I)`, with
/// an isotropic Gaussian prior on `Y_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Spec {
    pub a: DMatrix<f64>,
    pub noise_std: f64,
    pub prior_mean: DVector<f64>,
    pub prior_std: f64,
}

impl Ar1Spec {
    pub fn new(a: DMatrix<f64>, noise_std: f64, prior_mean: DVector<f64>, prior_std: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() != prior_mean.len() || a.nrows() == 0 {
            return Err(DadaError::Dimension("A must be d x d matching the prior mean".into()));
        }
        if !(noise_std > 0.0) || !(prior_std > 0.0) {
            return Err(DadaError::Domain("AR(1) standard deviations must be > 0".into()));
        }
        let radius = a.complex_eigenvalues().iter().fold(0.0_f64, |m, l| m.max(l.norm()));
        if radius >= 1.0 {
            return Err(DadaError::Domain(format!(
                "AR(1) is not stationary: spectral radius {radius}"
            )));
        }
        Ok(Self {
            a,
            noise_std,
            prior_mean,
            prior_std,
        })
    }

    /// Scalar process started from its stationary law `N(0, s²/(1−a²))`.
    pub fn stationary_scalar(a: f64, noise_std: f64) -> Result<Self> {
        if !(a.abs() < 1.0) {
            return Err(DadaError::Domain(format!("|a| must be < 1, got {a}")));
        }
        let prior_std = noise_std / (1.0 - a * a).sqrt();
        Self::new(DMatrix::from_element(1, 1, a), noise_std, DVector::zeros(1), prior_std)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn simulate<R: Rng + ?Sized>(&self, steps: usize, rng: &mut R) -> ObservationSequence {
        let d = self.dim();
        let mut obs = Vec::with_capacity(steps + 1);
        let y0 = DVector::from_fn(d, |i, _| {
            self.prior_mean[i] + self.prior_std * rng.sample::<f64, _>(StandardNormal)
        });
        obs.push(y0);
        for t in 1..=steps {
            let mut y = &self.a * &obs[t - 1];
            for v in y.iter_mut() {
                *v += self.noise_std * rng.sample::<f64, _>(StandardNormal);
            }
            obs.push(y);
        }
        ObservationSequence { obs }
    }
}

fn iso_log_density(resid: &DVector<f64>, std: f64) -> f64 {
    let d = resid.len() as f64;
    -0.5 * d * LN_2PI - d * std.ln() - 0.5 * resid.norm_squared() / (std * std)
}

/// Closed-form `log f(y) = log π(y_0) + Σ_t log g(y_t − A y_{t−1})`.
pub fn ar1_loglik(y: &ObservationSequence, spec: &Ar1Spec) -> Result<f64> {
    if y.is_empty() {
        return Err(DadaError::Insufficient("empty observation sequence".into()));
    }
    if y.dim() != spec.dim() {
        return Err(DadaError::Dimension(format!(
            "observations have dimension {}, AR(1) has {}",
            y.dim(),
            spec.dim()
        )));
    }
    let mut total = iso_log_density(&(&y.obs[0] - &spec.prior_mean), spec.prior_std);
    for w in y.obs.windows(2) {
        total += iso_log_density(&(&w[1] - &spec.a * &w[0]), spec.noise_std);
    }
    Ok(total)
}
