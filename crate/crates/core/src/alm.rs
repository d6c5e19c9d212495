//! Consensus low-rank recovery by inexact ALM.
//!
//! Solves
//!
//! ```text
//! min  alpha ||Khat||_* + lambda sum_m ||E_m||_{2,1}
//! s.t. K_m = Khat + E_m  (m = 1..M),  Khat >= 0
//! ```
//!
//! by splitting `Khat = Q` and taking one block sweep (Q, E, Khat) per
//! multiplier update while the penalty `mu` grows geometrically.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::math::{self, SvtBackend};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    /// Elementwise `Khat >= 0`.
    Nonneg,
    /// Every column of `Khat` on the probability simplex.
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkMode {
    /// Column-wise proximal operator of the l2,1 norm.
    ColumnL21,
    /// Entrywise soft threshold.
    Elementwise,
}

/// Form of the Q step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QStep {
    /// Exact minimizer of the augmented Lagrangian: `svt(Khat + B/mu, alpha/mu)`.
    Exact,
    /// `svt(Khat + B/(mu alpha), 1/(mu alpha))`.
    Scaled,
}

/// Divisor of the averaged target in the Khat step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KhatAverage {
    /// `M + 1`: the M constraint terms plus the Q coupling term.
    ExactMinimizer,
    /// `M`.
    ViewCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmConfig {
    pub alpha: f64,
    pub lambda: f64,
    /// Initial penalty; `None` uses `1 / ||mean_m K_m||_2`.
    pub mu0: Option<f64>,
    pub rho: f64,
    pub mu_max: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub constraint: ConstraintMode,
    pub shrink: ShrinkMode,
    pub q_step: QStep,
    pub average: KhatAverage,
    pub svt_backend: SvtBackend,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            lambda: 1e-3,
            mu0: None,
            rho: 1.3,
            mu_max: 1e8,
            tol: 1e-6,
            max_iters: 300,
            constraint: ConstraintMode::Nonneg,
            shrink: ShrinkMode::ColumnL21,
            q_step: QStep::Exact,
            average: KhatAverage::ExactMinimizer,
            svt_backend: SvtBackend::Auto,
        }
    }
}

impl AlmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return invalid(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.lambda >= 0.0) {
            return invalid(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if let Some(mu0) = self.mu0 {
            if !(mu0 > 0.0) {
                return invalid(format!("mu0 must be > 0, got {mu0}"));
            }
        }
        if !(self.rho > 1.0) {
            return invalid(format!("rho must be > 1, got {}", self.rho));
        }
        if !(self.mu_max > 0.0) {
            return invalid(format!("mu_max must be > 0, got {}", self.mu_max));
        }
        if !(self.tol > 0.0) {
            return invalid(format!("tol must be > 0, got {}", self.tol));
        }
        Ok(())
    }
}

/// Solver iterates. All matrices are `R x N`.
#[derive(Debug, Clone)]
pub struct AlmState {
    pub khat: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub e: Vec<DMatrix<f64>>,
    pub a: Vec<DMatrix<f64>>,
    pub b: DMatrix<f64>,
    pub mu: f64,
}

impl AlmState {
    /// `Khat` starts at the projected view mean, `Q = Khat`, everything
    /// else at zero.
    pub fn init(k_list: &[DMatrix<f64>], cfg: &AlmConfig) -> Result<Self> {
        check_inputs(k_list)?;
        let m = k_list.len();
        let mean = k_list.iter().skip(1).fold(k_list[0].clone(), |acc, k| acc + k) / m as f64;
        let mu = match cfg.mu0 {
            Some(mu) => mu,
            None => {
                let s = math::spectral_norm(&mean);
                if s > 0.0 { 1.0 / s } else { 1.0 }
            }
        };
        let khat = project(&mean, cfg.constraint)?;
        let zeros = DMatrix::zeros(mean.nrows(), mean.ncols());
        Ok(Self {
            q: khat.clone(),
            khat,
            e: vec![zeros.clone(); m],
            a: vec![zeros.clone(); m],
            b: zeros,
            mu,
        })
    }
}

fn check_inputs(k_list: &[DMatrix<f64>]) -> Result<()> {
    let Some(first) = k_list.first() else {
        return invalid("recovery needs at least one view");
    };
    for (m, k) in k_list.iter().enumerate() {
        if k.shape() != first.shape() {
            return invalid(format!("view {m} is {:?}, view 0 is {:?}", k.shape(), first.shape()));
        }
        math::ensure_finite(k, &format!("kernel matrix {m}"))?;
    }
    Ok(())
}

fn project(c: &DMatrix<f64>, mode: ConstraintMode) -> Result<DMatrix<f64>> {
    match mode {
        ConstraintMode::Nonneg => Ok(math::project_nonneg(c)),
        ConstraintMode::Simplex => math::project_columns_simplex(c),
    }
}

/// Per-iteration trace of the solver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlmDiagnostics {
    /// `max_m ||Khat + E_m - K_m||_F / ||K_m||_F`.
    pub recon_residual: Vec<f64>,
    /// `||Khat - Q||_F / ||Khat||_F`.
    pub coupling_residual: Vec<f64>,
    /// `alpha ||Q||_* + lambda sum_m ||E_m||`.
    pub objective: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl AlmDiagnostics {
    pub fn final_residual(&self) -> f64 {
        match (self.recon_residual.last(), self.coupling_residual.last()) {
            (Some(a), Some(b)) => a.max(*b),
            _ => f64::INFINITY,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,recon_residual,coupling_residual,objective,mu\n");
        for i in 0..self.iterations {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                i + 1,
                self.recon_residual[i],
                self.coupling_residual[i],
                self.objective[i],
                self.mu[i]
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub khat: DMatrix<f64>,
    pub e: Vec<DMatrix<f64>>,
    pub diagnostics: AlmDiagnostics,
}

pub fn recover(k_list: &[DMatrix<f64>], cfg: &AlmConfig) -> Result<Recovery> {
    cfg.validate()?;
    let mut state = AlmState::init(k_list, cfg)?;
    let norms: Vec<f64> = k_list.iter().map(|k| k.norm().max(f64::MIN_POSITIVE)).collect();
    let mut diag = AlmDiagnostics::default();

    for _ in 0..cfg.max_iters {
        let (q, q_nuclear) = q_step(&state, cfg)?;
        state.q = q;
        let e = par::map_range(k_list.len(), |m| update_e(&state, k_list, cfg, m));
        state.e = e.into_iter().collect::<Result<Vec<_>>>()?;
        state.khat = update_khat(&state, k_list, cfg)?;

        let recon = (0..k_list.len())
            .map(|m| (&state.khat + &state.e[m] - &k_list[m]).norm() / norms[m])
            .fold(0.0, f64::max);
        let kn = state.khat.norm();
        let gap = (&state.khat - &state.q).norm();
        let coupling = if kn > 0.0 { gap / kn } else { gap };
        let l21: f64 = state.e.iter().map(|e| penalty(e, cfg.shrink)).sum();
        diag.recon_residual.push(recon);
        diag.coupling_residual.push(coupling);
        diag.objective.push(cfg.alpha * q_nuclear + cfg.lambda * l21);
        diag.mu.push(state.mu);
        diag.iterations += 1;

        if recon < cfg.tol && coupling < cfg.tol {
            diag.converged = true;
            break;
        }
        update_multipliers(&mut state, k_list, cfg);
    }

    Ok(Recovery { khat: state.khat, e: state.e, diagnostics: diag })
}

fn penalty(e: &DMatrix<f64>, mode: ShrinkMode) -> f64 {
    match mode {
        ShrinkMode::ColumnL21 => math::l21_norm(e),
        ShrinkMode::Elementwise => e.iter().map(|v| v.abs()).sum(),
    }
}

/// Argument and threshold of the SVT in the Q step.
fn q_target(state: &AlmState, cfg: &AlmConfig) -> (DMatrix<f64>, f64) {
    match cfg.q_step {
        QStep::Exact => (&state.khat + &state.b / state.mu, cfg.alpha / state.mu),
        QStep::Scaled => {
            let s = state.mu * cfg.alpha;
            (&state.khat + &state.b / s, 1.0 / s)
        }
    }
}

pub fn update_q(state: &AlmState, cfg: &AlmConfig) -> Result<DMatrix<f64>> {
    Ok(q_step(state, cfg)?.0)
}

fn q_step(state: &AlmState, cfg: &AlmConfig) -> Result<(DMatrix<f64>, f64)> {
    let (target, tau) = q_target(state, cfg);
    math::svt_nuclear(&target, tau, cfg.svt_backend)
}

pub fn update_e(state: &AlmState, k_list: &[DMatrix<f64>], cfg: &AlmConfig, m: usize) -> Result<DMatrix<f64>> {
    if m >= k_list.len() {
        return invalid(format!("view index {m} out of range for {} views", k_list.len()));
    }
    let residual = &k_list[m] - &state.khat - &state.a[m] / state.mu;
    let kappa = cfg.lambda / state.mu;
    match cfg.shrink {
        ShrinkMode::ColumnL21 => math::col_l21_prox(&residual, kappa),
        ShrinkMode::Elementwise => math::shrink_elementwise(&residual, kappa),
    }
}

/// The unconstrained minimizer `C` of the Khat subproblem.
pub fn khat_target(state: &AlmState, k_list: &[DMatrix<f64>], cfg: &AlmConfig) -> DMatrix<f64> {
    let mu = state.mu;
    let mut c = &state.q - &state.b / mu;
    for (m, k) in k_list.iter().enumerate() {
        c += k - &state.e[m] - &state.a[m] / mu;
    }
    let denom = match cfg.average {
        KhatAverage::ExactMinimizer => k_list.len() + 1,
        KhatAverage::ViewCount => k_list.len(),
    };
    c / denom as f64
}

pub fn update_khat(state: &AlmState, k_list: &[DMatrix<f64>], cfg: &AlmConfig) -> Result<DMatrix<f64>> {
    project(&khat_target(state, k_list, cfg), cfg.constraint)
}

pub fn update_multipliers(state: &mut AlmState, k_list: &[DMatrix<f64>], cfg: &AlmConfig) {
    let mu = state.mu;
    for (m, k) in k_list.iter().enumerate() {
        state.a[m] += (&state.khat + &state.e[m] - k) * mu;
    }
    state.b += (&state.khat - &state.q) * mu;
    state.mu = (mu * cfg.rho).min(cfg.mu_max);
}

/// Objective value of a candidate solution (no constraint terms).
pub fn objective(khat: &DMatrix<f64>, e: &[DMatrix<f64>], cfg: &AlmConfig) -> Result<f64> {
    let nuclear = math::nuclear_norm(khat)?;
    Ok(cfg.alpha * nuclear + cfg.lambda * e.iter().map(|x| penalty(x, cfg.shrink)).sum::<f64>())
}

/// Rejects solver output that went non-finite.
pub fn check_recovery(rec: &Recovery) -> Result<()> {
    if rec.khat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure(format!(
            "recovery diverged after {} iterations",
            rec.diagnostics.iterations
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    fn state_for(k_list: &[DMatrix<f64>], seed: u64) -> AlmState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = k_list[0].shape();
        let cfg = AlmConfig { mu0: Some(1.0), ..Default::default() };
        let mut s = AlmState::init(k_list, &cfg).unwrap();
        s.q = rand_mat(r, c, &mut rng);
        s.b = rand_mat(r, c, &mut rng);
        for m in 0..k_list.len() {
            s.e[m] = rand_mat(r, c, &mut rng) * 0.1;
            s.a[m] = rand_mat(r, c, &mut rng);
        }
        s.mu = 2.0;
        s
    }

    #[test]
    fn q_step_on_diagonal() {
        let k = DMatrix::from_fn(2, 3, |r, c| if r == c { [3.0, 1.0][r] } else { 0.0 });
        let cfg = AlmConfig { alpha: 1.0, mu0: Some(1.0), ..Default::default() };
        let state = AlmState::init(&[k], &cfg).unwrap();
        let q = update_q(&state, &cfg).unwrap();
        let sv = math::singular_values(&q).unwrap();
        assert!((sv[0] - 2.0).abs() < 1e-12 && sv[1].abs() < 1e-12);
    }

    #[test]
    fn q_step_vanishing_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = rand_mat(4, 6, &mut rng).abs();
        let cfg = AlmConfig { alpha: 1.0, mu0: Some(1e9), ..Default::default() };
        let mut state = AlmState::init(&[k], &cfg).unwrap();
        state.b = rand_mat(4, 6, &mut rng);
        let q = update_q(&state, &cfg).unwrap();
        assert!((q - (&state.khat + &state.b / state.mu)).amax() < 1e-7);
    }

    #[test]
    fn e_step_dead_zone_and_no_penalty() {
        let k = DMatrix::from_element(3, 2, 0.01);
        let cfg = AlmConfig { lambda: 1.0, mu0: Some(1.0), ..Default::default() };
        let mut state = AlmState::init(&[k.clone()], &cfg).unwrap();
        state.khat = DMatrix::zeros(3, 2);
        assert_eq!(update_e(&state, &[k.clone()], &cfg, 0).unwrap().amax(), 0.0);
        let free = AlmConfig { lambda: 0.0, ..cfg };
        assert_eq!(update_e(&state, &[k.clone()], &free, 0).unwrap(), k);
        assert!(update_e(&state, &[k], &free, 1).is_err());
    }

    #[test]
    fn khat_fixed_point_and_clipping() {
        let k = DMatrix::from_element(2, 3, 0.7);
        let cfg = AlmConfig::default();
        let state = AlmState::init(&[k.clone(), k.clone()], &cfg).unwrap();
        let next = update_khat(&state, &[k.clone(), k.clone()], &cfg).unwrap();
        assert!((next - &k).amax() < 1e-15);

        let mut neg = state.clone();
        neg.q = DMatrix::from_element(2, 3, -10.0);
        let clipped = update_khat(&neg, &[k.clone(), k], &cfg).unwrap();
        assert!(clipped.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simplex_constraint_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ks: Vec<_> = (0..2).map(|_| rand_mat(5, 8, &mut rng)).collect();
        let cfg = AlmConfig { constraint: ConstraintMode::Simplex, ..Default::default() };
        let state = state_for(&ks, 1);
        let kh = update_khat(&state, &ks, &cfg).unwrap();
        for col in kh.column_iter() {
            assert!((col.sum() - 1.0).abs() < 1e-9 && col.min() >= 0.0);
        }
    }

    #[test]
    fn multipliers_feasible_and_cap() {
        let k = DMatrix::from_element(2, 2, 0.5);
        let cfg = AlmConfig { mu0: Some(1.0), ..Default::default() };
        let mut state = AlmState::init(&[k.clone()], &cfg).unwrap();
        update_multipliers(&mut state, &[k.clone()], &cfg);
        assert_eq!(state.a[0].amax(), 0.0);
        assert_eq!(state.b.amax(), 0.0);
        assert!((state.mu - 1.3).abs() < 1e-15);
        state.mu = cfg.mu_max;
        update_multipliers(&mut state, &[k], &cfg);
        assert_eq!(state.mu, cfg.mu_max);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = DMatrix::zeros(2, 3);
        let b = DMatrix::zeros(3, 2);
        assert!(recover(&[a, b], &AlmConfig::default()).is_err());
        assert!(recover(&[], &AlmConfig::default()).is_err());
    }

    #[test]
    fn identical_rank_one_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = Uniform::new(0.1, 1.0).unwrap();
        let a = DMatrix::from_fn(20, 1, |_, _| u.sample(&mut rng));
        let b = DMatrix::from_fn(1, 60, |_, _| u.sample(&mut rng));
        let k = &a * &b;
        let cfg = AlmConfig { alpha: 1e-3, lambda: 1.0, ..Default::default() };
        let rec = recover(&[k.clone(), k.clone()], &cfg).unwrap();
        assert!(rec.diagnostics.converged);
        assert!((&rec.khat - &k).norm() / k.norm() < 1e-3);
        for e in &rec.e {
            assert!(e.norm() / k.norm() < 1e-3);
        }
    }

    #[test]
    fn huge_lambda_gives_no_error_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let k = rand_mat(6, 30, &mut rng).abs();
        let base = AlmConfig { mu0: Some(1.0), ..Default::default() };
        let cfg = AlmConfig { lambda: 1e7, ..base };
        let rec = recover(&[k.clone(), k.clone()], &cfg).unwrap();
        for e in &rec.e {
            assert!(e.norm() / k.norm() < 1e-6);
        }
    }

    #[test]
    fn converged_residual_below_tol() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = rand_mat(10, 40, &mut rng).abs();
        let k2 = &k + rand_mat(10, 40, &mut rng).abs() * 0.05;
        let rec = recover(&[k, k2], &AlmConfig::default()).unwrap();
        assert!(rec.diagnostics.converged);
        assert!(rec.diagnostics.final_residual() <= 1e-6);
        assert!(rec.khat.min() >= 0.0);
        assert_eq!(rec.diagnostics.to_csv().lines().count(), rec.diagnostics.iterations + 1);
    }
}
