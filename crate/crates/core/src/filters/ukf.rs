use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, spd_factor};
use crate::model::{ActionId, Observation, RbFactoredModel};
use crate::quadrature::GaussianStat;

/// Sigma-point spread parameters of the scaled unscented transform.
///
/// Valid range: `1e-2 ≤ alpha ≤ 1`, `beta ≥ 0`, `kappa ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

struct SigmaWeights {
    /// `n + λ`
    spread: f64,
    mean0: f64,
    cov0: f64,
    rest: f64,
}

impl UkfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1e-2 && self.alpha <= 1.0) || self.beta < 0.0 || self.kappa < 0.0 {
            return Err(Error::Argument(format!("UKF parameters out of range: {self:?}")));
        }
        Ok(())
    }

    fn weights(&self, n: usize) -> SigmaWeights {
        let nf = n as f64;
        let spread = self.alpha * self.alpha * (nf + self.kappa);
        let lambda = spread - nf;
        SigmaWeights {
            spread,
            mean0: lambda / spread,
            cov0: lambda / spread + 1.0 - self.alpha * self.alpha + self.beta,
            rest: 0.5 / spread,
        }
    }
}

/// Posterior of one analytical (UKF) step.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticUpdate {
    pub theta: GaussianStat,
    /// `ln N(ν; 0, S)`, the innovation likelihood used to reweight.
    pub loglik: f64,
    pub innovation: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
}

fn sigma_points(g: &GaussianStat, spread: f64) -> Vec<DVector<f64>> {
    let n = g.dim();
    let l = psd_sqrt(&g.cov);
    let scale = spread.sqrt();
    let mut pts = Vec::with_capacity(2 * n + 1);
    pts.push(g.mean.clone());
    for sign in [1.0, -1.0] {
        for i in 0..n {
            let mut p = g.mean.clone();
            p.axpy(sign * scale, &l.column(i), 1.0);
            pts.push(p);
        }
    }
    pts
}

/// Unscented prediction of the tractable block through the conditional
/// dynamics given the `s^π` transition `s_pi → s_pi_next`.
pub fn ukf_predict<M: RbFactoredModel + ?Sized>(
    theta: &GaussianStat,
    s_pi: &DVector<f64>,
    s_pi_next: &DVector<f64>,
    a: ActionId,
    model: &M,
    params: &UkfParams,
) -> GaussianStat {
    let n = theta.dim();
    let w = params.weights(n);
    let pts: Vec<DVector<f64>> = sigma_points(theta, w.spread)
        .iter()
        .map(|x| model.tractable_dynamics(x, s_pi, s_pi_next, a))
        .collect();
    let mut mean = &pts[0] * w.mean0;
    for p in &pts[1..] {
        mean.axpy(w.rest, p, 1.0);
    }
    let mut cov = model.tractable_noise(s_pi, s_pi_next, a);
    let mut d = DVector::zeros(n);
    for (k, p) in pts.iter().enumerate() {
        d.copy_from(p);
        d -= &mean;
        let wc = if k == 0 { w.cov0 } else { w.rest };
        cov.ger(wc, &d, &d, 1.0);
    }
    symmetrize_in_place(&mut cov);
    GaussianStat::new_unchecked(mean, cov)
}

fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// One UKF predict/update cycle of a particle's tractable Gaussian.
///
/// Predicts through the conditional dynamics for the `s^π` move
/// `s_pi → s_pi_next`, then updates with observation `o` through
/// `h(·; s_pi_next)`. Returns the posterior and the innovation log-likelihood.
pub fn ukf_analytical_update<M: RbFactoredModel + ?Sized>(
    theta: &GaussianStat,
    s_pi: &DVector<f64>,
    s_pi_next: &DVector<f64>,
    o: &Observation,
    a: ActionId,
    model: &M,
    params: &UkfParams,
) -> Result<AnalyticUpdate> {
    if o.len() != model.obs_dim() {
        return Err(Error::Argument(format!(
            "observation has dimension {}, model expects {}",
            o.len(),
            model.obs_dim()
        )));
    }
    if theta.dim() != model.alpha_dim() {
        return Err(Error::Argument(format!(
            "tractable Gaussian has dimension {}, model expects {}",
            theta.dim(),
            model.alpha_dim()
        )));
    }
    let predicted = ukf_predict(theta, s_pi, s_pi_next, a, model, params);
    let n = predicted.dim();
    let w = params.weights(n);

    let xs = sigma_points(&predicted, w.spread);
    let zs: Vec<Observation> = xs.iter().map(|x| model.observe_tractable(x, s_pi_next)).collect();
    let wm = |k: usize| if k == 0 { w.mean0 } else { w.rest };
    let wc = |k: usize| if k == 0 { w.cov0 } else { w.rest };

    // mean taken through residuals about the central point so wrapped
    // components average correctly
    let mut z_hat = zs[0].clone();
    for (k, z) in zs.iter().enumerate().skip(1) {
        z_hat.axpy(wm(k), &model.observation_residual(z, &zs[0]), 1.0);
    }

    let mut s = model.observation_noise();
    let mut cross = DMatrix::zeros(n, o.len());
    let mut dx = DVector::zeros(n);
    for (k, (x, z)) in xs.iter().zip(&zs).enumerate() {
        let dz = model.observation_residual(z, &z_hat);
        dx.copy_from(x);
        dx -= &predicted.mean;
        s.ger(wc(k), &dz, &dz, 1.0);
        cross.ger(wc(k), &dx, &dz, 1.0);
    }
    symmetrize_in_place(&mut s);

    let (chol, log_det) =
        spd_factor(&s).map_err(|_| Error::numerical("innovation covariance is not invertible", &s))?;
    let innovation = model.observation_residual(o, &z_hat);
    // K = C S⁻¹, via S Kᵀ = Cᵀ
    let gain = chol.solve(&cross.transpose()).transpose();
    let mut mean = predicted.mean.clone();
    mean.gemv(1.0, &gain, &innovation, 1.0);
    let mut cov = predicted.cov.clone();
    cov.gemm(-1.0, &gain, &cross.transpose(), 1.0);
    symmetrize_in_place(&mut cov);

    let whitened = chol
        .l()
        .solve_lower_triangular(&innovation)
        .expect("triangular factor is invertible");
    let loglik = -0.5 * (o.len() as f64 * (2.0 * PI).ln() + log_det + whitened.norm_squared());

    Ok(AnalyticUpdate {
        theta: GaussianStat::new_unchecked(mean, cov),
        loglik,
        innovation,
        innovation_cov: s,
    })
}
