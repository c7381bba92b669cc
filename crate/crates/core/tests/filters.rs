use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use rbpomdp::filters::{
    ess, rbpf_update, sirpf_update, systematic_indices, ukf_analytical_update, RbBelief, SirBelief, UkfParams,
};
use rbpomdp::quadrature::GaussianStat;
use rbpomdp::testbed::LinearGaussianModel;
use rbpomdp::{ActionId, PomdpModel, RbFactoredModel, RngStream};

/// Textbook Kalman step for the tractable block given the `s^π` path.
struct KfStep {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    loglik: f64,
    s: DMatrix<f64>,
}

fn kf_step(
    m: &LinearGaussianModel,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    s_pi_next: f64,
    a: usize,
    o: &DVector<f64>,
) -> KfStep {
    let mp = &m.a * mean + &m.b * s_pi_next + &m.controls[a];
    let pp = &m.a * cov * m.a.transpose() + &m.q;
    let s = &m.c * &pp * m.c.transpose() + &m.r;
    let s_inv = s.clone().try_inverse().unwrap();
    let nu = o - (&m.c * &mp + &m.d * s_pi_next);
    let k = &pp * m.c.transpose() * &s_inv;
    let mean = &mp + &k * &nu;
    let cov = &pp - &k * &m.c * &pp;
    let dim = o.len() as f64;
    let quad = (nu.transpose() * &s_inv * &nu)[(0, 0)];
    let loglik = -0.5 * (dim * (2.0 * std::f64::consts::PI).ln() + s.determinant().ln() + quad);
    KfStep { mean, cov, loglik, s }
}

fn sample_gaussian() -> GaussianStat {
    GaussianStat::new(
        DVector::from_vec(vec![0.4, -1.2]),
        DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.5]),
    )
    .unwrap()
}

#[test]
fn ukf_matches_kalman_on_linear_model() {
    let m = LinearGaussianModel::standard();
    let theta = sample_gaussian();
    let s_pi = DVector::from_element(1, 0.3);
    let s_pi_next = DVector::from_element(1, 0.45);
    let o = DVector::from_vec(vec![0.2, -0.9, 0.1]);
    for params in [
        UkfParams::default(),
        UkfParams {
            alpha: 1.0,
            beta: 0.0,
            kappa: 1.0,
        },
    ] {
        for a in 0..2 {
            let upd = ukf_analytical_update(&theta, &s_pi, &s_pi_next, &o, ActionId(a), &m, &params).unwrap();
            let kf = kf_step(&m, &theta.mean, &theta.cov, 0.45, a, &o);
            assert!((&upd.theta.mean - &kf.mean).amax() < 1e-8);
            assert!((&upd.theta.cov - &kf.cov).amax() < 1e-8);
            assert!((&upd.innovation_cov - &kf.s).amax() < 1e-8);
            assert!((upd.loglik - kf.loglik).abs() < 1e-8);
        }
    }
}

fn identity_model() -> LinearGaussianModel {
    LinearGaussianModel {
        pi_noise_var: 0.0,
        a: DMatrix::identity(2, 2),
        b: DVector::zeros(2),
        q: DMatrix::zeros(2, 2),
        c: DMatrix::identity(2, 2),
        d: DVector::zeros(2),
        r: DMatrix::identity(2, 2),
        controls: vec![DVector::zeros(2)],
        gamma: 0.9,
    }
}

#[test]
fn conjugate_gaussian_update() {
    let m = identity_model();
    let prior = GaussianStat::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
    let z = DVector::zeros(1);
    let o = DVector::from_vec(vec![1.0, 1.0]);
    let upd = ukf_analytical_update(&prior, &z, &z, &o, ActionId(0), &m, &UkfParams::default()).unwrap();
    assert!((&upd.theta.mean - DVector::from_vec(vec![0.5, 0.5])).amax() < 1e-12);
    assert!((&upd.theta.cov - DMatrix::identity(2, 2) * 0.5).amax() < 1e-12);
    assert!((&upd.innovation_cov - DMatrix::identity(2, 2) * 2.0).amax() < 1e-12);
}

#[test]
fn zero_innovation_loglik_is_the_normalizer() {
    let m = identity_model();
    let prior = GaussianStat::new(DVector::from_vec(vec![0.3, -0.7]), DMatrix::identity(2, 2) * 0.25).unwrap();
    let z = DVector::zeros(1);
    let o = prior.mean.clone();
    let upd = ukf_analytical_update(&prior, &z, &z, &o, ActionId(0), &m, &UkfParams::default()).unwrap();
    let det_s = 1.25f64 * 1.25;
    let expect = -0.5 * (2.0 * (2.0 * std::f64::consts::PI).ln() + det_s.ln());
    assert!((upd.loglik - expect).abs() < 1e-12);
}

#[test]
fn ukf_rejects_bad_parameters() {
    for p in [
        UkfParams {
            alpha: 0.0,
            ..Default::default()
        },
        UkfParams {
            alpha: 1.5,
            ..Default::default()
        },
        UkfParams {
            beta: -1.0,
            ..Default::default()
        },
    ] {
        assert!(p.validate().is_err());
    }
}

#[test]
fn singular_innovation_is_a_numerical_error() {
    let mut m = identity_model();
    m.r = DMatrix::zeros(2, 2);
    let prior = GaussianStat::dirac(DVector::zeros(2));
    let z = DVector::zeros(1);
    let r = ukf_analytical_update(
        &prior,
        &z,
        &z,
        &DVector::zeros(2),
        ActionId(0),
        &m,
        &UkfParams::default(),
    );
    assert!(matches!(r, Err(rbpomdp::Error::Numerical { .. })));
}

fn initial_rb(n: usize, threshold: f64, rng: &mut RngStream) -> RbBelief {
    let theta = GaussianStat::new(DVector::zeros(2), DMatrix::identity(2, 2) * 0.5).unwrap();
    let particles = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (DVector::from_element(1, 0.3 * z), theta.clone())
        })
        .collect();
    RbBelief::new(particles, threshold, UkfParams::default()).unwrap()
}

/// Tracks each particle's `s^π` path through the RBPF and re-runs an
/// independent Kalman filter along it.
#[test]
fn rbpf_matches_per_particle_kalman_over_fifty_steps() {
    let m = LinearGaussianModel::standard();
    let mut rng = RngStream::new(5);
    let mut belief = initial_rb(20, 1e-9, &mut rng);
    let mut kf: Vec<(DVector<f64>, DMatrix<f64>, f64)> = belief
        .particles
        .iter()
        .map(|p| (p.theta.mean.clone(), p.theta.cov.clone(), 0.0))
        .collect();
    let mut truth = DVector::from_vec(vec![0.0, 0.2, -0.1]);
    let mut world = RngStream::new(6);
    for t in 0..50 {
        let a = ActionId(t % 2);
        truth = m.sample_transition(&truth, a, &mut world);
        let o = m.sample_observation(&truth, a, &mut world).unwrap();
        let report = rbpf_update(&mut belief, a, &o, &m, &mut rng).unwrap();
        assert!(!report.resampled);
        for (p, (mean, cov, lw)) in belief.particles.iter().zip(kf.iter_mut()) {
            let step = kf_step(&m, mean, cov, p.s_pi[0], a.0, &o);
            *mean = step.mean;
            *cov = step.cov;
            *lw += step.loglik;
            assert!((&p.theta.mean - &*mean).amax() < 1e-6);
            assert!((&p.theta.cov - &*cov).amax() < 1e-6);
        }
        let max = kf.iter().map(|k| k.2).fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = kf.iter().map(|k| (k.2 - max).exp()).sum();
        for (p, k) in belief.particles.iter().zip(&kf) {
            assert!((p.weight - (k.2 - max).exp() / total).abs() < 1e-6);
        }
    }
}

#[test]
fn single_particle_rbpf_is_a_kalman_filter_with_unit_weight() {
    let m = LinearGaussianModel::standard();
    let mut rng = RngStream::new(9);
    let mut belief = initial_rb(1, 0.5, &mut rng);
    let o = DVector::from_vec(vec![0.5, 0.1, -0.3]);
    let r = rbpf_update(&mut belief, ActionId(0), &o, &m, &mut rng).unwrap();
    assert_eq!(belief.particles[0].weight, 1.0);
    assert_eq!(r.ess, 1.0);
    assert!(!r.resampled);
}

#[test]
fn resampling_follows_threshold() {
    let m = LinearGaussianModel::standard();
    let o = DVector::from_vec(vec![3.0, -2.0, 1.0]);
    // a wide spread of s^π makes the weights uneven
    let mut rng = RngStream::new(1);
    let mut b = initial_rb(100, 1.0, &mut rng);
    for (i, p) in b.particles.iter_mut().enumerate() {
        p.s_pi[0] = -5.0 + i as f64 * 0.1;
    }
    let mut low = b.clone();
    low.resample_threshold = 1e-9;
    let r_hi = rbpf_update(&mut b, ActionId(0), &o, &m, &mut RngStream::new(2)).unwrap();
    let r_lo = rbpf_update(&mut low, ActionId(0), &o, &m, &mut RngStream::new(2)).unwrap();
    assert!(r_hi.ess < 100.0);
    assert!(r_hi.resampled);
    assert!(b.particles.iter().all(|p| (p.weight - 0.01).abs() < 1e-15));
    assert!(!r_lo.resampled);
}

#[test]
fn rbpf_error_leaves_belief_untouched() {
    let m = LinearGaussianModel::standard();
    let mut rng = RngStream::new(1);
    let mut b = initial_rb(5, 0.5, &mut rng);
    let before = b.clone();
    let bad = DVector::from_vec(vec![1.0]);
    assert!(rbpf_update(&mut b, ActionId(0), &bad, &m, &mut rng).is_err());
    assert_eq!(b, before);
}

#[test]
fn sir_zero_noise_particles_follow_dynamics() {
    let mut m = LinearGaussianModel::standard();
    m.pi_noise_var = 0.0;
    m.q = DMatrix::zeros(2, 2);
    let s0 = DVector::from_vec(vec![0.5, 1.0, -1.0]);
    let mut b = SirBelief::new(vec![s0.clone(); 10], 1e-9, DVector::zeros(3)).unwrap();
    let o = DVector::from_vec(vec![0.0, 0.0, 0.0]);
    sirpf_update(&mut b, ActionId(1), &o, &m, &mut RngStream::new(0)).unwrap();
    let expect = m.joint_transition() * &s0 + m.control(ActionId(1));
    for s in &b.particles {
        assert!((s - &expect).amax() < 1e-12);
    }
}

#[test]
fn sir_without_jitter_duplicates_on_resample() {
    let m = LinearGaussianModel::standard();
    let mut rng = RngStream::new(4);
    let particles = (0..50)
        .map(|i| DVector::from_vec(vec![i as f64 * 0.2 - 5.0, 0.0, 0.0]))
        .collect();
    let mut b = SirBelief::new(particles, 1.0, DVector::zeros(3)).unwrap();
    let o = DVector::from_vec(vec![0.0, 0.0, 2.0]);
    let r = sirpf_update(&mut b, ActionId(0), &o, &m, &mut rng).unwrap();
    assert!(r.resampled);
    let mut distinct: Vec<&DVector<f64>> = Vec::new();
    for s in &b.particles {
        if !distinct.contains(&s) {
            distinct.push(s);
        }
    }
    assert!(distinct.len() < b.len());
}

/// Joint Kalman filter over `[s^π, s^α]`.
fn joint_kf(
    m: &LinearGaussianModel,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    a: ActionId,
    o: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let f = m.joint_transition();
    let h = m.joint_observation();
    let mp = &f * mean + m.control(a);
    let pp = &f * cov * f.transpose() + m.joint_noise();
    let s = &h * &pp * h.transpose() + &m.r;
    let k = &pp * h.transpose() * s.try_inverse().unwrap();
    let mean = &mp + &k * (o - &h * &mp);
    let cov = &pp - &k * &h * &pp;
    (mean, cov)
}

#[test]
fn sir_mean_within_three_standard_errors_of_kalman() {
    let m = LinearGaussianModel::standard();
    let n = 100_000;
    let mut rng = RngStream::new(21);
    let prior_cov = DMatrix::identity(3, 3) * 0.2;
    let particles = (0..n)
        .map(|_| {
            DVector::from_fn(3, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.2f64.sqrt() * z
            })
        })
        .collect();
    let mut b = SirBelief::new(particles, 1e-9, DVector::zeros(3)).unwrap();
    let mut mean = DVector::zeros(3);
    let mut cov = prior_cov;
    let mut truth = DVector::from_vec(vec![0.1, 0.3, -0.2]);
    let mut world = RngStream::new(22);
    for t in 0..3 {
        let a = ActionId(t % 2);
        truth = m.sample_transition(&truth, a, &mut world);
        let o = m.sample_observation(&truth, a, &mut world).unwrap();
        sirpf_update(&mut b, a, &o, &m, &mut rng).unwrap();
        (mean, cov) = joint_kf(&m, &mean, &cov, a, &o);
    }
    let ess = ess(&b.weights).unwrap();
    let est = b.mean();
    for i in 0..3 {
        let se = (cov[(i, i)] / ess).sqrt();
        assert!(
            (est[i] - mean[i]).abs() < 3.0 * se,
            "component {i}: {} vs {} (se {se})",
            est[i],
            mean[i]
        );
    }
}

#[test]
fn rbpf_is_deterministic_per_seed() {
    let m = LinearGaussianModel::standard();
    let run = || {
        let mut rng = RngStream::new(77);
        let mut b = initial_rb(30, 0.5, &mut rng);
        let o = DVector::from_vec(vec![0.5, 0.1, -0.3]);
        for _ in 0..5 {
            rbpf_update(&mut b, ActionId(1), &o, &m, &mut rng).unwrap();
        }
        b
    };
    assert_eq!(run(), run());
}

#[test]
fn rbpf_split_join_dimensions() {
    let m = LinearGaussianModel::standard();
    assert_eq!(m.pi_dim() + m.alpha_dim(), m.state_dim());
}

proptest! {
    #[test]
    fn ess_bounded_by_particle_count(raw in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-6);
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let e = ess(&w).unwrap();
        prop_assert!(e >= 1.0 - 1e-9 && e <= w.len() as f64 + 1e-9);
    }

    #[test]
    fn systematic_indices_sorted_and_in_range(raw in prop::collection::vec(0.0f64..1.0, 1..40), seed in any::<u64>()) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-6);
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let idx = systematic_indices(&w, &mut RngStream::new(seed));
        prop_assert_eq!(idx.len(), w.len());
        prop_assert!(idx.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(idx.iter().all(|&i| w[i] > 0.0));
    }

    #[test]
    fn rbpf_weights_stay_normalized(seed in any::<u64>(), o0 in -3.0f64..3.0, o1 in -3.0f64..3.0) {
        let m = LinearGaussianModel::standard();
        let mut rng = RngStream::new(seed);
        let mut b = initial_rb(25, 0.5, &mut rng);
        let o = DVector::from_vec(vec![o0, o1, 0.0]);
        for _ in 0..3 {
            let r = rbpf_update(&mut b, ActionId(0), &o, &m, &mut rng).unwrap();
            prop_assert!(r.ess >= 1.0 - 1e-9 && r.ess <= 25.0 + 1e-9);
        }
        let total: f64 = b.particles.iter().map(|p| p.weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for p in &b.particles {
            let eig = p.theta.cov.clone().symmetric_eigenvalues();
            prop_assert!(eig.min() > -1e-10);
        }
    }
}
