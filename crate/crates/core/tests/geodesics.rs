use infogeo::geodesics::{
    isonormal_problem, rgauss_problem, vmf_problem, BaseSpace, FlightTime, GeodesicProblem, SpdBase, Termination,
};
use infogeo::model_rgauss::{default_eta_grid, RGaussModel};
use infogeo::model_vmf::VmfModel;
use infogeo::spd::{random_symmetric, spd_exp, SpdMatrix, SpdTangent};
use infogeo::warped::WarpProfile;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn p2_model() -> &'static RGaussModel {
    static MODEL: OnceLock<RGaussModel> = OnceLock::new();
    MODEL.get_or_init(|| RGaussModel::tabulated(2, &default_eta_grid(), 100_000, 11).unwrap())
}

/// Closed-form geodesic of `(2d dσ² + |dx|²)/σ²` through `(x0, σ0)` with
/// initial velocity `(u_σ, u)`.
fn hyperbolic_oracle(d: usize, x0: &[f64], s0: f64, u_sigma: f64, u: &[f64], t: f64) -> (f64, Vec<f64>) {
    let k = (2.0 * d as f64).sqrt();
    let uy: Vec<f64> = u.iter().map(|v| v / k).collect();
    let uy_norm = uy.iter().map(|v| v * v).sum::<f64>().sqrt();
    let speed = (u_sigma * u_sigma + uy_norm * uy_norm).sqrt() / s0;
    let s = speed * t;
    if uy_norm == 0.0 {
        return (s0 * (u_sigma.signum() * s).exp(), x0.to_vec());
    }
    let th0 = (-u_sigma / (s0 * speed)).atanh();
    let radius = s0 * th0.cosh();
    let wc = -radius * th0.tanh();
    let sigma = radius / (s + th0).cosh();
    let w = wc + radius * (s + th0).tanh();
    let x = x0.iter().zip(&uy).map(|(a, e)| a + k * w * e / uy_norm).collect();
    (sigma, x)
}

#[test]
fn isonormal_matches_hyperbolic_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [1usize, 2, 3] {
        for _ in 0..5 {
            let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s0 = rng.random_range(0.5..2.0);
            let us = rng.random_range(-0.5..0.5);
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let prob = isonormal_problem(x0.clone(), s0, us, u.clone()).unwrap();
            let path = prob.solve(1.0, 10).unwrap();
            assert_eq!(path.termination, Termination::Completed);
            for smp in &path.samples {
                let (s, x) = hyperbolic_oracle(d, &x0, s0, us, &u, smp.t);
                assert!((smp.sigma - s).abs() < 1e-6, "sigma {} vs {}", smp.sigma, s);
                for (a, b) in smp.point.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn vertical_isonormal_is_exponential() {
    let prob = isonormal_problem(vec![0.3, -0.2], 1.0, 0.5, vec![0.0, 0.0]).unwrap();
    let path = prob.solve(2.0, 8).unwrap();
    let speed = 0.5;
    for s in &path.samples {
        assert!((s.sigma - (speed * s.t).exp()).abs() < 1e-8);
        assert_eq!(s.point, vec![0.3, -0.2]);
        // r is affine in t on vertical geodesics
        assert!((s.r - 2.0 * speed * s.t).abs() < 1e-7);
    }
}

#[test]
fn vmf_conservation_and_reversal() {
    let model = VmfModel::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..6 {
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let prob = vmf_problem(&model, &z, &u).unwrap();
        let path = prob.solve(1.0, 1000).unwrap();
        assert_eq!(path.termination, Termination::Completed);
        assert!(path.drift.energy_identity < 1e-8);
        assert!(path.drift.energy_fd.unwrap() < 1e-6);
        assert!(path.drift.c_fd.as_ref().unwrap()[0] < 1e-6);
        let back = prob.reversed(&path).unwrap().solve(1.0, 10).unwrap();
        let end = back.samples.last().unwrap();
        assert!((end.sigma - prob.sigma0).abs() < 1e-7);
        assert!(prob.base.distance(&end.point, &prob.x0) < 1e-7);
    }
}

#[test]
fn vmf_radial_line_through_origin() {
    let model = VmfModel::new(3).unwrap();
    // Start at eta = 0.5 heading inward along the radial direction.
    let z = [0.5, 0.0, 0.0];
    let u = [-1.0, 0.0, 0.0];
    let prob = vmf_problem(&model, &z, &u).unwrap();
    assert!(prob.is_vertical());
    let path = prob.solve(1.0, 4).unwrap();
    let last = path.samples.last().unwrap();
    assert_eq!(path.termination, Termination::Completed);
    assert!(last.point[0] < 0.0, "crossed to the antipodal direction");
}

fn p2_case(rng: &mut ChaCha8Rng) -> GeodesicProblem<infogeo::model_rgauss::RGaussProfile, SpdBase> {
    let x0 = spd_exp(&SpdMatrix::identity(2), &random_symmetric(rng, 2).scale(0.5)).unwrap();
    let u = random_symmetric(rng, 2).scale(0.3);
    let s0 = rng.random_range(0.8..1.5);
    let us = rng.random_range(-0.1..0.1);
    rgauss_problem(p2_model(), x0, s0, us, &u).unwrap()
}

#[test]
fn rgauss_conservation_and_reversal() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..6 {
        let prob = p2_case(&mut rng);
        let path = prob.solve(1.0, 1000).unwrap();
        assert_eq!(path.termination, Termination::Completed);
        assert!(path.drift.energy_identity < 1e-8, "{:?}", path.drift);
        assert!(path.drift.energy_fd.unwrap() < 1e-6, "{:?}", path.drift);
        for &c in path.drift.c_fd.as_ref().unwrap() {
            assert!(c < 1e-6, "{:?} {:?}", path.drift, path.conserved);
        }
        let back = prob.reversed(&path).unwrap().solve(1.0, 10).unwrap();
        let end = back.samples.last().unwrap();
        assert!((end.sigma - prob.sigma0).abs() < 1e-7);
        assert!(prob.base.distance(&end.point, &prob.x0) < 1e-7);
    }
}

#[test]
fn time_of_flight_agrees_with_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..4 {
        let mut prob = p2_case(&mut rng);
        prob.u_sigma = 0.3;
        let path = prob.solve(0.5, 50).unwrap();
        assert!(path.samples.windows(2).all(|w| w[1].sigma > w[0].sigma), "first arrival must be at t = 0.5");
        let end = path.samples.last().unwrap();
        let tof = prob.time_of_flight(end.sigma).unwrap().finite().unwrap();
        assert!((tof - 0.5).abs() < 1e-6, "{tof}");
    }
}

#[test]
fn time_of_flight_through_turning_point() {
    // Strong log-determinant motion pushes σ back down after it rises.
    let x0 = SpdMatrix::identity(2);
    let u = SpdTangent(DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 1.5]));
    let prob = rgauss_problem(p2_model(), x0, 1.0, 0.3, &u).unwrap();
    let path = prob.solve(1.5, 150).unwrap();
    let peak = path.samples.iter().map(|s| s.sigma).fold(0.0, f64::max);
    let end = path.samples.last().unwrap();
    assert!(peak > prob.sigma0 && end.sigma < prob.sigma0, "peak {peak}, end {}", end.sigma);
    let tof = prob.time_of_flight(end.sigma).unwrap().finite().unwrap();
    assert!((tof - 1.5).abs() < 1e-6, "{tof}");
    // A target above the turning point is unreachable.
    assert!(prob.time_of_flight(peak * 1.01).is_err());
}

#[test]
fn isonormal_flight_to_infinity_diverges() {
    let prob = isonormal_problem(vec![0.0], 1.0, 1.0, vec![0.0]).unwrap();
    assert_eq!(prob.time_of_flight(f64::INFINITY).unwrap(), FlightTime::Divergent);
    let t = prob.time_of_flight(std::f64::consts::E).unwrap().finite().unwrap();
    // σ = e^{t/√2}·... for d = 1: speed of r is √2, r = √2 ln σ
    assert!((t - 1.0).abs() < 1e-8);
}

#[test]
fn escape_is_reported_with_partial_output() {
    let prob = isonormal_problem(vec![0.0], 1.0, -1.0, vec![0.0]).unwrap();
    // σ = e^{-t}: reaches 1e-8 near t = 18.4
    let path = prob.solve(40.0, 40).unwrap();
    match path.termination {
        Termination::Escaped { t, .. } => assert!(t > 18.0 && t < 19.0, "{t}"),
        Termination::Completed => panic!("expected escape"),
    }
    assert!(path.samples.len() > 10 && path.samples.len() < 41);
    let csv = path.to_csv(&prob.base);
    assert!(csv.starts_with("t,sigma,r,x0\n"));
}

#[test]
fn mismatched_blocks_are_rejected() {
    let p = infogeo::warped::IsoNormalProfile::new(2).unwrap();
    let r = GeodesicProblem::new(p, infogeo::geodesics::Euclidean { d: 2 }, vec![0.0; 2], 1.0, 0.0, vec![]);
    assert!(r.is_err());
    assert!(p.num_blocks() == 1);
}

#[test]
fn second_order_residual_on_interior_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let prob = p2_case(&mut rng);
    let path = prob.solve(1.0, 400).unwrap();
    let h = 1.0 / 400.0;
    let p = &prob.profile;
    for k in (20..380).step_by(20) {
        let s = &path.samples;
        let rdd = (s[k + 1].r - 2.0 * s[k].r + s[k - 1].r) / (h * h);
        let sigma = s[k].sigma;
        let a = p.alpha(sigma);
        let mut rhs = 0.0;
        for (q, c) in path.conserved.c.iter().enumerate() {
            let b = p.beta(q, sigma);
            let db_dr = p.beta_prime(q, sigma).unwrap() / a;
            rhs += b * db_dr * c / b.powi(4);
        }
        assert!((rdd - rhs).abs() <= 1e-4 * rhs.abs().max(1e-3), "k={k}: {rdd} vs {rhs}");
    }
}

#[test]
fn vertical_path_length_is_vertical_distance() {
    let model = VmfModel::new(4).unwrap();
    let prob = vmf_problem(&model, &[0.0, 2.0, 0.0, 0.0], &[0.0, 1.5, 0.0, 0.0]).unwrap();
    let path = prob.solve(2.0, 4).unwrap();
    for s in &path.samples {
        let d = infogeo::warped::vertical_distance(&prob.profile, prob.sigma0, s.sigma).unwrap();
        assert!((s.r - d).abs() < 1e-8 * d.abs().max(1.0));
    }
    assert!(path.drift.energy_identity < 1e-10);
}

#[test]
fn vmf_reaches_origin_in_finite_time() {
    let model = VmfModel::new(3).unwrap();
    let prob = vmf_problem(&model, &[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]).unwrap();
    let t0 = prob.time_of_flight(0.0).unwrap().finite().expect("finite");
    let r = infogeo::warped::vertical_distance(&prob.profile, 0.0, 1.0).unwrap();
    // |ṙ| = α(1)·|u_σ| on a vertical geodesic
    assert!((t0 - r / prob.profile.alpha(1.0)).abs() < 1e-8);
}

#[test]
fn isonormal_vertical_ends_are_at_infinite_time() {
    let up = isonormal_problem(vec![0.0, 0.0], 1.0, 1.0, vec![0.0, 0.0]).unwrap();
    let down = isonormal_problem(vec![0.0, 0.0], 1.0, -1.0, vec![0.0, 0.0]).unwrap();
    assert_eq!(up.time_of_flight(f64::INFINITY).unwrap(), FlightTime::Divergent);
    assert_eq!(down.time_of_flight(0.0).unwrap(), FlightTime::Divergent);
}

#[test]
fn conserved_quantities_of_vertical_data() {
    let prob = isonormal_problem(vec![1.0], 2.0, 0.5, vec![0.0]).unwrap();
    let c = prob.conserved_quantities().unwrap();
    assert_eq!(c.c, vec![0.0]);
    assert!((c.energy - (2.0f64.sqrt() / 2.0 * 0.5).powi(2)).abs() < 1e-15);
}

#[test]
fn non_vertical_vmf_turns_back_before_origin() {
    let vmf = VmfModel::new(3).unwrap();
    let prob = vmf_problem(&vmf, &[0.0, 0.0, 1.0], &[0.2, 0.0, -3.0]).unwrap();
    let path = prob.solve(2.0, 400).unwrap();
    assert_eq!(path.termination, Termination::Completed);
    let (k, low) = path
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| (k, s.sigma))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    assert!(low > 0.0 && low < 0.5, "closest approach {low}");
    assert!(k > 0 && k < path.samples.len() - 1);
    assert!(path.samples.last().unwrap().sigma > 2.0 * low);
}
