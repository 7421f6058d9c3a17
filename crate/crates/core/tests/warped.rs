use infogeo::model_vmf::VmfModel;
use infogeo::warped::{
    completeness_probe, curvatures, metric_eval, vertical_distance, CustomProfile, IsoNormalProfile,
    TangentDecomposition, VerticalCoordinate, WarpProfile,
};

fn romberg(f: impl Fn(f64) -> f64, a: f64, b: f64, levels: usize) -> f64 {
    let mut prev = vec![0.5 * (b - a) * (f(a) + f(b))];
    for k in 1..levels {
        let n = 1usize << k;
        let h = (b - a) / n as f64;
        let mid: f64 = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum();
        let mut row = vec![0.5 * prev[0] + h * mid];
        for j in 1..=k {
            let c = 4f64.powi(j as i32);
            row.push((c * row[j - 1] - prev[j - 1]) / (c - 1.0));
        }
        prev = row;
    }
    *prev.last().unwrap()
}

#[test]
fn vertical_distance_is_additive_and_signed() {
    let p = VmfModel::new(4).unwrap().profile();
    let (a, b, c) = (0.0, 1.3, 17.0);
    let ab = vertical_distance(&p, a, b).unwrap();
    let bc = vertical_distance(&p, b, c).unwrap();
    let ac = vertical_distance(&p, a, c).unwrap();
    assert!((ab + bc - ac).abs() < 1e-10 * ac);
    assert_eq!(vertical_distance(&p, c, b).unwrap(), -bc);
}

#[test]
fn vmf_vertical_distance_matches_romberg() {
    let model = VmfModel::new(3).unwrap();
    let p = model.profile();
    for &(a, b) in &[(0.0, 0.7), (0.5, 3.0), (2.0, 40.0)] {
        let reference = romberg(|s| p.alpha(s), a, b, 18);
        let v = vertical_distance(&p, a, b).unwrap();
        assert!((v - reference).abs() < 1e-9 * reference, "[{a}, {b}]: {v} vs {reference}");
    }
}

#[test]
fn isonormal_is_hyperbolic() {
    for d in 1..5 {
        let p = IsoNormalProfile::new(d).unwrap();
        for &s in &[0.01, 0.7, 3.0, 250.0] {
            let (ks, kr) = curvatures(&p, 0.0, s).unwrap();
            let k = -1.0 / (2.0 * d as f64);
            assert!((ks - k).abs() < 1e-12 && (kr - k).abs() < 1e-12);
        }
        let v = vertical_distance(&p, 1.0, std::f64::consts::E).unwrap();
        assert!((v - (2.0 * d as f64).sqrt()).abs() < 1e-10);
    }
}

#[test]
fn finite_differences_agree_with_analytic_vmf_derivatives() {
    for n in [2usize, 3, 5, 8] {
        let model = VmfModel::new(n).unwrap();
        let analytic = model.profile();
        // Same warping functions without derivative information.
        let fd = CustomProfile::new(
            move |s| analytic.alpha(s),
            vec![Box::new(move |s| analytic.beta(0, s))],
            vec![n - 1],
            "S",
        )
        .unwrap()
        .with_domain(0.0, f64::INFINITY);
        let mut eta = 0.5;
        while eta <= 50.0 {
            let (ks, kr) = analytic.curvatures(eta).unwrap();
            let (ks_fd, kr_fd) = curvatures(&fd, 1.0, eta).unwrap();
            assert!((ks - ks_fd).abs() < 1e-6 * ks.abs().max(1.0), "n={n} eta={eta}: {ks} vs {ks_fd}");
            assert!((kr - kr_fd).abs() < 1e-5 * kr.abs().max(1.0), "n={n} eta={eta}: {kr} vs {kr_fd}");
            eta *= 1.7;
        }
    }
}

#[test]
fn completeness_diagnostics() {
    let iso = completeness_probe(&IsoNormalProfile::new(2).unwrap(), 1.0, 1e6).unwrap();
    assert!(iso.upper_diverging && iso.lower_diverging);
    assert!((iso.upper_exponent + 1.0).abs() < 1e-8);
    let vmf = completeness_probe(&VmfModel::new(3).unwrap().profile(), 1.0, 1e4).unwrap();
    assert!(vmf.upper_diverging, "{vmf:?}");
    assert!(!vmf.lower_diverging, "the origin is at finite distance: {vmf:?}");
    assert!(vmf.lower_exponent.abs() < 0.05);
}

#[test]
fn metric_is_additive_over_blocks() {
    let p = CustomProfile::new(
        |s: f64| 1.0 + s,
        vec![Box::new(|s: f64| s), Box::new(|s: f64| s * s)],
        vec![1, 2],
        "R x R^2",
    )
    .unwrap();
    let full = metric_eval(&p, 2.0, &TangentDecomposition::new(0.5, vec![1.0, 3.0])).unwrap();
    assert!((full - (9.0 * 0.25 + 4.0 + 16.0 * 3.0)).abs() < 1e-12);
    assert!(metric_eval(&p, 2.0, &TangentDecomposition::new(0.5, vec![1.0])).is_err());
}

#[test]
fn vertical_coordinate_inverts() {
    let vc = VerticalCoordinate::build(VmfModel::new(3).unwrap().profile(), 0.0, 100.0, 40).unwrap();
    for &s in &[0.0, 1e-5, 0.3, 7.0, 99.0] {
        let r = vc.r(s).unwrap();
        let back = vc.sigma(r).unwrap();
        assert!((back - s).abs() <= 1e-9 * s.max(1e-6), "{s} -> {r} -> {back}");
    }
}
