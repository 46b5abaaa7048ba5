mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::*;
use num_complex::Complex64;
use specrecon::cauchy::{cauchy_data_of, CauchyData};
use specrecon::gl::{reconstruct_q, weyl_data, NormingSequence, WeylData};
use specrecon::sturm::{Grid, Potential};
use specrecon::Error;

/// RK4 for `S` together with `∫_0^x S²`: returns `(S(π), S'(π), ∫ S²)`.
fn rk4_norming(q: impl Fn(f64) -> Complex64, lambda: Complex64, steps: usize) -> (Complex64, Complex64, Complex64) {
    let h = PI / steps as f64;
    let f = |x: f64, s: [Complex64; 3]| [s[1], (q(x) - lambda) * s[0], s[0] * s[0]];
    let mut y = [r(0.0), r(1.0), r(0.0)];
    let add = |a: [Complex64; 3], b: [Complex64; 3], k: f64| [a[0] + b[0] * k, a[1] + b[1] * k, a[2] + b[2] * k];
    for i in 0..steps {
        let x = i as f64 * h;
        let k1 = f(x, y);
        let k2 = f(x + h / 2.0, add(y, k1, h / 2.0));
        let k3 = f(x + h / 2.0, add(y, k2, h / 2.0));
        let k4 = f(x + h, add(y, k3, h));
        for j in 0..3 {
            y[j] += (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0);
        }
    }
    (y[0], y[1], y[2])
}

fn cosine_data() -> &'static (CauchyData, WeylData) {
    static DATA: OnceLock<(CauchyData, WeylData)> = OnceLock::new();
    DATA.get_or_init(|| {
        let cd = cauchy_data_of(&preset("cosine 1", pi_grid()), 64).unwrap();
        let wd = weyl_data(&cd, 20).unwrap();
        (cd, wd)
    })
}

#[test]
fn zero_and_constant_potentials_have_closed_form_weyl_data() {
    for (shift, text) in [(0.0, "zero"), (1.0, "constant 1")] {
        let cd = cauchy_data_of(&preset(text, pi_grid()), 64).unwrap();
        let wd = weyl_data(&cd, 12).unwrap();
        assert!(wd.all_simple());
        for n in 1..=12 {
            let n2 = (n * n) as f64;
            assert!(rel(wd.theta[n - 1], r(n2 + shift)) < 1e-9, "{text}: θ_{n} = {}", wd.theta[n - 1]);
            assert!(rel(wd.residues[n - 1], r(2.0 * n2 / PI)) < 1e-6, "{text}: M_{n} = {}", wd.residues[n - 1]);
        }
    }
}

#[test]
fn cosine_poles_are_zeros_of_eta1() {
    let (cd, wd) = cosine_data();
    for t in &wd.theta {
        assert!(cd.eta(*t).0.norm() <= 1e-9, "η1({t}) = {}", cd.eta(*t).0);
    }
}

#[test]
fn residues_match_norming_oracle() {
    // M_n = S'(π, θ_n)² / ∫ S(x, θ_n)², and 1/M_n is the norming constant.
    let (_, wd) = cosine_data();
    let alpha = NormingSequence::from_weyl(wd).unwrap().alpha;
    for n in [1usize, 2, 5, 10] {
        let (s, ds, int) = rk4_norming(|x| r(x.cos()), wd.theta[n - 1], 8000);
        assert!(s.norm() < 1e-8);
        let oracle = ds * ds / int;
        assert!(rel(wd.residues[n - 1], oracle) < 1e-6, "M_{n}: {} vs {oracle}", wd.residues[n - 1]);
        // The opposite sign convention would give -1/M_n.
        assert!(rel(alpha[n - 1], int / (ds * ds)) < 1e-6);
        assert!(rel(-alpha[n - 1], int / (ds * ds)) > 1.0);
    }
}

#[test]
fn separating_circle_of_simple_data() {
    let (_, wd) = cosine_data();
    assert_eq!(wd.n1, 2);
    let expect = 0.5 * (wd.theta[0].norm() + wd.theta[1].norm());
    assert!((wd.gamma0_radius - expect).abs() < 1e-12);
}

fn reconstruction_error(q: &Potential, count: usize) -> f64 {
    let cd = cauchy_data_of(q, 64).unwrap();
    let wd = weyl_data(&cd, count).unwrap();
    let rec = reconstruct_q(&wd, cd.omega(), *q.grid()).unwrap();
    rec.l2_distance(q).unwrap()
}

#[test]
fn reconstructs_constant_potential() {
    let err = reconstruction_error(&preset("constant 1", pi_grid()), 40);
    assert!(err <= 5e-3, "{err:e}");
}

#[test]
fn reconstructs_complex_cosine() {
    let q = from_fn(pi_grid(), |x| c(1.0, 0.5) * x.cos());
    let err = reconstruction_error(&q, 40);
    assert!(err <= 2e-2, "{err:e}");
}

#[test]
fn reconstruction_converges_with_pole_count() {
    let q = from_fn(pi_grid(), |x| r(x.cos() + 0.3 * x));
    let errs: Vec<f64> = [10, 20, 40].iter().map(|&k| reconstruction_error(&q, k)).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn multiple_poles_are_rejected() {
    let wd = WeylData::new(vec![r(1.0), r(1.0), r(4.0)], vec![2, 2, 1], vec![r(1.0); 3]).unwrap();
    assert!(!wd.all_simple());
    assert!(matches!(NormingSequence::from_weyl(&wd), Err(Error::NotSupported(_))));
    assert!(matches!(reconstruct_q(&wd, r(0.0), Grid::on_pi(64).unwrap()), Err(Error::NotSupported(_))));
}

#[test]
fn weyl_csv_round_trip() {
    let (_, wd) = cosine_data();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weyl.csv");
    wd.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    assert_eq!(&WeylData::read_csv_path(&path).unwrap(), wd);
}

#[test]
fn exactly_one_norming_sign_matches_for_free_and_constant() {
    for text in ["zero", "constant 1"] {
        let cd = cauchy_data_of(&preset(text, pi_grid()), 64).unwrap();
        let wd = weyl_data(&cd, 10).unwrap();
        let alpha = NormingSequence::from_weyl(&wd).unwrap().alpha;
        for n in 1..=10 {
            let (_, ds, int) = rk4_norming(|_| r(if text == "zero" { 0.0 } else { 1.0 }), wd.theta[n - 1], 4000);
            let target = int / (ds * ds);
            let plus = rel(alpha[n - 1], target) <= 1e-6;
            let minus = rel(-alpha[n - 1], target) <= 1e-6;
            assert!(plus && !minus, "{text}, n = {n}");
        }
    }
}

#[test]
fn constant_is_exact_at_every_pole_count() {
    // The reference potential already equals q ≡ 1, so truncation costs
    // nothing and only rounding is left.
    let q = preset("constant 1", pi_grid());
    let errs: Vec<f64> = [10, 20, 40].iter().map(|&k| reconstruction_error(&q, k)).collect();
    assert!(errs.iter().all(|&e| e <= 1e-7), "{errs:?}");
}
