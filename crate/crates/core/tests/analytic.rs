mod common;

use std::f64::consts::PI;

use common::*;
use num_complex::Complex64;
use specrecon::analytic::{
    char_fn, contour_derivative, eigen_residuals, find_eigenvalues, find_zeros, AnalyticHandle, BoundaryPair,
    DerivativeMode, EigenvalueList, SearchRegion,
};
use specrecon::cauchy::cauchy_data_of;
use specrecon::roots::{Rect, RootFinder};
use specrecon::sturm::{branch_sqrt, Integrator, Potential};

fn square() -> AnalyticHandle {
    AnalyticHandle::polynomial(vec![r(0.0), r(0.0), r(1.0)])
}

#[test]
fn polynomial_normalized_derivatives() {
    let f = square();
    assert_eq!(f.mode(), DerivativeMode::ClosedForm);
    assert!((f.derivative(r(3.0), 1).unwrap() - 6.0).norm() < 1e-14);
    assert!((f.derivative(r(3.0), 2).unwrap() - 1.0).norm() < 1e-14);
    assert!(f.derivative(r(3.0), 3).unwrap().norm() < 1e-14);
}

#[test]
fn contour_derivative_of_cos_sqrt() {
    let f = AnalyticHandle::from_fn(|l| Ok((branch_sqrt(l) * PI).cos()));
    assert_eq!(f.mode(), DerivativeMode::Contour);
    assert!(f.derivative(r(4.0), 1).unwrap().norm() < 1e-9);
    let l = c(2.3, 0.4);
    let rho = branch_sqrt(l);
    let exact = -PI * (rho * PI).sin() / (2.0 * rho);
    assert!(rel(f.derivative(l, 1).unwrap(), exact) < 1e-9);
}

#[test]
fn closed_form_agrees_with_contour_at_probes() {
    let f = AnalyticHandle::polynomial(vec![c(1.0, 2.0), r(-3.0), c(0.5, 0.0), c(0.0, 0.25)]);
    for (k, l) in [r(0.0), c(1.0, 1.0), r(-2.0), c(5.0, -3.0), r(10.0)].into_iter().enumerate() {
        for j in 1..=3 {
            let a = f.derivative(l, j).unwrap();
            let b = f.contour_derivative(l, j).unwrap();
            assert!((a - b).norm() <= 1e-7 * a.norm().max(1.0), "probe {k}, order {j}: {a} vs {b}");
        }
    }
}

#[test]
fn contour_quadrature_divergence_is_reported() {
    // Essential singularity inside the contour: the trapezoid sums disagree.
    let f = |z: Complex64| Ok((1.0 / (z - 0.001)).exp());
    assert!(contour_derivative(f, r(0.0), 1, 0.01).is_err());
}

#[test]
fn characteristic_function_examples() {
    let zero = Potential::zero(pi_grid());
    let d = char_fn(&BoundaryPair::dirichlet(), &zero, r(4.0)).unwrap();
    assert!(d.norm() < 1e-12);
    let l = c(3.1, 0.7);
    let rho = branch_sqrt(l);
    let d = char_fn(&BoundaryPair::dirichlet(), &zero, l).unwrap();
    assert!(rel(d, (rho * PI).sin() / rho) < 1e-10);
    assert!(char_fn(&BoundaryPair::neumann(), &zero, r(0.25)).unwrap().norm() < 1e-12);
}

#[test]
fn double_angle_boundary_pair() {
    let zero = Potential::zero(pi_grid());
    let f1 = AnalyticHandle::from_fn(|l| {
        let rho = branch_sqrt(l);
        Ok(if rho.norm() < 1e-12 { r(PI) } else { (rho * PI).sin() / rho })
    });
    let f2 = AnalyticHandle::from_fn(|l| Ok((branch_sqrt(l) * PI).cos()));
    let bp = BoundaryPair::new(f1, f2, "zero known half");
    assert!(char_fn(&bp, &zero, r(2.25)).unwrap().norm() < 1e-12);
    let l = c(1.7, -0.3);
    let rho = branch_sqrt(l);
    assert!(rel(char_fn(&bp, &zero, l).unwrap(), (2.0 * rho * PI).sin() / rho) < 1e-10);
}

#[test]
fn dirichlet_spectrum_of_zero_and_constant() {
    let region = SearchRegion::up_to(110.0);
    for (shift, text) in [(0.0, "zero"), (1.0, "constant 1")] {
        let evs = find_eigenvalues(&BoundaryPair::dirichlet(), &preset(text, pi_grid()), &region).unwrap();
        let expected: Vec<f64> = (1..=10).map(|n| (n * n) as f64 + shift).filter(|v| *v < 110.0).collect();
        assert_eq!(evs.last_index(), expected.len(), "{text}");
        for (got, want) in evs.subspectrum().iter().zip(&expected) {
            assert!(rel(*got, r(*want)) < 1e-10, "{got} vs {want}");
        }
        assert!(evs.groups().iter().all(|g| g.1 == 1));
    }
}

/// Bisection of `S(π, λ)` on the real axis, with `S` from the test RK4.
fn bisect_cos_spectrum(count: usize) -> Vec<f64> {
    let s = |l: f64| rk4_s(|x| r(x.cos()), r(l), PI, 4000).0.re;
    let mut out = Vec::new();
    let mut a = -2.0;
    let mut fa = s(a);
    while out.len() < count {
        let b = a + 0.05;
        let fb = s(b);
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                let fm = s(m);
                if flo * fm <= 0.0 {
                    hi = m;
                } else {
                    lo = m;
                    flo = fm;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    out
}

#[test]
fn cosine_spectrum_matches_real_axis_bisection() {
    let oracle = bisect_cos_spectrum(8);
    let q = preset("cosine 1", pi_grid());
    let evs = find_eigenvalues(&BoundaryPair::dirichlet(), &q, &SearchRegion::for_count(8)).unwrap();
    for (got, want) in evs.subspectrum().iter().zip(&oracle) {
        assert!((got - want).norm() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
        assert!(got.im.abs() < 1e-9);
    }
}

#[test]
fn winding_count_equals_refined_multiplicities() {
    let q = from_fn(pi_grid(), |x| c(x.cos(), 0.3 * x));
    let bp = BoundaryPair::robin(c(0.5, -0.2));
    let f = |z: Complex64| char_fn(&bp, &q, z);
    let rect = Rect::new(-5.0, 150.0, -20.0, 20.0).unwrap();
    let finder = RootFinder::default();
    let roots = finder.find(&f, &rect).unwrap();
    let total = finder.count(&f, &rect).unwrap().unwrap();
    assert_eq!(roots.iter().map(|r| r.multiplicity as i64).sum::<i64>(), total);
    assert!(total >= 11);
}

#[test]
fn eigenvalue_residuals_are_small() {
    let q = from_fn(pi_grid(), |x| c(x.sin(), -0.2));
    for bp in [BoundaryPair::dirichlet(), BoundaryPair::robin(r(2.0)), BoundaryPair::parse("poly 1 0.5 | 0 1").unwrap()] {
        let evs = find_eigenvalues(&bp, &q, &SearchRegion::for_count(12)).unwrap();
        assert_eq!(evs.last_index(), 12, "{}", bp.name);
        for (l, res) in eigen_residuals(&bp, &q, &evs).unwrap() {
            assert!(res <= 1e-7 * l.norm().max(1.0), "{}: λ = {l}, residual {res:e}", bp.name);
        }
    }
}

#[test]
fn double_root_is_found_with_multiplicity_two() {
    // The root finder sees only values of (λ - 4)² (λ - 9) e^{λ/10}.
    let f = |z: Complex64| Ok((z - 4.0) * (z - 4.0) * (z - 9.0) * (z * 0.1).exp());
    let zeros = find_zeros(&f, &SearchRegion::up_to(20.0)).unwrap();
    assert_eq!(zeros.len(), 3);
    let list = EigenvalueList::from_subspectrum(&zeros);
    assert_eq!(list.groups(), &[(0, 1), (1, 2), (3, 1)]);
    assert_eq!(list.multiplicity(2), 2);
    assert!((list.values()[1] - 4.0).norm() < 1e-7);
}

#[test]
fn eigenvalue_list_invariants_and_csv() {
    let list = EigenvalueList::from_subspectrum(&[r(1.0), r(4.0), r(4.0), c(9.0, 1.0)]);
    assert_eq!(list.values()[0], r(0.0));
    assert_eq!(list.index_set(), vec![0, 1, 2, 4]);
    assert_eq!(list.last_index(), 4);
    let mut buf = Vec::new();
    list.write_csv(&mut buf).unwrap();
    let back = EigenvalueList::read_csv(&buf[..]).unwrap();
    assert_eq!(back, list);
    assert_eq!(list.truncated(2).last_index(), 2);
}

#[test]
fn boundary_presets_parse() {
    for text in ["dirichlet", "neumann", "robin 2", "robin 1 -1", "poly 1 2 | 0 0 1"] {
        let bp = BoundaryPair::parse(text).unwrap();
        bp.eval(c(1.0, 1.0)).unwrap();
    }
    let bp = BoundaryPair::parse("poly 1 2 | 0 0 1").unwrap();
    let (f1, f2) = bp.eval(r(3.0)).unwrap();
    assert_eq!((f1, f2), (r(7.0), r(9.0)));
    assert!(BoundaryPair::parse("hl").is_err());
    assert!(BoundaryPair::parse("robin").is_err());
    assert!(BoundaryPair::parse("spline").is_err());
}

#[test]
fn weyl_poles_of_cosine_follow_integer_asymptotics() {
    // ν_n = √θ_n = n + O(1/n): the constant n|ν_n − n| settles as n grows.
    let q = preset("cosine 1", pi_grid());
    let cd = cauchy_data_of(&q, 64).unwrap();
    let eta1 = |z: Complex64| Ok(cd.eta(z).0);
    let zeros = find_zeros(&eta1, &SearchRegion::for_count(20)).unwrap();
    let c_n: Vec<f64> = zeros
        .iter()
        .enumerate()
        .map(|(i, z)| (i + 1) as f64 * (branch_sqrt(*z) - (i + 1) as f64).norm())
        .collect();
    let c_first = c_n[..10].iter().cloned().fold(0.0, f64::max);
    let c_all = c_n.iter().cloned().fold(0.0, f64::max);
    assert!(c_all <= 1.1 * c_first, "{c_n:?}");
    // η1 zeros coincide with the Dirichlet spectrum.
    let direct = find_eigenvalues(&BoundaryPair::dirichlet(), &q, &SearchRegion::for_count(20)).unwrap();
    for (a, b) in zeros.iter().zip(direct.subspectrum()) {
        assert!(rel(*a, *b) < 1e-8);
    }
    let integ = Integrator::default();
    for z in &zeros {
        assert!(integ.s_endpoint(&q, *z).unwrap().0.norm() < 1e-9);
    }
}
