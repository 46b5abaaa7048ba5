mod common;

use std::f64::consts::PI;

use common::*;
use num_complex::Complex64;
use specrecon::analytic::{char_fn, BoundaryPair};
use specrecon::cauchy::{cauchy_data_of, lambda_delta_from_cauchy, rebuild_eta, weyl, CauchyData};
use specrecon::sturm::{branch_sqrt, omega_of, Integrator, Potential};
use specrecon::Error;

/// `S(π, λ)`, `S'(π, λ)` for `q ≡ 1`.
fn shifted_free(l: Complex64) -> (Complex64, Complex64) {
    let mu = l - 1.0;
    let rho = branch_sqrt(mu);
    if rho.norm() < 1e-12 {
        return (r(PI), r(1.0));
    }
    ((rho * PI).sin() / rho, (rho * PI).cos())
}

#[test]
fn zero_potential_gives_zero_data() {
    let cd = cauchy_data_of(&Potential::zero(pi_grid()), 64).unwrap();
    assert_eq!(cd.omega(), r(0.0));
    assert!(cd.k().iter().chain(cd.n()).all(|v| v.norm() < 1e-10));
}

#[test]
fn constant_potential_coefficients_match_closed_form() {
    let cd = cauchy_data_of(&preset("constant 1", pi_grid()), 64).unwrap();
    assert!((cd.omega() - PI / 2.0).norm() < 1e-12);
    let coeffs = cd.cosine_coefficients(40);
    for (n, got) in coeffs.iter().enumerate().skip(1) {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let want = shifted_free(r(nf * nf)).0 * (nf * nf) + cd.omega() * sign;
        assert!((got - want).norm() < 1e-6, "a_{n}: {got} vs {want}");
    }
}

#[test]
fn rebuilt_eta_matches_closed_form_off_the_integers() {
    let cd = cauchy_data_of(&preset("constant 1", pi_grid()), 64).unwrap();
    for l in [r(2.3), c(7.1, 0.5), r(19.0), c(-3.0, 2.0), r(0.5)] {
        let (e1, e2) = rebuild_eta(&cd, l);
        let (s1, s2) = shifted_free(l);
        assert!((e1 - s1).norm() < 1e-6, "η1({l}): {e1} vs {s1}");
        assert!((e2 - s2).norm() < 1e-6, "η2({l}): {e2} vs {s2}");
    }
}

#[test]
fn rebuilt_eta_matches_integration_for_cosine() {
    let q = preset("cosine 1", pi_grid());
    let cd = cauchy_data_of(&q, 64).unwrap();
    let integ = Integrator::default();
    for l in [r(2.3), c(7.1, 0.5), r(19.0)] {
        let (e1, e2) = rebuild_eta(&cd, l);
        let (s1, s2) = integ.s_endpoint(&q, l).unwrap();
        assert!((e1 - s1).norm() < 1e-6, "{l}: {e1} vs {s1}");
        assert!((e2 - s2).norm() < 1e-6, "{l}: {e2} vs {s2}");
    }
}

#[test]
fn rebuild_of_zero_data_is_free_solution() {
    let zero = CauchyData::zero(pi_grid()).unwrap();
    for l in [r(1.0), c(3.0, -1.0), r(0.0)] {
        let rho = branch_sqrt(l);
        let (e1, e2) = rebuild_eta(&zero, l);
        let s = if l.norm() == 0.0 { r(PI) } else { (rho * PI).sin() / rho };
        assert!((e1 - s).norm() < 1e-12);
        assert!((e2 - (rho * PI).cos()).norm() < 1e-12);
    }
}

#[test]
fn weyl_function_examples() {
    let cd = cauchy_data_of(&preset("constant 1", pi_grid()), 64).unwrap();
    let l = c(3.5, 1.0);
    let (s1, s2) = shifted_free(l);
    assert!(rel(weyl(&cd, l).unwrap(), s2 / s1) < 1e-6);
    // Poles of M are the Dirichlet eigenvalues n² + 1.
    assert!(matches!(weyl(&cd, r(5.0)), Err(Error::NearPole(_))));
}

#[test]
fn round_trip_through_cauchy_data() {
    let grid = pi_grid();
    let potentials = [
        Potential::zero(grid),
        preset("constant 1", grid),
        preset("cosine 1", grid),
        from_fn(grid, |x| c(1.0, 2.0) * x.sin()),
    ];
    let integ = Integrator::default();
    for q in &potentials {
        let cd = cauchy_data_of(q, 64).unwrap();
        for n in [1usize, 3, 8, 20, 40] {
            let l = r((n * n) as f64);
            let (e1, e2) = rebuild_eta(&cd, l);
            let (s1, s2) = integ.s_endpoint(q, l).unwrap();
            assert!((e1 - s1).norm() < 1e-6 && (e2 - s2).norm() < 1e-6, "n = {n}");
        }
    }
}

#[test]
fn characteristic_identity_holds_for_boundary_presets() {
    let grid = pi_grid();
    let potentials = [preset("constant 1", grid), preset("cosine 1", grid), from_fn(grid, |x| c(0.3 * x, -0.5))];
    let pairs = [BoundaryPair::dirichlet(), BoundaryPair::neumann(), BoundaryPair::robin(c(1.0, 0.5))];
    for q in &potentials {
        let cd = cauchy_data_of(q, 64).unwrap();
        for bp in &pairs {
            for l in [r(2.7), c(10.0, 3.0), r(33.3)] {
                let lhs = l * char_fn(bp, q, l).unwrap();
                let rhs = lambda_delta_from_cauchy(bp, &cd, l).unwrap();
                assert!((lhs - rhs).norm() <= 1e-5 * lhs.norm().max(1.0), "{}, λ = {l}: {lhs} vs {rhs}", bp.name);
            }
        }
    }
}

#[test]
fn omega_is_half_the_mean_integral() {
    let q = from_fn(pi_grid(), |x| c(x, 1.0));
    let omega = omega_of(&q).unwrap();
    assert!((omega - c(PI * PI / 4.0, PI / 2.0)).norm() < 1e-10);
    assert_eq!(cauchy_data_of(&q, 16).unwrap().omega(), omega);
}

#[test]
fn alias_guard_rejects_too_many_modes() {
    let q = Potential::zero(specrecon::sturm::Grid::on_pi(64).unwrap());
    assert!(matches!(cauchy_data_of(&q, 17), Err(Error::AliasGuard { .. })));
}

#[test]
fn csv_round_trip() {
    let cd = cauchy_data_of(&preset("cosine 1", pi_grid()), 32).unwrap();
    let mut buf = Vec::new();
    cd.write_csv(&mut buf).unwrap();
    let back = CauchyData::read_csv(&buf[..]).unwrap();
    assert_eq!(back, cd);
    assert!(cd.distance(&back).unwrap() == 0.0);
}
