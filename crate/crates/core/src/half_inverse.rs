//! Half-inverse problem on `(0, 2π)`: `q` is known on `(π, 2π)` and the
//! Dirichlet spectrum of the whole interval is given. The known half turns
//! into the boundary pair `f1 = ψ(π, λ)`, `f2 = -ψ'(π, λ)` at `x = π`, where
//! `ψ(2π) = 0`, `ψ'(2π) = -1`, and the full spectrum is then a subspectrum of
//! the problem on `(0, π)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::analytic::{find_zeros, AnalyticHandle, BoundaryPair, EigenvalueList, SearchRegion};
use crate::cauchy::CauchyData;
use crate::error::{Error, Result};
use crate::gl::{reconstruct_q, weyl_data, WeylData};
use crate::recon::{
    build_vsystem, condition_report, recovered_cauchy, solve_moment, ConditionReport, MomentSolution,
    Regularization,
};
use crate::sturm::{branch_sqrt, Grid, Integrator, Potential};

/// Truncation used when none is given.
pub const DEFAULT_N: usize = 40;

#[derive(Debug, Clone)]
pub struct HalfInverseInstance {
    /// Potential on a `(0, 2π)` grid; only the half `(π, 2π)` is used.
    pub q_known: Potential,
    /// Dirichlet eigenvalues of `(0, 2π)`, with `λ_0 = 0` prepended.
    pub spectrum: EigenvalueList,
    /// `Ω = (1/2) ∫_0^{2π} q`.
    pub big_omega: Complex64,
}

impl HalfInverseInstance {
    pub fn new(q_known: Potential, spectrum: EigenvalueList, big_omega: Complex64) -> Result<Self> {
        if !q_known.grid().is_two_pi() {
            return Err(Error::InvalidGrid("the known half lives on a (0, 2π) grid".into()));
        }
        Ok(Self { q_known, spectrum, big_omega })
    }

    /// Takes `Ω` from the eigenvalue asymptotics.
    pub fn with_estimated_omega(q_known: Potential, spectrum: EigenvalueList) -> Result<Self> {
        let big_omega = estimate_omega(&spectrum)?;
        Self::new(q_known, spectrum, big_omega)
    }
}

/// `f1(λ) = ψ(π, λ)`, `f2(λ) = -ψ'(π, λ)`, evaluated by backward integration
/// over `(π, 2π)`; λ-derivatives by contour integrals.
pub fn build_boundary_pair(q_known: &Potential) -> Result<BoundaryPair> {
    if !q_known.grid().is_two_pi() {
        return Err(Error::InvalidGrid("the known half lives on a (0, 2π) grid".into()));
    }
    let q = Arc::new(q_known.clone());
    let integ = Integrator::default();
    let q1 = Arc::clone(&q);
    let f1 = AnalyticHandle::from_fn(move |l| Ok(integ.psi_at_pi(&q1, l)?.0));
    let f2 = AnalyticHandle::from_fn(move |l| Ok(-integ.psi_at_pi(&q, l)?.1));
    Ok(BoundaryPair::new(f1, f2, "known half"))
}

/// `ω = Ω - (1/2) ∫_π^{2π} q`.
pub fn omega_from_instance(inst: &HalfInverseInstance) -> Complex64 {
    let grid = inst.q_known.grid();
    let mid = grid.intervals() / 2;
    inst.big_omega - 0.5 * inst.q_known.integral_between(mid, grid.intervals())
}

/// Minimum number of eigenvalues for [`estimate_omega`].
pub const MIN_FIT_EIGENVALUES: usize = 20;

/// Fits `(√λ_n - n/2) π n ≈ Ω + β/n²` over the upper half of the indices.
pub fn estimate_omega(spectrum: &EigenvalueList) -> Result<Complex64> {
    let values = spectrum.values();
    let n_max = spectrum.last_index();
    if n_max < MIN_FIT_EIGENVALUES {
        return Err(Error::InvalidInput(format!(
            "Ω fit needs at least {MIN_FIT_EIGENVALUES} eigenvalues, got {n_max}"
        )));
    }
    let rows: Vec<usize> = (n_max / 2 + 1..=n_max).collect();
    let y: Vec<Complex64> = rows
        .iter()
        .map(|&n| (branch_sqrt(values[n]) - n as f64 / 2.0) * (PI * n as f64))
        .collect();
    let design = DMatrix::<Complex64>::from_fn(rows.len(), 2, |r, j| {
        let n = rows[r] as f64;
        Complex64::new(if j == 0 { 1.0 } else { 1.0 / (n * n) }, 0.0)
    });
    let rhs = DVector::from_column_slice(&y);
    let x = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let omega = x[0];
    let fitted = &design * &x;
    let residual = ((&rhs - fitted).norm_squared() / rows.len() as f64).sqrt();
    if residual > 0.1 * omega.norm() + 0.1 {
        return Err(Error::FitUnstable { residual, omega_abs: omega.norm() });
    }
    Ok(omega)
}

/// First `count` Dirichlet eigenvalues of `q` on its own grid (`(0, π)` or
/// `(0, 2π)`), as zeros of `S(a, λ)`.
pub fn dirichlet_spectrum(q: &Potential, count: usize) -> Result<EigenvalueList> {
    let a = q.grid().endpoint();
    let scale = PI / a;
    let n = (count + 4) as f64 * scale;
    let sup = q.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let region = SearchRegion {
        re_min: -2.0 - sup,
        re_max: n * n + n + 0.5 + sup,
        half_height: SearchRegion::DEFAULT_HALF_HEIGHT.max(2.0 * sup),
        max_count: Some(count),
    };
    let integ = Integrator::default();
    let s = |l: Complex64| Ok(integ.s_endpoint(q, l)?.0);
    let zeros = find_zeros(&s, &region)?;
    if zeros.len() < count {
        return Err(Error::RootCountMismatch { counted: count, refined: zeros.len() });
    }
    Ok(EigenvalueList::from_subspectrum(&zeros))
}

/// Everything the pipeline produced on the way to the potential.
#[derive(Debug, Clone)]
pub struct HalfInverseSolution {
    /// Recovered potential on `(0, π)`.
    pub q: Potential,
    pub omega: Complex64,
    pub report: ConditionReport,
    pub moment: MomentSolution,
    pub cauchy: CauchyData,
    pub weyl: WeylData,
}

/// Pipeline options.
#[derive(Debug, Clone, Copy)]
pub struct HalfInverseOptions {
    pub regularization: Regularization,
    /// Weyl poles used for the reconstruction; `None` takes `N/4`. The `N`
    /// eigenvalues resolve about `N/2` modes of the Cauchy data, and the
    /// upper poles of that range are already visibly polluted.
    pub weyl_count: Option<usize>,
    pub grid: Grid,
    /// Abort with [`Error::ConditionViolation`] when a sufficient condition
    /// fails; when off, the report is still attached to the solution.
    pub check_conditions: bool,
}

impl Default for HalfInverseOptions {
    fn default() -> Self {
        Self {
            regularization: Regularization::default(),
            weyl_count: None,
            grid: Grid::default_pi(),
            check_conditions: true,
        }
    }
}

/// Checks the sufficient conditions, then runs boundary pair → vector system
/// → moment solve → Cauchy data → Weyl data → reconstruction.
pub fn solve_half_inverse(inst: &HalfInverseInstance, n: usize) -> Result<HalfInverseSolution> {
    solve_half_inverse_with(inst, n, HalfInverseOptions::default())
}

pub fn solve_half_inverse_with(
    inst: &HalfInverseInstance,
    n: usize,
    opts: HalfInverseOptions,
) -> Result<HalfInverseSolution> {
    let bp = build_boundary_pair(&inst.q_known)?;
    let omega = omega_from_instance(inst);
    let evs = inst.spectrum.truncated(n);
    if evs.last_index() < n {
        return Err(Error::InvalidInput(format!(
            "need {n} eigenvalues, got {}",
            evs.last_index()
        )));
    }
    let report = condition_report(&bp, &evs)?;
    let violations = report.violations(n);
    if opts.check_conditions && !violations.is_empty() {
        return Err(Error::ConditionViolation(violations.join(", ")));
    }
    let vs = build_vsystem(&bp, &evs, omega, n, opts.grid)?;
    let moment = solve_moment(&vs, opts.regularization)?;
    let cauchy = recovered_cauchy(&moment.u, omega)?;
    let count = opts.weyl_count.unwrap_or(n / 4).max(2);
    let weyl = weyl_data(&cauchy, count)?;
    let q = reconstruct_q(&weyl, omega, opts.grid)?;
    Ok(HalfInverseSolution { q, omega, report, moment, cauchy, weyl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sturm::Preset;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_known_half_gives_free_boundary_pair() {
        let bp = build_boundary_pair(&Potential::zero(Grid::on_two_pi(512).unwrap())).unwrap();
        let (f1, f2) = bp.eval(c(0.25)).unwrap();
        assert!((f1 - 2.0).norm() < 1e-12 && f2.norm() < 1e-12, "{f1} {f2}");
        let l = Complex64::new(3.3, 0.7);
        let rho = l.sqrt();
        let (f1, f2) = bp.eval(l).unwrap();
        assert!((f1 - (rho * PI).sin() / rho).norm() < 1e-10);
        assert!((f2 - (rho * PI).cos()).norm() < 1e-10);
    }

    #[test]
    fn omega_bookkeeping() {
        let grid = Grid::on_two_pi(256).unwrap();
        let spectrum = EigenvalueList::from_subspectrum(&[]);
        let inst = HalfInverseInstance::new(Potential::zero(grid), spectrum.clone(), c(0.0)).unwrap();
        assert!(omega_from_instance(&inst).norm() < 1e-14);
        let one = Potential::from_preset(&Preset::Constant(c(1.0)), grid).unwrap();
        let inst = HalfInverseInstance::new(one, spectrum, c(PI)).unwrap();
        assert!((omega_from_instance(&inst) - PI / 2.0).norm() < 1e-12);
    }

    #[test]
    fn omega_fit_on_synthetic_asymptotics() {
        let exact: Vec<Complex64> = (1..=30).map(|n| c((n as f64 / 2.0).powi(2))).collect();
        assert!(estimate_omega(&EigenvalueList::from_subspectrum(&exact)).unwrap().norm() < 1e-10);
        let shifted: Vec<Complex64> = (1..=30)
            .map(|n| c((n as f64 / 2.0 + 1.0 / n as f64).powi(2)))
            .collect();
        let omega = estimate_omega(&EigenvalueList::from_subspectrum(&shifted)).unwrap();
        assert!((omega - PI).norm() < 1e-10, "{omega}");
        let short = EigenvalueList::from_subspectrum(&exact[..10]);
        assert!(estimate_omega(&short).is_err());
    }

    #[test]
    fn erratic_spectrum_is_rejected() {
        let noisy: Vec<Complex64> = (1..=30)
            .map(|n| c((n as f64 / 2.0 + if n % 2 == 0 { 0.3 } else { -0.3 }).powi(2)))
            .collect();
        let err = estimate_omega(&EigenvalueList::from_subspectrum(&noisy)).unwrap_err();
        assert!(matches!(err, Error::FitUnstable { .. }), "{err}");
    }

    #[test]
    fn splice_keeps_halves() {
        let grid = Grid::on_two_pi(64).unwrap();
        let right = Potential::from_preset(&Preset::Constant(c(2.0)), grid).unwrap();
        let left = Potential::from_preset(&Preset::Ramp(c(1.0)), Grid::on_pi(32).unwrap()).unwrap();
        let both = Potential::splice(&left, &right).unwrap();
        assert_eq!(both.left_half().unwrap().values(), left.values());
        assert!((both.integral_between(32, 64) - 2.0 * PI).norm() < 1e-12);
    }
}
