//! Cauchy data from a subspectrum: the vector system `{v_n}`, `{w_n}`, the
//! truncated moment problem `(u, v_n) = w_n`, and diagnostics for the
//! sufficient conditions on the data.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::{cos_kernel, sin_kernel, AnalyticHandle, BoundaryPair, EigenvalueList};
use crate::cauchy::CauchyData;
use crate::error::{Error, Result};
use crate::quad;
use crate::sturm::{branch_sqrt, fmt_f64, Grid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Gram condition numbers above this mark the solve as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e12;

/// An element `[h1, h2]` of `L2(0, π) ⊕ L2(0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HElement {
    grid: Grid,
    pub h1: Vec<Complex64>,
    pub h2: Vec<Complex64>,
}

impl HElement {
    pub fn new(grid: Grid, h1: Vec<Complex64>, h2: Vec<Complex64>) -> Result<Self> {
        if h1.len() != grid.nodes() || h2.len() != grid.nodes() {
            return Err(Error::InvalidInput("H element needs one sample per node".into()));
        }
        Ok(Self { grid, h1, h2 })
    }

    pub fn zero(grid: Grid) -> Self {
        Self::constant(grid, ZERO, ZERO)
    }

    pub fn constant(grid: Grid, a: Complex64, b: Complex64) -> Self {
        let n = grid.nodes();
        Self { grid, h1: vec![a; n], h2: vec![b; n] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> (Complex64, Complex64)) -> Self {
        let (h1, h2) = grid.abscissas().into_iter().map(f).unzip();
        Self { grid, h1, h2 }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `(self, other) = ∫ (conj(g1) h1 + conj(g2) h2)`, conjugate-linear in `self`.
    pub fn inner(&self, other: &HElement) -> Complex64 {
        self.inner_with(&self.grid.weights(), other)
    }

    fn inner_with(&self, w: &[f64], other: &HElement) -> Complex64 {
        quad::inner(w, &self.h1, &other.h1) + quad::inner(w, &self.h2, &other.h2)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn distance(&self, other: &HElement) -> f64 {
        let w = self.grid.weights();
        let d1 = quad::l2_distance(&w, &self.h1, &other.h1);
        let d2 = quad::l2_distance(&w, &self.h2, &other.h2);
        d1.hypot(d2)
    }

    /// CSV with columns `t,re_h1,im_h1,re_h2,im_h2`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,re_h1,im_h1,re_h2,im_h2")?;
        for i in 0..self.grid.nodes() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(self.grid.x(i)),
                fmt_f64(self.h1[i].re),
                fmt_f64(self.h1[i].im),
                fmt_f64(self.h2[i].re),
                fmt_f64(self.h2[i].im)
            )?;
        }
        Ok(())
    }
}

/// The moment data `(u, v_n) = w_n`, `n = 0..N`.
#[derive(Debug, Clone)]
pub struct VSystem {
    pub v: Vec<HElement>,
    pub w: Vec<Complex64>,
    pub bp: BoundaryPair,
    pub evs: EigenvalueList,
    pub omega: Complex64,
}

impl VSystem {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Normalized derivatives `f^{<0>}, ..., f^{<order>}` at `λ`.
fn taylor(f: &AnalyticHandle, lambda: Complex64, order: usize) -> Result<Vec<Complex64>> {
    (0..=order).map(|j| f.derivative(lambda, j)).collect()
}

/// `(fg)^{<ν>} = Σ_j f^{<j>} g^{<ν-j>}`.
fn product(f: &[Complex64], g: &[Complex64], nu: usize) -> Complex64 {
    (0..=nu).map(|j| f[j] * g[nu - j]).sum()
}

/// `|f1(λ)| + |f2(λ)|` below `SEPARATION_TOL` times the [`local_scale`] means
/// the eigenvalue carries no information about the potential.
pub const SEPARATION_TOL: f64 = 1e-12;

/// Points on the circle sampled by [`local_scale`].
const SCALE_POINTS: usize = 8;

/// Size of the pair near `λ`: the largest `|f1| + |f2|` on a circle of radius
/// `max(1, |√λ|)` around `λ` (about one eigenvalue spacing). Separation is
/// judged against this rather than a global maximum, so one eigenvalue far
/// from the real axis, where `f1`, `f2` grow exponentially, does not make the
/// others look like common zeros.
pub fn local_scale(bp: &BoundaryPair, lambda: Complex64) -> Result<f64> {
    let radius = branch_sqrt(lambda).norm().max(1.0);
    (0..SCALE_POINTS)
        .map(|k| {
            let z = lambda + Complex64::from_polar(radius, 2.0 * PI * k as f64 / SCALE_POINTS as f64);
            let (f1, f2) = bp.eval(z)?;
            Ok(f1.norm() + f2.norm())
        })
        .try_fold(0.0f64, |acc, v: Result<f64>| Ok(acc.max(v?)))
}

/// Builds `v_0..v_N` and `w_0..w_N` on `grid`. Multiple eigenvalues contribute
/// normalized λ-derivatives of `v(t, λ) = [f1 s(t, λ), f2 c(t, λ)]` and of
/// `w(λ) = -f1 (λc + ωs) - f2 (s - ωc)` at `t = π`.
pub fn build_vsystem(
    bp: &BoundaryPair,
    evs: &EigenvalueList,
    omega: Complex64,
    n: usize,
    grid: Grid,
) -> Result<VSystem> {
    if !grid.is_pi() {
        return Err(Error::InvalidGrid("the vector system lives on (0, π)".into()));
    }
    if evs.last_index() < n {
        return Err(Error::InvalidInput(format!(
            "need {n} eigenvalues, got {}",
            evs.last_index()
        )));
    }
    let evs = evs.truncated(n);
    let groups = evs.groups().to_vec();
    let values = evs.values().to_vec();
    let abscissas = grid.abscissas();

    // Per group: Taylor coefficients of f1, f2 up to the multiplicity.
    let taylors: Vec<(Vec<Complex64>, Vec<Complex64>)> = groups
        .par_iter()
        .map(|&(start, m)| {
            let lambda = values[start];
            Ok((taylor(&bp.f1, lambda, m - 1)?, taylor(&bp.f2, lambda, m - 1)?))
        })
        .collect::<Result<_>>()?;

    let separated: Vec<bool> = groups
        .par_iter()
        .zip(&taylors)
        .map(|(&(start, _), (a, b))| {
            if start == 0 {
                return Ok(true);
            }
            let scale = local_scale(bp, values[start])?.max(f64::MIN_POSITIVE);
            Ok(a[0].norm() + b[0].norm() >= SEPARATION_TOL * scale)
        })
        .collect::<Result<_>>()?;
    if let Some(g) = separated.iter().position(|ok| !ok) {
        let start = groups[g].0;
        return Err(Error::SeparationViolation { index: start, lambda: values[start] });
    }

    let jobs: Vec<(usize, usize, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, &(start, m))| (0..m).map(move |nu| (g, start, nu)))
        .collect();
    let built: Vec<(HElement, Complex64)> = jobs
        .par_iter()
        .map(|&(g, start, nu)| {
            if start == 0 && nu == 0 {
                return (HElement::constant(grid, ZERO, ONE), omega);
            }
            let lambda = values[start];
            let (f1, f2) = &taylors[g];
            let (h1, h2) = abscissas
                .iter()
                .map(|&t| {
                    let s: Vec<Complex64> = (0..=nu).map(|j| sin_kernel(t, lambda, j)).collect();
                    let c: Vec<Complex64> = (0..=nu).map(|j| cos_kernel(t, lambda, j)).collect();
                    (product(f1, &s, nu), product(f2, &c, nu))
                })
                .unzip();
            let s: Vec<Complex64> = (0..=nu).map(|j| sin_kernel(PI, lambda, j)).collect();
            let c: Vec<Complex64> = (0..=nu).map(|j| cos_kernel(PI, lambda, j)).collect();
            // (λc)^{<j>} = λ c^{<j>} + c^{<j-1>}
            let lc: Vec<Complex64> = (0..=nu)
                .map(|j| lambda * c[j] + if j > 0 { c[j - 1] } else { ZERO })
                .collect();
            let a: Vec<Complex64> = (0..=nu).map(|j| lc[j] + omega * s[j]).collect();
            let b: Vec<Complex64> = (0..=nu).map(|j| s[j] - omega * c[j]).collect();
            let w = -product(f1, &a, nu) - product(f2, &b, nu);
            (HElement { grid, h1, h2 }, w)
        })
        .collect();
    let (v, w) = built.into_iter().unzip();
    Ok(VSystem { v, w, bp: bp.clone(), evs, omega })
}

/// Tikhonov shift added to the Gram matrix before the solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// `τ = factor · ‖G‖` (Frobenius norm).
    Relative(f64),
    Absolute(f64),
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::Relative(1e-10)
    }
}

#[derive(Debug, Clone)]
pub struct MomentSolution {
    pub u: HElement,
    /// `u = Σ_k coefficients[k] v_k`.
    pub coefficients: Vec<Complex64>,
    pub gram_cond: f64,
    pub tau: f64,
    /// `(u, v_n) - w_n`.
    pub residuals: Vec<Complex64>,
    /// Set when the Gram condition number exceeds [`ILL_CONDITIONED`].
    pub ill_conditioned: bool,
}

impl MomentSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    /// CSV with columns `n,re_residual,im_residual,abs_residual`.
    pub fn write_residuals(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "n,re_residual,im_residual,abs_residual")?;
        for (n, r) in self.residuals.iter().enumerate() {
            writeln!(w, "{n},{},{},{}", fmt_f64(r.re), fmt_f64(r.im), fmt_f64(r.norm()))?;
        }
        Ok(())
    }
}

/// `G_{nk} = (v_k, v_n)`.
pub fn gram_matrix(v: &[HElement]) -> DMatrix<Complex64> {
    let Some(first) = v.first() else {
        return DMatrix::zeros(0, 0);
    };
    let w = first.grid.weights();
    let n = v.len();
    let entries: Vec<(usize, usize, Complex64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let w = &w;
            (i..n).map(move |k| (i, k, v[k].inner_with(w, &v[i])))
        })
        .collect();
    let mut g = DMatrix::zeros(n, n);
    for (i, k, val) in entries {
        g[(i, k)] = val;
        g[(k, i)] = val.conj();
    }
    g
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Solves `(u, v_n) = w_n` with `u = Σ c_k v_k`: the Gram system
/// `Σ_k (v_k, v_n) conj(c_k) = w_n`, shifted by `τ I`.
pub fn solve_moment(vs: &VSystem, reg: Regularization) -> Result<MomentSolution> {
    if vs.is_empty() {
        return Err(Error::InvalidInput("empty vector system".into()));
    }
    let g = gram_matrix(&vs.v);
    let gram_cond = condition_number(&g);
    let tau = match reg {
        Regularization::Relative(f) => f * g.norm(),
        Regularization::Absolute(t) => t,
    };
    let n = vs.len();
    let shifted = &g + DMatrix::<Complex64>::identity(n, n) * Complex64::new(tau, 0.0);
    let rhs = DVector::from_column_slice(&vs.w);
    let d = shifted
        .clone()
        .lu()
        .solve(&rhs)
        .or_else(|| shifted.svd(true, true).solve(&rhs, 0.0).ok())
        .ok_or_else(|| Error::InvalidInput("singular Gram system".into()))?;
    let coefficients: Vec<Complex64> = d.iter().map(|x| x.conj()).collect();

    let grid = *vs.v[0].grid();
    let mut u = HElement::zero(grid);
    for (c, v) in coefficients.iter().zip(&vs.v) {
        for i in 0..grid.nodes() {
            u.h1[i] += c * v.h1[i];
            u.h2[i] += c * v.h2[i];
        }
    }
    let residuals = moment_residuals(&u, vs);
    Ok(MomentSolution {
        u,
        coefficients,
        gram_cond,
        tau,
        residuals,
        ill_conditioned: !(gram_cond <= ILL_CONDITIONED),
    })
}

/// `(u, v_n) - w_n` for every `n`.
pub fn moment_residuals(u: &HElement, vs: &VSystem) -> Vec<Complex64> {
    let w = u.grid.weights();
    vs.v
        .par_iter()
        .zip(&vs.w)
        .map(|(v, wn)| u.inner_with(&w, v) - wn)
        .collect()
}

/// `u = [conj(N), conj(K)]`.
pub fn element_of(cd: &CauchyData) -> HElement {
    HElement {
        grid: *cd.grid(),
        h1: cd.n().iter().map(|x| x.conj()).collect(),
        h2: cd.k().iter().map(|x| x.conj()).collect(),
    }
}

/// Inverse of [`element_of`]: `N = conj(u1)`, `K = conj(u2)`.
pub fn recovered_cauchy(u: &HElement, omega: Complex64) -> Result<CauchyData> {
    CauchyData::new(
        u.grid,
        u.h2.iter().map(|x| x.conj()).collect(),
        u.h1.iter().map(|x| x.conj()).collect(),
        omega,
    )
}

/// Thresholds at which [`condition_report`] raises a flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionThresholds {
    /// `max(|f1|, |f2|)` below `separation` times the [`local_scale`]
    /// violates (Separation).
    pub separation: f64,
    /// Bound on `|Im ρ_n|` for (Asymptotics).
    pub im_rho: f64,
    /// Bound on `|ϰ_n|` over the upper half of the indices for (Basis2).
    pub kappa_tail: f64,
}

impl Default for ConditionThresholds {
    fn default() -> Self {
        Self { separation: 1e-10, im_rho: 5.0, kappa_tail: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// `max(|f1(λ_n)|, |f2(λ_n)|)` at the index where its ratio to the
    /// [`local_scale`] is smallest, that index, and the local scale there.
    pub separation_min: f64,
    pub separation_index: usize,
    pub separation_scale: f64,
    /// Largest index with `m_n > 1` or `λ_n = 0`.
    pub last_special: usize,
    pub max_im_rho: f64,
    /// `Σ |ρ_n|^{-2}` over nonzero `ρ_n` past `last_special`.
    pub inv_rho_sq_sum: f64,
    /// `ϰ_n = ρ_n - n/2`, the deviation from the cosine basis on `(0, 2π)`.
    pub kappa_l2: f64,
    pub kappa_tail_max: f64,
    /// Condition number of the Gram matrix of `{v_n / ‖v_n‖}`.
    pub gram_cond: f64,
    pub thresholds: ConditionThresholds,
}

impl ConditionReport {
    pub fn separation_ok(&self) -> bool {
        self.separation_min >= self.thresholds.separation * self.separation_scale
    }

    /// Multiple eigenvalues (and zero) are confined to the first half.
    pub fn simple_ok(&self, n: usize) -> bool {
        self.last_special <= n / 2
    }

    pub fn asymptotics_ok(&self) -> bool {
        self.max_im_rho <= self.thresholds.im_rho && self.inv_rho_sq_sum.is_finite()
    }

    pub fn basis2_ok(&self) -> bool {
        self.kappa_tail_max <= self.thresholds.kappa_tail
    }

    /// Names of the violated conditions.
    pub fn violations(&self, n: usize) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.separation_ok() {
            out.push("Separation");
        }
        if !self.simple_ok(n) {
            out.push("Simple");
        }
        if !self.asymptotics_ok() {
            out.push("Asymptotics");
        }
        if !self.basis2_ok() {
            out.push("Basis2");
        }
        out
    }

    /// CSV with columns `quantity,value`.
    pub fn write_csv(&self, mut w: impl Write, n: usize) -> Result<()> {
        writeln!(w, "quantity,value")?;
        let rows: [(&str, f64); 9] = [
            ("separation_min", self.separation_min),
            ("separation_index", self.separation_index as f64),
            ("separation_scale", self.separation_scale),
            ("last_special_index", self.last_special as f64),
            ("max_im_rho", self.max_im_rho),
            ("inv_rho_sq_sum", self.inv_rho_sq_sum),
            ("kappa_l2", self.kappa_l2),
            ("kappa_tail_max", self.kappa_tail_max),
            ("gram_cond", self.gram_cond),
        ];
        for (k, v) in rows {
            writeln!(w, "{k},{}", fmt_f64(v))?;
        }
        let flags = self.violations(n);
        writeln!(w, "violations,{}", if flags.is_empty() { "none".to_string() } else { flags.join(";") })?;
        Ok(())
    }
}

pub fn condition_report(bp: &BoundaryPair, evs: &EigenvalueList) -> Result<ConditionReport> {
    condition_report_with(bp, evs, ConditionThresholds::default())
}

pub fn condition_report_with(
    bp: &BoundaryPair,
    evs: &EigenvalueList,
    thresholds: ConditionThresholds,
) -> Result<ConditionReport> {
    let values = evs.values();
    let sep: Vec<(f64, f64)> = values
        .par_iter()
        .map(|&l| {
            let (a, b) = bp.eval(l)?;
            Ok((a.norm().max(b.norm()), local_scale(bp, l)?.max(f64::MIN_POSITIVE)))
        })
        .collect::<Result<_>>()?;
    let (separation_index, (separation_min, separation_scale)) = sep
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, (f64::INFINITY, 1.0)), |acc, (i, &(v, s))| {
            if v / s < acc.1 .0 / acc.1 .1 {
                (i, (v, s))
            } else {
                acc
            }
        });

    let last_special = evs
        .groups()
        .iter()
        .filter(|&&(start, m)| m > 1 || values[start].norm() == 0.0)
        .map(|&(start, m)| start + m - 1)
        .max()
        .unwrap_or(0);

    let rho: Vec<Complex64> = values.iter().map(|&l| branch_sqrt(l)).collect();
    let max_im_rho = rho.iter().map(|r| r.im.abs()).fold(0.0, f64::max);
    let inv_rho_sq_sum = rho
        .iter()
        .skip(last_special + 1)
        .filter(|r| r.norm() > 0.0)
        .map(|r| r.norm_sqr().recip())
        .sum();
    let kappa: Vec<f64> = rho
        .iter()
        .enumerate()
        .map(|(n, r)| (r - n as f64 / 2.0).norm())
        .collect();
    let kappa_l2 = kappa.iter().map(|k| k * k).sum::<f64>().sqrt();
    let kappa_tail_max = kappa[kappa.len() / 2..].iter().cloned().fold(0.0, f64::max);

    let gram_cond = match build_vsystem(bp, evs, ZERO, evs.last_index(), Grid::default_pi()) {
        Ok(vs) => {
            let normalized: Vec<HElement> = vs
                .v
                .iter()
                .map(|v| {
                    let s = v.norm();
                    let s = if s > 0.0 { 1.0 / s } else { 1.0 };
                    HElement {
                        grid: v.grid,
                        h1: v.h1.iter().map(|x| x * s).collect(),
                        h2: v.h2.iter().map(|x| x * s).collect(),
                    }
                })
                .collect();
            condition_number(&gram_matrix(&normalized))
        }
        Err(Error::SeparationViolation { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };

    Ok(ConditionReport {
        separation_min,
        separation_index,
        separation_scale,
        last_special,
        max_im_rho,
        inv_rho_sq_sum,
        kappa_l2,
        kappa_tail_max,
        gram_cond,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::cauchy_data_of;
    use crate::sturm::{Potential, Preset};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn dirichlet_squares(n: usize, shift: f64) -> EigenvalueList {
        let sub: Vec<Complex64> = (1..=n).map(|k| c((k * k) as f64 + shift)).collect();
        EigenvalueList::from_subspectrum(&sub)
    }

    #[test]
    fn first_vector_is_fixed() {
        let vs = build_vsystem(&BoundaryPair::robin(c(0.3)), &dirichlet_squares(5, 0.0), c(1.7), 5, Grid::on_pi(64).unwrap())
            .unwrap();
        assert!(vs.v[0].h1.iter().all(|x| *x == ZERO));
        assert!(vs.v[0].h2.iter().all(|x| *x == ONE));
        assert_eq!(vs.w[0], c(1.7));
    }

    #[test]
    fn dirichlet_vectors_are_cosines() {
        let omega = c(0.4);
        let grid = Grid::on_pi(128).unwrap();
        let vs = build_vsystem(&BoundaryPair::dirichlet(), &dirichlet_squares(6, 0.0), omega, 6, grid).unwrap();
        for n in 1..=6 {
            for i in 0..grid.nodes() {
                assert_eq!(vs.v[n].h1[i], ZERO);
                assert!((vs.v[n].h2[i] - (n as f64 * grid.x(i)).cos()).norm() < 1e-12);
            }
            let expect = omega * if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((vs.w[n] - expect).norm() < 1e-12, "w_{n} = {}", vs.w[n]);
        }
    }

    #[test]
    fn orthonormal_moment_problem() {
        let grid = Grid::on_pi(256).unwrap();
        let scale = (2.0 / PI).sqrt();
        let v: Vec<HElement> = (1..=6)
            .map(|k| HElement::from_fn(grid, |t| (c(scale * (k as f64 * t).sin()), ZERO)))
            .collect();
        let mut w = vec![ZERO; 6];
        w[3] = ONE;
        let vs = VSystem {
            v: v.clone(),
            w,
            bp: BoundaryPair::dirichlet(),
            evs: EigenvalueList::from_subspectrum(&[]),
            omega: ZERO,
        };
        let sol = solve_moment(&vs, Regularization::Absolute(0.0)).unwrap();
        assert!(sol.u.distance(&v[3]) < 1e-9);
        assert!(sol.gram_cond < 1.0 + 1e-6);
    }

    #[test]
    fn zero_data_give_zero_element() {
        let vs = build_vsystem(&BoundaryPair::dirichlet(), &dirichlet_squares(10, 0.0), ZERO, 10, Grid::on_pi(256).unwrap())
            .unwrap();
        let sol = solve_moment(&vs, Regularization::default()).unwrap();
        assert!(sol.u.norm() < 1e-12);
    }

    #[test]
    fn conjugation_convention() {
        let grid = Grid::on_pi(16).unwrap();
        let cd = recovered_cauchy(&HElement::constant(grid, ZERO, Complex64::new(1.0, 1.0)), c(2.0)).unwrap();
        assert!(cd.k().iter().all(|k| *k == Complex64::new(1.0, -1.0)));
        assert!(cd.n().iter().all(|n| *n == ZERO));
        assert_eq!(cd.omega(), c(2.0));
        assert_eq!(element_of(&cd).h2[3], Complex64::new(1.0, 1.0));
    }

    #[test]
    fn double_eigenvalue_uses_lambda_derivative() {
        let mu = Complex64::new(3.2, 0.4);
        let evs = EigenvalueList::from_subspectrum(&[c(1.1), mu, mu]);
        let bp = BoundaryPair::polynomials(vec![c(0.5), c(1.0)], vec![c(2.0), c(-0.3), c(0.1)], "poly");
        let omega = Complex64::new(0.3, -0.2);
        let grid = Grid::on_pi(64).unwrap();
        let vs = build_vsystem(&bp, &evs, omega, 3, grid).unwrap();
        let h = 1e-4;
        let at = |l: Complex64| {
            let (f1, f2) = bp.eval(l).unwrap();
            let v = HElement::from_fn(grid, |t| (f1 * sin_kernel(t, l, 0), f2 * cos_kernel(t, l, 0)));
            let s = sin_kernel(PI, l, 0);
            let cc = cos_kernel(PI, l, 0);
            (v, -f1 * (l * cc + omega * s) - f2 * (s - omega * cc))
        };
        let (vp, wp) = at(mu + h);
        let (vm, wm) = at(mu - h);
        for i in 0..grid.nodes() {
            let d1 = (vp.h1[i] - vm.h1[i]) / (2.0 * h);
            let d2 = (vp.h2[i] - vm.h2[i]) / (2.0 * h);
            assert!((vs.v[3].h1[i] - d1).norm() < 1e-6);
            assert!((vs.v[3].h2[i] - d2).norm() < 1e-6);
        }
        assert!((vs.w[3] - (wp - wm) / (2.0 * h)).norm() < 1e-6);
    }

    #[test]
    fn separation_violation_is_reported() {
        let bp = BoundaryPair::polynomials(vec![c(-4.0), c(1.0)], vec![c(-4.0), c(1.0)], "both vanish at 4");
        let err = build_vsystem(&bp, &dirichlet_squares(5, 0.0), ZERO, 5, Grid::on_pi(64).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SeparationViolation { index: 2, .. }), "{err}");
        let report = condition_report(&bp, &dirichlet_squares(5, 0.0)).unwrap();
        assert!(!report.separation_ok());
    }

    #[test]
    fn true_cauchy_data_satisfy_moment_equations() {
        let q = Potential::from_preset(&Preset::Constant(c(1.0)), Grid::default_pi()).unwrap();
        let cd = cauchy_data_of(&q, 64).unwrap();
        let vs = build_vsystem(&BoundaryPair::dirichlet(), &dirichlet_squares(20, 1.0), cd.omega(), 20, Grid::default_pi())
            .unwrap();
        let r = moment_residuals(&element_of(&cd), &vs);
        let worst = r.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }
}
