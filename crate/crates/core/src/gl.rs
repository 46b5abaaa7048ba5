//! Weyl data `{θ_n, M_n}` of Cauchy data and Gelfand–Levitan reconstruction.
//!
//! `M(λ) = η2(λ)/η1(λ) = S'(π, λ)/S(π, λ)`. Its residue at a simple pole is
//! `M_n = S'(π, θ_n)² / ∫ S(x, θ_n)² dx`, so `1/M_n` is the norming constant
//! of the mirrored potential `q(π - x)` (whose eigenfunction is
//! `-S(π - x)/S'(π)`). The reconstruction therefore recovers `q(π - x)` and
//! mirrors it back.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::{find_eigenvalues, find_zeros, BoundaryPair, SearchRegion};
use crate::cauchy::CauchyData;
use crate::error::{Error, Result};
use crate::recon::condition_number;
use crate::sturm::{fmt_f64, Grid, Integrator, Potential};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Nodes of the trapezoid rule on residue circles.
const RESIDUE_POINTS: usize = 64;
/// Largest residue-circle radius.
const RESIDUE_RADIUS: f64 = 0.5;
/// Condition numbers of the Gelfand–Levitan system above this are rejected.
pub const NYSTROM_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct WeylData {
    /// `θ_1, θ_2, ...`, repeated by multiplicity, ordered by `Re √θ`.
    pub theta: Vec<Complex64>,
    /// Multiplicity of the pole each entry belongs to.
    pub multiplicity: Vec<usize>,
    /// `M_{n+ν} = Res_{θ_n} (λ - θ_n)^ν M(λ)`.
    pub residues: Vec<Complex64>,
    /// First (1-based) index, at least 2, from which the poles are simple
    /// and strictly larger in modulus than their predecessor.
    pub n1: usize,
    /// Radius of the circle `γ_0` separating `θ_1..θ_{n1-1}` from the rest.
    pub gamma0_radius: f64,
}

impl WeylData {
    /// Builds the record from poles and residues (both 1-based in meaning,
    /// stored from index 0), computing `n1` and `γ_0`.
    pub fn new(theta: Vec<Complex64>, multiplicity: Vec<usize>, residues: Vec<Complex64>) -> Result<Self> {
        if theta.len() != multiplicity.len() || theta.len() != residues.len() {
            return Err(Error::InvalidInput("Weyl data columns differ in length".into()));
        }
        if theta.is_empty() {
            return Err(Error::InvalidInput("no Weyl poles".into()));
        }
        let (n1, gamma0_radius) = separating_circle(&theta, &multiplicity);
        Ok(Self { theta, multiplicity, residues, n1, gamma0_radius })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn all_simple(&self) -> bool {
        self.multiplicity.iter().all(|&m| m == 1)
    }

    /// Keeps the first `count` poles (cutting inside a multiple pole is an error).
    pub fn truncated(&self, count: usize) -> Result<Self> {
        let count = count.min(self.len());
        if count < self.len() && count > 0 && self.theta[count] == self.theta[count - 1] {
            return Err(Error::InvalidInput("truncation splits a multiple pole".into()));
        }
        Self::new(
            self.theta[..count].to_vec(),
            self.multiplicity[..count].to_vec(),
            self.residues[..count].to_vec(),
        )
    }

    /// CSV with columns `n,re_theta,im_theta,multiplicity,re_M,im_M`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "n,re_theta,im_theta,multiplicity,re_M,im_M")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                i + 1,
                fmt_f64(self.theta[i].re),
                fmt_f64(self.theta[i].im),
                self.multiplicity[i],
                fmt_f64(self.residues[i].re),
                fmt_f64(self.residues[i].im)
            )?;
        }
        Ok(())
    }

    pub fn read_csv(reader: impl BufRead) -> Result<Self> {
        let (mut theta, mut mult, mut res) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if i == 0 || line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: i + 1, msg: msg.into() };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(bad("expected 6 columns"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            theta.push(Complex64::new(num(f[1])?, num(f[2])?));
            mult.push(f[3].parse::<usize>().map_err(|_| bad("bad multiplicity"))?);
            res.push(Complex64::new(num(f[4])?, num(f[5])?));
        }
        Self::new(theta, mult, res)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// `n1` and the radius of `γ_0`: the smallest `n1 ≥ 2` such that every pole
/// from `n1` on is simple and `|θ_{n1}| > |θ_{n1-1}|`; `γ_0` is the circle of
/// radius `(|θ_{n1}| + |θ_{n1-1}|)/2`.
fn separating_circle(theta: &[Complex64], mult: &[usize]) -> (usize, f64) {
    let len = theta.len();
    if len < 2 {
        return (1, 0.5 * theta.first().map_or(0.0, |t| t.norm()));
    }
    let modulus = |k: usize| theta[k - 1].norm();
    // Last multiple entry; everything after it is simple.
    let first_simple = mult.iter().rposition(|&m| m > 1).map_or(2, |i| i + 2).max(2);
    let mut n1 = first_simple;
    while n1 <= len && modulus(n1) <= modulus(n1 - 1) {
        n1 += 1;
    }
    let n1 = n1.min(len);
    (n1, 0.5 * (modulus(n1) + modulus(n1 - 1)))
}

/// Residues of `(λ - θ)^ν M(λ)`, `ν < m`, by the trapezoid rule on a circle.
fn residues_at(cd: &CauchyData, theta: Complex64, m: usize, radius: f64) -> Vec<Complex64> {
    let mut acc = vec![ZERO; m];
    for k in 0..RESIDUE_POINTS {
        let e = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / RESIDUE_POINTS as f64);
        let (eta1, eta2) = cd.eta(theta + radius * e);
        let mz = eta2 / eta1;
        let mut p = radius * e;
        for a in acc.iter_mut() {
            *a += mz * p;
            p *= radius * e;
        }
    }
    acc.into_iter().map(|a| a / RESIDUE_POINTS as f64).collect()
}

/// Poles and residues of `M = η2/η1` for the first `count` poles.
pub fn weyl_data(cd: &CauchyData, count: usize) -> Result<WeylData> {
    if count == 0 {
        return Err(Error::InvalidInput("need at least one Weyl pole".into()));
    }
    let region = SearchRegion::for_count(count).with_cap(count);
    let eta1 = |z: Complex64| Ok(cd.eta(z).0);
    let zeros = find_zeros(&eta1, &region)?;
    if zeros.len() < count {
        return Err(Error::RootCountMismatch { counted: count, refined: zeros.len() });
    }

    // Group equal zeros (find_zeros repeats multiple ones).
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    for z in zeros {
        match groups.last_mut() {
            Some((g, m)) if *g == z => *m += 1,
            _ => groups.push((z, 1)),
        }
    }
    let gaps: Vec<f64> = (0..groups.len())
        .map(|i| {
            groups
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, g)| (g.0 - groups[i].0).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut theta = Vec::new();
    let mut mult = Vec::new();
    for &(z, m) in &groups {
        theta.extend(std::iter::repeat(z).take(m));
        mult.extend(std::iter::repeat(m).take(m));
    }
    let (n1, _) = separating_circle(&theta, &mult);

    // Simple poles past n1 must be isolated by their residue circles.
    let mut index = 0;
    for (g, &(z, m)) in groups.iter().enumerate() {
        index += m;
        let tol = 1e-6 * z.norm().max(1.0);
        if index >= n1 && gaps[g] < tol {
            let other = groups
                .iter()
                .map(|h| h.0)
                .find(|&h| h != z && (h - z).norm() == gaps[g])
                .unwrap_or(z);
            return Err(Error::PoleClusterError { first: z, second: other });
        }
    }

    let residues: Vec<Vec<Complex64>> = groups
        .par_iter()
        .zip(&gaps)
        .map(|(&(z, m), &gap)| residues_at(cd, z, m, RESIDUE_RADIUS.min(0.3 * gap)))
        .collect();
    WeylData::new(theta, mult, residues.concat())
}

/// `α_n = 1/M_n` for simple poles.
#[derive(Debug, Clone, PartialEq)]
pub struct NormingSequence {
    pub alpha: Vec<Complex64>,
}

impl NormingSequence {
    pub fn from_weyl(wd: &WeylData) -> Result<Self> {
        if !wd.all_simple() {
            return Err(Error::NotSupported("norming constants of multiple Weyl poles".into()));
        }
        Ok(Self { alpha: wd.residues.iter().map(|m| m.inv()).collect() })
    }
}

/// Least-squares fit of `B` in `n² (π M_n / (2n²) - 1) ≈ B + B2/n²` over the
/// upper half of the poles; zero when there are too few poles to fit.
///
/// `B = (q(0) - q(π))/4`: it is the leading tail of the residues, and a
/// truncated reconstruction that ignores it is off by a sawtooth of size
/// `O(count^{-1/2})` in `L2`.
pub fn residue_tail(wd: &WeylData) -> Complex64 {
    let count = wd.len();
    if count < 8 || !wd.all_simple() {
        return ZERO;
    }
    let rows: Vec<usize> = (count / 2 + 1..=count).collect();
    let design = DMatrix::<Complex64>::from_fn(rows.len(), 2, |r, j| {
        let n2 = (rows[r] * rows[r]) as f64;
        Complex64::new(if j == 0 { 1.0 } else { 1.0 / n2 }, 0.0)
    });
    let rhs = DVector::from_iterator(
        rows.len(),
        rows.iter().map(|&n| {
            let n2 = (n * n) as f64;
            (wd.residues[n - 1] * (PI / (2.0 * n2)) - 1.0) * n2
        }),
    );
    design
        .svd(true, true)
        .solve(&rhs, 0.0)
        .map(|x| x[0])
        .unwrap_or(ZERO)
}

/// Reference potential for the mirrored problem: mean `2ω/π`, and endpoint
/// jump matching the residue tail, `p0(0) - p0(π) = -4B`.
pub fn reference_potential(wd: &WeylData, omega: Complex64, grid: Grid) -> Result<Potential> {
    let c = omega * (2.0 / PI);
    let b = residue_tail(wd);
    Potential::from_fn(grid, |x| c - 2.0 * b * x.cos(), Some("gl-reference".into()))
}

/// One term `σ φ(x, λ) φ(t, λ)` of the separable kernel.
struct Term {
    lambda: Complex64,
    sigma: Complex64,
    phi: Vec<Complex64>,
    dphi: Vec<Complex64>,
}

/// Gelfand–Levitan reconstruction on `grid` from simple-pole Weyl data.
///
/// With `φ(x, λ)` the sine-type solution of a reference potential `p0` with
/// Dirichlet data `{θ0_n, α0_n}`, the kernel
/// `F(x,t) = Σ [φ(x,θ_n)φ(t,θ_n)/α_n - φ(x,θ0_n)φ(t,θ0_n)/α0_n]`, `α_n = 1/M_n`,
/// is separable, so `G(x,t) + F(x,t) + ∫_0^x G(x,s)F(s,t) ds = 0` reduces at
/// each `x` to a dense system of size `2·count` whose derivative gives
/// `d/dx G(x,x)` exactly. The result `p0 + 2 d/dx G(x,x)` is the mirrored
/// potential; it is mirrored back and shifted so that `(1/2)∫q = ω`.
pub fn reconstruct_q(wd: &WeylData, omega: Complex64, grid: Grid) -> Result<Potential> {
    if !grid.is_pi() {
        return Err(Error::InvalidGrid("reconstruction lives on (0, π)".into()));
    }
    if !wd.all_simple() {
        return Err(Error::NotSupported("reconstruction from multiple Weyl poles".into()));
    }
    let reference = reference_potential(wd, omega, grid)?;
    let mirrored = reconstruct_with_reference(wd, &reference)?;
    let last = grid.nodes() - 1;
    let mut values: Vec<Complex64> = (0..grid.nodes()).map(|k| mirrored[last - k]).collect();
    let raw = Potential::from_samples(grid, values.clone(), None)?;
    let shift = (2.0 * omega - raw.integral()) / PI;
    for v in &mut values {
        *v += shift;
    }
    Potential::from_samples(grid, values, None)
}

/// `p0 + 2 d/dx G(x,x)` at the nodes of the reference potential's grid.
pub fn reconstruct_with_reference(wd: &WeylData, reference: &Potential) -> Result<Vec<Complex64>> {
    let count = wd.len();
    let grid = *reference.grid();
    let region = SearchRegion::for_count(count).with_cap(count);
    let ref_evs = find_eigenvalues(&BoundaryPair::dirichlet(), reference, &region)?;
    let ref_theta = ref_evs.subspectrum();
    if ref_theta.len() < count {
        return Err(Error::RootCountMismatch { counted: count, refined: ref_theta.len() });
    }
    let integ = Integrator::default();
    let p0 = reference.values();
    let h = grid.spacing();

    let solve = |lambda: Complex64| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        Ok(integ.integrate_s(reference, lambda)?.into_iter().map(|s| (s.y, s.dy)).unzip())
    };
    let data: Vec<(Complex64, (Vec<Complex64>, Vec<Complex64>))> = wd
        .theta
        .par_iter()
        .chain(ref_theta.par_iter())
        .map(|&l| Ok((l, solve(l)?)))
        .collect::<Result<_>>()?;
    let mut terms = Vec::with_capacity(2 * count);
    for (i, (lambda, (phi, dphi))) in data.into_iter().enumerate() {
        let sigma = if i < count {
            wd.residues[i]
        } else {
            let alpha = hermite_cumulative(&phi, &dphi, &phi, &dphi, lambda, lambda, p0, h)
                .last()
                .copied()
                .unwrap_or(ZERO);
            -alpha.inv()
        };
        terms.push(Term { lambda, sigma, phi, dphi });
    }

    // B_ij(x) = ∫_0^x φ_i φ_j is accumulated node by node; checkpoints let
    // the per-node solves run in parallel chunks.
    let m = terms.len();
    let nodes = grid.nodes();
    let chunk = 64usize;
    let mut checkpoints = Vec::new();
    let mut b = DMatrix::<Complex64>::zeros(m, m);
    for k in 0..nodes {
        if k % chunk == 0 {
            checkpoints.push(b.clone());
        }
        if k + 1 < nodes {
            advance(&mut b, &terms, p0, k, h);
        }
    }
    let check_every = (grid.intervals() / 32).max(1);
    let diag: Vec<Vec<Complex64>> = checkpoints
        .into_par_iter()
        .enumerate()
        .map(|(c, mut b)| {
            let start = c * chunk;
            let end = (start + chunk).min(nodes);
            let mut out = Vec::with_capacity(end - start);
            for k in start..end {
                let check = k % check_every == 0 || k == nodes - 1;
                out.push(diagonal_derivative(&terms, &b, k, grid.x(k), check)?);
                if k + 1 < end {
                    advance(&mut b, &terms, p0, k, h);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(diag
        .concat()
        .into_iter()
        .zip(p0)
        .map(|(d, p)| p + 2.0 * d)
        .collect())
}

/// Two-point Hermite rule on `[x_k, x_k + h]` for `f = φ_i φ_j`, using
/// `φ'' = (p0 - λ) φ`; sixth order.
#[allow(clippy::too_many_arguments)]
fn hermite_step(
    (pi0, dpi0, pi1, dpi1): (Complex64, Complex64, Complex64, Complex64),
    (pj0, dpj0, pj1, dpj1): (Complex64, Complex64, Complex64, Complex64),
    li: Complex64,
    lj: Complex64,
    p0: (Complex64, Complex64),
    h: f64,
) -> Complex64 {
    let f0 = pi0 * pj0;
    let f1 = pi1 * pj1;
    let d0 = dpi0 * pj0 + pi0 * dpj0;
    let d1 = dpi1 * pj1 + pi1 * dpj1;
    let s0 = 2.0 * dpi0 * dpj0 + (2.0 * p0.0 - li - lj) * f0;
    let s1 = 2.0 * dpi1 * dpj1 + (2.0 * p0.1 - li - lj) * f1;
    (f0 + f1) * (h / 2.0) + (d0 - d1) * (h * h / 10.0) + (s0 + s1) * (h * h * h / 120.0)
}

#[allow(clippy::too_many_arguments)]
fn hermite_cumulative(
    pi: &[Complex64],
    dpi: &[Complex64],
    pj: &[Complex64],
    dpj: &[Complex64],
    li: Complex64,
    lj: Complex64,
    p0: &[Complex64],
    h: f64,
) -> Vec<Complex64> {
    let mut acc = ZERO;
    let mut out = vec![ZERO];
    for k in 0..pi.len() - 1 {
        acc += hermite_step(
            (pi[k], dpi[k], pi[k + 1], dpi[k + 1]),
            (pj[k], dpj[k], pj[k + 1], dpj[k + 1]),
            li,
            lj,
            (p0[k], p0[k + 1]),
            h,
        );
        out.push(acc);
    }
    out
}

/// `B(x_{k+1}) = B(x_k) + ∫_{x_k}^{x_{k+1}} φ φᵀ`.
fn advance(b: &mut DMatrix<Complex64>, terms: &[Term], p0: &[Complex64], k: usize, h: f64) {
    let m = terms.len();
    for i in 0..m {
        let ti = &terms[i];
        let left = (ti.phi[k], ti.dphi[k], ti.phi[k + 1], ti.dphi[k + 1]);
        for j in i..m {
            let tj = &terms[j];
            let right = (tj.phi[k], tj.dphi[k], tj.phi[k + 1], tj.dphi[k + 1]);
            let inc = hermite_step(left, right, ti.lambda, tj.lambda, (p0[k], p0[k + 1]), h);
            b[(i, j)] += inc;
            if i != j {
                b[(j, i)] += inc;
            }
        }
    }
}

/// `d/dx G(x, x)` at node `k` given `B = B(x_k)`.
fn diagonal_derivative(terms: &[Term], b: &DMatrix<Complex64>, k: usize, x: f64, check: bool) -> Result<Complex64> {
    let m = terms.len();
    // With G(x,t) = Σ σ_j β_j φ_j(t): (I + B Σ) β = -φ(x).
    let mut a = DMatrix::<Complex64>::identity(m, m);
    for j in 0..m {
        let sigma = terms[j].sigma;
        for i in 0..m {
            a[(i, j)] += b[(i, j)] * sigma;
        }
    }
    if check {
        let cond = condition_number(&a);
        if !(cond <= NYSTROM_COND_LIMIT) {
            return Err(Error::SingularNystrom { x, cond });
        }
    }
    let phi: Vec<Complex64> = terms.iter().map(|t| t.phi[k]).collect();
    let dphi: Vec<Complex64> = terms.iter().map(|t| t.dphi[k]).collect();
    let lu = a.lu();
    let singular = || Error::SingularNystrom { x, cond: f64::INFINITY };
    let beta = lu
        .solve(&DVector::from_iterator(m, phi.iter().map(|p| -p)))
        .ok_or_else(singular)?;
    // Differentiating the system, with B' = φ φᵀ:
    // (I + BΣ) β' = -φ' - φ G(x, x).
    let g: Complex64 = (0..m).map(|j| terms[j].sigma * beta[j] * phi[j]).sum();
    let dbeta = lu
        .solve(&DVector::from_iterator(m, (0..m).map(|j| -dphi[j] - phi[j] * g)))
        .ok_or_else(singular)?;
    Ok((0..m)
        .map(|j| terms[j].sigma * (dbeta[j] * phi[j] + beta[j] * dphi[j]))
        .sum())
}
