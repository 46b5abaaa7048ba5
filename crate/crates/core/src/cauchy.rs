//! Cauchy data `{K, N, ω}` of a potential and the entire functions
//! `η1 = S(π, ·)`, `η2 = S'(π, ·)` rebuilt from them.
//!
//! At `λ = n²` the transformation-operator representations reduce to Fourier
//! coefficients:
//!
//! ```text
//! ∫ K(t) cos(nt) dt = n² η1(n²) + ω (-1)^n
//! ∫ N(t) sin(nt) dt = n (η2(n²) - (-1)^n)
//! ```
//!
//! so `K` and `N` are synthesized from cosine and sine series truncated at
//! `n_modes`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::{cos_kernel, sin_kernel, sin_over_lambda, BoundaryPair};
use crate::error::{Error, Result};
use crate::quad;
use crate::sturm::{branch_sqrt, fmt_f64, omega_of, Grid, Integrator, Potential};

pub const DEFAULT_MODES: usize = 64;
const SMALL_LAMBDA: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    grid: Grid,
    k: Vec<Complex64>,
    n: Vec<Complex64>,
    omega: Complex64,
}

impl CauchyData {
    pub fn new(grid: Grid, k: Vec<Complex64>, n: Vec<Complex64>, omega: Complex64) -> Result<Self> {
        if !grid.is_pi() {
            return Err(Error::InvalidGrid("Cauchy data live on (0, π)".into()));
        }
        if k.len() != grid.nodes() || n.len() != grid.nodes() {
            return Err(Error::InvalidInput("K and N must have one sample per node".into()));
        }
        let finite = |v: &Complex64| v.re.is_finite() && v.im.is_finite();
        if !(k.iter().all(finite) && n.iter().all(finite) && finite(&omega)) {
            return Err(Error::InvalidInput("non-finite Cauchy data".into()));
        }
        Ok(Self { grid, k, n, omega })
    }

    pub fn zero(grid: Grid) -> Result<Self> {
        let z = vec![Complex64::new(0.0, 0.0); grid.nodes()];
        Self::new(grid, z.clone(), z, Complex64::new(0.0, 0.0))
    }

    /// Builds `K`, `N` from cosine coefficients `a_0..` and sine coefficients
    /// `b_1..` (`b[0]` is ignored), taken as exact: the series are truncated.
    pub fn from_coefficients(grid: Grid, a: &[Complex64], b: &[Complex64], omega: Complex64) -> Result<Self> {
        Self::synthesize(grid, a, b, omega, TailModel::default())
    }

    /// Like [`CauchyData::from_coefficients`], but with the asymptotic tail of
    /// both series restored. The top coefficients are fitted to
    ///
    /// ```text
    /// n² a_n = c1 + c2 (-1)^n + (c3 + c4 (-1)^n) / n²
    /// n  b_n = d1 + d2 (-1)^n + (d3 + d4 (-1)^n) / n²
    /// ```
    ///
    /// and the fitted patterns are summed to infinity in closed form.
    pub fn from_coefficients_with_tail(
        grid: Grid,
        a: &[Complex64],
        b: &[Complex64],
        omega: Complex64,
    ) -> Result<Self> {
        let m = a.len().min(b.len()).saturating_sub(1);
        if m < 12 {
            return Self::from_coefficients(grid, a, b, omega);
        }
        let model = TailModel::fit(a, b, m);
        let mut ar = a.to_vec();
        let mut br = b.to_vec();
        for n in 1..ar.len() {
            ar[n] -= model.cos_coefficient(n);
        }
        for n in 1..br.len() {
            br[n] -= model.sin_coefficient(n);
        }
        Self::synthesize(grid, &ar, &br, omega, model)
    }

    fn synthesize(
        grid: Grid,
        a: &[Complex64],
        b: &[Complex64],
        omega: Complex64,
        model: TailModel,
    ) -> Result<Self> {
        let k = (0..grid.nodes())
            .map(|i| {
                let t = grid.x(i);
                let series: Complex64 = a
                    .iter()
                    .enumerate()
                    .map(|(n, an)| {
                        let w = if n == 0 { 1.0 / PI } else { 2.0 / PI };
                        an * (w * (n as f64 * t).cos())
                    })
                    .sum();
                series + model.k_function(t)
            })
            .collect();
        let n = (0..grid.nodes())
            .map(|i| {
                let t = grid.x(i);
                let series: Complex64 = b
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(n, bn)| bn * (2.0 / PI * (n as f64 * t).sin()))
                    .sum();
                series + model.n_function(t)
            })
            .collect();
        Self::new(grid, k, n, omega)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn k(&self) -> &[Complex64] {
        &self.k
    }

    pub fn n(&self) -> &[Complex64] {
        &self.n
    }

    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    /// `max(‖K - K̃‖, ‖N - Ñ‖)`.
    pub fn distance(&self, other: &CauchyData) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("Cauchy data on different grids".into()));
        }
        let w = self.grid.weights();
        Ok(quad::l2_distance(&w, &self.k, &other.k).max(quad::l2_distance(&w, &self.n, &other.n)))
    }

    /// `(η1(λ), η2(λ))` by grid quadrature.
    pub fn eta(&self, lambda: Complex64) -> (Complex64, Complex64) {
        let grid = &self.grid;
        let w = grid.weights();
        let omega = self.omega;
        let mut int_k_cm1 = Complex64::new(0.0, 0.0);
        let mut int_n_s = Complex64::new(0.0, 0.0);
        let mut int_k = Complex64::new(0.0, 0.0);
        if lambda.norm() >= 1.0 {
            // e^{±iρt/2} by rotation: the direct kernels cost two complex
            // trig calls per node and dominate root searches.
            let rho = branch_sqrt(lambda);
            let i = Complex64::i();
            let step = (i * rho * (0.5 * grid.spacing())).exp();
            let back = step.inv();
            let (mut z, mut zi) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
            for k in 0..grid.nodes() {
                let half_sin = (z - zi) / (2.0 * i);
                let sin_full = 2.0 * half_sin * (z + zi) / 2.0;
                int_k_cm1 += self.k[k] * (-2.0 * half_sin * half_sin / lambda) * w[k];
                int_n_s += self.n[k] * (sin_full / rho) * w[k];
                int_k += self.k[k] * w[k];
                z *= step;
                zi *= back;
            }
        } else {
            for k in 0..grid.nodes() {
                let t = grid.x(k);
                int_k_cm1 += self.k[k] * cos_minus_one_over_lambda(t, lambda) * w[k];
                int_n_s += self.n[k] * sin_over_lambda(t, lambda) * w[k];
                int_k += self.k[k] * w[k];
            }
        }
        let mut eta1 = sin_over_lambda(PI, lambda) - omega * cos_minus_one_over_lambda(PI, lambda) + int_k_cm1;
        if lambda.norm() >= SMALL_LAMBDA {
            // Vanishes for consistent data; kept so perturbed data stay exact.
            eta1 += (int_k - omega) / lambda;
        }
        let eta2 = cos_kernel(PI, lambda, 0) + omega * sin_over_lambda(PI, lambda) + int_n_s;
        (eta1, eta2)
    }

    /// `∫ K(t) cos(nt) dt` for `n = 0..count`.
    pub fn cosine_coefficients(&self, count: usize) -> Vec<Complex64> {
        let w = self.grid.weights();
        (0..count)
            .map(|n| {
                (0..self.grid.nodes())
                    .map(|i| self.k[i] * (n as f64 * self.grid.x(i)).cos() * w[i])
                    .sum()
            })
            .collect()
    }

    /// CSV: `omega <re> <im>`, a column header, then `t,re_K,im_K,re_N,im_N`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "omega {} {}", fmt_f64(self.omega.re), fmt_f64(self.omega.im))?;
        writeln!(w, "t,re_K,im_K,re_N,im_N")?;
        for i in 0..self.grid.nodes() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(self.grid.x(i)),
                fmt_f64(self.k[i].re),
                fmt_f64(self.k[i].im),
                fmt_f64(self.n[i].re),
                fmt_f64(self.n[i].im)
            )?;
        }
        Ok(())
    }

    pub fn read_csv(reader: impl BufRead) -> Result<Self> {
        let mut omega = None;
        let mut k = Vec::new();
        let mut n = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let err = |msg: &str| Error::Parse {
                line: lineno + 1,
                msg: msg.into(),
            };
            if line.is_empty() || line.starts_with("t,") || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("omega") {
                let v: Vec<f64> = rest
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| err("bad omega")))
                    .collect::<Result<_>>()?;
                if v.len() != 2 {
                    return Err(err("expected 'omega <re> <im>'"));
                }
                omega = Some(Complex64::new(v[0], v[1]));
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| err("bad number")))
                .collect::<Result<_>>()?;
            if v.len() != 5 {
                return Err(err("expected 5 columns"));
            }
            k.push(Complex64::new(v[1], v[2]));
            n.push(Complex64::new(v[3], v[4]));
        }
        let omega = omega.ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing omega header".into(),
        })?;
        let grid = Grid::new(PI, k.len())?;
        Self::new(grid, k, n, omega)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Coefficients of the asymptotic patterns of the cosine (`K`) and sine (`N`)
/// series; the default is no tail.
#[derive(Debug, Clone, Copy, Default)]
struct TailModel {
    k: [Complex64; 4],
    n: [Complex64; 4],
}

fn alt(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl TailModel {
    fn fit(a: &[Complex64], b: &[Complex64], m: usize) -> Self {
        let first = m - (m / 3).clamp(8, 24) + 1;
        let rows: Vec<usize> = (first..=m).collect();
        let design = nalgebra::DMatrix::<Complex64>::from_fn(rows.len(), 4, |r, j| {
            let n = rows[r];
            let inv2 = 1.0 / (n * n) as f64;
            let v = match j {
                0 => 1.0,
                1 => alt(n),
                2 => inv2,
                _ => alt(n) * inv2,
            };
            Complex64::new(v, 0.0)
        });
        let solve = |rhs: nalgebra::DVector<Complex64>| -> [Complex64; 4] {
            let svd = design.clone().svd(true, true);
            let x = svd.solve(&rhs, 1e-14).expect("SVD with both factors");
            [x[0], x[1], x[2], x[3]]
        };
        let ka = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|&n| a[n] * (n * n) as f64));
        let nb = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|&n| b[n] * n as f64));
        let out = Self {
            k: solve(ka),
            n: solve(nb),
        };
        out
    }

    fn cos_coefficient(&self, n: usize) -> Complex64 {
        let n2 = (n * n) as f64;
        (self.k[0] + self.k[1] * alt(n) + (self.k[2] + self.k[3] * alt(n)) / n2) / n2
    }

    fn sin_coefficient(&self, n: usize) -> Complex64 {
        let n2 = (n * n) as f64;
        (self.n[0] + self.n[1] * alt(n) + (self.n[2] + self.n[3] * alt(n)) / n2) / n as f64
    }

    /// `(2/π) Σ_{n≥1} cos_coefficient(n) cos(nt)` on `[0, π]`.
    fn k_function(&self, t: f64) -> Complex64 {
        let (p2, t2) = (PI * PI, t * t);
        let cos2 = p2 / 6.0 - PI * t / 2.0 + t2 / 4.0;
        let cos2_alt = t2 / 4.0 - p2 / 12.0;
        let cos4 = p2 * p2 / 90.0 - p2 * t2 / 12.0 + PI * t2 * t / 12.0 - t2 * t2 / 48.0;
        let cos4_alt = -7.0 * p2 * p2 / 720.0 + p2 * t2 / 24.0 - t2 * t2 / 48.0;
        (self.k[0] * cos2 + self.k[1] * cos2_alt + self.k[2] * cos4 + self.k[3] * cos4_alt) * (2.0 / PI)
    }

    /// `(2/π) Σ_{n≥1} sin_coefficient(n) sin(nt)` on `[0, π]`.
    fn n_function(&self, t: f64) -> Complex64 {
        let (p2, t2) = (PI * PI, t * t);
        // Jump series: the one-sided limits are used at the endpoints, where
        // N itself is nonzero.
        let sin1 = (PI - t) / 2.0;
        let sin1_alt = -t / 2.0;
        let sin3 = p2 * t / 6.0 - PI * t2 / 4.0 + t2 * t / 12.0;
        let sin3_alt = -(p2 * t / 12.0 - t2 * t / 12.0);
        (self.n[0] * sin1 + self.n[1] * sin1_alt + self.n[2] * sin3 + self.n[3] * sin3_alt) * (2.0 / PI)
    }
}

/// `(cos(√λ t) - 1) / λ = -(t²/2) (sin(√λ t/2) / (√λ t/2))²`, entire and
/// free of cancellation near `λ = 0`.
fn cos_minus_one_over_lambda(t: f64, lambda: Complex64) -> Complex64 {
    let half = sin_over_lambda(t / 2.0, lambda);
    -2.0 * half * half
}

/// Cauchy data of `q` from `S(π, n²)`, `S'(π, n²)`, `n = 0..=n_modes`.
pub fn cauchy_data_of(q: &Potential, n_modes: usize) -> Result<CauchyData> {
    let grid = *q.grid();
    if !grid.is_pi() {
        return Err(Error::InvalidGrid("Cauchy data need a potential on (0, π)".into()));
    }
    let limit = grid.intervals() / 4;
    if n_modes > limit {
        return Err(Error::AliasGuard { n_modes, limit });
    }
    let omega = omega_of(q)?;
    let integ = Integrator::default();
    let ends: Vec<(Complex64, Complex64)> = (0..=n_modes)
        .into_par_iter()
        .map(|n| integ.s_endpoint(q, Complex64::new((n * n) as f64, 0.0)))
        .collect::<Result<_>>()?;
    let mut a = Vec::with_capacity(n_modes + 1);
    let mut b = Vec::with_capacity(n_modes + 1);
    for (n, (eta1, eta2)) in ends.into_iter().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let nf = n as f64;
        a.push(eta1 * (nf * nf) + omega * sign);
        b.push((eta2 - sign) * nf);
    }
    a[0] = omega;
    CauchyData::from_coefficients_with_tail(grid, &a, &b, omega)
}

pub fn rebuild_eta(cd: &CauchyData, lambda: Complex64) -> (Complex64, Complex64) {
    cd.eta(lambda)
}

/// `M(λ) = η2(λ) / η1(λ)`.
pub fn weyl(cd: &CauchyData, lambda: Complex64) -> Result<Complex64> {
    let (eta1, eta2) = cd.eta(lambda);
    let h = 1e-5 * lambda.norm().max(1.0);
    let slope = (cd.eta(lambda + h).0 - cd.eta(lambda - h).0) / (2.0 * h);
    if eta1.norm() <= 1e-8 * slope.norm() || eta1.norm() == 0.0 {
        return Err(Error::NearPole(lambda));
    }
    Ok(eta2 / eta1)
}

/// Right-hand side of `λΔ(λ) = f1 (λc + ωs + ∫Ns) + f2 (s - ωc + ∫Kc)`.
pub fn lambda_delta_from_cauchy(bp: &BoundaryPair, cd: &CauchyData, lambda: Complex64) -> Result<Complex64> {
    let grid = cd.grid();
    let w = grid.weights();
    let mut int_ns = Complex64::new(0.0, 0.0);
    let mut int_kc = Complex64::new(0.0, 0.0);
    for i in 0..grid.nodes() {
        let t = grid.x(i);
        int_ns += cd.n()[i] * sin_kernel(t, lambda, 0) * w[i];
        int_kc += cd.k()[i] * cos_kernel(t, lambda, 0) * w[i];
    }
    let s = sin_kernel(PI, lambda, 0);
    let c = cos_kernel(PI, lambda, 0);
    let omega = cd.omega();
    let (f1, f2) = bp.eval(lambda)?;
    Ok(f1 * (lambda * c + omega * s + int_ns) + f2 * (s - omega * c + int_kc))
}
