//! Entire functions of the spectral parameter, their normalized derivatives
//! `f^{<j>} = f^{(j)} / j!`, the characteristic function and eigenvalue search.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::roots::{Rect, RootFinder};
use crate::sturm::{branch_sqrt, fmt_f64, Integrator, Potential};

pub type ScalarFn = Arc<dyn Fn(Complex64) -> Result<Complex64> + Send + Sync>;
/// `(λ, j) ↦ f^{<j>}(λ)`
pub type DerivativeFn = Arc<dyn Fn(Complex64, usize) -> Result<Complex64> + Send + Sync>;

pub const DEFAULT_CONTOUR_RADIUS: f64 = 1e-2;
const CONTOUR_POINTS: usize = 64;
const CONTOUR_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    ClosedForm,
    Contour,
}

/// An entire function with access to its normalized λ-derivatives.
#[derive(Clone)]
pub struct AnalyticHandle {
    eval: ScalarFn,
    closed_form: Option<DerivativeFn>,
    contour_radius: f64,
}

impl fmt::Debug for AnalyticHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticHandle")
            .field("mode", &self.mode())
            .field("contour_radius", &self.contour_radius)
            .finish()
    }
}

impl AnalyticHandle {
    /// Handle whose derivatives come from the Cauchy integral formula.
    pub fn from_fn(f: impl Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            closed_form: None,
            contour_radius: DEFAULT_CONTOUR_RADIUS,
        }
    }

    /// Handle with closed-form normalized derivatives; `d(λ, 0)` must equal `f(λ)`.
    pub fn with_closed_form(
        f: impl Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static,
        d: impl Fn(Complex64, usize) -> Result<Complex64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(f),
            closed_form: Some(Arc::new(d)),
            contour_radius: DEFAULT_CONTOUR_RADIUS,
        }
    }

    pub fn constant(value: Complex64) -> Self {
        Self::polynomial(vec![value])
    }

    /// `Σ coeffs[k] λ^k`.
    pub fn polynomial(coeffs: Vec<Complex64>) -> Self {
        let c2 = coeffs.clone();
        Self::with_closed_form(
            move |z| Ok(poly_derivative(&coeffs, z, 0)),
            move |z, j| Ok(poly_derivative(&c2, z, j)),
        )
    }

    pub fn with_contour_radius(mut self, radius: f64) -> Self {
        self.contour_radius = radius;
        self
    }

    pub fn mode(&self) -> DerivativeMode {
        if self.closed_form.is_some() {
            DerivativeMode::ClosedForm
        } else {
            DerivativeMode::Contour
        }
    }

    pub fn contour_radius(&self) -> f64 {
        self.contour_radius
    }

    pub fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        (self.eval)(lambda)
    }

    pub fn derivative(&self, lambda: Complex64, order: usize) -> Result<Complex64> {
        if order == 0 {
            return self.eval(lambda);
        }
        match &self.closed_form {
            Some(d) => d(lambda, order),
            None => self.contour_derivative(lambda, order),
        }
    }

    /// Normalized derivative by the Cauchy integral formula regardless of mode.
    pub fn contour_derivative(&self, lambda: Complex64, order: usize) -> Result<Complex64> {
        contour_derivative(|z| self.eval(z), lambda, order, self.contour_radius)
    }
}

/// `f^{<j>}(λ) = (1/2πi) ∮ f(z) (z-λ)^{-j-1} dz` by the trapezoid rule on a
/// circle, compared between 64 and 128 nodes.
pub fn contour_derivative(
    f: impl Fn(Complex64) -> Result<Complex64>,
    lambda: Complex64,
    order: usize,
    radius: f64,
) -> Result<Complex64> {
    let n = 2 * CONTOUR_POINTS;
    let mut coarse = Complex64::new(0.0, 0.0);
    let mut fine = Complex64::new(0.0, 0.0);
    let mut max_abs: f64 = 0.0;
    for k in 0..n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let unit = Complex64::from_polar(1.0, theta);
        let fz = f(lambda + radius * unit)?;
        max_abs = max_abs.max(fz.norm());
        let term = fz * Complex64::from_polar(1.0, -(order as f64) * theta);
        fine += term;
        if k % 2 == 0 {
            coarse += term;
        }
    }
    let scale = radius.powi(order as i32);
    let fine = fine / (n as f64 * scale);
    let coarse = coarse / (CONTOUR_POINTS as f64 * scale);
    let gap = (fine - coarse).norm() / (fine.norm() + 1e-9 * max_abs / scale).max(f64::MIN_POSITIVE);
    if gap > CONTOUR_REL_TOL {
        return Err(Error::QuadratureDivergence { lambda, gap });
    }
    Ok(fine)
}

fn poly_derivative(coeffs: &[Complex64], z: Complex64, j: usize) -> Complex64 {
    // Horner on the coefficients of p^{<j>}: a_k * C(k, j).
    let mut acc = Complex64::new(0.0, 0.0);
    for k in (j..coeffs.len()).rev() {
        acc = acc * z + coeffs[k] * binomial(k, j);
    }
    acc
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Ordinary derivatives `g^{(k)}`, `H^{(k)}`, `k = 0..=upto`, of
/// `g(z) = cos √z` and `H(z) = sin √z / √z`.
fn cos_sinc_derivatives(z: Complex64, upto: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut g = vec![Complex64::new(0.0, 0.0); upto + 1];
    let mut h = vec![Complex64::new(0.0, 0.0); upto + 1];
    if z.norm() < 1.0 {
        // g^{(ν)} = Σ_{k≥ν} (-1)^k k!/(k-ν)! z^{k-ν}/(2k)!, likewise H with (2k+1)!.
        for nu in 0..=upto {
            let mut sg = Complex64::new(0.0, 0.0);
            let mut sh = Complex64::new(0.0, 0.0);
            let mut zp = Complex64::new(1.0, 0.0);
            for k in nu..nu + 30 {
                let falling: f64 = ((k - nu + 1)..=k).map(|i| i as f64).product();
                let fact2k: f64 = (1..=2 * k).map(|i| i as f64).product();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sg += zp * (sign * falling / fact2k);
                sh += zp * (sign * falling / (fact2k * (2 * k + 1) as f64));
                zp *= z;
            }
            g[nu] = sg;
            h[nu] = sh;
        }
        return (g, h);
    }
    let w = branch_sqrt(z);
    g[0] = w.cos();
    h[0] = w.sin() / w;
    if upto >= 1 {
        g[1] = -0.5 * h[0];
        h[1] = (g[0] - h[0]) / (2.0 * z);
    }
    // 4z g'' + 2g' + g = 0 and 4z H'' + 6H' + H = 0, differentiated k times.
    for k in 0..upto.saturating_sub(1) {
        let kf = k as f64;
        g[k + 2] = -((4.0 * kf + 2.0) * g[k + 1] + g[k]) / (4.0 * z);
        h[k + 2] = -((4.0 * kf + 6.0) * h[k + 1] + h[k]) / (4.0 * z);
    }
    (g, h)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `c^{<ν>}(t, λ)` for `c(t, λ) = cos(√λ t)`.
pub fn cos_kernel(t: f64, lambda: Complex64, nu: usize) -> Complex64 {
    let (g, _) = cos_sinc_derivatives(lambda * (t * t), nu);
    g[nu] * (t.powi(2 * nu as i32) / factorial(nu))
}

/// `s^{<ν>}(t, λ)` for `s(t, λ) = √λ sin(√λ t) = λ · t H(λ t²)`.
pub fn sin_kernel(t: f64, lambda: Complex64, nu: usize) -> Complex64 {
    let (_, h) = cos_sinc_derivatives(lambda * (t * t), nu);
    let phi = |k: usize| h[k] * (t.powi(2 * k as i32 + 1) / factorial(k));
    if nu == 0 {
        lambda * phi(0)
    } else {
        lambda * phi(nu) + phi(nu - 1)
    }
}

/// `s(t, λ) / λ = sin(√λ t) / √λ`, entire in `λ`.
pub fn sin_over_lambda(t: f64, lambda: Complex64) -> Complex64 {
    let (_, h) = cos_sinc_derivatives(lambda * (t * t), 0);
    h[0] * t
}

/// The pair `(f1, f2)` of the boundary condition `f1 y'(π) + f2 y(π) = 0`.
#[derive(Debug, Clone)]
pub struct BoundaryPair {
    pub f1: AnalyticHandle,
    pub f2: AnalyticHandle,
    pub name: String,
}

impl BoundaryPair {
    pub fn new(f1: AnalyticHandle, f2: AnalyticHandle, name: impl Into<String>) -> Self {
        Self {
            f1,
            f2,
            name: name.into(),
        }
    }

    pub fn dirichlet() -> Self {
        Self::polynomials(vec![], vec![Complex64::new(1.0, 0.0)], "dirichlet")
    }

    pub fn neumann() -> Self {
        Self::polynomials(vec![Complex64::new(1.0, 0.0)], vec![], "neumann")
    }

    pub fn robin(h: Complex64) -> Self {
        Self::polynomials(vec![Complex64::new(1.0, 0.0)], vec![h], format!("robin {} {}", h.re, h.im))
    }

    pub fn polynomials(f1: Vec<Complex64>, f2: Vec<Complex64>, name: impl Into<String>) -> Self {
        Self::new(AnalyticHandle::polynomial(f1), AnalyticHandle::polynomial(f2), name)
    }

    /// Parses `dirichlet`, `neumann`, `robin <h> [im]` and
    /// `poly <a0 a1 ...> | <b0 b1 ...>` (ascending real coefficients of f1 and f2).
    /// The half-inverse pair is built from a potential, not parsed.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let mut parts = text.split_whitespace();
        let name = parts.next().unwrap_or("");
        let bad = |m: &str| Error::InvalidInput(format!("boundary '{text}': {m}"));
        match name {
            "dirichlet" => Ok(Self::dirichlet()),
            "neumann" => Ok(Self::neumann()),
            "robin" => {
                let nums: Vec<f64> = parts
                    .map(|p| p.parse::<f64>().map_err(|_| bad("bad number")))
                    .collect::<Result<_>>()?;
                match nums.as_slice() {
                    [re] => Ok(Self::robin(Complex64::new(*re, 0.0))),
                    [re, im] => Ok(Self::robin(Complex64::new(*re, *im))),
                    _ => Err(bad("expected 'robin <h> [im]'")),
                }
            }
            "poly" => {
                let rest = text["poly".len()..].trim();
                let (a, b) = rest.split_once('|').ok_or_else(|| bad("expected '|' between f1 and f2"))?;
                let coeffs = |s: &str| -> Result<Vec<Complex64>> {
                    s.split_whitespace()
                        .map(|p| {
                            p.parse::<f64>()
                                .map(|v| Complex64::new(v, 0.0))
                                .map_err(|_| bad("bad coefficient"))
                        })
                        .collect()
                };
                Ok(Self::polynomials(coeffs(a)?, coeffs(b)?, text.to_string()))
            }
            "hl" => Err(bad("the half-inverse pair is built from the known half of the potential")),
            _ => Err(bad("unknown boundary preset")),
        }
    }

    pub fn eval(&self, lambda: Complex64) -> Result<(Complex64, Complex64)> {
        Ok((self.f1.eval(lambda)?, self.f2.eval(lambda)?))
    }
}

/// `Δ(λ) = f1(λ) S'(π, λ) + f2(λ) S(π, λ)`.
pub fn char_fn(bp: &BoundaryPair, q: &Potential, lambda: Complex64) -> Result<Complex64> {
    char_fn_with(&Integrator::default(), bp, q, lambda)
}

pub fn char_fn_with(
    integ: &Integrator,
    bp: &BoundaryPair,
    q: &Potential,
    lambda: Complex64,
) -> Result<Complex64> {
    if !q.grid().is_pi() {
        return Err(Error::InvalidGrid("characteristic function needs a (0, π) grid".into()));
    }
    let (s, ds) = integ.s_endpoint(q, lambda)?;
    let (f1, f2) = bp.eval(lambda)?;
    Ok(f1 * ds + f2 * s)
}

/// Subspectrum with `λ_0 = 0` prepended and equal values made consecutive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueList {
    values: Vec<Complex64>,
    /// `(first index, multiplicity)` of every distinct value, in order.
    groups: Vec<(usize, usize)>,
}

impl EigenvalueList {
    /// Relative tolerance under which two given values are treated as equal.
    pub const EQUAL_TOL: f64 = 1e-10;

    /// Builds the list from `λ_1, λ_2, ...` (without `λ_0`).
    pub fn from_subspectrum(sub: &[Complex64]) -> Self {
        let mut groups: Vec<(Complex64, usize)> = vec![(Complex64::new(0.0, 0.0), 1)];
        for &v in sub {
            let scale = v.norm().max(1.0);
            match groups
                .iter_mut()
                .find(|(g, _)| (*g - v).norm() <= Self::EQUAL_TOL * scale)
            {
                Some((_, m)) => *m += 1,
                None => groups.push((v, 1)),
            }
        }
        let mut values = Vec::with_capacity(sub.len() + 1);
        let mut idx = Vec::with_capacity(groups.len());
        for (v, m) in groups {
            idx.push((values.len(), m));
            values.extend(std::iter::repeat(v).take(m));
        }
        Self { values, groups: idx }
    }

    /// `λ_0, ..., λ_N`.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `λ_1, ..., λ_N`.
    pub fn subspectrum(&self) -> &[Complex64] {
        &self.values[1..]
    }

    /// Largest index `N`.
    pub fn last_index(&self) -> usize {
        self.values.len() - 1
    }

    /// The index set `I` of first occurrences.
    pub fn index_set(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.0).collect()
    }

    /// `(n, m_n)` for every `n ∈ I`.
    pub fn groups(&self) -> &[(usize, usize)] {
        &self.groups
    }

    /// `m_n` for the group containing index `n`.
    pub fn multiplicity(&self, n: usize) -> usize {
        self.groups
            .iter()
            .find(|(s, m)| n >= *s && n < s + m)
            .map(|g| g.1)
            .unwrap_or(0)
    }

    /// Keeps `λ_0..λ_N`.
    pub fn truncated(&self, n: usize) -> Self {
        let keep = (n + 1).min(self.values.len());
        Self::from_subspectrum(&self.values[1..keep])
    }

    /// CSV with columns `n,re,im,multiplicity`, `λ_0` included.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "n,re,im,multiplicity")?;
        for (n, v) in self.values.iter().enumerate() {
            writeln!(w, "{n},{},{},{}", fmt_f64(v.re), fmt_f64(v.im), self.multiplicity(n))?;
        }
        Ok(())
    }

    /// Reads `n,re,im[,...]` rows; a row with `n = 0` is skipped, since
    /// `λ_0 = 0` is always prepended.
    pub fn read_csv(reader: impl BufRead) -> Result<Self> {
        let mut sub = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if i == 0 || line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: i + 1, msg: msg.into() };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() < 3 {
                return Err(bad("expected n,re,im"));
            }
            let n: usize = f[0].parse().map_err(|_| bad("bad index"))?;
            let re: f64 = f[1].parse().map_err(|_| bad("bad real part"))?;
            let im: f64 = f[2].parse().map_err(|_| bad("bad imaginary part"))?;
            if n != sub.len() + 1 {
                if n == 0 {
                    continue;
                }
                return Err(bad("indices must run 1, 2, 3, ..."));
            }
            sub.push(Complex64::new(re, im));
        }
        Ok(Self::from_subspectrum(&sub))
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Rectangle `[re_min, re_max] × [-half_height, half_height]` and a count cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub half_height: f64,
    pub max_count: Option<usize>,
}

impl SearchRegion {
    pub const DEFAULT_HALF_HEIGHT: f64 = 25.0;

    pub fn up_to(re_max: f64) -> Self {
        Self {
            re_min: -2.0,
            re_max,
            half_height: Self::DEFAULT_HALF_HEIGHT,
            max_count: None,
        }
    }

    /// Room for `count + 5` eigenvalues growing like `n²` on `(0, π)`.
    pub fn for_count(count: usize) -> Self {
        let n = (count + 5) as f64;
        Self {
            max_count: Some(count),
            ..Self::up_to(n * n + n + 0.5)
        }
    }

    pub fn with_cap(mut self, count: usize) -> Self {
        self.max_count = Some(count);
        self
    }

    pub fn rect(&self) -> Result<Rect> {
        Rect::new(self.re_min, self.re_max, -self.half_height, self.half_height)
    }
}

/// Zeros of `f` inside the region, expanded by multiplicity, sorted by
/// `Re √λ` and capped.
pub fn find_zeros<F>(f: &F, region: &SearchRegion) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let roots = RootFinder::default().find(f, &region.rect()?)?;
    let mut roots = roots;
    roots.sort_by(|a, b| {
        let (ra, rb) = (branch_sqrt(a.z), branch_sqrt(b.z));
        ra.re.total_cmp(&rb.re).then(a.z.im.total_cmp(&b.z.im))
    });
    let mut out = Vec::new();
    for r in roots {
        out.extend(std::iter::repeat(r.z).take(r.multiplicity));
    }
    if let Some(cap) = region.max_count {
        out.truncate(cap);
    }
    Ok(out)
}

/// Eigenvalues of `L(q)` for the boundary pair, as a list with `λ_0 = 0`.
pub fn find_eigenvalues(bp: &BoundaryPair, q: &Potential, region: &SearchRegion) -> Result<EigenvalueList> {
    let integ = Integrator::default();
    let f = |z: Complex64| char_fn_with(&integ, bp, q, z);
    Ok(EigenvalueList::from_subspectrum(&find_zeros(&f, region)?))
}

/// `max_ν |(λΔ)^{<ν>}(λ_n)|` over `ν < m_n` for every distinct nonzero `λ_n`.
pub fn eigen_residuals(bp: &BoundaryPair, q: &Potential, evs: &EigenvalueList) -> Result<Vec<(Complex64, f64)>> {
    let integ = Integrator::default();
    let ld = |z: Complex64| -> Result<Complex64> { Ok(z * char_fn_with(&integ, bp, q, z)?) };
    let mut out = Vec::new();
    for &(n, m) in evs.groups() {
        let lambda = evs.values()[n];
        if n == 0 && lambda.norm() == 0.0 && m == 1 {
            continue;
        }
        let mut worst: f64 = 0.0;
        for nu in 0..m {
            let r = if nu == 0 {
                ld(lambda)?
            } else {
                let radius = 1e-2 * lambda.norm().max(1.0).sqrt();
                contour_derivative(&ld, lambda, nu, radius)?
            };
            worst = worst.max(r.norm());
        }
        out.push((lambda, worst));
    }
    Ok(out)
}
