//! Grids, potentials and the initial-value integrator for `-y'' + q y = λ y`.
//!
//! The integrator is the fourth-order Magnus method with two Gauss–Legendre
//! points per grid interval. For a traceless 2×2 generator the exponential has
//! the closed form `cosh(μ) I + sinh(μ)/μ Ω` with `μ² = -det Ω`, so every step
//! propagator has unit determinant and constant potentials are integrated
//! exactly.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3) / 6
const SQRT3_OVER_12: f64 = 0.144_337_567_297_406_44;

pub const DEFAULT_LAMBDA_GUARD: f64 = 1e8;
pub const OVERFLOW_LIMIT: f64 = 1e300;

/// Uniform grid `x_k = k * endpoint / intervals`, `k = 0..=intervals`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    endpoint: f64,
    intervals: usize,
}

impl Grid {
    pub fn new(endpoint: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::InvalidGrid(format!("{nodes} nodes, need at least 2")));
        }
        if !(endpoint.is_finite() && endpoint > 0.0) {
            return Err(Error::InvalidGrid(format!("endpoint {endpoint} must be positive")));
        }
        Ok(Self {
            endpoint,
            intervals: nodes - 1,
        })
    }

    /// `intervals` subintervals on `(0, π)`.
    pub fn on_pi(intervals: usize) -> Result<Self> {
        Self::new(PI, intervals + 1)
    }

    /// `intervals` subintervals on `(0, 2π)`.
    pub fn on_two_pi(intervals: usize) -> Result<Self> {
        Self::new(2.0 * PI, intervals + 1)
    }

    pub fn default_pi() -> Self {
        Self::on_pi(2048).expect("valid default grid")
    }

    pub fn default_two_pi() -> Self {
        Self::on_two_pi(4096).expect("valid default grid")
    }

    pub fn endpoint(&self) -> f64 {
        self.endpoint
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    pub fn spacing(&self) -> f64 {
        self.endpoint / self.intervals as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        if k == self.intervals {
            self.endpoint
        } else {
            k as f64 * self.spacing()
        }
    }

    pub fn abscissas(&self) -> Vec<f64> {
        (0..self.nodes()).map(|k| self.x(k)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        quad::simpson_weights(self.nodes(), self.spacing())
    }

    pub fn is_pi(&self) -> bool {
        (self.endpoint - PI).abs() < 1e-12
    }

    pub fn is_two_pi(&self) -> bool {
        (self.endpoint - 2.0 * PI).abs() < 1e-12
    }

    /// Index of the node at `x`, if `x` is (to rounding) a grid node.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let k = (x / self.spacing()).round();
        if k < 0.0 || k > self.intervals as f64 {
            return None;
        }
        let k = k as usize;
        ((self.x(k) - x).abs() < 1e-9 * self.endpoint.max(1.0)).then_some(k)
    }
}

/// `λ` together with `ρ = √λ` on the branch `arg ρ ∈ [-π/2, π/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub lambda: Complex64,
    pub rho: Complex64,
}

impl SpectralPoint {
    pub fn new(lambda: Complex64) -> Self {
        Self {
            lambda,
            rho: branch_sqrt(lambda),
        }
    }
}

/// Square root with `arg ∈ [-π/2, π/2)`.
pub fn branch_sqrt(lambda: Complex64) -> Complex64 {
    let r = lambda.sqrt();
    if r.re <= 0.0 && r.im > 0.0 {
        -r
    } else {
        r
    }
}

/// Closed-form potentials addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Zero,
    Constant(Complex64),
    /// `amplitude * cos(frequency * x)`
    Cosine { amplitude: Complex64, frequency: f64 },
    /// `amplitude * sin(frequency * x)`
    Sine { amplitude: Complex64, frequency: f64 },
    /// `slope * x / π`
    Ramp(Complex64),
}

impl Preset {
    /// Parses `zero`, `constant <re> [im]`, `cosine [re im [freq]]`,
    /// `sine [re im [freq]]` and `ramp <re> [im]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| Error::InvalidInput("empty potential preset".into()))?;
        let nums: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad number '{p}' in preset '{text}'")))
            })
            .collect::<Result<_>>()?;
        let complex_at = |i: usize, default: Complex64| -> Complex64 {
            match (nums.get(i), nums.get(i + 1)) {
                (Some(&re), Some(&im)) => Complex64::new(re, im),
                (Some(&re), None) => Complex64::new(re, 0.0),
                _ => default,
            }
        };
        let one = Complex64::new(1.0, 0.0);
        match name {
            "zero" => Ok(Preset::Zero),
            "constant" => {
                if nums.is_empty() {
                    return Err(Error::InvalidInput("constant preset needs a value".into()));
                }
                Ok(Preset::Constant(complex_at(0, one)))
            }
            "cosine" | "sine" => {
                let amplitude = complex_at(0, one);
                let frequency = nums.get(2).copied().unwrap_or(1.0);
                Ok(if name == "cosine" {
                    Preset::Cosine { amplitude, frequency }
                } else {
                    Preset::Sine { amplitude, frequency }
                })
            }
            "ramp" => Ok(Preset::Ramp(complex_at(0, one))),
            other => Err(Error::InvalidInput(format!("unknown potential preset '{other}'"))),
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match *self {
            Preset::Zero => Complex64::new(0.0, 0.0),
            Preset::Constant(c) => c,
            Preset::Cosine { amplitude, frequency } => amplitude * (frequency * x).cos(),
            Preset::Sine { amplitude, frequency } => amplitude * (frequency * x).sin(),
            Preset::Ramp(slope) => slope * (x / PI),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Zero => write!(f, "zero"),
            Preset::Constant(c) => write!(f, "constant {} {}", c.re, c.im),
            Preset::Cosine { amplitude, frequency } => {
                write!(f, "cosine {} {} {}", amplitude.re, amplitude.im, frequency)
            }
            Preset::Sine { amplitude, frequency } => {
                write!(f, "sine {} {} {}", amplitude.re, amplitude.im, frequency)
            }
            Preset::Ramp(c) => write!(f, "ramp {} {}", c.re, c.im),
        }
    }
}

/// Complex-valued potential sampled on a uniform grid. Immutable once built.
#[derive(Debug, Clone)]
pub struct Potential {
    grid: Grid,
    values: Vec<Complex64>,
    /// Potential at the two Gauss points of every interval.
    gauss: Vec<[Complex64; 2]>,
    preset_tag: Option<String>,
}

impl Potential {
    pub fn from_samples(grid: Grid, values: Vec<Complex64>, tag: Option<String>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::InvalidInput(format!(
                "{} samples for a grid with {} nodes",
                values.len(),
                grid.nodes()
            )));
        }
        if let Some(k) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidInput(format!("non-finite potential sample at node {k}")));
        }
        let gauss = (0..grid.intervals())
            .map(|i| {
                let h = grid.spacing();
                let x0 = grid.x(i);
                [
                    cubic_interpolate(&grid, &values, x0 + (0.5 - GAUSS_OFFSET) * h),
                    cubic_interpolate(&grid, &values, x0 + (0.5 + GAUSS_OFFSET) * h),
                ]
            })
            .collect();
        Ok(Self {
            grid,
            values,
            gauss,
            preset_tag: tag,
        })
    }

    /// Samples a closed-form potential; the Gauss points are evaluated exactly.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64, tag: Option<String>) -> Result<Self> {
        let values: Vec<Complex64> = (0..grid.nodes()).map(|k| f(grid.x(k))).collect();
        let mut pot = Self::from_samples(grid, values, tag)?;
        let h = grid.spacing();
        for (i, g) in pot.gauss.iter_mut().enumerate() {
            let x0 = grid.x(i);
            *g = [f(x0 + (0.5 - GAUSS_OFFSET) * h), f(x0 + (0.5 + GAUSS_OFFSET) * h)];
        }
        if pot.gauss.iter().flatten().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidInput("non-finite potential value".into()));
        }
        Ok(pot)
    }

    pub fn from_preset(preset: &Preset, grid: Grid) -> Result<Self> {
        let p = preset.clone();
        Self::from_fn(grid, move |x| p.eval(x), Some(preset.to_string()))
    }

    pub fn zero(grid: Grid) -> Self {
        Self::from_preset(&Preset::Zero, grid).expect("zero potential is valid")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn preset_tag(&self) -> Option<&str> {
        self.preset_tag.as_deref()
    }

    /// Value at an arbitrary abscissa by local cubic interpolation.
    pub fn sample_at(&self, x: f64) -> Complex64 {
        cubic_interpolate(&self.grid, &self.values, x)
    }

    /// Resamples onto another grid covering the same or a shorter interval.
    pub fn resample(&self, grid: Grid) -> Result<Self> {
        if grid.endpoint() > self.grid.endpoint() + 1e-12 {
            return Err(Error::InvalidGrid("resampling grid exceeds potential support".into()));
        }
        Self::from_fn(grid, |x| self.sample_at(x), self.preset_tag.clone())
    }

    /// The L2 norm over the grid interval.
    pub fn l2_norm(&self) -> f64 {
        quad::l2_norm(&self.grid.weights(), &self.values)
    }

    pub fn l2_distance(&self, other: &Potential) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("potentials live on different grids".into()));
        }
        Ok(quad::l2_distance(&self.grid.weights(), &self.values, &other.values))
    }

    pub fn integral(&self) -> Complex64 {
        quad::integrate(&self.values, self.grid.spacing())
    }

    /// `∫ q` between two nodes by the two-point Gauss rule of each interval,
    /// so a jump at a node does not leak across it.
    pub fn integral_between(&self, from: usize, to: usize) -> Complex64 {
        let h = self.grid.spacing();
        self.gauss[from.min(to)..to.max(from)]
            .iter()
            .map(|[a, b]| (a + b) * (0.5 * h))
            .sum()
    }

    /// Restriction of a `(0, 2π)` potential to `(0, π)`.
    pub fn left_half(&self) -> Result<Self> {
        require_two_pi(&self.grid)?;
        let half = self.grid.intervals() / 2;
        let grid = Grid::on_pi(half)?;
        Ok(Self {
            grid,
            values: self.values[..=half].to_vec(),
            gauss: self.gauss[..half].to_vec(),
            preset_tag: self.preset_tag.clone(),
        })
    }

    /// The `(0, 2π)` potential equal to `left` on `(0, π)` and to `right` on
    /// `(π, 2π)`; the left half of `right` is ignored. Samples are copied
    /// interval by interval, so a jump at `π` is kept sharp.
    pub fn splice(left: &Potential, right: &Potential) -> Result<Self> {
        require_two_pi(&right.grid)?;
        let half = right.grid.intervals() / 2;
        if !left.grid.is_pi() || left.grid.intervals() != half {
            return Err(Error::InvalidGrid(format!(
                "left half needs a (0, π) grid with {half} intervals"
            )));
        }
        let mut values = left.values.clone();
        values.extend_from_slice(&right.values[half + 1..]);
        let mut gauss = left.gauss.clone();
        gauss.extend_from_slice(&right.gauss[half..]);
        Ok(Self { grid: right.grid, values, gauss, preset_tag: None })
    }

    /// Reads the plain-text format: `a <endpoint>` then one `x re im` line per node.
    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut endpoint = None;
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if endpoint.is_none() {
                if fields.len() != 2 || fields[0] != "a" {
                    return Err(parse_err("expected header 'a <endpoint>'"));
                }
                endpoint = Some(fields[1].parse::<f64>().map_err(|_| parse_err("bad endpoint"))?);
                continue;
            }
            if fields.len() != 3 {
                return Err(parse_err("expected 'x re im'"));
            }
            let nums: Vec<f64> = fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| parse_err("bad number")))
                .collect::<Result<_>>()?;
            xs.push(nums[0]);
            values.push(Complex64::new(nums[1], nums[2]));
        }
        let endpoint = endpoint.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "missing header".into(),
        })?;
        let grid = Grid::new(endpoint, values.len())?;
        for (k, x) in xs.iter().enumerate() {
            if (x - grid.x(k)).abs() > 1e-6 * endpoint {
                return Err(Error::InvalidGrid(format!(
                    "abscissa {x} at row {k} is not on the uniform grid"
                )));
            }
        }
        Self::from_samples(grid, values, Some("file".into()))
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "a {}", fmt_f64(self.grid.endpoint()))?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{} {} {}", fmt_f64(self.grid.x(k)), fmt_f64(v.re), fmt_f64(v.im))?;
        }
        Ok(())
    }
}

/// Round-trip exact text form used by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

/// Four-point Lagrange interpolation on a uniform grid.
pub(crate) fn cubic_interpolate(grid: &Grid, values: &[Complex64], x: f64) -> Complex64 {
    let m = grid.intervals();
    let h = grid.spacing();
    let t = (x / h).clamp(0.0, m as f64);
    if m < 3 {
        let i = (t.floor() as usize).min(m - 1);
        let s = t - i as f64;
        return values[i] * (1.0 - s) + values[i + 1] * s;
    }
    let i = (t.floor() as usize).min(m - 1);
    let j0 = i.saturating_sub(1).min(m - 3);
    let s = t - j0 as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..4 {
        let mut l = 1.0;
        for b in 0..4 {
            if a != b {
                l *= (s - b as f64) / (a as f64 - b as f64);
            }
        }
        acc += values[j0 + a] * l;
    }
    acc
}

/// `y`, `y'` at a node for a given `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionSample {
    pub x: f64,
    pub lambda: Complex64,
    pub y: Complex64,
    pub dy: Complex64,
}

type Mat2 = [[Complex64; 2]; 2];

/// Magnus step propagator over one interval with Gauss values `q1`, `q2`.
#[inline]
fn step_matrix(h: f64, q1: Complex64, q2: Complex64, lambda: Complex64) -> Mat2 {
    let a_mean = 0.5 * (q1 + q2) - lambda;
    let alpha = SQRT3_OVER_12 * h * h * (q1 - q2);
    let beta = Complex64::new(h, 0.0);
    let gamma = h * a_mean;
    let mu2 = alpha * alpha + beta * gamma;
    let (ch, sh) = cosh_sinhc(mu2);
    [
        [ch + sh * alpha, sh * beta],
        [sh * gamma, ch - sh * alpha],
    ]
}

/// `(cosh √z, sinh √z / √z)`, both entire in `z`.
#[inline]
fn cosh_sinhc(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 1e-6 {
        let one = Complex64::new(1.0, 0.0);
        (
            one + z * (0.5 + z / 24.0),
            one + z * (1.0 / 6.0 + z / 120.0),
        )
    } else {
        let mu = z.sqrt();
        (mu.cosh(), mu.sinh() / mu)
    }
}

/// Configurable shooting integrator.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub lambda_guard: f64,
    pub overflow: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            lambda_guard: DEFAULT_LAMBDA_GUARD,
            overflow: OVERFLOW_LIMIT,
        }
    }
}

impl Integrator {
    fn check_lambda(&self, lambda: Complex64) -> Result<()> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite lambda {lambda}")));
        }
        if lambda.norm() > self.lambda_guard {
            return Err(Error::OverflowGuard {
                x: 0.0,
                lambda,
                limit: self.lambda_guard,
            });
        }
        Ok(())
    }

    /// Propagates `(y, y')` from node `from` to node `to` (either direction),
    /// calling `visit` at every node passed including both ends.
    pub fn propagate(
        &self,
        q: &Potential,
        lambda: Complex64,
        from: usize,
        to: usize,
        init: (Complex64, Complex64),
        mut visit: impl FnMut(usize, Complex64, Complex64),
    ) -> Result<(Complex64, Complex64)> {
        self.check_lambda(lambda)?;
        let grid = q.grid();
        if from > grid.intervals() || to > grid.intervals() {
            return Err(Error::InvalidGrid("node index out of range".into()));
        }
        let h = grid.spacing();
        let (mut y, mut dy) = init;
        visit(from, y, dy);
        let mut k = from;
        while k != to {
            if to > from {
                let [q1, q2] = q.gauss[k];
                let e = step_matrix(h, q1, q2, lambda);
                (y, dy) = (e[0][0] * y + e[0][1] * dy, e[1][0] * y + e[1][1] * dy);
                k += 1;
            } else {
                let [q1, q2] = q.gauss[k - 1];
                let e = step_matrix(h, q1, q2, lambda);
                // det e = 1, so the inverse is the adjugate.
                (y, dy) = (e[1][1] * y - e[0][1] * dy, -e[1][0] * y + e[0][0] * dy);
                k -= 1;
            }
            let mag = y.norm().max(dy.norm());
            if !(mag <= self.overflow) {
                return Err(Error::OverflowGuard {
                    x: grid.x(k),
                    lambda,
                    limit: self.overflow,
                });
            }
            visit(k, y, dy);
        }
        Ok((y, dy))
    }

    fn samples(
        &self,
        q: &Potential,
        lambda: Complex64,
        from: usize,
        to: usize,
        init: (Complex64, Complex64),
    ) -> Result<Vec<SolutionSample>> {
        let grid = *q.grid();
        let mut out = vec![
            SolutionSample {
                x: 0.0,
                lambda,
                y: Complex64::new(0.0, 0.0),
                dy: Complex64::new(0.0, 0.0),
            };
            grid.nodes()
        ];
        self.propagate(q, lambda, from, to, init, |k, y, dy| {
            out[k] = SolutionSample {
                x: grid.x(k),
                lambda,
                y,
                dy,
            };
        })?;
        let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
        Ok(out[lo..=hi].to_vec())
    }

    /// `S(x, λ)` with `S(0) = 0`, `S'(0) = 1` at every node.
    pub fn integrate_s(&self, q: &Potential, lambda: Complex64) -> Result<Vec<SolutionSample>> {
        let m = q.grid().intervals();
        self.samples(q, lambda, 0, m, (zero(), one()))
    }

    /// `C(x, λ)` with `C(0) = 1`, `C'(0) = 0` at every node.
    pub fn integrate_c(&self, q: &Potential, lambda: Complex64) -> Result<Vec<SolutionSample>> {
        let m = q.grid().intervals();
        self.samples(q, lambda, 0, m, (one(), zero()))
    }

    /// `(S(a, λ), S'(a, λ))` at the right endpoint.
    pub fn s_endpoint(&self, q: &Potential, lambda: Complex64) -> Result<(Complex64, Complex64)> {
        let m = q.grid().intervals();
        self.propagate(q, lambda, 0, m, (zero(), one()), |_, _, _| {})
    }

    /// Backward solution `ψ` with `ψ(2π) = 0`, `ψ'(2π) = -1` on a `(0, 2π)` grid.
    pub fn integrate_psi(&self, q: &Potential, lambda: Complex64) -> Result<Vec<SolutionSample>> {
        require_two_pi(q.grid())?;
        let m = q.grid().intervals();
        self.samples(q, lambda, m, 0, (zero(), -one()))
    }

    /// `(ψ(π, λ), ψ'(π, λ))`, integrating over `(π, 2π)` only.
    pub fn psi_at_pi(&self, q: &Potential, lambda: Complex64) -> Result<(Complex64, Complex64)> {
        let grid = q.grid();
        require_two_pi(grid)?;
        let mid = grid
            .node_index(PI)
            .ok_or_else(|| Error::InvalidGrid("x = π is not a grid node".into()))?;
        self.propagate(q, lambda, grid.intervals(), mid, (zero(), -one()), |_, _, _| {})
    }
}

fn require_two_pi(grid: &Grid) -> Result<()> {
    if !grid.is_two_pi() {
        return Err(Error::InvalidGrid(format!(
            "backward solution needs a (0, 2π) grid, got endpoint {}",
            grid.endpoint()
        )));
    }
    Ok(())
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

pub fn integrate_s(q: &Potential, lambda: Complex64) -> Result<Vec<SolutionSample>> {
    Integrator::default().integrate_s(q, lambda)
}

pub fn integrate_psi(q: &Potential, lambda: Complex64) -> Result<Vec<SolutionSample>> {
    Integrator::default().integrate_psi(q, lambda)
}

/// `ω = ½ ∫₀^π q`.
pub fn omega_of(q: &Potential) -> Result<Complex64> {
    if !q.grid().is_pi() {
        return Err(Error::InvalidGrid(format!(
            "omega needs a (0, π) grid, got endpoint {}",
            q.grid().endpoint()
        )));
    }
    Ok(0.5 * q.integral())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_potential_matches_sine() {
        let q = Potential::zero(Grid::default_pi());
        let (s, ds) = Integrator::default().s_endpoint(&q, c(1.0, 0.0)).unwrap();
        assert!(s.norm() < 1e-13, "{s}");
        assert!((ds + 1.0).norm() < 1e-13, "{ds}");
    }

    #[test]
    fn constant_shift_at_lambda_two() {
        let q = Potential::from_preset(&Preset::Constant(c(1.0, 0.0)), Grid::default_pi()).unwrap();
        let (s, ds) = Integrator::default().s_endpoint(&q, c(2.0, 0.0)).unwrap();
        assert!(s.norm() < 1e-12);
        assert!((ds + 1.0).norm() < 1e-12);
    }

    #[test]
    fn initial_conditions_are_exact() {
        let q = Potential::from_preset(&Preset::parse("cosine").unwrap(), Grid::on_pi(64).unwrap()).unwrap();
        let s = integrate_s(&q, c(3.0, 1.0)).unwrap();
        assert_eq!(s[0].y, c(0.0, 0.0));
        assert_eq!(s[0].dy, c(1.0, 0.0));
        assert_eq!(s.len(), 65);
    }

    #[test]
    fn psi_examples() {
        let grid = Grid::default_two_pi();
        let integ = Integrator::default();
        let q0 = Potential::zero(grid);
        let (p, dp) = integ.psi_at_pi(&q0, c(1.0, 0.0)).unwrap();
        assert!(p.norm() < 1e-12 && (dp - 1.0).norm() < 1e-12);
        let (p, _) = integ.psi_at_pi(&q0, c(0.25, 0.0)).unwrap();
        assert!((p - 2.0).norm() < 1e-12);
        let q1 = Potential::from_preset(&Preset::Constant(c(1.0, 0.0)), grid).unwrap();
        let (p, _) = integ.psi_at_pi(&q1, c(1.25, 0.0)).unwrap();
        assert!((p - 2.0).norm() < 1e-12);
        let full = integ.integrate_psi(&q0, c(0.25, 0.0)).unwrap();
        assert_eq!(full[4096].y, c(0.0, 0.0));
        assert!((full[2048].y - 2.0).norm() < 1e-12);
    }

    #[test]
    fn psi_requires_two_pi_grid() {
        let q = Potential::zero(Grid::on_pi(32).unwrap());
        assert!(matches!(integrate_psi(&q, c(1.0, 0.0)), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn omega_examples() {
        let grid = Grid::default_pi();
        assert_eq!(omega_of(&Potential::zero(grid)).unwrap(), c(0.0, 0.0));
        let one = Potential::from_preset(&Preset::Constant(c(1.0, 0.0)), grid).unwrap();
        assert!((omega_of(&one).unwrap() - PI / 2.0).norm() < 1e-13);
        let cos = Potential::from_preset(&Preset::parse("cosine").unwrap(), grid).unwrap();
        assert!(omega_of(&cos).unwrap().norm() < 1e-13);
        assert!(omega_of(&Potential::zero(Grid::default_two_pi())).is_err());
    }

    #[test]
    fn overflow_guards() {
        let q = Potential::zero(Grid::default_pi());
        let integ = Integrator::default();
        assert!(matches!(
            integ.s_endpoint(&q, c(2e8, 0.0)),
            Err(Error::OverflowGuard { .. })
        ));
        let tight = Integrator {
            overflow: 1e20,
            ..Integrator::default()
        };
        // sinh(10π)/10 is about 2e12, sinh(30π)/30 about 1e39.
        assert!(tight.s_endpoint(&q, c(-100.0, 0.0)).is_ok());
        assert!(matches!(
            tight.s_endpoint(&q, c(-900.0, 0.0)),
            Err(Error::OverflowGuard { .. })
        ));
    }

    #[test]
    fn invalid_grids() {
        assert!(Grid::new(PI, 1).is_err());
        assert!(Grid::new(-1.0, 10).is_err());
        assert!(Potential::from_samples(Grid::on_pi(4).unwrap(), vec![c(0.0, 0.0); 3], None).is_err());
        let mut vals = vec![c(0.0, 0.0); 5];
        vals[2] = c(f64::NAN, 0.0);
        assert!(Potential::from_samples(Grid::on_pi(4).unwrap(), vals, None).is_err());
    }

    #[test]
    fn branch_of_square_root() {
        for lambda in [c(4.0, 0.0), c(-4.0, 0.0), c(-4.0, -0.0), c(3.0, -2.0)] {
            let p = SpectralPoint::new(lambda);
            let arg = p.rho.arg();
            assert!(arg >= -PI / 2.0 && arg < PI / 2.0, "{lambda}: {arg}");
            assert!((p.rho * p.rho - lambda).norm() <= 1e-12 * lambda.norm());
        }
        assert_eq!(SpectralPoint::new(c(-4.0, 0.0)).rho, c(0.0, -2.0));
    }

    #[test]
    fn preset_parsing() {
        assert_eq!(Preset::parse("zero").unwrap(), Preset::Zero);
        assert_eq!(Preset::parse("constant 2").unwrap(), Preset::Constant(c(2.0, 0.0)));
        assert_eq!(
            Preset::parse("cosine 1 0.5").unwrap(),
            Preset::Cosine { amplitude: c(1.0, 0.5), frequency: 1.0 }
        );
        assert_eq!(Preset::parse("ramp 1 1").unwrap(), Preset::Ramp(c(1.0, 1.0)));
        assert!(Preset::parse("constant").is_err());
        assert!(Preset::parse("gaussian").is_err());
        let p = Preset::parse("sine 1 2 3").unwrap();
        assert_eq!(Preset::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn file_round_trip() {
        let q = Potential::from_preset(&Preset::parse("cosine 1 0.5").unwrap(), Grid::on_pi(16).unwrap()).unwrap();
        let mut buf = Vec::new();
        q.write(&mut buf).unwrap();
        let back = Potential::read(&buf[..]).unwrap();
        assert_eq!(back.grid(), q.grid());
        assert_eq!(back.values(), q.values());
        assert!(Potential::read(&b"a 3.14\n0 1\n"[..]).is_err());
        assert!(Potential::read(&b"0 1 2\n"[..]).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_cubics() {
        let grid = Grid::on_pi(10).unwrap();
        let f = |x: f64| c(x * x * x - 2.0 * x, x * x);
        let vals: Vec<_> = (0..grid.nodes()).map(|k| f(grid.x(k))).collect();
        for x in [0.0, 0.01, 0.7, 1.55, 3.0, PI] {
            assert!((cubic_interpolate(&grid, &vals, x) - f(x)).norm() < 1e-12);
        }
    }
}
