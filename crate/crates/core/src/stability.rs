//! Perturbation experiments for the local stability of the reconstruction:
//! random perturbations of `{K, N}` with `ω` held fixed, the resulting change
//! of the recovered potential, and the pole / residue / Weyl-function shifts
//! that control it.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cauchy::{cauchy_data_of, weyl, CauchyData, DEFAULT_MODES};
use crate::error::{Error, Result};
use crate::gl::{reconstruct_q, weyl_data, WeylData};
use crate::quad;
use crate::sturm::{branch_sqrt, fmt_f64, Grid, Potential};

/// Poles compared by [`lemma53_check`].
pub const LEMMA_POLES: usize = 40;
/// Points on `γ_0` where `|M - M̃|` is sampled.
pub const GAMMA0_POINTS: usize = 64;
/// Allowed `|∫(q - q̃)|` of a perturbed reconstruction.
pub const ZERO_MEAN_TOL: f64 = 1e-10;

/// Random trigonometric perturbation: `ΔK = Σ a_j cos jt`, `ΔN = Σ b_j sin jt`
/// for `j = 1..=modes`, each scaled to L2 norm `delta`. `ΔK` has zero mean,
/// so `∫K` and `ω` are untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub modes: usize,
}

impl NoiseSpec {
    pub fn new(delta: f64, modes: usize) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidInput(format!("noise amplitude must be ≥ 0, got {delta}")));
        }
        if modes == 0 {
            return Err(Error::InvalidInput("noise needs at least one mode".into()));
        }
        Ok(Self { delta, modes })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions {
    /// Weyl poles used for both the reconstruction and the pole comparison.
    pub weyl_count: usize,
    pub grid: Grid,
    pub cauchy_modes: usize,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { weyl_count: 20, grid: Grid::default_pi(), cauchy_modes: DEFAULT_MODES }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationReport {
    /// `Ξ = max(‖K - K̃‖, ‖N - Ñ‖)`.
    pub xi: f64,
    /// `‖q - q̃‖`.
    pub q_err: f64,
    /// `(Σ_{n ≥ n1} (n ξ_n)²)^{1/2}`, `ξ_n = |ν_n - ν̃_n| + |M_n - M̃_n|/n²`.
    pub xi_l2: f64,
    /// `max_{γ_0} |M - M̃|`.
    pub m_gamma0_err: f64,
    /// `q_err / Ξ`; zero when `Ξ = 0`.
    pub c_est: f64,
}

impl PerturbationReport {
    fn ratio(value: f64, xi: f64) -> f64 {
        if xi > 0.0 {
            value / xi
        } else {
            0.0
        }
    }

    pub fn xi_l2_ratio(&self) -> f64 {
        Self::ratio(self.xi_l2, self.xi)
    }

    pub fn m_gamma0_ratio(&self) -> f64 {
        Self::ratio(self.m_gamma0_err, self.xi)
    }
}

/// Pole-side quantities of a pair of data sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleShifts {
    pub xi_l2: f64,
    pub m_gamma0_err: f64,
}

/// Pairs every pole of `base` with its nearest pole of `other`; the pairing
/// must be one-to-one.
pub fn pair_poles(base: &WeylData, other: &WeylData) -> Result<Vec<usize>> {
    let nearest = |z: Complex64, set: &[Complex64]| {
        set.iter()
            .enumerate()
            .map(|(j, w)| (j, (w - z).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
            .0
    };
    let mut taken = vec![false; other.len()];
    let mut pairing = Vec::with_capacity(base.len());
    for (n, &z) in base.theta.iter().enumerate() {
        let j = nearest(z, &other.theta);
        // Multiple poles are listed repeatedly; pair the copies in order.
        let j = (j..other.len())
            .find(|&k| other.theta[k] == other.theta[j] && !taken[k])
            .ok_or(Error::PairingAmbiguous(n + 1))?;
        if nearest(other.theta[j], &base.theta) != base.theta.iter().position(|w| *w == z).unwrap_or(n) {
            return Err(Error::PairingAmbiguous(n + 1));
        }
        taken[j] = true;
        pairing.push(j);
    }
    Ok(pairing)
}

/// `ξ`-sum over `n ≥ n1` and the sup of `|M - M̃|` on `γ_0` of `base`.
pub fn pole_shifts(
    cd: &CauchyData,
    wd: &WeylData,
    cd_t: &CauchyData,
    wd_t: &WeylData,
) -> Result<PoleShifts> {
    let pairing = pair_poles(wd, wd_t)?;
    let mut sum = 0.0;
    for (i, &j) in pairing.iter().enumerate() {
        let n = i + 1;
        if n < wd.n1 {
            continue;
        }
        let nf = n as f64;
        let xi_n = (branch_sqrt(wd.theta[i]) - branch_sqrt(wd_t.theta[j])).norm()
            + (wd.residues[i] - wd_t.residues[j]).norm() / (nf * nf);
        sum += (nf * xi_n).powi(2);
    }
    let radius = wd.gamma0_radius;
    let m_gamma0_err = (0..GAMMA0_POINTS)
        .into_par_iter()
        .map(|k| {
            let z = Complex64::from_polar(radius, 2.0 * PI * (k as f64 + 0.5) / GAMMA0_POINTS as f64);
            Ok((weyl(cd, z)? - weyl(cd_t, z)?).norm())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(PoleShifts { xi_l2: sum.sqrt(), m_gamma0_err })
}

/// Compares two potentials directly: `Ξ` from their Cauchy data, `‖q - q̃‖`,
/// and the pole-side quantities over the first [`LEMMA_POLES`] poles.
pub fn lemma53_check(q: &Potential, q_tilde: &Potential) -> Result<PerturbationReport> {
    if !q.grid().is_pi() || q.grid() != q_tilde.grid() {
        return Err(Error::InvalidGrid("both potentials must share one (0, π) grid".into()));
    }
    let modes = DEFAULT_MODES.min(q.grid().intervals() / 4);
    let cd = cauchy_data_of(q, modes)?;
    let cd_t = cauchy_data_of(q_tilde, modes)?;
    let wd = weyl_data(&cd, LEMMA_POLES)?;
    let wd_t = weyl_data(&cd_t, LEMMA_POLES)?;
    let shifts = pole_shifts(&cd, &wd, &cd_t, &wd_t)?;
    let xi = cd.distance(&cd_t)?;
    let q_err = q.l2_distance(q_tilde)?;
    Ok(PerturbationReport {
        xi,
        q_err,
        xi_l2: shifts.xi_l2,
        m_gamma0_err: shifts.m_gamma0_err,
        c_est: PerturbationReport::ratio(q_err, xi),
    })
}

/// Adds a seeded random perturbation to `cd`; `ω` is kept.
pub fn perturb(cd: &CauchyData, noise: NoiseSpec, rng: &mut impl Rng) -> Result<CauchyData> {
    let grid = *cd.grid();
    let w = grid.weights();
    let mut draw = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let a: Vec<Complex64> = (0..noise.modes).map(|_| draw()).collect();
    let b: Vec<Complex64> = (0..noise.modes).map(|_| draw()).collect();
    let series = |coef: &[Complex64], f: fn(f64) -> f64| -> Vec<Complex64> {
        (0..grid.nodes())
            .map(|i| {
                let t = grid.x(i);
                coef.iter().enumerate().map(|(j, c)| c * f((j + 1) as f64 * t)).sum()
            })
            .collect()
    };
    let scale = |v: Vec<Complex64>| -> Vec<Complex64> {
        let zero = vec![Complex64::new(0.0, 0.0); v.len()];
        let norm = quad::l2_distance(&w, &v, &zero);
        v.into_iter().map(|x| x * (noise.delta / norm)).collect()
    };
    let dk = scale(series(&a, f64::cos));
    let dn = scale(series(&b, f64::sin));
    let k = cd.k().iter().zip(&dk).map(|(x, d)| x + d).collect();
    let n = cd.n().iter().zip(&dn).map(|(x, d)| x + d).collect();
    CauchyData::new(grid, k, n, cd.omega())
}

/// Unperturbed data of one potential, shared by all trials.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub cauchy: CauchyData,
    pub weyl: WeylData,
    /// Reconstruction from the unperturbed data.
    pub q: Potential,
    /// `‖q_rec - q‖`: what the discretisation alone costs.
    pub floor: f64,
}

pub fn baseline(q: &Potential, opts: StabilityOptions) -> Result<Baseline> {
    let cauchy = cauchy_data_of(q, opts.cauchy_modes)?;
    let weyl = weyl_data(&cauchy, opts.weyl_count)?;
    let q_rec = reconstruct_q(&weyl, cauchy.omega(), opts.grid)?;
    let floor = q_rec.l2_distance(&q.resample(opts.grid)?)?;
    Ok(Baseline { cauchy, weyl, q: q_rec, floor })
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub delta: f64,
    pub index: usize,
    pub seed: u64,
    pub outcome: std::result::Result<PerturbationReport, String>,
}

/// Seed of trial `index` at sweep position `level`.
pub fn trial_seed(seed: u64, level: usize, index: usize) -> u64 {
    seed.wrapping_add(((level as u64) << 32) | index as u64)
}

fn run_trial(base: &Baseline, noise: NoiseSpec, seed: u64, opts: StabilityOptions) -> Result<PerturbationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cd_t = perturb(&base.cauchy, noise, &mut rng)?;
    let wd_t = weyl_data(&cd_t, opts.weyl_count)?;
    let q_t = reconstruct_q(&wd_t, cd_t.omega(), opts.grid)?;
    let mean_gap = (base.q.integral() - q_t.integral()).norm();
    if mean_gap > ZERO_MEAN_TOL {
        return Err(Error::InvalidInput(format!("|∫(q - q̃)| = {mean_gap:e} breaks the zero-mean normalisation")));
    }
    let shifts = pole_shifts(&base.cauchy, &base.weyl, &cd_t, &wd_t)?;
    let xi = base.cauchy.distance(&cd_t)?;
    let q_err = base.q.l2_distance(&q_t)?;
    Ok(PerturbationReport {
        xi,
        q_err,
        xi_l2: shifts.xi_l2,
        m_gamma0_err: shifts.m_gamma0_err,
        c_est: PerturbationReport::ratio(q_err, xi),
    })
}

/// Runs `trials` perturbations of amplitude `noise.delta`. `q_err` is taken
/// against the reconstruction from unperturbed data, so the discretisation
/// floor (reported by [`baseline`]) does not mask small perturbations.
pub fn perturb_and_measure(
    q: &Potential,
    noise: NoiseSpec,
    trials: usize,
    seed: u64,
    opts: StabilityOptions,
) -> Result<(Baseline, Vec<Trial>)> {
    let base = baseline(q, opts)?;
    let trials = measure_level(&base, noise, trials, seed, 0, opts);
    Ok((base, trials))
}

fn measure_level(
    base: &Baseline,
    noise: NoiseSpec,
    trials: usize,
    seed: u64,
    level: usize,
    opts: StabilityOptions,
) -> Vec<Trial> {
    (0..trials)
        .into_par_iter()
        .map(|index| {
            let s = trial_seed(seed, level, index);
            Trial {
                delta: noise.delta,
                index,
                seed: s,
                outcome: run_trial(base, noise, s, opts).map_err(|e| e.to_string()),
            }
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = logs.len() as f64;
    if logs.len() < 2 {
        return f64::NAN;
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `max / min` of positive values; 1 for fewer than two.
pub fn variation(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.len() < 2 {
        1.0
    } else {
        max / min
    }
}

/// Medians over the successful trials of one amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub delta: f64,
    pub succeeded: usize,
    pub failed: usize,
    pub xi: f64,
    pub q_err: f64,
    pub c_est: f64,
    pub xi_l2_ratio: f64,
    pub m_gamma0_ratio: f64,
}

impl LevelSummary {
    pub fn of(delta: f64, trials: &[Trial]) -> Self {
        let ok: Vec<&PerturbationReport> = trials.iter().filter_map(|t| t.outcome.as_ref().ok()).collect();
        let col = |f: &dyn Fn(&PerturbationReport) -> f64| median(&mut ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        Self {
            delta,
            succeeded: ok.len(),
            failed: trials.len() - ok.len(),
            xi: col(&|r| r.xi),
            q_err: col(&|r| r.q_err),
            c_est: col(&|r| r.c_est),
            xi_l2_ratio: col(&|r| r.xi_l2_ratio()),
            m_gamma0_ratio: col(&|r| r.m_gamma0_ratio()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub seed: u64,
    pub modes: usize,
    pub omega: Complex64,
    pub floor: f64,
    pub trials: Vec<Trial>,
    pub levels: Vec<LevelSummary>,
}

impl Sweep {
    /// Slope of median `q_err` against median `Ξ` over the amplitudes.
    pub fn slope(&self) -> f64 {
        log_log_slope(&self.levels.iter().map(|l| (l.xi, l.q_err)).collect::<Vec<_>>())
    }

    pub fn xi_l2_variation(&self) -> f64 {
        variation(&self.levels.iter().map(|l| l.xi_l2_ratio).collect::<Vec<_>>())
    }

    pub fn m_gamma0_variation(&self) -> f64 {
        variation(&self.levels.iter().map(|l| l.m_gamma0_ratio).collect::<Vec<_>>())
    }

    /// Smallest amplitude at which some trial failed.
    pub fn breakdown_amplitude(&self) -> Option<f64> {
        self.levels.iter().filter(|l| l.failed > 0).map(|l| l.delta).reduce(f64::min)
    }

    fn header(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# seed = {}", self.seed)?;
        writeln!(w, "# noise modes = {}", self.modes)?;
        writeln!(w, "# omega held fixed at {}", self.omega)?;
        writeln!(w, "# discretisation floor = {}", fmt_f64(self.floor))?;
        Ok(())
    }

    /// One row per trial.
    pub fn write_trials(&self, mut w: impl Write) -> Result<()> {
        self.header(&mut w)?;
        writeln!(w, "delta,trial,seed,status,Xi,q_err,xi_l2,M_gamma0_err,C_est,message")?;
        for t in &self.trials {
            match &t.outcome {
                Ok(r) => writeln!(
                    w,
                    "{},{},{},ok,{},{},{},{},{},",
                    fmt_f64(t.delta),
                    t.index,
                    t.seed,
                    fmt_f64(r.xi),
                    fmt_f64(r.q_err),
                    fmt_f64(r.xi_l2),
                    fmt_f64(r.m_gamma0_err),
                    fmt_f64(r.c_est)
                )?,
                Err(msg) => writeln!(
                    w,
                    "{},{},{},failed,,,,,,\"{}\"",
                    fmt_f64(t.delta),
                    t.index,
                    t.seed,
                    msg.replace('"', "'")
                )?,
            }
        }
        Ok(())
    }

    /// One row per amplitude; the fitted slope is repeated on every row.
    pub fn write_summary(&self, mut w: impl Write) -> Result<()> {
        self.header(&mut w)?;
        writeln!(w, "delta,succeeded,failed,median_Xi,median_q_err,median_C_est,xi_l2_ratio,M_gamma0_ratio,slope")?;
        let slope = self.slope();
        for l in &self.levels {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                fmt_f64(l.delta),
                l.succeeded,
                l.failed,
                fmt_f64(l.xi),
                fmt_f64(l.q_err),
                fmt_f64(l.c_est),
                fmt_f64(l.xi_l2_ratio),
                fmt_f64(l.m_gamma0_ratio),
                fmt_f64(slope)
            )?;
        }
        Ok(())
    }
}

/// [`perturb_and_measure`] over several amplitudes sharing one baseline.
pub fn sweep(
    q: &Potential,
    deltas: &[f64],
    modes: usize,
    trials: usize,
    seed: u64,
    opts: StabilityOptions,
) -> Result<Sweep> {
    let base = baseline(q, opts)?;
    let mut all = Vec::new();
    let mut levels = Vec::new();
    for (level, &delta) in deltas.iter().enumerate() {
        let noise = NoiseSpec::new(delta, modes)?;
        let t = measure_level(&base, noise, trials, seed, level, opts);
        levels.push(LevelSummary::of(delta, &t));
        all.extend(t);
    }
    Ok(Sweep { seed, modes, omega: base.cauchy.omega(), floor: base.floor, trials: all, levels })
}
