//! Zeros of an analytic function inside a rectangle by the argument principle.
//!
//! Winding numbers are accumulated along cell boundaries with adaptive
//! sampling. Cells are bisected until each holds one zero, which is then
//! polished by Newton's method. A cell that shrinks below `min_cell` while
//! still winding `k > 1` times is reported as one zero of multiplicity `k`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max) {
            return Err(Error::InvalidInput(format!(
                "degenerate rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, z: Complex64, margin: f64) -> bool {
        z.re >= self.re_min - margin
            && z.re <= self.re_max + margin
            && z.im >= self.im_min - margin
            && z.im <= self.im_max + margin
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Splits across the longer side at `fraction` of its length.
    fn split(&self, fraction: f64) -> (Rect, Rect) {
        if self.width() >= self.height() {
            let cut = self.re_min + fraction * self.width();
            (
                Rect { re_max: cut, ..*self },
                Rect { re_min: cut, ..*self },
            )
        } else {
            let cut = self.im_min + fraction * self.height();
            (
                Rect { im_max: cut, ..*self },
                Rect { im_min: cut, ..*self },
            )
        }
    }
}

/// A zero with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub z: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RootFinder {
    /// Samples per edge before adaptive refinement.
    pub edge_samples: usize,
    /// Largest phase step accepted between neighbouring samples.
    pub max_phase_step: f64,
    /// Relative cell diameter below which a multi-winding cell is a multiple zero.
    pub min_cell: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Relative distance under which refined zeros are merged.
    pub coalesce_tol: f64,
    /// Largest step in `√λ` along a contour segment. The functions handled
    /// here are of exponential type at most `2π` in `√λ`, so this bounds the
    /// phase change per segment and rules out aliasing by whole turns.
    pub max_rho_step: f64,
}

impl Default for RootFinder {
    fn default() -> Self {
        Self {
            edge_samples: 16,
            max_phase_step: PI / 5.0,
            min_cell: 1e-6,
            newton_tol: 1e-14,
            max_newton: 50,
            coalesce_tol: 1e-6,
            max_rho_step: 0.25,
        }
    }
}

const MAX_DEPTH: usize = 28;

/// `|√a - √b|` up to the sign of the roots, so the branch cut does not count.
fn rho_step(a: Complex64, b: Complex64) -> f64 {
    let (ra, rb) = (a.sqrt(), b.sqrt());
    (ra - rb).norm().min((ra + rb).norm())
}
const CUT_FRACTIONS: [f64; 4] = [0.5, 0.4617, 0.5383, 0.4129];

impl RootFinder {
    /// Winding number of `f` around the positively oriented boundary of `rect`.
    pub fn count<F>(&self, f: &F, rect: &Rect) -> Result<Option<i64>>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        let c = rect.corners();
        let mut total = 0.0;
        for i in 0..4 {
            match self.edge_phase(f, c[i], c[(i + 1) % 4])? {
                Some(p) => total += p,
                None => return Ok(None),
            }
        }
        Ok(Some((total / (2.0 * PI)).round() as i64))
    }

    /// Winding number around a circle.
    pub fn count_circle<F>(&self, f: &F, center: Complex64, radius: f64) -> Result<Option<i64>>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        let n = 4 * self.edge_samples;
        let pts: Vec<Complex64> = (0..=n)
            .map(|k| center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64))
            .collect();
        let mut total = 0.0;
        for w in pts.windows(2) {
            match self.segment_phase(f, w[0], w[1], f(w[0])?, f(w[1])?, 0)? {
                Some(p) => total += p,
                None => return Ok(None),
            }
        }
        Ok(Some((total / (2.0 * PI)).round() as i64))
    }

    fn edge_phase<F>(&self, f: &F, a: Complex64, b: Complex64) -> Result<Option<f64>>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        let n = self.edge_samples;
        let pts: Vec<Complex64> = (0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect();
        let vals: Vec<Complex64> = pts.iter().map(|&z| f(z)).collect::<Result<_>>()?;
        let mut total = 0.0;
        for k in 0..n {
            match self.segment_phase(f, pts[k], pts[k + 1], vals[k], vals[k + 1], 0)? {
                Some(p) => total += p,
                None => return Ok(None),
            }
        }
        Ok(Some(total))
    }

    fn segment_phase<F>(
        &self,
        f: &F,
        a: Complex64,
        b: Complex64,
        fa: Complex64,
        fb: Complex64,
        depth: usize,
    ) -> Result<Option<f64>>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        if fa.norm() == 0.0 || fb.norm() == 0.0 {
            return Ok(None);
        }
        let step = (fb / fa).arg();
        let ratio = (fb.norm() / fa.norm()).ln().abs();
        if step.abs() <= self.max_phase_step && ratio < 2.0 && rho_step(a, b) <= self.max_rho_step {
            return Ok(Some(step));
        }
        if depth >= MAX_DEPTH {
            return Ok(None);
        }
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        let left = self.segment_phase(f, a, m, fa, fm, depth + 1)?;
        let right = self.segment_phase(f, m, b, fm, fb, depth + 1)?;
        Ok(match (left, right) {
            (Some(l), Some(r)) => Some(l + r),
            _ => None,
        })
    }

    /// Newton's method with a central-difference derivative; `m` is the
    /// expected multiplicity.
    pub fn newton<F>(&self, f: &F, start: Complex64, m: usize) -> Result<Complex64>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        let mut z = start;
        let mut best = (f64::INFINITY, z);
        let mut last_step = f64::INFINITY;
        for _ in 0..self.max_newton {
            let scale = z.norm().max(1.0);
            let fz = f(z)?;
            if fz.norm() < best.0 {
                best = (fz.norm(), z);
            }
            if fz.norm() == 0.0 {
                return Ok(z);
            }
            let h = 1e-5 * scale;
            let d = (f(z + h)? - f(z - h)?) / (2.0 * h);
            if d.norm() == 0.0 || !d.re.is_finite() {
                break;
            }
            let dz = fz / d * m as f64;
            z -= dz;
            let tol = if m == 1 { self.newton_tol } else { 1e-9 };
            if dz.norm() <= tol * scale {
                return Ok(z);
            }
            // Steps that stop shrinking at this size are rounding noise in f.
            if dz.norm() <= 1e-10 * scale && dz.norm() > 0.5 * last_step {
                return Ok(best.1);
            }
            last_step = dz.norm();
        }
        Err(Error::NewtonStall {
            start,
            iterations: self.max_newton,
        })
    }

    /// All zeros of `f` in `rect`, sorted by real part.
    pub fn find<F>(&self, f: &F, rect: &Rect) -> Result<Vec<Root>>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        let total = self.count_robust(f, rect)?;
        // Independent vertical strips are processed in parallel.
        let strips = ((rect.width() / rect.height()).ceil() as usize).clamp(1, 64);
        let cells: Vec<Rect> = (0..strips)
            .map(|i| {
                let w = rect.width() / strips as f64;
                Rect {
                    re_min: rect.re_min + i as f64 * w,
                    re_max: if i + 1 == strips {
                        rect.re_max
                    } else {
                        rect.re_min + (i + 1) as f64 * w
                    },
                    ..*rect
                }
            })
            .collect();
        let cells = self.shift_strips(f, cells)?;
        let found: Vec<Vec<Root>> = cells
            .par_iter()
            .map(|(cell, k)| self.isolate(f, cell, *k, 0))
            .collect::<Result<_>>()?;
        let mut roots: Vec<Root> = found.into_iter().flatten().collect();
        roots.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
        let roots = self.coalesce(f, roots)?;
        let refined: usize = roots.iter().map(|r| r.multiplicity).sum();
        if refined as i64 != total {
            return Err(Error::RootCountMismatch {
                counted: total.max(0) as usize,
                refined,
            });
        }
        Ok(roots)
    }

    fn count_robust<F>(&self, f: &F, rect: &Rect) -> Result<i64>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        self.count(f, rect)?.ok_or_else(|| {
            Error::InvalidInput("a zero lies on the search rectangle boundary".into())
        })
    }

    /// Counts every strip, nudging interior cut lines that pass through a zero.
    fn shift_strips<F>(&self, f: &F, mut cells: Vec<Rect>) -> Result<Vec<(Rect, i64)>>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        for attempt in 0..CUT_FRACTIONS.len() {
            let counts: Vec<Option<i64>> = cells
                .par_iter()
                .map(|c| self.count(f, c))
                .collect::<Result<_>>()?;
            if counts.iter().all(Option::is_some) {
                return Ok(cells.into_iter().zip(counts.into_iter().flatten()).collect());
            }
            let w = cells[0].width();
            let shift = (CUT_FRACTIONS[(attempt + 1) % CUT_FRACTIONS.len()] - 0.5) * w * 0.1;
            let n = cells.len();
            for i in 0..n {
                if i + 1 < n {
                    cells[i].re_max += shift;
                }
                if i > 0 {
                    cells[i].re_min += shift;
                }
            }
        }
        Err(Error::InvalidInput("could not place strip boundaries away from zeros".into()))
    }

    fn isolate<F>(&self, f: &F, cell: &Rect, k: i64, depth: usize) -> Result<Vec<Root>>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        if k <= 0 {
            return Ok(Vec::new());
        }
        let scale = cell.center().norm().max(1.0);
        if k == 1 {
            if let Ok(z) = self.newton(f, cell.center(), 1) {
                if cell.contains(z, 1e-9 * scale) {
                    return Ok(vec![Root { z, multiplicity: 1 }]);
                }
            }
        }
        if cell.diameter() < self.min_cell * scale || depth > 80 {
            let m = k as usize;
            let z = self.newton(f, cell.center(), m)?;
            return Ok(vec![Root { z, multiplicity: m }]);
        }
        for fraction in CUT_FRACTIONS {
            let (a, b) = cell.split(fraction);
            let (ka, kb) = match (self.count(f, &a)?, self.count(f, &b)?) {
                (Some(ka), Some(kb)) => (ka, kb),
                _ => continue,
            };
            if ka + kb != k {
                continue;
            }
            let mut out = self.isolate(f, &a, ka, depth + 1)?;
            out.extend(self.isolate(f, &b, kb, depth + 1)?);
            return Ok(out);
        }
        // Every split was ambiguous; fall back to Newton from the centre.
        let z = self.newton(f, cell.center(), k as usize)?;
        Ok(vec![Root {
            z,
            multiplicity: k as usize,
        }])
    }

    fn coalesce<F>(&self, f: &F, roots: Vec<Root>) -> Result<Vec<Root>>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        let mut out: Vec<Root> = Vec::with_capacity(roots.len());
        for r in roots {
            if let Some(last) = out.last_mut() {
                let scale = r.z.norm().max(1.0);
                if (last.z - r.z).norm() < self.coalesce_tol * scale {
                    let m = last.multiplicity + r.multiplicity;
                    let center = (last.z * last.multiplicity as f64 + r.z * r.multiplicity as f64)
                        / m as f64;
                    let radius = 100.0 * self.coalesce_tol * scale;
                    let winding = self.count_circle(f, center, radius)?;
                    if winding != Some(m as i64) {
                        return Err(Error::RootCountMismatch {
                            counted: winding.unwrap_or(-1).max(0) as usize,
                            refined: m,
                        });
                    }
                    *last = Root {
                        z: center,
                        multiplicity: m,
                    };
                    continue;
                }
            }
            out.push(r);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn polynomial_zeros() {
        let zs = [c(1.0, 0.5), c(-2.0, 0.0), c(3.5, -1.0)];
        let f = |z: Complex64| -> Result<Complex64> { Ok(zs.iter().map(|r| z - r).product()) };
        let rect = Rect::new(-5.0, 5.0, -3.0, 3.0).unwrap();
        let roots = RootFinder::default().find(&f, &rect).unwrap();
        assert_eq!(roots.len(), 3);
        for (r, expect) in roots.iter().zip([zs[1], zs[0], zs[2]]) {
            assert_eq!(r.multiplicity, 1);
            assert!((r.z - expect).norm() < 1e-12, "{} vs {}", r.z, expect);
        }
    }

    #[test]
    fn double_zero_is_reported_once() {
        let f = |z: Complex64| -> Result<Complex64> { Ok((z - 2.0) * (z - 2.0) * (z + 1.0)) };
        let rect = Rect::new(-3.1, 4.3, -1.7, 2.1).unwrap();
        let roots = RootFinder::default().find(&f, &rect).unwrap();
        assert_eq!(roots.len(), 2);
        assert_eq!(roots[1].multiplicity, 2);
        assert!((roots[1].z - 2.0).norm() < 1e-6);
    }

    #[test]
    fn sine_zeros_on_real_axis() {
        let f = |z: Complex64| -> Result<Complex64> { Ok((z * PI).sin()) };
        let rect = Rect::new(0.5, 10.5, -1.0, 1.0).unwrap();
        let roots = RootFinder::default().find(&f, &rect).unwrap();
        let got: Vec<f64> = roots.iter().map(|r| r.z.re).collect();
        assert_eq!(got.len(), 10);
        for (k, g) in got.iter().enumerate() {
            assert!((g - (k + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn winding_counts() {
        let f = |z: Complex64| -> Result<Complex64> { Ok(z * z * z) };
        let rf = RootFinder::default();
        assert_eq!(rf.count_circle(&f, c(0.0, 0.0), 1.0).unwrap(), Some(3));
        assert_eq!(rf.count_circle(&f, c(5.0, 0.0), 1.0).unwrap(), Some(0));
        let rect = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!(rf.count(&f, &rect).unwrap(), Some(3));
    }

    #[test]
    fn degenerate_rectangle_rejected() {
        assert!(Rect::new(1.0, 1.0, 0.0, 1.0).is_err());
    }
}
