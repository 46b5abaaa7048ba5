#![allow(dead_code)]

use num_complex::Complex64;
use specrecon::sturm::{Grid, Potential, Preset};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn r(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn pi_grid() -> Grid {
    Grid::default_pi()
}

pub fn preset(text: &str, grid: Grid) -> Potential {
    Potential::from_preset(&Preset::parse(text).unwrap(), grid).unwrap()
}

pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Potential {
    Potential::from_fn(grid, f, None).unwrap()
}

/// Classical RK4 for `y'' = (q(x) - λ) y`, `y(0) = 0`, `y'(0) = 1`, with
/// `q` given in closed form; independent of the library integrator.
pub fn rk4_s(q: impl Fn(f64) -> Complex64, lambda: Complex64, end: f64, steps: usize) -> (Complex64, Complex64) {
    let h = end / steps as f64;
    let f = |x: f64, y: Complex64, dy: Complex64| (dy, (q(x) - lambda) * y);
    let (mut y, mut dy) = (c(0.0, 0.0), c(1.0, 0.0));
    for k in 0..steps {
        let x = k as f64 * h;
        let (a1, b1) = f(x, y, dy);
        let (a2, b2) = f(x + h / 2.0, y + a1 * (h / 2.0), dy + b1 * (h / 2.0));
        let (a3, b3) = f(x + h / 2.0, y + a2 * (h / 2.0), dy + b2 * (h / 2.0));
        let (a4, b4) = f(x + h, y + a3 * h, dy + b3 * h);
        y += (a1 + 2.0 * a2 + 2.0 * a3 + a4) * (h / 6.0);
        dy += (b1 + 2.0 * b2 + 2.0 * b3 + b4) * (h / 6.0);
    }
    (y, dy)
}

/// `√(λ - c)` on the library branch, for closed forms of constant potentials.
pub fn shifted_rho(lambda: Complex64, shift: f64) -> Complex64 {
    specrecon::sturm::branch_sqrt(lambda - shift)
}
