use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solution magnitude exceeded {limit:e} at x = {x} (lambda = {lambda})")]
    OverflowGuard { x: f64, lambda: Complex64, limit: f64 },
    #[error("contour derivative did not converge at lambda = {lambda}: 64/128-point relative gap {gap:e}")]
    QuadratureDivergence { lambda: Complex64, gap: f64 },
    #[error("argument principle counted {counted} zeros but {refined} were refined")]
    RootCountMismatch { counted: usize, refined: usize },
    #[error("Newton refinement stalled near {start} after {iterations} iterations")]
    NewtonStall { start: Complex64, iterations: usize },
    #[error("n_modes = {n_modes} exceeds the alias limit {limit} for this grid")]
    AliasGuard { n_modes: usize, limit: usize },
    #[error("lambda = {0} is within tolerance of a zero of eta1")]
    NearPole(Complex64),
    #[error("f1 and f2 both vanish at lambda_{index} = {lambda}")]
    SeparationViolation { index: usize, lambda: Complex64 },
    #[error("poles {first} and {second} beyond n1 are closer than the contour radius")]
    PoleClusterError { first: Complex64, second: Complex64 },
    #[error("Gelfand-Levitan system is singular at x = {x} (condition {cond:e})")]
    SingularNystrom { x: f64, cond: f64 },
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("asymptotic fit unstable: residual {residual:e} against |Omega| = {omega_abs:e}")]
    FitUnstable { residual: f64, omega_abs: f64 },
    #[error("nearest-pole pairing is not injective at index {0}")]
    PairingAmbiguous(usize),
    #[error("condition check failed: {0}")]
    ConditionViolation(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
