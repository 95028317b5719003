use thiserror::Error;

/// Coordinates of the point at which a numeric failure occurred.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Point {
    pub q: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<i64>,
    pub h: Option<f64>,
}

impl Point {
    pub fn q_beta(q: f64, beta: f64) -> Self {
        Point { q: Some(q), beta: Some(beta), ..Default::default() }
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        if let Some(q) = self.q {
            parts.push(format!("q={q}"));
        }
        if let Some(b) = self.beta {
            parts.push(format!("beta={b}"));
        }
        if let Some(k) = self.k {
            parts.push(format!("k={k}"));
        }
        if let Some(h) = self.h {
            parts.push(format!("h={h}"));
        }
        if parts.is_empty() {
            write!(f, "<unspecified point>")
        } else {
            write!(f, "{}", parts.join(", "))
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0} vs {1} nodes")]
    GridMismatch(usize, usize),
    #[error("near-singular operator at {at} (condition estimate {cond:.3e})")]
    Singular { at: Point, cond: f64 },
    #[error("solve residual {residual:.3e} above tolerance at {at}")]
    Residual { at: Point, residual: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("derivative order {requested} exceeds available order {available}")]
    Regularity { requested: usize, available: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("numeric failure at {at}: {msg}")]
    Numeric { at: Point, msg: String },
    #[error("unknown name: {0}")]
    UnknownName(String),
}

impl Error {
    /// Attach coordinates to errors that carry a location.
    pub fn at(self, p: Point) -> Self {
        match self {
            Error::Singular { cond, .. } => Error::Singular { at: p, cond },
            Error::Residual { residual, .. } => Error::Residual { at: p, residual },
            Error::Numeric { msg, .. } => Error::Numeric { at: p, msg },
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
