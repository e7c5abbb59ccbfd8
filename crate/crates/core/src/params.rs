//! Model parameters: dimension, torus side, mean offset, and the derived
//! crossover parameter xi = phi * L^{d/(d+1)}.

use std::fmt;

/// Spatial dimension of the torus, at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dim(u32);

impl Dim {
    pub fn new(d: u32) -> Result<Self, ParamError> {
        if d < 2 {
            return Err(ParamError::BadDim(d));
        }
        Ok(Dim(d))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamError {
    BadDim(u32),
    BadPhi(f64),
    BadLength(f64),
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::BadDim(d) => write!(f, "dimension must be >= 2, got {d}"),
            ParamError::BadPhi(p) => write!(f, "phi must lie in (0, 1), got {p}"),
            ParamError::BadLength(l) => write!(f, "torus side must be positive, got {l}"),
        }
    }
}

impl std::error::Error for ParamError {}

/// Diagnostic regime classification by the size of xi.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    CriticalLike,
    OffCriticalLike,
}

/// Torus side L, mean offset phi (the conserved mean is -1+phi), dimension d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    d: Dim,
    l: f64,
    phi: f64,
    xi: f64,
}

impl ModelParams {
    pub fn new(d: Dim, l: f64, phi: f64) -> Result<Self, ParamError> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(ParamError::BadLength(l));
        }
        if !(phi > 0.0 && phi < 1.0) {
            return Err(ParamError::BadPhi(phi));
        }
        let xi = phi * l.powf(d.as_f64() / (d.as_f64() + 1.0));
        Ok(ModelParams { d, l, phi, xi })
    }

    /// Inverse construction: choose L so that phi * L^{d/(d+1)} = xi.
    pub fn from_xi(d: Dim, phi: f64, xi: f64) -> Result<Self, ParamError> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(ParamError::BadPhi(phi));
        }
        let l = (xi / phi).powf((d.as_f64() + 1.0) / d.as_f64());
        Self::new(d, l, phi)
    }

    pub fn d(&self) -> Dim {
        self.d
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// The conserved mean -1+phi.
    pub fn mean(&self) -> f64 {
        -1.0 + self.phi
    }

    pub fn volume(&self) -> f64 {
        self.l.powi(self.d.get() as i32)
    }

    /// Diagnostic only: small xi behaves like the critical scaling regime.
    pub fn regime(&self) -> Regime {
        if self.xi <= 10.0 {
            Regime::CriticalLike
        } else {
            Regime::OffCriticalLike
        }
    }
}
