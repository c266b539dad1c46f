use serde::{Deserialize, Serialize};

/// Built-in one-dimensional potentials `V = -ln p` (up to normalisation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Potential {
    /// `p(x) = sech(x) / π`.
    Sech,
    /// Standard logistic density `p(x) = 1 / (4 cosh²(x/2))`.
    Logistic,
    /// `V(x) = x⁴/4 + x²/2`; its third derivative grows linearly, so `M` is only
    /// a supremum over the stored grid.
    Quartic,
}

impl Potential {
    pub const ALL: [Potential; 3] = [Potential::Sech, Potential::Logistic, Potential::Quartic];

    pub fn name(self) -> &'static str {
        match self {
            Potential::Sech => "sech",
            Potential::Logistic => "logistic",
            Potential::Quartic => "quartic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// `[V, V', V'', V''']` at `x`.
    pub fn derivatives(self, x: f64) -> [f64; 4] {
        match self {
            Potential::Sech => {
                let t = x.tanh();
                let s2 = 1.0 - t * t;
                [log_cosh(x) + std::f64::consts::PI.ln(), t, s2, -2.0 * s2 * t]
            }
            Potential::Logistic => {
                let h = 0.5 * x;
                let t = h.tanh();
                let s2 = 1.0 - t * t;
                [2.0 * log_cosh(h) + 4f64.ln(), t, 0.5 * s2, -0.5 * s2 * t]
            }
            Potential::Quartic => {
                let x2 = x * x;
                [0.25 * x2 * x2 + 0.5 * x2, x2 * x + x, 3.0 * x2 + 1.0, 6.0 * x]
            }
        }
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            Potential::Sech => log_cosh(x) + std::f64::consts::PI.ln(),
            Potential::Logistic => 2.0 * log_cosh(0.5 * x) + 4f64.ln(),
            Potential::Quartic => {
                let x2 = x * x;
                0.25 * x2 * x2 + 0.5 * x2
            }
        }
    }

    /// Default grid `[lo, hi]` covering all but a negligible fraction of the mass.
    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            Potential::Sech => (-40.0, 40.0),
            Potential::Logistic => (-60.0, 60.0),
            Potential::Quartic => (-8.0, 8.0),
        }
    }
}

/// `ln cosh x` without overflow.
fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}
