use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desk-scale size limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// Largest complex dimension accepted for a box.
    pub max_complex_dim: usize,
    /// Largest total degree accepted for polynomial data.
    pub max_degree: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_complex_dim: 4,
            max_degree: 6,
        }
    }
}

macro_rules! tolerances {
    ($( $(#[$doc:meta])* $field:ident = $default:expr ),* $(,)?) => {
        /// Named tolerances. Every field can be overridden by name from a
        /// scenario or from the command line.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default)]
        pub struct Tolerances {
            $( $(#[$doc])* pub $field: f64, )*
        }

        impl Default for Tolerances {
            fn default() -> Self {
                Tolerances { $( $field: $default, )* }
            }
        }

        impl Tolerances {
            pub const NAMES: &'static [&'static str] = &[$( stringify!($field), )*];

            pub fn get(&self, name: &str) -> Option<f64> {
                match name {
                    $( stringify!($field) => Some(self.$field), )*
                    _ => None,
                }
            }

            pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::Config(format!(
                        "tolerance {name} must be a finite nonnegative number, got {value}"
                    )));
                }
                match name {
                    $( stringify!($field) => self.$field = value, )*
                    _ => return Err(Error::UnknownReference(format!("tolerance `{name}`"))),
                }
                Ok(())
            }
        }
    };
}

tolerances! {
    /// Bound on `|J^2 + I|_max`.
    acs = 1e-10,
    /// Bound on the Nijenhuis tensor for a structure to count as integrable.
    integrability = 1e-10,
    /// Eigen-residual bound for type splitting.
    eigen = 1e-8,
    /// Cauchy-Riemann residual bound for almost holomorphic functions.
    cr = 1e-8,
    /// Relative singular-value cutoff for nullspaces and ranks.
    svd_rel = 1e-8,
    /// Minimum |det| of a chart Jacobian.
    det = 1e-6,
    /// Least-squares fit residual bound.
    fit = 1e-8,
    /// Bound on fitted conjugate-variable coefficients of a transition.
    holomorphy = 1e-9,
    /// Fibre clustering radius relative to the box diameter.
    cluster_rel = 1e-6,
    /// Map equality radius relative to the box diameter.
    dedup_rel = 1e-9,
    /// Cocycle residual bound.
    cocycle = 1e-8,
    /// Commuting-diagram residual bound.
    diagram = 1e-8,
    /// Bound on `|DF J - J DF|_max` for almost holomorphic maps.
    ah_map = 1e-10,
    /// Round-trip residual bound for inverses.
    roundtrip = 1e-9,
    /// Largest accepted condition number of a least-squares design matrix.
    fit_cond_max = 1e12,
}

impl Tolerances {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        Self::NAMES
            .iter()
            .map(move |n| (*n, self.get(n).expect("known name")))
    }
}
