use super::KernelExpr;
use crate::error::{GpError, Result};

/// Log-space hyperparameters in pre-order: a node's own parameters first,
/// then its children left to right. Models append `log(noise)` last.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        ParamVector { values }
    }
}

impl KernelExpr {
    /// Natural logs of every hyperparameter, in pre-order.
    pub fn flatten_params(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.num_params());
        self.push_params(&mut out);
        ParamVector { values: out }
    }

    fn push_params(&self, out: &mut Vec<f64>) {
        use KernelExpr::*;
        match self {
            Rbf { lengthscale } | Matern12 { lengthscale } | Matern32 { lengthscale } | Matern52 { lengthscale } => {
                out.push(lengthscale.ln())
            }
            Periodic { lengthscale, period } => {
                out.push(lengthscale.ln());
                out.push(period.ln());
            }
            Linear { variance } => out.push(variance.ln()),
            Scale { outputscale, child } => {
                out.push(outputscale.ln());
                child.push_params(out);
            }
            Sum(a, b) | Product(a, b) => {
                a.push_params(out);
                b.push_params(out);
            }
        }
    }

    /// Rebuilds the tree with hyperparameters `exp(p_i)`.
    ///
    /// A value equal to the log of the existing hyperparameter leaves that
    /// hyperparameter untouched, so `unflatten(flatten(k)) == k` exactly.
    pub fn unflatten_params(&self, params: &[f64]) -> Result<KernelExpr> {
        if params.len() != self.num_params() {
            return Err(GpError::DimensionMismatch {
                op: "unflatten_params",
                expected: self.num_params(),
                actual: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("parameter vector"));
        }
        let mut it = params.iter().copied();
        let k = self.rebuild(&mut it);
        k.validate()?;
        Ok(k)
    }

    fn rebuild(&self, it: &mut impl Iterator<Item = f64>) -> KernelExpr {
        use KernelExpr::*;
        let mut next = |old: f64| {
            let p = it.next().expect("length checked by caller");
            if p == old.ln() {
                old
            } else {
                p.exp()
            }
        };
        match self {
            Rbf { lengthscale } => Rbf {
                lengthscale: next(*lengthscale),
            },
            Matern12 { lengthscale } => Matern12 {
                lengthscale: next(*lengthscale),
            },
            Matern32 { lengthscale } => Matern32 {
                lengthscale: next(*lengthscale),
            },
            Matern52 { lengthscale } => Matern52 {
                lengthscale: next(*lengthscale),
            },
            Periodic { lengthscale, period } => {
                let lengthscale = next(*lengthscale);
                let period = next(*period);
                Periodic { lengthscale, period }
            }
            Linear { variance } => Linear {
                variance: next(*variance),
            },
            Scale { outputscale, child } => {
                let outputscale = next(*outputscale);
                Scale {
                    outputscale,
                    child: Box::new(child.rebuild(it)),
                }
            }
            Sum(a, b) => {
                let a = a.rebuild(it);
                Sum(Box::new(a), Box::new(b.rebuild(it)))
            }
            Product(a, b) => {
                let a = a.rebuild(it);
                Product(Box::new(a), Box::new(b.rebuild(it)))
            }
        }
    }
}

/// Free-function spelling of [`KernelExpr::flatten_params`].
pub fn flatten_params(k: &KernelExpr) -> ParamVector {
    k.flatten_params()
}

/// Free-function spelling of [`KernelExpr::unflatten_params`].
pub fn unflatten_params(k: &KernelExpr, p: &ParamVector) -> Result<KernelExpr> {
    k.unflatten_params(p.as_slice())
}
