use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::exprlang::Expr;

pub type NativeFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// A real function of one variable: either a grammar expression (exportable to
/// spec files) or a native closure built by the library itself.
#[derive(Clone)]
pub enum RealFn {
    Expr(Expr),
    Native { label: String, f: NativeFn },
}

impl RealFn {
    pub fn native(
        label: impl Into<String>,
        f: impl Fn(f64) -> Result<f64> + Send + Sync + 'static,
    ) -> RealFn {
        RealFn::Native {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> RealFn {
        RealFn::Expr(Expr::lit(c))
    }

    #[inline]
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            RealFn::Expr(e) => e.eval(t),
            RealFn::Native { f, .. } => f(t),
        }
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        match self {
            RealFn::Expr(e) => Some(e),
            RealFn::Native { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RealFn::Expr(e) => e.to_string(),
            RealFn::Native { label, .. } => format!("<{label}>"),
        }
    }

    /// Pointwise map, staying symbolic when possible.
    pub fn map(
        &self,
        label: &str,
        sym: impl Fn(Expr) -> Expr,
        num: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> RealFn {
        match self {
            RealFn::Expr(e) => RealFn::Expr(sym(e.clone())),
            RealFn::Native { label: inner, f } => {
                let f = f.clone();
                RealFn::native(format!("{label}({inner})"), move |t| Ok(num(f(t)?)))
            }
        }
    }
}

impl From<Expr> for RealFn {
    fn from(e: Expr) -> RealFn {
        RealFn::Expr(e)
    }
}

impl fmt::Debug for RealFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}
