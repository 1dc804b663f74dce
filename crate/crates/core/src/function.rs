//! Cylinder functions on `R^∞`: continuous functions reading only the first
//! `m` coordinates, plus a small registry addressable by name.
//!
//! Registry grammar (terms joined by `+`, optional shift suffix `@t1,t2,...`):
//!
//! | name        | f(x)              |
//! |-------------|-------------------|
//! | `const_c`   | `c`               |
//! | `proj_k`    | `x_k`             |
//! | `sq_k`      | `x_k^2`           |
//! | `cos_k`     | `cos x_k`         |
//! | `exp_k`     | `e^{x_k}`         |
//! | `prod_ij`   | `x_i x_j`         |
//! | `sum_ij`    | `x_i + x_j`       |
//!
//! `cos_1@0.5` is `x -> cos(x_1 + 0.5)`; `proj_1+proj_2` is `x_1 + x_2`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A function of the first `m` coordinates.
#[derive(Clone)]
pub struct CylinderFn {
    name: String,
    m: usize,
    eval: EvalFn,
    lipschitz: Option<f64>,
}

impl fmt::Debug for CylinderFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFn")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl CylinderFn {
    /// `eval` receives a slice of exactly `m` coordinates.
    pub fn new<F>(name: impl Into<String>, m: usize, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            m,
            eval: Arc::new(eval),
            lipschitz: None,
        }
    }

    /// Attach a Lipschitz bound in the sup norm over the `m` coordinates.
    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const_{c}"), 0, move |_| c).with_lipschitz(0.0)
    }

    /// `x -> x_k` (1-based).
    pub fn projection(k: usize) -> Self {
        assert!(k >= 1, "coordinates start at 1");
        Self::new(format!("proj_{k}"), k, move |x| x[k - 1]).with_lipschitz(1.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// Evaluate at a cylinder point; coordinates past `x.len()` read as 0.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if x.len() >= self.m {
            (self.eval)(&x[..self.m])
        } else {
            let mut padded = x.to_vec();
            padded.resize(self.m, 0.0);
            (self.eval)(&padded)
        }
    }

    /// `f(0)`.
    pub fn at_origin(&self) -> f64 {
        self.eval(&[])
    }

    /// `x -> f(x + t)`.
    pub fn shifted(&self, t: &[f64]) -> Self {
        let m = self.m;
        let mut t = t.to_vec();
        t.resize(m, 0.0);
        let inner = self.eval.clone();
        let mut out = Self::new(format!("{}@{}", self.name, join(&t)), m, move |x| {
            let y: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a + b).collect();
            inner(&y)
        });
        out.lipschitz = self.lipschitz;
        out
    }

    /// `x -> f(-x)`.
    pub fn reflected(&self) -> Self {
        let inner = self.eval.clone();
        let mut out = Self::new(format!("-({})", self.name), self.m, move |x| {
            let y: Vec<f64> = x.iter().map(|a| -a).collect();
            inner(&y)
        });
        out.lipschitz = self.lipschitz;
        out
    }

    /// `a f + b g`.
    pub fn linear_combination(a: f64, f: &CylinderFn, b: f64, g: &CylinderFn) -> Self {
        let m = f.m.max(g.m);
        let (fe, ge) = (f.eval.clone(), g.eval.clone());
        let (fm, gm) = (f.m, g.m);
        let lipschitz = match (f.lipschitz, g.lipschitz) {
            (Some(lf), Some(lg)) => Some(a.abs() * lf + b.abs() * lg),
            _ => None,
        };
        let mut out = Self::new(format!("{a}*({})+{b}*({})", f.name, g.name), m, move |x| {
            a * fe(&x[..fm]) + b * ge(&x[..gm])
        });
        out.lipschitz = lipschitz;
        out
    }

    fn sum(f: &CylinderFn, g: &CylinderFn) -> Self {
        let mut out = Self::linear_combination(1.0, f, 1.0, g);
        out.name = format!("{}+{}", f.name, g.name);
        out
    }

    /// Look a function up by registry name.
    pub fn by_name(name: &str) -> Result<Self> {
        let name = name.trim();
        let (body, shift) = match name.split_once('@') {
            Some((b, s)) => (b, Some(parse_list(s)?)),
            None => (name, None),
        };
        let mut terms = split_terms(body).into_iter();
        let first = terms
            .next()
            .ok_or_else(|| Error::Input("empty function name".into()))?;
        let mut f = atom(first)?;
        for t in terms {
            f = Self::sum(&f, &atom(t)?);
        }
        Ok(match shift {
            Some(t) => {
                let mut s = f.shifted(&t);
                s.name = name.to_string();
                s
            }
            None => f,
        })
    }
}

/// Split on `+` while leaving exponent signs such as `const_1e+3` intact.
fn split_terms(body: &str) -> Vec<&str> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..bytes.len() {
        if bytes[i] == b'+' && i > 0 && !matches!(bytes[i - 1], b'e' | b'E') {
            out.push(&body[start..i]);
            start = i + 1;
        }
    }
    out.push(&body[start..]);
    out
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("'{t}' is not a number")))
        })
        .collect()
}

fn join(t: &[f64]) -> String {
    t.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn index(s: &str, name: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(Error::Input(format!("bad coordinate index in '{name}'"))),
    }
}

/// `ij` as two single-digit coordinates, or `i,j` / `i_j` for larger ones.
fn index_pair(s: &str, name: &str) -> Result<(usize, usize)> {
    if let Some((a, b)) = s.split_once([',', '_']) {
        return Ok((index(a, name)?, index(b, name)?));
    }
    let c: Vec<char> = s.chars().collect();
    if c.len() != 2 {
        return Err(Error::Input(format!("'{name}' needs two coordinate digits")));
    }
    Ok((index(&c[0].to_string(), name)?, index(&c[1].to_string(), name)?))
}

fn atom(name: &str) -> Result<CylinderFn> {
    let name = name.trim();
    let unknown = || Error::Input(format!("unknown function '{name}'"));
    let (kind, arg) = name.split_once('_').ok_or_else(unknown)?;
    let f = match kind {
        "const" => {
            let c: f64 = arg.parse().map_err(|_| unknown())?;
            CylinderFn::constant(c)
        }
        "proj" => CylinderFn::projection(index(arg, name)?),
        "sq" => {
            let k = index(arg, name)?;
            CylinderFn::new(name, k, move |x| x[k - 1] * x[k - 1])
        }
        "cos" => {
            let k = index(arg, name)?;
            CylinderFn::new(name, k, move |x| x[k - 1].cos()).with_lipschitz(1.0)
        }
        "exp" => {
            let k = index(arg, name)?;
            CylinderFn::new(name, k, move |x| x[k - 1].exp())
        }
        "prod" => {
            let (i, j) = index_pair(arg, name)?;
            CylinderFn::new(name, i.max(j), move |x| x[i - 1] * x[j - 1])
        }
        "sum" => {
            let (i, j) = index_pair(arg, name)?;
            CylinderFn::new(name, i.max(j), move |x| x[i - 1] + x[j - 1]).with_lipschitz(2.0)
        }
        _ => return Err(unknown()),
    };
    Ok(CylinderFn { name: name.to_string(), ..f })
}
