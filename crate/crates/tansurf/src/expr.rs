//! Symbolic scalar expressions in the curve parameter `t` and chart
//! coordinates `x1..xm`.
//!
//! Expressions are immutable trees shared through [`Arc`], so cloning is
//! cheap and evaluation is safe from concurrent threads. The grammar is
//! small on purpose: numeric literals, `t`, `x1..xm`, the arithmetic
//! operators `+ - * / ^`, unary minus, and the functions
//! `sin cos tan exp log sqrt`.
//!
//! Differentiation is exact. Powers with non-integer exponents are
//! evaluated through `exp/log` semantics and are only differentiable when
//! the base is provably positive, which keeps every produced derivative
//! valid on the whole domain of the input.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A variable: the curve parameter or a 1-based chart coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Time,
    Coord(u32),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Time => write!(f, "t"),
            Var::Coord(k) => write!(f, "x{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Tan => "tan",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "tan" => UnaryFn::Tan,
            "exp" => UnaryFn::Exp,
            "log" => UnaryFn::Log,
            "sqrt" => UnaryFn::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, PartialEq)]
enum Node {
    Num(f64),
    Time,
    Coord(u32),
    Neg(Expr),
    Bin(BinOp, Expr, Expr),
    Func(UnaryFn, Expr),
}

/// An immutable symbolic expression.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("the curve parameter t is not bound")]
    UnboundTime,
    #[error("coordinate x{0} is not bound (point has dimension {1})")]
    UnboundCoord(u32, usize),
    #[error("division by zero")]
    DivByZero,
    #[error("log of a non-positive value ({0})")]
    LogNonPositive(f64),
    #[error("square root of a negative value ({0})")]
    SqrtNegative(f64),
    #[error("power with negative base {0} and non-integer exponent {1}")]
    PowNegativeBase(f64, f64),
    #[error("zero raised to the negative exponent {0}")]
    PowZeroNegative(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("cannot differentiate {base}^{exp}: non-integer exponent over a base that may be non-positive")]
    NonIntegerPower { base: String, exp: String },
}

impl Expr {
    pub fn num(c: f64) -> Expr {
        Expr(Arc::new(Node::Num(c)))
    }

    pub fn time() -> Expr {
        Expr(Arc::new(Node::Time))
    }

    /// Chart coordinate with 1-based index.
    pub fn coord(k: u32) -> Expr {
        Expr(Arc::new(Node::Coord(k)))
    }

    pub fn zero() -> Expr {
        Expr::num(0.0)
    }

    pub fn one() -> Expr {
        Expr::num(1.0)
    }

    fn raw_neg(a: Expr) -> Expr {
        Expr(Arc::new(Node::Neg(a)))
    }

    fn raw_bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr(Arc::new(Node::Bin(op, a, b)))
    }

    fn raw_func(f: UnaryFn, a: Expr) -> Expr {
        Expr(Arc::new(Node::Func(f, a)))
    }

    pub fn as_num(&self) -> Option<f64> {
        match &*self.0 {
            Node::Num(c) => Some(*c),
            Node::Neg(a) => a.as_num().map(|c| -c),
            _ => None,
        }
    }

    fn as_int(&self) -> Option<i64> {
        let c = self.as_num()?;
        if c.fract() == 0.0 && c.abs() < 9.0e15 {
            Some(c as i64)
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(&*self.0, Node::Num(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(&*self.0, Node::Num(c) if *c == 1.0)
    }

    /// Largest coordinate index referenced, or 0 when none appear.
    pub fn max_coord(&self) -> u32 {
        match &*self.0 {
            Node::Num(_) | Node::Time => 0,
            Node::Coord(k) => *k,
            Node::Neg(a) | Node::Func(_, a) => a.max_coord(),
            Node::Bin(_, a, b) => a.max_coord().max(b.max_coord()),
        }
    }

    pub fn uses_time(&self) -> bool {
        match &*self.0 {
            Node::Time => true,
            Node::Num(_) | Node::Coord(_) => false,
            Node::Neg(a) | Node::Func(_, a) => a.uses_time(),
            Node::Bin(_, a, b) => a.uses_time() || b.uses_time(),
        }
    }

    // ---- smart constructors -------------------------------------------
    //
    // These fold the identities 0+e, e+0, 0*e, e*0, 1*e, e*1, e/1, e^1,
    // e^0, --e and constants with finite results. They are used by
    // differentiation, substitution and simplification; the parser builds
    // raw nodes so that parse trees mirror the source. They are associated
    // constructors taking both operands, not operator-trait methods.

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_lit(), b.as_lit()) {
            let r = x + y;
            if r.is_finite() {
                return Expr::num(r);
            }
        }
        Expr::raw_bin(BinOp::Add, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        if let (Some(x), Some(y)) = (a.as_lit(), b.as_lit()) {
            let r = x - y;
            if r.is_finite() {
                return Expr::num(r);
            }
        }
        Expr::raw_bin(BinOp::Sub, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::zero();
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_lit(), b.as_lit()) {
            let r = x * y;
            if r.is_finite() {
                return Expr::num(r);
            }
        }
        Expr::raw_bin(BinOp::Mul, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if let (Some(x), Some(y)) = (a.as_lit(), b.as_lit()) {
            if y != 0.0 {
                let r = x / y;
                if r.is_finite() {
                    return Expr::num(r);
                }
            }
        }
        Expr::raw_bin(BinOp::Div, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        if let Node::Num(c) = &*a.0 {
            return Expr::num(-c);
        }
        if let Node::Neg(inner) = &*a.0 {
            return inner.clone();
        }
        Expr::raw_neg(a)
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if let Some(e) = b.as_lit() {
            if e == 0.0 {
                // IEEE powf(x, 0) == 1 for every x, including 0 and NaN.
                return Expr::one();
            }
            if let Some(base) = a.as_lit() {
                let r = eval_pow(base, e);
                if let Ok(r) = r {
                    if r.is_finite() {
                        return Expr::num(r);
                    }
                }
            }
            // (x^i)^j -> x^(i*j) for integer exponents
            if let (Some(j), Node::Bin(BinOp::Pow, base, inner)) = (b.as_int(), &*a.0) {
                if let Some(i) = inner.as_int() {
                    return Expr::pow(base.clone(), Expr::num((i * j) as f64));
                }
            }
        }
        Expr::raw_bin(BinOp::Pow, a, b)
    }

    pub fn func(f: UnaryFn, a: Expr) -> Expr {
        if let Some(c) = a.as_lit() {
            if let Ok(r) = eval_func(f, c) {
                if r.is_finite() {
                    return Expr::num(r);
                }
            }
        }
        Expr::raw_func(f, a)
    }

    /// Plain numeric literal (does not see through `Neg`, unlike `as_num`).
    fn as_lit(&self) -> Option<f64> {
        match &*self.0 {
            Node::Num(c) => Some(*c),
            _ => None,
        }
    }

    // ---- evaluation ---------------------------------------------------

    /// Evaluate at the binding `t` (may be absent) and chart point `x`.
    pub fn eval(&self, t: Option<f64>, x: &[f64]) -> Result<f64, EvalError> {
        match &*self.0 {
            Node::Num(c) => Ok(*c),
            Node::Time => t.ok_or(EvalError::UnboundTime),
            Node::Coord(k) => {
                let idx = *k as usize;
                if idx == 0 || idx > x.len() {
                    Err(EvalError::UnboundCoord(*k, x.len()))
                } else {
                    Ok(x[idx - 1])
                }
            }
            Node::Neg(a) => Ok(-a.eval(t, x)?),
            Node::Bin(op, a, b) => {
                let u = a.eval(t, x)?;
                let v = b.eval(t, x)?;
                match op {
                    BinOp::Add => Ok(u + v),
                    BinOp::Sub => Ok(u - v),
                    BinOp::Mul => Ok(u * v),
                    BinOp::Div => {
                        if v == 0.0 {
                            Err(EvalError::DivByZero)
                        } else {
                            Ok(u / v)
                        }
                    }
                    BinOp::Pow => eval_pow(u, v),
                }
            }
            Node::Func(f, a) => eval_func(*f, a.eval(t, x)?),
        }
    }

    /// Evaluate a curve-side expression (variables: `t` only).
    pub fn eval_t(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(Some(t), &[])
    }

    /// Evaluate a chart-side expression (variables: `x1..xm` only).
    pub fn eval_x(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.eval(None, x)
    }

    // ---- differentiation ----------------------------------------------

    /// Exact symbolic derivative with respect to `var`.
    pub fn diff(&self, var: Var) -> Result<Expr, DiffError> {
        Ok(match &*self.0 {
            Node::Num(_) => Expr::zero(),
            Node::Time => {
                if var == Var::Time {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Coord(k) => {
                if var == Var::Coord(*k) {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => Expr::neg(a.diff(var)?),
            Node::Bin(BinOp::Add, a, b) => Expr::add(a.diff(var)?, b.diff(var)?),
            Node::Bin(BinOp::Sub, a, b) => Expr::sub(a.diff(var)?, b.diff(var)?),
            Node::Bin(BinOp::Mul, a, b) => Expr::add(
                Expr::mul(a.diff(var)?, b.clone()),
                Expr::mul(a.clone(), b.diff(var)?),
            ),
            Node::Bin(BinOp::Div, a, b) => Expr::div(
                Expr::sub(
                    Expr::mul(a.diff(var)?, b.clone()),
                    Expr::mul(a.clone(), b.diff(var)?),
                ),
                Expr::pow(b.clone(), Expr::num(2.0)),
            ),
            Node::Bin(BinOp::Pow, base, exp) => {
                if let Some(n) = exp.as_int() {
                    // power rule: d(u^n) = n u^(n-1) u'
                    if n == 0 {
                        Expr::zero()
                    } else {
                        Expr::mul(
                            Expr::mul(
                                Expr::num(n as f64),
                                Expr::pow(base.clone(), Expr::num((n - 1) as f64)),
                            ),
                            base.diff(var)?,
                        )
                    }
                } else if let Some(c) = exp.as_num() {
                    if base.provably_positive() {
                        Expr::mul(
                            Expr::mul(
                                Expr::num(c),
                                Expr::pow(base.clone(), Expr::num(c - 1.0)),
                            ),
                            base.diff(var)?,
                        )
                    } else {
                        return Err(DiffError::NonIntegerPower {
                            base: base.to_string(),
                            exp: exp.to_string(),
                        });
                    }
                } else if base.provably_positive() {
                    // u^v = exp(v log u)
                    Expr::mul(
                        Expr::pow(base.clone(), exp.clone()),
                        Expr::add(
                            Expr::mul(exp.diff(var)?, Expr::func(UnaryFn::Log, base.clone())),
                            Expr::div(Expr::mul(exp.clone(), base.diff(var)?), base.clone()),
                        ),
                    )
                } else {
                    return Err(DiffError::NonIntegerPower {
                        base: base.to_string(),
                        exp: exp.to_string(),
                    });
                }
            }
            Node::Func(f, a) => {
                let da = a.diff(var)?;
                let outer = match f {
                    UnaryFn::Sin => Expr::func(UnaryFn::Cos, a.clone()),
                    UnaryFn::Cos => Expr::neg(Expr::func(UnaryFn::Sin, a.clone())),
                    UnaryFn::Tan => Expr::div(
                        Expr::one(),
                        Expr::pow(Expr::func(UnaryFn::Cos, a.clone()), Expr::num(2.0)),
                    ),
                    UnaryFn::Exp => Expr::func(UnaryFn::Exp, a.clone()),
                    UnaryFn::Log => Expr::div(Expr::one(), a.clone()),
                    UnaryFn::Sqrt => Expr::div(
                        Expr::one(),
                        Expr::mul(Expr::num(2.0), Expr::func(UnaryFn::Sqrt, a.clone())),
                    ),
                };
                Expr::mul(outer, da)
            }
        })
    }

    /// Conservative positivity proof used to gate non-integer powers.
    fn provably_positive(&self) -> bool {
        match &*self.0 {
            Node::Num(c) => *c > 0.0,
            Node::Func(UnaryFn::Exp, _) => true,
            Node::Func(UnaryFn::Sqrt, a) => a.provably_positive(),
            Node::Bin(BinOp::Add, a, b)
            | Node::Bin(BinOp::Mul, a, b)
            | Node::Bin(BinOp::Div, a, b) => a.provably_positive() && b.provably_positive(),
            Node::Bin(BinOp::Pow, a, _) => a.provably_positive(),
            _ => false,
        }
    }

    // ---- substitution --------------------------------------------------

    /// Simultaneously substitute every `xk` by `subs[k-1]`.
    pub fn subst_coords(&self, subs: &[Expr]) -> Expr {
        match &*self.0 {
            Node::Num(_) | Node::Time => self.clone(),
            Node::Coord(k) => {
                let idx = *k as usize;
                if idx >= 1 && idx <= subs.len() {
                    subs[idx - 1].clone()
                } else {
                    self.clone()
                }
            }
            Node::Neg(a) => Expr::neg(a.subst_coords(subs)),
            Node::Bin(op, a, b) => {
                rebuild_bin(*op, a.subst_coords(subs), b.subst_coords(subs))
            }
            Node::Func(f, a) => Expr::func(*f, a.subst_coords(subs)),
        }
    }

    /// Substitute the parameter `t` by an expression.
    pub fn subst_time(&self, rep: &Expr) -> Expr {
        match &*self.0 {
            Node::Num(_) | Node::Coord(_) => self.clone(),
            Node::Time => rep.clone(),
            Node::Neg(a) => Expr::neg(a.subst_time(rep)),
            Node::Bin(op, a, b) => rebuild_bin(*op, a.subst_time(rep), b.subst_time(rep)),
            Node::Func(f, a) => Expr::func(*f, a.subst_time(rep)),
        }
    }

    // ---- simplification --------------------------------------------------

    /// Constant folding plus identity removal plus canonical merging of
    /// multiplicative factors (`x^2 * y / x^3` becomes `y / x`). The result
    /// evaluates pointwise to the same value on the domain of definition.
    pub fn simplify(&self) -> Expr {
        let e = match &*self.0 {
            Node::Num(_) | Node::Time | Node::Coord(_) => self.clone(),
            Node::Neg(a) => Expr::neg(a.simplify()),
            Node::Bin(op, a, b) => rebuild_bin(*op, a.simplify(), b.simplify()),
            Node::Func(f, a) => Expr::func(*f, a.simplify()),
        };
        match &*e.0 {
            Node::Bin(BinOp::Mul | BinOp::Div, _, _) => normalize_monomial(&e),
            Node::Neg(inner) => match &*inner.0 {
                Node::Bin(BinOp::Mul | BinOp::Div, _, _) => {
                    Expr::neg(normalize_monomial(inner))
                }
                _ => e.clone(),
            },
            _ => e,
        }
    }
}

fn rebuild_bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    match op {
        BinOp::Add => Expr::add(a, b),
        BinOp::Sub => Expr::sub(a, b),
        BinOp::Mul => Expr::mul(a, b),
        BinOp::Div => Expr::div(a, b),
        BinOp::Pow => Expr::pow(a, b),
    }
}

fn eval_pow(base: f64, exp: f64) -> Result<f64, EvalError> {
    if exp.fract() == 0.0 && exp.abs() < 2147483647.0 {
        if base == 0.0 && exp < 0.0 {
            return Err(EvalError::PowZeroNegative(exp));
        }
        return Ok(base.powi(exp as i32));
    }
    if base < 0.0 {
        return Err(EvalError::PowNegativeBase(base, exp));
    }
    if base == 0.0 && exp < 0.0 {
        return Err(EvalError::PowZeroNegative(exp));
    }
    Ok(base.powf(exp))
}

fn eval_func(f: UnaryFn, a: f64) -> Result<f64, EvalError> {
    match f {
        UnaryFn::Sin => Ok(a.sin()),
        UnaryFn::Cos => Ok(a.cos()),
        UnaryFn::Tan => Ok(a.tan()),
        UnaryFn::Exp => Ok(a.exp()),
        UnaryFn::Log => {
            if a <= 0.0 {
                Err(EvalError::LogNonPositive(a))
            } else {
                Ok(a.ln())
            }
        }
        UnaryFn::Sqrt => {
            if a < 0.0 {
                Err(EvalError::SqrtNegative(a))
            } else {
                Ok(a.sqrt())
            }
        }
    }
}

// ---- monomial normalization ------------------------------------------

/// Flatten a `Mul`/`Div`/`Neg`/integer-`Pow` chain into a constant and a
/// factor list, merge structurally equal bases, and rebuild in a canonical
/// shape (factors ordered by their printed form, constant sign hoisted to a
/// leading `Neg`, negative powers gathered into one denominator).
fn normalize_monomial(e: &Expr) -> Expr {
    let mut c = 1.0f64;
    let mut factors: Vec<(Expr, i64)> = Vec::new();
    flatten(e, 1, &mut c, &mut factors);
    factors.retain(|(_, k)| *k != 0);
    if c == 0.0 {
        return Expr::zero();
    }
    factors.sort_by_key(|(base, _)| base.to_string());

    let build_side = |side: &[(Expr, i64)], with_const: Option<f64>| -> Option<Expr> {
        let mut acc: Option<Expr> = with_const.map(Expr::num);
        for (base, k) in side {
            let f = if *k == 1 {
                base.clone()
            } else {
                Expr::raw_bin(BinOp::Pow, base.clone(), Expr::num(*k as f64))
            };
            acc = Some(match acc {
                None => f,
                Some(prev) => Expr::raw_bin(BinOp::Mul, prev, f),
            });
        }
        acc
    };

    let mag = c.abs();
    let pos: Vec<_> = factors.iter().filter(|(_, k)| *k > 0).cloned().collect();
    let negf: Vec<_> = factors
        .iter()
        .filter(|(_, k)| *k < 0)
        .map(|(b, k)| (b.clone(), -k))
        .collect();

    let num = build_side(&pos, if mag != 1.0 || pos.is_empty() { Some(mag) } else { None })
        .unwrap_or_else(Expr::one);
    let out = match build_side(&negf, None) {
        Some(den) => Expr::raw_bin(BinOp::Div, num, den),
        None => num,
    };
    if c < 0.0 {
        Expr::raw_neg(out)
    } else {
        out
    }
}

/// Decompose a multiplicative chain into `c · Π baseᵢ^expᵢ`. Subtrees that
/// are not products, quotients, negations or integer powers become factors
/// of their own.
fn flatten(e: &Expr, exp: i64, c: &mut f64, factors: &mut Vec<(Expr, i64)>) {
    match &*e.0 {
        Node::Num(v) => {
            if exp.abs() > 512 || (*v == 0.0 && exp < 0) {
                // keep 0 in a denominator as a factor so the domain
                // error is preserved
                push_factor(factors, e.clone(), exp);
            } else {
                *c *= v.powi(exp as i32);
            }
        }
        Node::Neg(a) => {
            if exp % 2 != 0 {
                *c = -*c;
            }
            flatten(a, exp, c, factors);
        }
        Node::Bin(BinOp::Mul, a, b) => {
            flatten(a, exp, c, factors);
            flatten(b, exp, c, factors);
        }
        Node::Bin(BinOp::Div, a, b) => {
            flatten(a, exp, c, factors);
            flatten(b, -exp, c, factors);
        }
        Node::Bin(BinOp::Pow, base, pexp) => match pexp.as_int() {
            // e^0 folds to 1 before normalization ever sees it
            Some(0) => {}
            Some(k) if k.abs() <= 1_000 && exp.abs().saturating_mul(k.abs()) <= 1_000_000 => {
                flatten(base, exp * k, c, factors);
            }
            _ => push_factor(factors, e.clone(), exp),
        },
        _ => push_factor(factors, e.clone(), exp),
    }
}

fn push_factor(factors: &mut Vec<(Expr, i64)>, base: Expr, exp: i64) {
    for (b, k) in factors.iter_mut() {
        if *b == base {
            *k += exp;
            return;
        }
    }
    factors.push((base, exp));
}

// ---- printing ----------------------------------------------------------

fn prec(e: &Expr) -> u8 {
    match &*e.0 {
        Node::Bin(BinOp::Add | BinOp::Sub, _, _) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, _, _) => 2,
        Node::Neg(_) => 3,
        Node::Num(c) if *c < 0.0 => 3,
        Node::Bin(BinOp::Pow, _, _) => 4,
        _ => 5,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "(")?;
                write!(f, "{e}")?;
                write!(f, ")")
            } else {
                write!(f, "{e}")
            }
        }
        match &*self.0 {
            Node::Num(c) => write!(f, "{c}"),
            Node::Time => write!(f, "t"),
            Node::Coord(k) => write!(f, "x{k}"),
            Node::Neg(a) => {
                write!(f, "-")?;
                child(f, a, prec(a) < 3)
            }
            Node::Bin(op, a, b) => {
                let (sym, p) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                let left_parens = if *op == BinOp::Pow {
                    prec(a) <= p
                } else {
                    prec(a) < p
                };
                let right_parens = match op {
                    BinOp::Add | BinOp::Mul => prec(b) < p,
                    BinOp::Sub | BinOp::Div => prec(b) <= p,
                    BinOp::Pow => prec(b) < p,
                };
                child(f, a, left_parens)?;
                write!(f, " {sym} ")?;
                child(f, b, right_parens)
            }
            Node::Func(fun, a) => {
                write!(f, "{}(", fun.name())?;
                write!(f, "{a}")?;
                write!(f, ")")
            }
        }
    }
}

// ---- parser --------------------------------------------------------------

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    /// 1-based byte offset into the source.
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("coordinate index {index} out of range 1..={dim}")]
    CoordIndexOutOfRange { index: u64, dim: u32 },
    #[error("malformed number literal")]
    BadNumber,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Num(f64),
    Time,
    Coord(u32),
    Func(UnaryFn),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    dim: u32,
}

impl<'a> Lexer<'a> {
    fn err(at: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { offset: at + 1, kind }
    }

    fn next_tok(&mut self) -> Result<Option<(Tok, usize)>, ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let at = self.pos;
        let c = self.src[at];
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok(Some((t, at)));
        }
        if c.is_ascii_digit() {
            let mut end = at;
            while end < self.src.len() && self.src[end].is_ascii_digit() {
                end += 1;
            }
            if end < self.src.len() && self.src[end] == b'.' {
                end += 1;
                if end >= self.src.len() || !self.src[end].is_ascii_digit() {
                    return Err(Self::err(at, ParseErrorKind::BadNumber));
                }
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
            }
            if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
                let mut e2 = end + 1;
                if e2 < self.src.len() && (self.src[e2] == b'+' || self.src[e2] == b'-') {
                    e2 += 1;
                }
                if e2 < self.src.len() && self.src[e2].is_ascii_digit() {
                    while e2 < self.src.len() && self.src[e2].is_ascii_digit() {
                        e2 += 1;
                    }
                    end = e2;
                }
            }
            let text = std::str::from_utf8(&self.src[at..end]).unwrap();
            let v: f64 = text
                .parse()
                .map_err(|_| Self::err(at, ParseErrorKind::BadNumber))?;
            self.pos = end;
            return Ok(Some((Tok::Num(v), at)));
        }
        if c.is_ascii_alphabetic() {
            let mut end = at;
            while end < self.src.len() && self.src[end].is_ascii_alphanumeric() {
                end += 1;
            }
            let name = std::str::from_utf8(&self.src[at..end]).unwrap();
            self.pos = end;
            if name == "t" {
                return Ok(Some((Tok::Time, at)));
            }
            if let Some(f) = UnaryFn::from_name(name) {
                return Ok(Some((Tok::Func(f), at)));
            }
            if let Some(digits) = name.strip_prefix('x') {
                if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                    let index: u64 = digits.parse().unwrap_or(u64::MAX);
                    if index == 0 || index > self.dim as u64 {
                        return Err(Self::err(
                            at,
                            ParseErrorKind::CoordIndexOutOfRange { index, dim: self.dim },
                        ));
                    }
                    return Ok(Some((Tok::Coord(index as u32), at)));
                }
            }
            return Err(Self::err(
                at,
                ParseErrorKind::UnknownIdentifier(name.to_string()),
            ));
        }
        Err(Self::err(at, ParseErrorKind::UnexpectedChar(c as char)))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    cursor: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.cursor).map(|(t, _)| t)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let r = self.toks.get(self.cursor).cloned();
        if r.is_some() {
            self.cursor += 1;
        }
        r
    }

    fn err_here(&self, kind: ParseErrorKind) -> ParseError {
        let offset = self
            .toks
            .get(self.cursor)
            .map(|(_, at)| at + 1)
            .unwrap_or(self.len + 1);
        ParseError { offset, kind }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        while let Some(op) = self.peek() {
            let op = match op {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            acc = Expr::raw_bin(op, acc, rhs);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        while let Some(op) = self.peek() {
            let op = match op {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            acc = Expr::raw_bin(op, acc, rhs);
        }
        Ok(acc)
    }

    // Unary minus binds looser than ^, so "-t^2" is -(t^2): a leading
    // minus swallows the whole factor including any exponent suffix.
    fn factor(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Expr::raw_neg(self.factor()?));
        }
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let exp = self.factor()?;
            return Ok(Expr::raw_bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            None => Err(self.err_here(ParseErrorKind::UnexpectedEnd)),
            Some((Tok::Num(v), _)) => Ok(Expr::num(v)),
            Some((Tok::Time, _)) => Ok(Expr::time()),
            Some((Tok::Coord(k), _)) => Ok(Expr::coord(k)),
            Some((Tok::Func(f), _)) => {
                if !matches!(self.peek(), Some(Tok::LParen)) {
                    return Err(self.err_here(ParseErrorKind::Expected("'(' after function name")));
                }
                self.bump();
                let arg = self.expr()?;
                if !matches!(self.peek(), Some(Tok::RParen)) {
                    return Err(self.err_here(ParseErrorKind::Expected("')'")));
                }
                self.bump();
                Ok(Expr::raw_func(f, arg))
            }
            Some((Tok::LParen, _)) => {
                let inner = self.expr()?;
                if !matches!(self.peek(), Some(Tok::RParen)) {
                    return Err(self.err_here(ParseErrorKind::Expected("')'")));
                }
                self.bump();
                Ok(inner)
            }
            Some((_, at)) => Err(ParseError {
                offset: at + 1,
                kind: ParseErrorKind::Expected("a number, variable, function or '('"),
            }),
        }
    }
}

/// Parse an expression over `t` and `x1..x<dim>`.
pub fn parse_expr(src: &str, dim: u32) -> Result<Expr, ParseError> {
    let mut lexer = Lexer { src: src.as_bytes(), pos: 0, dim };
    let mut toks = Vec::new();
    while let Some(t) = lexer.next_tok()? {
        toks.push(t);
    }
    let mut parser = Parser { toks, cursor: 0, len: src.len() };
    let e = parser.expr()?;
    if parser.cursor != parser.toks.len() {
        return Err(parser.err_here(ParseErrorKind::Expected("end of input")));
    }
    Ok(e)
}
