use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::diffcalc::{GenericField, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Base coordinate `x_k` (1-based).
    X(usize),
    /// Fiber coordinate `y_k` (1-based).
    Y(usize),
    /// Adapted radial coordinate, alias of `x1`.
    T,
    /// Adapted level coordinate `u_k`, alias of `x_k` (k >= 2).
    U(usize),
    /// Profile argument (a value of the scalar field).
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Exp,
    Ln,
    Abs,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sqrt,
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Exp,
        Func::Ln,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    fn apply<S: Scalar>(self, v: &S) -> S {
        match self {
            Func::Sqrt => v.sqrt(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Abs => v.abs(),
        }
    }
}

/// Expression tree over chart variables, the profile argument `s`, and `pi`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable bindings for evaluation.
pub struct Env<'a, S> {
    pub x: &'a [S],
    pub y: &'a [S],
    pub s: Option<&'a S>,
}

impl<'a, S: Scalar> Env<'a, S> {
    pub fn chart(x: &'a [S], y: &'a [S]) -> Self {
        Env { x, y, s: None }
    }

    pub fn base(x: &'a [S]) -> Self {
        Env { x, y: &[], s: None }
    }

    pub fn profile(s: &'a S) -> Self {
        Env {
            x: &[],
            y: &[],
            s: Some(s),
        }
    }

    fn template(&self) -> &S {
        self.x
            .first()
            .or_else(|| self.y.first())
            .or(self.s)
            .expect("evaluation environment binds no variables")
    }

    fn var(&self, v: Var) -> S {
        let unbound = || panic!("variable {v:?} is not bound in this environment");
        match v {
            Var::X(k) | Var::U(k) => self.x.get(k - 1).cloned().unwrap_or_else(unbound),
            Var::T => self.x.first().cloned().unwrap_or_else(unbound),
            Var::Y(k) => self.y.get(k - 1).cloned().unwrap_or_else(unbound),
            Var::S => self.s.cloned().unwrap_or_else(unbound),
        }
    }
}

/// Summary of which variables an expression mentions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Usage {
    pub max_base: usize,
    pub max_fiber: usize,
    pub uses_s: bool,
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn x(k: usize) -> Expr {
        Expr::Var(Var::X(k))
    }

    pub fn y(k: usize) -> Expr {
        Expr::Var(Var::Y(k))
    }

    pub fn s() -> Expr {
        Expr::Var(Var::S)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::Binary(BinOp::Pow, Box::new(self), Box::new(exponent))
    }

    pub fn powi(self, k: i32) -> Expr {
        self.pow(Expr::Num(k as f64))
    }

    pub fn sqrt(self) -> Expr {
        Expr::call(Func::Sqrt, self)
    }

    pub fn sin(self) -> Expr {
        Expr::call(Func::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::call(Func::Cos, self)
    }

    pub fn usage(&self) -> Usage {
        let mut u = Usage::default();
        self.visit_vars(&mut |v| match v {
            Var::X(k) | Var::U(k) => u.max_base = u.max_base.max(k),
            Var::T => u.max_base = u.max_base.max(1),
            Var::Y(k) => u.max_fiber = u.max_fiber.max(k),
            Var::S => u.uses_s = true,
        });
        u
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Num(_) | Expr::Pi => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) | Expr::Call(_, a) => a.visit_vars(f),
            Expr::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        let mut any = false;
        self.visit_vars(&mut |_| any = true);
        !any
    }

    /// Numeric value of a variable-free expression.
    pub fn constant_value(&self) -> Option<f64> {
        if !self.is_constant() {
            return None;
        }
        let one = [1.0f64];
        Some(self.eval(&Env::base(&one)))
    }

    pub fn eval<S: Scalar>(&self, env: &Env<'_, S>) -> S {
        match self {
            Expr::Num(v) => env.template().lift(*v),
            Expr::Pi => env.template().lift(std::f64::consts::PI),
            Expr::Var(v) => env.var(*v),
            Expr::Neg(a) => -a.eval(env),
            Expr::Call(f, a) => f.apply(&a.eval(env)),
            Expr::Binary(op, a, b) => {
                if *op == BinOp::Pow {
                    return eval_pow(a, b, env);
                }
                let (l, r) = (a.eval(env), b.eval(env));
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => l / r,
                    BinOp::Pow => unreachable!(),
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn eval_pow<S: Scalar>(base: &Expr, exponent: &Expr, env: &Env<'_, S>) -> S {
    let b = base.eval(env);
    match exponent.constant_value() {
        Some(k) if k.fract() == 0.0 && k.abs() <= 64.0 => b.powi(k as i32),
        Some(p) => b.powf(p),
        None => (exponent.eval(env) * b.ln()).exp(),
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => match v {
                Var::X(k) => write!(f, "x{k}"),
                Var::Y(k) => write!(f, "y{k}"),
                Var::T => write!(f, "t"),
                Var::U(k) => write!(f, "u{k}"),
                Var::S => write!(f, "s"),
            },
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, a.precedence() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => {
                let p = self.precedence();
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                if *op == BinOp::Pow {
                    write_child(f, a, a.precedence() <= p)?;
                    write!(f, "^")?;
                    write_child(f, b, b.precedence() < 3)
                } else {
                    write_child(f, a, a.precedence() < p)?;
                    write!(f, "{sym}")?;
                    write_child(f, b, b.precedence() <= p)
                }
            }
        }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $method:ident, $op:expr) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Binary($op, Box::new(self), Box::new(rhs))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::Binary($op, Box::new(self), Box::new(Expr::Num(rhs)))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Binary($op, Box::new(Expr::Num(self)), Box::new(rhs))
            }
        }
    };
}

expr_binop!(Add, add, BinOp::Add);
expr_binop!(Sub, sub, BinOp::Sub);
expr_binop!(Mul, mul, BinOp::Mul);
expr_binop!(Div, div, BinOp::Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// An expression read as a function of the full chart `(x1..xn, y1..yn)`.
#[derive(Debug, Clone)]
pub struct ChartExpr {
    pub expr: Expr,
    pub n: usize,
}

impl GenericField for ChartExpr {
    fn arity(&self) -> usize {
        2 * self.n
    }
    fn eval_generic<S: Scalar>(&self, z: &[S]) -> S {
        let (x, y) = z.split_at(self.n);
        self.expr.eval(&Env::chart(x, y))
    }
}

/// An expression read as a function of base points only.
#[derive(Debug, Clone)]
pub struct BaseExpr {
    pub expr: Expr,
    pub n: usize,
}

impl GenericField for BaseExpr {
    fn arity(&self) -> usize {
        self.n
    }
    fn eval_generic<S: Scalar>(&self, z: &[S]) -> S {
        self.expr.eval(&Env::base(z))
    }
}

/// A univariate expression in the profile argument `s`.
#[derive(Debug, Clone)]
pub struct ProfileExpr {
    pub expr: Expr,
}

impl GenericField for ProfileExpr {
    fn arity(&self) -> usize {
        1
    }
    fn eval_generic<S: Scalar>(&self, z: &[S]) -> S {
        self.expr.eval(&Env::profile(&z[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcalc::{Jet, JetSpace};

    #[test]
    fn builds_and_prints() {
        let e = (Expr::y(1).powi(2) + Expr::y(2).powi(2)).sqrt();
        assert_eq!(e.to_string(), "sqrt(y1^2+y2^2)");
        let e = Expr::num(1.0) - (Expr::x(1) - Expr::x(2));
        assert_eq!(e.to_string(), "1-(x1-x2)");
        let e = -(Expr::x(1).powi(2));
        assert_eq!(e.to_string(), "-x1^2");
        let e = (-Expr::x(1)).powi(2);
        assert_eq!(e.to_string(), "(-x1)^2");
    }

    #[test]
    fn jet_order_zero_matches_plain() {
        let e = (Expr::x(1).sin() * Expr::y(1) + Expr::y(2).powi(2)).sqrt() / 3.0;
        let x = [0.3, -1.2];
        let y = [1.5, 0.7];
        let plain = e.eval(&Env::chart(&x[..], &y[..]));
        let space = JetSpace::get(1, 0);
        let xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(&space, v)).collect();
        let yj: Vec<Jet> = y.iter().map(|&v| Jet::constant(&space, v)).collect();
        let lifted = e.eval(&Env::chart(&xj[..], &yj[..]));
        assert_eq!(lifted.value(), plain);
    }

    #[test]
    fn usage_reports_indices() {
        let e = Expr::Var(Var::U(3)) + Expr::y(2) * Expr::Var(Var::T);
        let u = e.usage();
        assert_eq!(u.max_base, 3);
        assert_eq!(u.max_fiber, 2);
        assert!(!u.uses_s);
    }
}
