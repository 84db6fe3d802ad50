use thiserror::Error;

use super::ast::{if_le, BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpretError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("bindings disagree on length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("expected {expected} bindings, got {got}")]
    BindingCount { expected: usize, got: usize },
}

/// A variable's value: one number broadcast everywhere, or one per element.
#[derive(Debug, Clone, Copy)]
pub enum Binding<'a> {
    Scalar(f64),
    Vector(&'a [f64]),
}

impl Binding<'_> {
    fn at(&self, i: usize) -> f64 {
        match self {
            Binding::Scalar(x) => *x,
            Binding::Vector(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Unary(UnaryOp),
    Binary(BinaryOp),
    IfLe,
}

/// Postfix form of an expression with variables resolved to positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    n_vars: usize,
}

impl CompiledExpr {
    /// Resolves every variable against `names`; binding order at evaluation
    /// time follows `names`.
    pub fn compile<S: AsRef<str>>(expr: &Expr, names: &[S]) -> Result<Self, InterpretError> {
        let mut ops = Vec::with_capacity(expr.size());
        emit(expr, names, &mut ops)?;
        Ok(Self {
            ops,
            n_vars: names.len(),
        })
    }

    /// Evaluates one element, reading variable `v` through `var(v)`.
    #[inline]
    pub fn eval_with(&self, var: impl Fn(usize) -> f64, stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Var(v) => stack.push(var(v)),
                Op::Unary(u) => {
                    let x = stack.pop().unwrap();
                    stack.push(u.apply(x));
                }
                Op::Binary(b) => {
                    let y = stack.pop().unwrap();
                    let x = stack.pop().unwrap();
                    stack.push(b.apply(x, y));
                }
                Op::IfLe => {
                    let d = stack.pop().unwrap();
                    let c = stack.pop().unwrap();
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(if_le(a, b, c, d));
                }
            }
        }
        stack.pop().unwrap()
    }

    /// Elementwise evaluation. The result length is the common length of the
    /// vector bindings, or 1 when every binding is scalar.
    pub fn eval(&self, bindings: &[Binding<'_>]) -> Result<Vec<f64>, InterpretError> {
        let mut out = Vec::new();
        self.eval_into(bindings, &mut Vec::new(), &mut out)?;
        Ok(out)
    }

    pub fn eval_into(
        &self,
        bindings: &[Binding<'_>],
        stack: &mut Vec<f64>,
        out: &mut Vec<f64>,
    ) -> Result<(), InterpretError> {
        if bindings.len() != self.n_vars {
            return Err(InterpretError::BindingCount {
                expected: self.n_vars,
                got: bindings.len(),
            });
        }
        let mut len = None;
        for b in bindings {
            if let Binding::Vector(v) = b {
                match len {
                    None => len = Some(v.len()),
                    Some(l) if l != v.len() => return Err(InterpretError::LengthMismatch(l, v.len())),
                    _ => {}
                }
            }
        }
        let len = len.unwrap_or(1);
        out.clear();
        out.extend((0..len).map(|i| self.eval_with(|v| bindings[v].at(i), stack)));
        Ok(())
    }
}

fn emit<S: AsRef<str>>(e: &Expr, names: &[S], ops: &mut Vec<Op>) -> Result<(), InterpretError> {
    match e {
        Expr::Const(c) => ops.push(Op::Const(*c)),
        Expr::Var(v) => {
            let idx = names
                .iter()
                .position(|n| n.as_ref() == v)
                .ok_or_else(|| InterpretError::Unbound(v.clone()))?;
            ops.push(Op::Var(idx));
        }
        Expr::Unary(op, a) => {
            emit(a, names, ops)?;
            ops.push(Op::Unary(*op));
        }
        Expr::Binary(op, a, b) => {
            emit(a, names, ops)?;
            emit(b, names, ops)?;
            ops.push(Op::Binary(*op));
        }
        Expr::IfLe(args) => {
            for a in args.iter() {
                emit(a, names, ops)?;
            }
            ops.push(Op::IfLe);
        }
    }
    Ok(())
}

/// One-shot evaluation with named bindings.
pub fn interpret(expr: &Expr, bindings: &[(&str, Binding<'_>)]) -> Result<Vec<f64>, InterpretError> {
    let names: Vec<&str> = bindings.iter().map(|(n, _)| *n).collect();
    let values: Vec<Binding<'_>> = bindings.iter().map(|(_, b)| *b).collect();
    CompiledExpr::compile(expr, &names)?.eval(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn run(src: &str, bins: &[f64], item: f64) -> Vec<f64> {
        interpret(
            &parse(src).unwrap(),
            &[("item", Binding::Scalar(item)), ("bins", Binding::Vector(bins))],
        )
        .unwrap()
    }

    #[test]
    fn constant_broadcasts() {
        assert_eq!(run("0.0", &[1.0; 5], 3.0), vec![0.0; 5]);
    }

    #[test]
    fn arithmetic() {
        assert_eq!(run("bins - item", &[10.0, 4.0], 4.0), vec![6.0, 0.0]);
        assert_eq!(run("if_le(bins, 5, 1, 2)", &[10.0, 4.0], 0.0), vec![2.0, 1.0]);
        assert_eq!(run("max(bins, 7) * abs(-1)", &[10.0, 4.0], 0.0), vec![10.0, 7.0]);
    }

    #[test]
    fn domain_errors_are_nan() {
        assert!(run("1 / (bins - item)", &[4.0], 4.0)[0].is_nan());
        assert!(run("log(bins - item)", &[4.0], 4.0)[0].is_nan());
        assert!(run("sqrt(item - bins)", &[5.0], 4.0)[0].is_nan());
        assert_eq!(run("sqrt(bins - item)", &[8.0], 4.0), vec![2.0]);
        assert!(run("min(log(0), 1)", &[1.0], 0.0)[0].is_nan());
    }

    #[test]
    fn unbound_variable() {
        let e = parse("x + 1").unwrap();
        assert_eq!(
            interpret(&e, &[("item", Binding::Scalar(1.0))]),
            Err(InterpretError::Unbound("x".into()))
        );
    }

    #[test]
    fn all_scalar_bindings_give_one_value() {
        let e = parse("item * 2").unwrap();
        assert_eq!(interpret(&e, &[("item", Binding::Scalar(1.5))]).unwrap(), vec![3.0]);
    }

    #[test]
    fn mismatched_lengths() {
        let e = parse("a + b").unwrap();
        let r = interpret(&e, &[("a", Binding::Vector(&[1.0])), ("b", Binding::Vector(&[1.0, 2.0]))]);
        assert_eq!(r, Err(InterpretError::LengthMismatch(1, 2)));
    }
}
