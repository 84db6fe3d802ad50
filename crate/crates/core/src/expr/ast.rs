use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 5] = [UnaryOp::Neg, UnaryOp::Exp, UnaryOp::Log, UnaryOp::Sqrt, UnaryOp::Abs];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryOp::Neg => -x,
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log if x > 0.0 => x.ln(),
            UnaryOp::Sqrt if x >= 0.0 => x.sqrt(),
            UnaryOp::Abs => x.abs(),
            UnaryOp::Log | UnaryOp::Sqrt => f64::NAN,
        }
    }
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 6] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Min,
        BinaryOp::Max,
    ];

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div if b == 0.0 => f64::NAN,
            BinaryOp::Div => a / b,
            _ if a.is_nan() || b.is_nan() => f64::NAN,
            BinaryOp::Min => a.min(b),
            BinaryOp::Max => a.max(b),
        }
    }

    fn infix(self) -> Option<&'static str> {
        match self {
            BinaryOp::Add => Some("+"),
            BinaryOp::Sub => Some("-"),
            BinaryOp::Mul => Some("*"),
            BinaryOp::Div => Some("/"),
            BinaryOp::Min | BinaryOp::Max => None,
        }
    }

    fn function(self) -> &'static str {
        match self {
            BinaryOp::Min => "min",
            BinaryOp::Max => "max",
            _ => unreachable!("infix operator"),
        }
    }
}

pub fn if_le(a: f64, b: f64, then: f64, otherwise: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a <= b {
        then
    } else {
        otherwise
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    IfLe(Box<[Expr; 4]>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Self {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn if_le(a: Expr, b: Expr, then: Expr, otherwise: Expr) -> Self {
        Expr::IfLe(Box::new([a, b, then, otherwise]))
    }

    /// Height of the tree; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expr::Const(_) | Expr::Var(_))
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => vec![],
            Expr::Unary(_, e) => vec![e],
            Expr::Binary(_, a, b) => vec![a, b],
            Expr::IfLe(args) => args.iter().collect(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => vec![],
            Expr::Unary(_, e) => vec![e],
            Expr::Binary(_, a, b) => vec![a, b],
            Expr::IfLe(args) => args.iter_mut().collect(),
        }
    }

    /// Subtree at preorder position `index`.
    pub fn node(&self, index: usize) -> Option<&Expr> {
        let mut remaining = index;
        self.find(&mut remaining)
    }

    fn find(&self, remaining: &mut usize) -> Option<&Expr> {
        if *remaining == 0 {
            return Some(self);
        }
        *remaining -= 1;
        self.children().into_iter().find_map(|c| c.find(remaining))
    }

    pub fn node_mut(&mut self, index: usize) -> Option<&mut Expr> {
        let mut remaining = index;
        self.find_mut(&mut remaining)
    }

    fn find_mut(&mut self, remaining: &mut usize) -> Option<&mut Expr> {
        if *remaining == 0 {
            return Some(self);
        }
        *remaining -= 1;
        for c in self.children_mut() {
            if let Some(found) = c.find_mut(remaining) {
                return Some(found);
            }
        }
        None
    }

    /// Depth (root = 1) of the node at preorder position `index`.
    pub fn node_depth(&self, index: usize) -> Option<usize> {
        fn walk(e: &Expr, remaining: &mut usize, level: usize) -> Option<usize> {
            if *remaining == 0 {
                return Some(level);
            }
            *remaining -= 1;
            e.children().into_iter().find_map(|c| walk(c, remaining, level + 1))
        }
        let mut remaining = index;
        walk(self, &mut remaining, 1)
    }

    pub fn constants_mut(&mut self) -> Vec<&mut f64> {
        match self {
            Expr::Const(c) => vec![c],
            Expr::Var(_) => vec![],
            Expr::Unary(_, e) => e.constants_mut(),
            Expr::Binary(_, a, b) => {
                let mut v = a.constants_mut();
                v.extend(b.constants_mut());
                v
            }
            Expr::IfLe(args) => args.iter_mut().flat_map(|a| a.constants_mut()).collect(),
        }
    }

    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        if let Expr::Var(v) = self {
            if !out.contains(&v.as_str()) {
                out.push(v);
            }
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_sign_negative() {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{c:?}")
    }
}

/// Canonical source form; `parse(e.to_string()) == e`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_number(f, *c),
            Expr::Var(v) => f.write_str(v),
            Expr::Unary(UnaryOp::Neg, e) => match **e {
                Expr::Const(_) => write!(f, "-({e})"),
                _ => write!(f, "-{e}"),
            },
            Expr::Unary(op, e) => write!(f, "{}({e})", op.name()),
            Expr::Binary(op, a, b) => match op.infix() {
                Some(sym) => write!(f, "({a} {sym} {b})"),
                None => write!(f, "{}({a}, {b})", op.function()),
            },
            Expr::IfLe(args) => {
                let [a, b, c, d] = &**args;
                write!(f, "if_le({a}, {b}, {c}, {d})")
            }
        }
    }
}
