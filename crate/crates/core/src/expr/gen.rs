use rand::Rng;

use super::ast::{BinaryOp, Expr, UnaryOp};

/// A variable (60% when any are declared) or a constant in [-2, 2] with two
/// decimals.
pub fn random_leaf<S: AsRef<str>>(rng: &mut impl Rng, vars: &[S]) -> Expr {
    if !vars.is_empty() && rng.random_bool(0.6) {
        Expr::var(vars[rng.random_range(0..vars.len())].as_ref())
    } else {
        let c = (rng.random_range(-2.0..=2.0f64) * 100.0).round() / 100.0;
        Expr::Const(c + 0.0)
    }
}

/// Grows a random tree of depth at most `max_depth`.
pub fn random_tree<S: AsRef<str>>(rng: &mut impl Rng, vars: &[S], max_depth: usize) -> Expr {
    if max_depth <= 1 || rng.random_bool(0.3) {
        return random_leaf(rng, vars);
    }
    let below = max_depth - 1;
    let roll: f64 = rng.random();
    if roll < 0.2 {
        let op = UnaryOp::ALL[rng.random_range(0..UnaryOp::ALL.len())];
        Expr::unary(op, random_tree(rng, vars, below))
    } else if roll < 0.88 {
        let op = BinaryOp::ALL[rng.random_range(0..BinaryOp::ALL.len())];
        Expr::binary(op, random_tree(rng, vars, below), random_tree(rng, vars, below))
    } else {
        Expr::if_le(
            random_tree(rng, vars, below),
            random_tree(rng, vars, below),
            random_tree(rng, vars, below),
            random_tree(rng, vars, below),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn respects_depth_and_vars() {
        let mut rng = seeded(11, 0);
        for _ in 0..500 {
            let e = random_tree(&mut rng, &["a", "b"], 4);
            assert!(e.depth() <= 4);
            assert!(e.variables().iter().all(|v| *v == "a" || *v == "b"));
        }
    }
}
