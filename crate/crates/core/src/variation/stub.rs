use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{Proposals, Sampling, VariationOperator};
use crate::expr::{self, parse, random_leaf, random_tree, Expr};
use crate::rng::Rng;
use crate::{CandidateKind, ParentPair};

/// Depth of freshly generated replacement subtrees.
const GROW_DEPTH: usize = 3;

/// Offline mutator over expression-language parents. Each sample starts from
/// v1 and applies one of subtree replacement, constant perturbation or a
/// graft of a v0 subtree.
#[derive(Debug, Clone)]
pub struct StubOperator {
    variables: Vec<String>,
    max_depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mutation {
    Replace,
    Perturb,
    Crossover,
}

impl StubOperator {
    pub fn new<S: AsRef<str>>(variables: &[S]) -> Self {
        Self {
            variables: variables.iter().map(|v| v.as_ref().to_string()).collect(),
            max_depth: expr::DEFAULT_MAX_DEPTH,
        }
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth.max(1);
        self
    }

    /// Mutated sources bred from `v0` and `v1`; unparseable parents are
    /// treated as the constant zero.
    pub fn mutate(&self, v0: &str, v1: &str, n: usize, rng: &mut Rng) -> Vec<String> {
        let v0 = parse(v0).unwrap_or(Expr::Const(0.0));
        let v1 = parse(v1).unwrap_or(Expr::Const(0.0));
        (0..n).map(|_| self.one(&v0, &v1, rng).to_string()).collect()
    }

    fn one(&self, v0: &Expr, v1: &Expr, rng: &mut Rng) -> Expr {
        let mut child = v1.clone();
        let roll: f64 = rng.random();
        let mut kind = if roll < 0.4 {
            Mutation::Replace
        } else if roll < 0.7 {
            Mutation::Perturb
        } else {
            Mutation::Crossover
        };
        if kind == Mutation::Perturb && child.constants_mut().is_empty() {
            kind = Mutation::Replace;
        }
        self.apply(kind, v0, &mut child, rng);
        self.cap_depth(&mut child, self.max_depth, rng);
        child
    }

    fn apply(&self, kind: Mutation, v0: &Expr, child: &mut Expr, rng: &mut Rng) {
        match kind {
            Mutation::Replace => {
                let at = rng.random_range(0..child.size());
                let level = child.node_depth(at).expect("index in range");
                let room = (self.max_depth + 1).saturating_sub(level).clamp(1, GROW_DEPTH);
                *child.node_mut(at).expect("index in range") = random_tree(rng, &self.variables, room);
            }
            Mutation::Perturb => {
                let mut consts = child.constants_mut();
                let i = rng.random_range(0..consts.len());
                let c = &mut *consts[i];
                let sigma = (c.abs() * 0.5).max(0.1);
                let step = Normal::new(0.0, sigma).expect("positive sigma").sample(rng);
                *c = ((*c + step) * 1000.0).round() / 1000.0 + 0.0;
            }
            Mutation::Crossover => {
                let from = rng.random_range(0..v0.size());
                let graft = v0.node(from).expect("index in range").clone();
                let at = rng.random_range(0..child.size());
                *child.node_mut(at).expect("index in range") = graft;
            }
        }
    }

    fn cap_depth(&self, e: &mut Expr, room: usize, rng: &mut Rng) {
        if room <= 1 {
            if !e.is_leaf() {
                *e = random_leaf(rng, &self.variables);
            }
            return;
        }
        for c in e.children_mut() {
            self.cap_depth(c, room - 1, rng);
        }
    }
}

impl VariationOperator for StubOperator {
    fn kind(&self) -> CandidateKind {
        CandidateKind::Expression
    }

    fn propose(&self, parents: &ParentPair, sampling: &Sampling, rng: &mut Rng) -> Proposals {
        Proposals {
            sources: self.mutate(&parents.first.source, &parents.second.source, sampling.n_samples, rng),
            dropped: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn same_seed_same_output() {
        let op = StubOperator::new(&["item", "bins"]);
        let a = op.mutate("bins - item", "(bins * 0.5)", 20, &mut seeded(9, 1));
        let b = op.mutate("bins - item", "(bins * 0.5)", 20, &mut seeded(9, 1));
        assert_eq!(a, b);
        let c = op.mutate("bins - item", "(bins * 0.5)", 20, &mut seeded(10, 1));
        assert_ne!(a, c);
    }

    #[test]
    fn outputs_parse_within_depth() {
        let op = StubOperator::new(&["a"]).with_max_depth(4);
        let mut rng = seeded(1, 0);
        let mut v1 = "a".to_string();
        for _ in 0..300 {
            let out = op.mutate("(a + 1.5)", &v1, 3, &mut rng);
            for s in &out {
                assert!(parse(s).unwrap().depth() <= 4, "{s}");
            }
            v1 = out[0].clone();
        }
    }

    #[test]
    fn root_crossover_of_leaves() {
        let op = StubOperator::new(&["x", "y"]);
        let (x, y) = (Expr::var("x"), Expr::var("y"));
        let mut rng = seeded(4, 0);
        for _ in 0..20 {
            let mut child = y.clone();
            op.apply(Mutation::Crossover, &x, &mut child, &mut rng);
            assert!(child == x || child == y);
        }
    }

    #[test]
    fn perturbed_constants_have_three_decimals() {
        let op = StubOperator::new::<&str>(&[]);
        let mut rng = seeded(2, 0);
        for _ in 0..200 {
            let mut child = Expr::Const(2.0);
            op.apply(Mutation::Perturb, &Expr::Const(1.0), &mut child, &mut rng);
            let Expr::Const(c) = child else { panic!() };
            assert!(((c * 1000.0).round() - c * 1000.0).abs() < 1e-9, "{c}");
        }
    }
}
