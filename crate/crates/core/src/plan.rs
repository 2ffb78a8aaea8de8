//! Compilation of a formula into a flat, post-order node list with grid
//! windows, horizons and anchor spans resolved.

use thiserror::Error;

use crate::formula::{Atom, Expr, Formula, IntervalError};
use crate::trace::{atom_bounds, DomainBounds};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("formula references variable {0:?} which the trace does not declare")]
    UnknownVariable(String),
}

/// Expression with variables resolved to sample-vector positions.
#[derive(Debug, Clone)]
pub(crate) enum BoundExpr {
    Const(f64),
    Var(usize),
    Neg(Box<BoundExpr>),
    Add(Box<BoundExpr>, Box<BoundExpr>),
    Sub(Box<BoundExpr>, Box<BoundExpr>),
    Mul(Box<BoundExpr>, Box<BoundExpr>),
    Abs(Box<BoundExpr>),
}

impl BoundExpr {
    fn bind(e: &Expr, variables: &[String]) -> Result<Self, PlanError> {
        let bind = |e: &Expr| Self::bind(e, variables).map(Box::new);
        Ok(match e {
            Expr::Const(c) => BoundExpr::Const(*c),
            Expr::Var(name) => BoundExpr::Var(
                variables
                    .iter()
                    .position(|v| v == name)
                    .ok_or_else(|| PlanError::UnknownVariable(name.clone()))?,
            ),
            Expr::Neg(a) => BoundExpr::Neg(bind(a)?),
            Expr::Add(a, b) => BoundExpr::Add(bind(a)?, bind(b)?),
            Expr::Sub(a, b) => BoundExpr::Sub(bind(a)?, bind(b)?),
            Expr::Mul(a, b) => BoundExpr::Mul(bind(a)?, bind(b)?),
            Expr::Abs(a) => BoundExpr::Abs(bind(a)?),
        })
    }

    pub(crate) fn eval(&self, sample: &[f64]) -> f64 {
        match self {
            BoundExpr::Const(c) => *c,
            BoundExpr::Var(i) => sample[*i],
            BoundExpr::Neg(a) => -a.eval(sample),
            BoundExpr::Add(a, b) => a.eval(sample) + b.eval(sample),
            BoundExpr::Sub(a, b) => a.eval(sample) - b.eval(sample),
            BoundExpr::Mul(a, b) => a.eval(sample) * b.eval(sample),
            BoundExpr::Abs(a) => a.eval(sample).abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum NodeKind {
    Atom {
        id: usize,
        expr: BoundExpr,
        r_min: f64,
        r_max: f64,
    },
    False,
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Always {
        l: usize,
        u: usize,
        child: usize,
    },
    Eventually {
        l: usize,
        u: usize,
        child: usize,
    },
    Until {
        l: usize,
        u: usize,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub kind: NodeKind,
    /// Samples needed beyond an anchor for the value there to be final.
    pub horizon: usize,
    /// Largest anchor at which this node is ever evaluated.
    pub last_anchor: usize,
    pub formula: Formula,
}

/// A formula compiled against a sampling step and a variable ordering.
#[derive(Debug, Clone)]
pub struct Plan {
    pub(crate) nodes: Vec<Node>,
    atoms: Vec<Atom>,
    delta: f64,
    variables: Vec<String>,
}

impl Plan {
    /// Compiles `formula` for evaluation at anchors `0..=last_anchor`.
    pub fn compile(
        formula: &Formula,
        delta: f64,
        variables: &[String],
        bounds: &DomainBounds,
        last_anchor: usize,
    ) -> Result<Self, PlanError> {
        let formula = formula.clone().number_atoms().map_atoms(|a| {
            let (lo, hi) = atom_bounds(a, bounds);
            a.r_min = lo;
            a.r_max = hi;
        });
        let mut plan = Plan {
            nodes: Vec::new(),
            atoms: formula.atoms().into_iter().cloned().collect(),
            delta,
            variables: variables.to_vec(),
        };
        plan.lower(&formula, last_anchor)?;
        Ok(plan)
    }

    fn push(&mut self, kind: NodeKind, horizon: usize, last_anchor: usize, f: &Formula) -> usize {
        self.nodes.push(Node {
            kind,
            horizon,
            last_anchor,
            formula: f.clone(),
        });
        self.nodes.len() - 1
    }

    fn lower(&mut self, f: &Formula, anchor: usize) -> Result<usize, PlanError> {
        let h = |p: &Plan, i: usize| p.nodes[i].horizon;
        Ok(match f {
            Formula::Atom(a) => {
                let kind = NodeKind::Atom {
                    id: a.id,
                    expr: BoundExpr::bind(&a.expr, &self.variables)?,
                    r_min: a.r_min,
                    r_max: a.r_max,
                };
                self.push(kind, 0, anchor, f)
            }
            Formula::False => self.push(NodeKind::False, 0, anchor, f),
            Formula::Not(g) => {
                let c = self.lower(g, anchor)?;
                let hz = h(self, c);
                self.push(NodeKind::Not(c), hz, anchor, f)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let x = self.lower(a, anchor)?;
                let y = self.lower(b, anchor)?;
                let hz = h(self, x).max(h(self, y));
                let kind = if matches!(f, Formula::And(..)) {
                    NodeKind::And(x, y)
                } else {
                    NodeKind::Or(x, y)
                };
                self.push(kind, hz, anchor, f)
            }
            Formula::Always(i, g) | Formula::Eventually(i, g) => {
                let (l, u) = i.to_samples(self.delta)?;
                let child = self.lower(g, anchor + u)?;
                let hz = u + h(self, child);
                let kind = if matches!(f, Formula::Always(..)) {
                    NodeKind::Always { l, u, child }
                } else {
                    NodeKind::Eventually { l, u, child }
                };
                self.push(kind, hz, anchor, f)
            }
            Formula::Until(i, a, b) => {
                let (l, u) = i.to_samples(self.delta)?;
                let left = self.lower(a, anchor + u)?;
                let right = self.lower(b, anchor + u)?;
                let hz = u + h(self, left).max(h(self, right));
                self.push(NodeKind::Until { l, u, left, right }, hz, anchor, f)
            }
        })
    }

    pub(crate) fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Horizon of the whole formula in samples.
    pub fn horizon(&self) -> usize {
        self.nodes[self.root()].horizon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Atoms with their a-priori ranges installed.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn formula(&self) -> &Formula {
        &self.nodes[self.root()].formula
    }
}
