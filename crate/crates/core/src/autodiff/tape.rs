use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;
use crate::error::{Error, Result};

/// Primitive recorded on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Tanh,
    Sin,
    Cos,
    Powi,
    Affine,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    start: u32,
    len: u32,
}

#[derive(Default)]
struct Inner {
    nodes: Vec<Node>,
    /// `(operand, ∂node/∂operand)` pairs, indexed by `Node::start..start+len`.
    edges: Vec<(u32, f64)>,
    first_non_finite: Option<usize>,
}

/// Topologically ordered record of scalar primitives. Every operand index is
/// smaller than the index of the node consuming it, so a single backward
/// sweep produces all adjoints.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        f.debug_struct("Tape")
            .field("nodes", &inner.nodes.len())
            .field("edges", &inner.edges.len())
            .finish()
    }
}

/// A tape variable, or a constant that carries no tape at all. Operations
/// between constants never touch a tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var(#{}, {})", self.idx, self.val),
            None => write!(f, "Const({})", self.val),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn op(&self, idx: usize) -> Op {
        self.inner.borrow().nodes[idx].op
    }

    pub fn leaf(&self, val: f64) -> Var<'_> {
        self.push(Op::Leaf, val, &[])
    }

    /// A constant recorded on the tape (as a node without operands).
    pub fn constant(&self, val: f64) -> Var<'_> {
        self.push(Op::Const, val, &[])
    }

    fn push(&self, op: Op, val: f64, parents: &[(u32, f64)]) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.nodes.len();
        let start = inner.edges.len() as u32;
        inner.edges.extend_from_slice(parents);
        inner.nodes.push(Node {
            op,
            start,
            len: parents.len() as u32,
        });
        if inner.first_non_finite.is_none() && !val.is_finite() {
            inner.first_non_finite = Some(idx);
        }
        Var {
            tape: Some(self),
            idx: idx as u32,
            val,
        }
    }

    /// Index of the first node whose value was NaN or infinite.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.inner.borrow().first_non_finite
    }

    /// Adjoints `∂output/∂node` for every node on the tape.
    pub fn adjoints(&self, output: Var<'_>) -> Vec<f64> {
        let inner = self.inner.borrow();
        let mut adj = vec![0.0; inner.nodes.len()];
        if output.tape.is_none() {
            return adj;
        }
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = inner.nodes[i];
            for &(p, d) in &inner.edges[n.start as usize..(n.start + n.len) as usize] {
                adj[p as usize] += a * d;
            }
        }
        adj
    }
}

impl<'t> Var<'t> {
    /// Tape index, `None` for a constant.
    pub fn index(&self) -> Option<usize> {
        self.tape.map(|_| self.idx as usize)
    }

    pub fn val(&self) -> f64 {
        self.val
    }

    fn unary(self, op: Op, val: f64, d: f64) -> Self {
        match self.tape {
            Some(t) => t.push(op, val, &[(self.idx, d)]),
            None => Self::cst(val),
        }
    }

    fn binary(self, other: Self, op: Op, val: f64, da: f64, db: f64) -> Self {
        match (self.tape, other.tape) {
            (Some(t), Some(_)) => t.push(op, val, &[(self.idx, da), (other.idx, db)]),
            (Some(t), None) => t.push(op, val, &[(self.idx, da)]),
            (None, Some(t)) => t.push(op, val, &[(other.idx, db)]),
            (None, None) => Self::cst(val),
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Add, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Sub, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Mul, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.val / rhs.val;
        self.binary(rhs, Op::Div, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -self.val, -1.0)
    }
}

impl<'t> Scalar for Var<'t> {
    fn cst(v: f64) -> Self {
        Var {
            tape: None,
            idx: 0,
            val: v,
        }
    }

    fn value(&self) -> f64 {
        self.val
    }

    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(Op::Tanh, t, 1.0 - t * t)
    }

    fn sin(self) -> Self {
        self.unary(Op::Sin, self.val.sin(), self.val.cos())
    }

    fn cos(self) -> Self {
        self.unary(Op::Cos, self.val.cos(), -self.val.sin())
    }

    fn powi(self, n: i32) -> Self {
        let d = if n == 0 {
            0.0
        } else {
            n as f64 * self.val.powi(n - 1)
        };
        self.unary(Op::Powi, self.val.powi(n), d)
    }

    fn affine(bias: f64, coeffs: &[f64], xs: &[Self]) -> Self {
        let val = coeffs.iter().zip(xs).fold(bias, |acc, (c, x)| acc + c * x.val);
        let Some(tape) = xs.iter().find_map(|x| x.tape) else {
            return Self::cst(val);
        };
        let parents: Vec<(u32, f64)> = coeffs
            .iter()
            .zip(xs)
            .filter(|(_, x)| x.tape.is_some())
            .map(|(&c, x)| (x.idx, c))
            .collect();
        tape.push(Op::Affine, val, &parents)
    }

    fn scale(self, c: f64) -> Self {
        self.unary(Op::Affine, c * self.val, c)
    }
}

/// Reverse-mode gradient of a scalar objective.
///
/// `f` receives one leaf per component of `theta`; the returned value is the
/// plain evaluation of the objective.
pub fn grad<F>(f: F, theta: &[f64]) -> Result<(f64, Vec<f64>)>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let leaves: Vec<Var<'_>> = theta.iter().map(|&v| tape.leaf(v)).collect();
    let out = f(&leaves);
    if let Some(node) = tape.first_non_finite() {
        return Err(Error::NonFinite { node });
    }
    let adj = tape.adjoints(out);
    let g = leaves.iter().map(|l| adj[l.idx as usize]).collect();
    Ok((out.val, g))
}
