//! Tape recording and generic replay/sweep.
//!
//! Recording evaluates the function on [`Var`] scalars that append one node
//! per primitive application to a [`Recorder`]. The frozen [`Tape`] stores
//! the trace in topological order: slots `0..n_inputs` hold the inputs, node
//! `k` computes slot `n_inputs + k`, and every node's arguments precede it.
//!
//! Replay and the reverse sweep are generic over the evaluation scalar, so a
//! recorded tape can be re-run on dual numbers; that is how the
//! forward-over-reverse Hessian-vector product pushes tangents through the
//! gradient.
//!
//! Comparisons between tracked values are recorded as guards. Replaying at
//! an input where a guard resolves differently than at recording time is
//! reported as a trace escape instead of silently reusing the stale branch.
//! Branches taken on raw primal values extracted from a `Var` cannot be
//! observed and remain frozen; that caveat is inherent to taping.

use crate::scalar::Scalar;
use std::cell::RefCell;
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Operand {
    Slot(u32),
    Lit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Max,
    Min,
    Atan2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum UnOp {
    Neg,
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Node {
    Bin { op: BinOp, a: Operand, b: Operand },
    Un { op: UnOp, a: u32 },
    Powi { a: u32, n: i32 },
    Powf { a: u32, e: f64 },
}

/// A recorded comparison between tracked values, with its outcome at
/// recording time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Guard {
    a: Operand,
    b: Operand,
    outcome: Option<Ordering>,
}

/// Output of the traced function: a computed slot or a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum OutSlot {
    Slot(u32),
    Lit(f64),
}

/// Frozen execution trace of one function at one recording input.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    n_inputs: usize,
    nodes: Vec<Node>,
    guards: Vec<Guard>,
    outputs: Vec<OutSlot>,
}

impl Tape {
    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Total slot count (inputs plus nodes); the size of the value and
    /// adjoint buffers.
    pub fn n_slots(&self) -> usize {
        self.n_inputs + self.nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    #[cfg(test)]
    pub(crate) fn count_bin(&self, op: BinOp) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Bin { op: o, .. } if *o == op))
            .count()
    }

    #[inline]
    fn operand_value<S: Scalar>(values: &[S], op: Operand) -> S {
        match op {
            Operand::Slot(s) => values[s as usize],
            Operand::Lit(c) => S::from_f64(c),
        }
    }

    /// Recompute every slot value at `x`. Refreshes the saved values the
    /// sweep reads, so subsequent sweeps are correct at `x` rather than at
    /// the recording point. Returns the index of the first comparison guard
    /// that resolves differently than at recording time, if any.
    pub(crate) fn replay<S: Scalar>(&self, x: &[S], values: &mut [S]) -> Result<(), usize> {
        debug_assert_eq!(x.len(), self.n_inputs);
        debug_assert_eq!(values.len(), self.n_slots());
        values[..self.n_inputs].copy_from_slice(x);
        for (k, node) in self.nodes.iter().enumerate() {
            let out = match *node {
                Node::Bin { op, a, b } => {
                    let va = Self::operand_value(values, a);
                    let vb = Self::operand_value(values, b);
                    match op {
                        BinOp::Add => va + vb,
                        BinOp::Sub => va - vb,
                        BinOp::Mul => va * vb,
                        BinOp::Div => va / vb,
                        BinOp::Max => va.max(vb),
                        BinOp::Min => va.min(vb),
                        BinOp::Atan2 => va.atan2(vb),
                    }
                }
                Node::Un { op, a } => {
                    let va = values[a as usize];
                    match op {
                        UnOp::Neg => -va,
                        UnOp::Exp => va.exp(),
                        UnOp::Ln => va.ln(),
                        UnOp::Sin => va.sin(),
                        UnOp::Cos => va.cos(),
                        UnOp::Tanh => va.tanh(),
                        UnOp::Sqrt => va.sqrt(),
                        UnOp::Abs => va.abs(),
                    }
                }
                Node::Powi { a, n } => values[a as usize].powi(n),
                Node::Powf { a, e } => values[a as usize].powf(e),
            };
            values[self.n_inputs + k] = out;
        }
        for (gi, g) in self.guards.iter().enumerate() {
            let pa = Self::operand_value(values, g.a).primal();
            let pb = Self::operand_value(values, g.b).primal();
            if pa.partial_cmp(&pb) != g.outcome {
                return Err(gi);
            }
        }
        Ok(())
    }

    /// Copy the function outputs out of a replayed value buffer.
    pub(crate) fn read_outputs<S: Scalar>(&self, values: &[S], y: &mut [S]) {
        for (slot, out) in self.outputs.iter().zip(y.iter_mut()) {
            *out = match *slot {
                OutSlot::Slot(s) => values[s as usize],
                OutSlot::Lit(c) => S::from_f64(c),
            };
        }
    }

    /// Reverse adjoint accumulation. `values` must hold a replay at the
    /// current input; `adjoints` is zeroed on entry. Writes the input
    /// cotangent (`J^T seed`) into `x_bar`.
    pub(crate) fn sweep<S: Scalar>(
        &self,
        values: &[S],
        seed: &[S],
        adjoints: &mut [S],
        x_bar: &mut [S],
    ) {
        debug_assert_eq!(seed.len(), self.outputs.len());
        debug_assert_eq!(adjoints.len(), self.n_slots());
        let zero = S::from_f64(0.0);
        adjoints.fill(zero);
        for (out, &w) in self.outputs.iter().zip(seed.iter()) {
            if let OutSlot::Slot(s) = *out {
                adjoints[s as usize] = adjoints[s as usize] + w;
            }
        }
        for k in (0..self.nodes.len()).rev() {
            let slot = self.n_inputs + k;
            let w = adjoints[slot];
            match self.nodes[k] {
                Node::Bin { op, a, b } => {
                    let va = Self::operand_value(values, a);
                    let vb = Self::operand_value(values, b);
                    let (da, db) = match op {
                        BinOp::Add => (w, w),
                        BinOp::Sub => (w, zero - w),
                        BinOp::Mul => (w * vb, w * va),
                        BinOp::Div => (w / vb, zero - w * va / (vb * vb)),
                        BinOp::Max => {
                            if va.primal() >= vb.primal() {
                                (w, zero)
                            } else {
                                (zero, w)
                            }
                        }
                        BinOp::Min => {
                            if va.primal() <= vb.primal() {
                                (w, zero)
                            } else {
                                (zero, w)
                            }
                        }
                        BinOp::Atan2 => {
                            let denom = va * va + vb * vb;
                            (w * vb / denom, zero - w * va / denom)
                        }
                    };
                    if let Operand::Slot(s) = a {
                        adjoints[s as usize] = adjoints[s as usize] + da;
                    }
                    if let Operand::Slot(s) = b {
                        adjoints[s as usize] = adjoints[s as usize] + db;
                    }
                }
                Node::Un { op, a } => {
                    let va = values[a as usize];
                    let vy = values[slot];
                    let da = match op {
                        UnOp::Neg => zero - w,
                        UnOp::Exp => w * vy,
                        UnOp::Ln => w / va,
                        UnOp::Sin => w * va.cos(),
                        UnOp::Cos => zero - w * va.sin(),
                        UnOp::Tanh => w * (S::from_f64(1.0) - vy * vy),
                        UnOp::Sqrt => w / (vy * 2.0),
                        UnOp::Abs => {
                            let p = va.primal();
                            if p > 0.0 {
                                w
                            } else if p < 0.0 {
                                zero - w
                            } else {
                                zero
                            }
                        }
                    };
                    adjoints[a as usize] = adjoints[a as usize] + da;
                }
                Node::Powi { a, n } => {
                    if n != 0 {
                        let va = values[a as usize];
                        let da = w * va.powi(n - 1) * (n as f64);
                        adjoints[a as usize] = adjoints[a as usize] + da;
                    }
                }
                Node::Powf { a, e } => {
                    let va = values[a as usize];
                    let da = w * va.powf(e - 1.0) * e;
                    adjoints[a as usize] = adjoints[a as usize] + da;
                }
            }
        }
        x_bar.copy_from_slice(&adjoints[..self.n_inputs]);
    }
}

struct RecorderInner {
    n_inputs: usize,
    nodes: Vec<Node>,
    guards: Vec<Guard>,
}

/// Accumulates the trace while the function runs on [`Var`]s.
pub struct Recorder {
    inner: RefCell<RecorderInner>,
}

impl Recorder {
    pub fn new(n_inputs: usize) -> Self {
        Recorder {
            inner: RefCell::new(RecorderInner {
                n_inputs,
                nodes: Vec::new(),
                guards: Vec::new(),
            }),
        }
    }

    /// The tracked variable for input index `i` with value `value`.
    pub fn input(&self, i: usize, value: f64) -> Var<'_> {
        debug_assert!(i < self.inner.borrow().n_inputs);
        Var::Slot {
            slot: i as u32,
            value,
            rec: self,
        }
    }

    fn push_node(&self, node: Node) -> u32 {
        let mut inner = self.inner.borrow_mut();
        let slot = (inner.n_inputs + inner.nodes.len()) as u32;
        inner.nodes.push(node);
        slot
    }

    fn push_guard(&self, a: Operand, b: Operand, outcome: Option<Ordering>) {
        self.inner.borrow_mut().guards.push(Guard { a, b, outcome });
    }

    /// Freeze the trace with the given function outputs.
    pub(crate) fn freeze(self, outputs: Vec<OutSlot>) -> Tape {
        let inner = self.inner.into_inner();
        Tape {
            n_inputs: inner.n_inputs,
            nodes: inner.nodes,
            guards: inner.guards,
            outputs,
        }
    }
}

/// Scalar type used while recording: a constant or a tracked slot.
#[derive(Clone, Copy)]
pub enum Var<'t> {
    Lit(f64),
    Slot {
        slot: u32,
        value: f64,
        rec: &'t Recorder,
    },
}

impl<'t> Var<'t> {
    #[inline]
    fn value(&self) -> f64 {
        match self {
            Var::Lit(c) => *c,
            Var::Slot { value, .. } => *value,
        }
    }

    #[inline]
    fn operand(&self) -> Operand {
        match self {
            Var::Lit(c) => Operand::Lit(*c),
            Var::Slot { slot, .. } => Operand::Slot(*slot),
        }
    }

    #[inline]
    fn recorder(&self) -> Option<&'t Recorder> {
        match self {
            Var::Lit(_) => None,
            Var::Slot { rec, .. } => Some(rec),
        }
    }

    pub(crate) fn out_slot(&self) -> OutSlot {
        match self {
            Var::Lit(c) => OutSlot::Lit(*c),
            Var::Slot { slot, .. } => OutSlot::Slot(*slot),
        }
    }

    #[inline]
    fn bin(op: BinOp, a: Var<'t>, b: Var<'t>, value: f64) -> Var<'t> {
        match a.recorder().or_else(|| b.recorder()) {
            None => Var::Lit(value),
            Some(rec) => {
                let node = Node::Bin {
                    op,
                    a: a.operand(),
                    b: b.operand(),
                };
                let slot = rec.push_node(node);
                Var::Slot { slot, value, rec }
            }
        }
    }

    #[inline]
    fn un(op: UnOp, a: Var<'t>, value: f64) -> Var<'t> {
        match a.recorder() {
            None => Var::Lit(value),
            Some(rec) => {
                let node = Node::Un { op, a: a.slot_id() };
                let slot = rec.push_node(node);
                Var::Slot { slot, value, rec }
            }
        }
    }

    #[inline]
    fn slot_id(&self) -> u32 {
        match self {
            Var::Slot { slot, .. } => *slot,
            Var::Lit(_) => unreachable!("literal has no slot"),
        }
    }
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Var::Lit(c) => write!(f, "Lit({c})"),
            Var::Slot { slot, value, .. } => write!(f, "Slot({slot}, {value})"),
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Var::bin(BinOp::Add, self, rhs, self.value() + rhs.value())
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Var::bin(BinOp::Sub, self, rhs, self.value() - rhs.value())
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Var::bin(BinOp::Mul, self, rhs, self.value() * rhs.value())
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Var::bin(BinOp::Div, self, rhs, self.value() / rhs.value())
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        Var::un(UnOp::Neg, self, -self.value())
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        Var::bin(BinOp::Add, self, Var::Lit(rhs), self.value() + rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        Var::bin(BinOp::Sub, self, Var::Lit(rhs), self.value() - rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Var::bin(BinOp::Mul, self, Var::Lit(rhs), self.value() * rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        Var::bin(BinOp::Div, self, Var::Lit(rhs), self.value() / rhs)
    }
}

impl PartialEq for Var<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Var<'_> {
    /// Compares primal values. If either side is tracked, the comparison is
    /// recorded as a guard so replay can detect a flipped branch.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let outcome = self.value().partial_cmp(&other.value());
        if let Some(rec) = self.recorder().or_else(|| other.recorder()) {
            rec.push_guard(self.operand(), other.operand(), outcome);
        }
        outcome
    }
}

impl<'t> Scalar for Var<'t> {
    #[inline]
    fn from_f64(value: f64) -> Self {
        Var::Lit(value)
    }

    #[inline]
    fn primal(&self) -> f64 {
        self.value()
    }

    fn powi(self, n: i32) -> Self {
        let value = self.value().powi(n);
        match self.recorder() {
            None => Var::Lit(value),
            Some(rec) => {
                let slot = rec.push_node(Node::Powi {
                    a: self.slot_id(),
                    n,
                });
                Var::Slot { slot, value, rec }
            }
        }
    }

    fn powf(self, e: f64) -> Self {
        let value = self.value().powf(e);
        match self.recorder() {
            None => Var::Lit(value),
            Some(rec) => {
                let slot = rec.push_node(Node::Powf {
                    a: self.slot_id(),
                    e,
                });
                Var::Slot { slot, value, rec }
            }
        }
    }

    fn exp(self) -> Self {
        Var::un(UnOp::Exp, self, self.value().exp())
    }

    fn ln(self) -> Self {
        Var::un(UnOp::Ln, self, self.value().ln())
    }

    fn sin(self) -> Self {
        Var::un(UnOp::Sin, self, self.value().sin())
    }

    fn cos(self) -> Self {
        Var::un(UnOp::Cos, self, self.value().cos())
    }

    fn tanh(self) -> Self {
        Var::un(UnOp::Tanh, self, self.value().tanh())
    }

    fn sqrt(self) -> Self {
        Var::un(UnOp::Sqrt, self, self.value().sqrt())
    }

    fn abs(self) -> Self {
        Var::un(UnOp::Abs, self, self.value().abs())
    }

    fn max(self, other: Self) -> Self {
        let value = Scalar::max(self.value(), other.value());
        Var::bin(BinOp::Max, self, other, value)
    }

    fn min(self, other: Self) -> Self {
        let value = Scalar::min(self.value(), other.value());
        Var::bin(BinOp::Min, self, other, value)
    }

    fn atan2(self, other: Self) -> Self {
        Var::bin(BinOp::Atan2, self, other, self.value().atan2(other.value()))
    }
}
