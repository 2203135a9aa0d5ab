//! Sparsity pattern detection by index-set tracing.
//!
//! The function is evaluated once on tracer scalars that carry, alongside a
//! primal value, the set of input indices the value depends on (and, for the
//! second-order tracer, the set of index pairs with nonlinear interaction).
//! Propagation is monotone: output sets are unions of input sets, so the
//! detected pattern is a superset of the true nonzero pattern. Division,
//! comparisons and piecewise primitives propagate full unions; there is no
//! cancellation analysis.
//!
//! Comparisons read the primal value, so value-dependent branches trace the
//! branch taken at the typical input.

use super::pattern::SparsityPattern;
use crate::context::{alloc_cache_bufs, Context, EvalContexts};
use crate::function::{DifferentiableFunction, Function};
use crate::scalar::Scalar;
use std::cell::RefCell;
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arena for the index sets and pair sets built during one detection pass.
pub struct DepArena {
    sets: RefCell<Vec<Vec<u32>>>,
    pairs: RefCell<Vec<Vec<(u32, u32)>>>,
}

impl DepArena {
    pub fn new() -> Self {
        DepArena {
            sets: RefCell::new(Vec::new()),
            pairs: RefCell::new(Vec::new()),
        }
    }

    fn singleton(&self, index: u32) -> u32 {
        let mut sets = self.sets.borrow_mut();
        sets.push(vec![index]);
        (sets.len() - 1) as u32
    }

    fn union_sets(&self, a: u32, b: u32) -> u32 {
        if a == b {
            return a;
        }
        let mut sets = self.sets.borrow_mut();
        let merged = merge_sorted(&sets[a as usize], &sets[b as usize]);
        sets.push(merged);
        (sets.len() - 1) as u32
    }

    fn union_pairs(&self, a: u32, b: u32) -> u32 {
        if a == b {
            return a;
        }
        let mut pairs = self.pairs.borrow_mut();
        let merged = merge_sorted(&pairs[a as usize], &pairs[b as usize]);
        pairs.push(merged);
        (pairs.len() - 1) as u32
    }

    /// All unordered pairs {a, b} for a in `ga`, b in `gb`.
    fn cross(&self, ga: u32, gb: u32) -> u32 {
        let sets = self.sets.borrow();
        let (sa, sb) = (&sets[ga as usize], &sets[gb as usize]);
        let mut out: Vec<(u32, u32)> = Vec::with_capacity(sa.len() * sb.len());
        for &i in sa {
            for &j in sb {
                out.push((i.min(j), i.max(j)));
            }
        }
        drop(sets);
        out.sort_unstable();
        out.dedup();
        let mut pairs = self.pairs.borrow_mut();
        pairs.push(out);
        (pairs.len() - 1) as u32
    }

    fn set(&self, id: u32) -> Vec<u32> {
        self.sets.borrow()[id as usize].clone()
    }

    fn pair_set(&self, id: u32) -> Vec<(u32, u32)> {
        self.pairs.borrow()[id as usize].clone()
    }
}

impl Default for DepArena {
    fn default() -> Self {
        Self::new()
    }
}

fn merge_sorted<T: Copy + Ord>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Reference to an index set in the arena; `Empty` needs no arena access,
/// which is what constants lifted through `from_f64` use.
#[derive(Clone, Copy)]
enum SetRef<'a> {
    Empty,
    Set { id: u32, arena: &'a DepArena },
}

impl<'a> SetRef<'a> {
    fn union(self, other: SetRef<'a>) -> SetRef<'a> {
        match (self, other) {
            (SetRef::Empty, s) | (s, SetRef::Empty) => s,
            (SetRef::Set { id: a, arena }, SetRef::Set { id: b, .. }) => SetRef::Set {
                id: arena.union_sets(a, b),
                arena,
            },
        }
    }

    fn indices(self) -> Vec<u32> {
        match self {
            SetRef::Empty => Vec::new(),
            SetRef::Set { id, arena } => arena.set(id),
        }
    }
}

#[derive(Clone, Copy)]
enum PairRef<'a> {
    Empty,
    Set { id: u32, arena: &'a DepArena },
}

impl<'a> PairRef<'a> {
    fn union(self, other: PairRef<'a>) -> PairRef<'a> {
        match (self, other) {
            (PairRef::Empty, s) | (s, PairRef::Empty) => s,
            (PairRef::Set { id: a, arena }, PairRef::Set { id: b, .. }) => PairRef::Set {
                id: arena.union_pairs(a, b),
                arena,
            },
        }
    }

    fn pairs(self) -> Vec<(u32, u32)> {
        match self {
            PairRef::Empty => Vec::new(),
            PairRef::Set { id, arena } => arena.pair_set(id),
        }
    }
}

/// All unordered interaction pairs between two gradient sets.
fn cross<'a>(a: SetRef<'a>, b: SetRef<'a>) -> PairRef<'a> {
    match (a, b) {
        (SetRef::Empty, _) | (_, SetRef::Empty) => PairRef::Empty,
        (SetRef::Set { id: ga, arena }, SetRef::Set { id: gb, .. }) => PairRef::Set {
            id: arena.cross(ga, gb),
            arena,
        },
    }
}

/// First-order tracer: primal value plus input-dependence set.
#[derive(Clone, Copy)]
pub struct DepTracer<'a> {
    value: f64,
    deps: SetRef<'a>,
}

impl<'a> DepTracer<'a> {
    pub fn input(arena: &'a DepArena, index: usize, value: f64) -> Self {
        DepTracer {
            value,
            deps: SetRef::Set {
                id: arena.singleton(index as u32),
                arena,
            },
        }
    }

    pub fn dependencies(&self) -> Vec<u32> {
        self.deps.indices()
    }

    fn join(value: f64, a: DepTracer<'a>, b: DepTracer<'a>) -> Self {
        DepTracer {
            value,
            deps: a.deps.union(b.deps),
        }
    }

    fn lift(self, value: f64) -> Self {
        DepTracer { value, deps: self.deps }
    }
}

/// Second-order tracer: adds the set of nonlinearly interacting index pairs.
#[derive(Clone, Copy)]
pub struct HessTracer<'a> {
    value: f64,
    grad: SetRef<'a>,
    hess: PairRef<'a>,
}

impl<'a> HessTracer<'a> {
    pub fn input(arena: &'a DepArena, index: usize, value: f64) -> Self {
        HessTracer {
            value,
            grad: SetRef::Set {
                id: arena.singleton(index as u32),
                arena,
            },
            hess: PairRef::Empty,
        }
    }

    pub fn interactions(&self) -> Vec<(u32, u32)> {
        self.hess.pairs()
    }

    /// Linear combination: gradients and interactions union through.
    fn linear(value: f64, a: HessTracer<'a>, b: HessTracer<'a>) -> Self {
        HessTracer {
            value,
            grad: a.grad.union(b.grad),
            hess: a.hess.union(b.hess),
        }
    }

    /// Bilinear product: adds the cross interactions of the two gradients.
    fn product(value: f64, a: HessTracer<'a>, b: HessTracer<'a>) -> Self {
        HessTracer {
            value,
            grad: a.grad.union(b.grad),
            hess: a.hess.union(b.hess).union(cross(a.grad, b.grad)),
        }
    }

    /// Fully nonlinear binary op: every pair of the joint gradient interacts.
    fn nonlinear2(value: f64, a: HessTracer<'a>, b: HessTracer<'a>) -> Self {
        let g = a.grad.union(b.grad);
        HessTracer {
            value,
            grad: g,
            hess: a.hess.union(b.hess).union(cross(g, g)),
        }
    }

    /// Nonlinear unary op.
    fn nonlinear1(self, value: f64) -> Self {
        HessTracer {
            value,
            grad: self.grad,
            hess: self.hess.union(cross(self.grad, self.grad)),
        }
    }

    /// Linear unary op (negation, constant scaling).
    fn linear1(self, value: f64) -> Self {
        HessTracer { value, ..self }
    }
}

macro_rules! tracer_cmp {
    ($ty:ident) => {
        impl PartialEq for $ty<'_> {
            fn eq(&self, other: &Self) -> bool {
                self.value == other.value
            }
        }
        impl PartialOrd for $ty<'_> {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                self.value.partial_cmp(&other.value)
            }
        }
        impl std::fmt::Debug for $ty<'_> {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, concat!(stringify!($ty), "({})"), self.value)
            }
        }
    };
}

tracer_cmp!(DepTracer);
tracer_cmp!(HessTracer);

impl<'a> Add for DepTracer<'a> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::join(self.value + rhs.value, self, rhs)
    }
}

impl<'a> Sub for DepTracer<'a> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::join(self.value - rhs.value, self, rhs)
    }
}

impl<'a> Mul for DepTracer<'a> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::join(self.value * rhs.value, self, rhs)
    }
}

impl<'a> Div for DepTracer<'a> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self::join(self.value / rhs.value, self, rhs)
    }
}

impl Neg for DepTracer<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.lift(-self.value)
    }
}

impl Add<f64> for DepTracer<'_> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.lift(self.value + rhs)
    }
}

impl Sub<f64> for DepTracer<'_> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.lift(self.value - rhs)
    }
}

impl Mul<f64> for DepTracer<'_> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.lift(self.value * rhs)
    }
}

impl Div<f64> for DepTracer<'_> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.lift(self.value / rhs)
    }
}

impl<'a> Scalar for DepTracer<'a> {
    fn from_f64(value: f64) -> Self {
        DepTracer {
            value,
            deps: SetRef::Empty,
        }
    }

    fn primal(&self) -> f64 {
        self.value
    }

    fn powi(self, n: i32) -> Self {
        self.lift(self.value.powi(n))
    }

    fn powf(self, e: f64) -> Self {
        self.lift(self.value.powf(e))
    }

    fn exp(self) -> Self {
        self.lift(self.value.exp())
    }

    fn ln(self) -> Self {
        self.lift(self.value.ln())
    }

    fn sin(self) -> Self {
        self.lift(self.value.sin())
    }

    fn cos(self) -> Self {
        self.lift(self.value.cos())
    }

    fn tanh(self) -> Self {
        self.lift(self.value.tanh())
    }

    fn sqrt(self) -> Self {
        self.lift(self.value.sqrt())
    }

    fn abs(self) -> Self {
        self.lift(self.value.abs())
    }

    fn max(self, other: Self) -> Self {
        // piecewise: both arguments' dependencies propagate
        Self::join(Scalar::max(self.value, other.value), self, other)
    }

    fn min(self, other: Self) -> Self {
        Self::join(Scalar::min(self.value, other.value), self, other)
    }

    fn atan2(self, other: Self) -> Self {
        Self::join(self.value.atan2(other.value), self, other)
    }
}

impl<'a> Add for HessTracer<'a> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::linear(self.value + rhs.value, self, rhs)
    }
}

impl<'a> Sub for HessTracer<'a> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::linear(self.value - rhs.value, self, rhs)
    }
}

impl<'a> Mul for HessTracer<'a> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::product(self.value * rhs.value, self, rhs)
    }
}

impl<'a> Div for HessTracer<'a> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        // full interaction set: no cancellation analysis
        Self::nonlinear2(self.value / rhs.value, self, rhs)
    }
}

impl Neg for HessTracer<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.linear1(-self.value)
    }
}

impl Add<f64> for HessTracer<'_> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.linear1(self.value + rhs)
    }
}

impl Sub<f64> for HessTracer<'_> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.linear1(self.value - rhs)
    }
}

impl Mul<f64> for HessTracer<'_> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.linear1(self.value * rhs)
    }
}

impl Div<f64> for HessTracer<'_> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.linear1(self.value / rhs)
    }
}

impl<'a> Scalar for HessTracer<'a> {
    fn from_f64(value: f64) -> Self {
        HessTracer {
            value,
            grad: SetRef::Empty,
            hess: PairRef::Empty,
        }
    }

    fn primal(&self) -> f64 {
        self.value
    }

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::from_f64(self.value.powi(0)),
            1 => self.linear1(self.value),
            _ => self.nonlinear1(self.value.powi(n)),
        }
    }

    fn powf(self, e: f64) -> Self {
        if e == 1.0 {
            self.linear1(self.value)
        } else {
            self.nonlinear1(self.value.powf(e))
        }
    }

    fn exp(self) -> Self {
        self.nonlinear1(self.value.exp())
    }

    fn ln(self) -> Self {
        self.nonlinear1(self.value.ln())
    }

    fn sin(self) -> Self {
        self.nonlinear1(self.value.sin())
    }

    fn cos(self) -> Self {
        self.nonlinear1(self.value.cos())
    }

    fn tanh(self) -> Self {
        self.nonlinear1(self.value.tanh())
    }

    fn sqrt(self) -> Self {
        self.nonlinear1(self.value.sqrt())
    }

    fn abs(self) -> Self {
        // piecewise: keep the full interaction square
        self.nonlinear1(self.value.abs())
    }

    fn max(self, other: Self) -> Self {
        Self::nonlinear2(Scalar::max(self.value, other.value), self, other)
    }

    fn min(self, other: Self) -> Self {
        Self::nonlinear2(Scalar::min(self.value, other.value), self, other)
    }

    fn atan2(self, other: Self) -> Self {
        Self::nonlinear2(self.value.atan2(other.value), self, other)
    }
}

/// Detect the Jacobian sparsity pattern of `func` at `typical`.
pub fn detect_jacobian_pattern<F: Function>(
    func: &DifferentiableFunction<F>,
    typical: &[f64],
    contexts: &[Context],
) -> SparsityPattern {
    let arena = DepArena::new();
    let xs: Vec<DepTracer> = typical
        .iter()
        .enumerate()
        .map(|(i, &v)| DepTracer::input(&arena, i, v))
        .collect();
    let mut y = vec![DepTracer::from_f64(0.0); func.output_len()];
    let mut cache_bufs = alloc_cache_bufs::<DepTracer>(func.context_spec());
    let mut ctx = EvalContexts::new(contexts, &mut cache_bufs);
    func.eval(&xs, &mut y, &mut ctx);
    let pairs = y.iter().enumerate().flat_map(|(row, t)| {
        t.dependencies()
            .into_iter()
            .map(move |col| (row, col as usize))
    });
    let pairs: Vec<_> = pairs.collect();
    SparsityPattern::from_pairs(func.output_len(), func.input_len(), pairs)
}

/// Detect the (structurally symmetric) Hessian sparsity pattern of a
/// scalar-output `func` at `typical`.
pub fn detect_hessian_pattern<F: Function>(
    func: &DifferentiableFunction<F>,
    typical: &[f64],
    contexts: &[Context],
) -> SparsityPattern {
    debug_assert_eq!(func.output_len(), 1);
    let arena = DepArena::new();
    let xs: Vec<HessTracer> = typical
        .iter()
        .enumerate()
        .map(|(i, &v)| HessTracer::input(&arena, i, v))
        .collect();
    let mut y = vec![HessTracer::from_f64(0.0); 1];
    let mut cache_bufs = alloc_cache_bufs::<HessTracer>(func.context_spec());
    let mut ctx = EvalContexts::new(contexts, &mut cache_bufs);
    func.eval(&xs, &mut y, &mut ctx);
    let n = func.input_len();
    let mut pairs = Vec::new();
    for (i, j) in y[0].interactions() {
        pairs.push((i as usize, j as usize));
        if i != j {
            pairs.push((j as usize, i as usize));
        }
    }
    SparsityPattern::from_pairs(n, n, pairs)
}
