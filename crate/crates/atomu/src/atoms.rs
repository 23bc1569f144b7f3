//! The atom kernel: the two atom structures (pure equality, dense linear
//! order without endpoints), quantifier-free constraints over them, and the
//! canonicalization of constraints into complete types.
//!
//! A complete type records, for a tuple of atom variables together with the
//! named constants of a [`Context`], the full arrangement of the tuple:
//! which positions are equal, and (for ordered atoms) how the blocks of
//! equal positions are interleaved with the constants.  Two tuples realize
//! the same complete type exactly when some atom automorphism fixing the
//! context constants maps one to the other, so a complete type is a finite
//! certificate for one orbit of tuples.  All orbit computation downstream
//! rests on the operations in this module.

use num_rational::Rational64;
use num_traits::One;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Which first-order structure the atoms come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomSort {
    /// A countably infinite set with equality only.
    Equality,
    /// The rational numbers with their total order.
    Ordered,
}

/// A concrete atom. Atoms are exact rationals; under the equality sort only
/// equality of values is ever consulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(pub Rational64);

impl Atom {
    pub fn int(n: i64) -> Atom {
        Atom(Rational64::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Atom {
        Atom(Rational64::new(num, den))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

/// Errors produced by the kernel and by the layers above it.
#[derive(Debug, Clone, thiserror::Error)]
pub enum AtomError {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("duplicate constant name `{0}`")]
    DuplicateConstant(String),
    #[error("constant witnesses must be pairwise distinct (`{0}`)")]
    DuplicateWitness(String),
    #[error("ordered constants must be declared in strictly increasing order (`{0}`)")]
    ConstantOrder(String),
    #[error("relation `{0}` is not available over equality atoms")]
    SortMismatch(&'static str),
    #[error("context mismatch between operands")]
    ContextMismatch,
    #[error("unregistered constructor tag `{0}`")]
    UnregisteredTag(String),
    #[error("arity mismatch for tag `{tag}`: expected {expected}, got {got}")]
    ArityMismatch {
        tag: String,
        expected: usize,
        got: usize,
    },
    #[error("{0}")]
    Invalid(String),
}

/// A declared support context: the atom sort, the named constants with
/// concrete witness atoms, and the registry of constructor tags.
///
/// Every orbit-level object downstream is relative to one context.  Contexts
/// are immutable; evaluation under atom binders extends a context by
/// appending fresh constants, producing a new one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    sort: AtomSort,
    consts: Vec<(String, Atom)>,
    tags: BTreeMap<String, usize>,
    pred_tags: BTreeMap<String, usize>,
}

pub type Ctx = Arc<Context>;

impl Context {
    pub fn new(sort: AtomSort) -> Context {
        Context {
            sort,
            consts: Vec::new(),
            tags: BTreeMap::new(),
            pred_tags: BTreeMap::new(),
        }
    }

    pub fn sort(&self) -> AtomSort {
        self.sort
    }

    /// Declares a constant. For the ordered sort, witnesses must strictly
    /// increase in declaration order.
    pub fn add_const(&mut self, name: &str, witness: Atom) -> Result<u32, AtomError> {
        if self.consts.iter().any(|(n, _)| n == name) {
            return Err(AtomError::DuplicateConstant(name.to_string()));
        }
        if self.consts.iter().any(|(_, w)| *w == witness) {
            return Err(AtomError::DuplicateWitness(name.to_string()));
        }
        if self.sort == AtomSort::Ordered {
            if let Some((_, last)) = self.consts.last() {
                if witness <= *last {
                    return Err(AtomError::ConstantOrder(name.to_string()));
                }
            }
        }
        self.consts.push((name.to_string(), witness));
        Ok(self.consts.len() as u32 - 1)
    }

    /// Appends a constant without the declaration-order requirement; used
    /// when a context is extended with binder witnesses during evaluation.
    pub fn extend_const(&mut self, name: &str, witness: Atom) -> Result<u32, AtomError> {
        if self.consts.iter().any(|(n, _)| n == name) {
            return Err(AtomError::DuplicateConstant(name.to_string()));
        }
        if self.consts.iter().any(|(_, w)| *w == witness) {
            return Err(AtomError::DuplicateWitness(name.to_string()));
        }
        self.consts.push((name.to_string(), witness));
        Ok(self.consts.len() as u32 - 1)
    }

    pub fn register_tag(&mut self, tag: &str, arity: usize) -> Result<(), AtomError> {
        match self.tags.get(tag) {
            Some(&a) if a != arity => Err(AtomError::ArityMismatch {
                tag: tag.to_string(),
                expected: a,
                got: arity,
            }),
            _ => {
                self.tags.insert(tag.to_string(), arity);
                Ok(())
            }
        }
    }

    pub fn register_pred_tag(&mut self, tag: &str, arity: usize) -> Result<(), AtomError> {
        match self.pred_tags.get(tag) {
            Some(&a) if a != arity => Err(AtomError::ArityMismatch {
                tag: tag.to_string(),
                expected: a,
                got: arity,
            }),
            _ => {
                self.pred_tags.insert(tag.to_string(), arity);
                Ok(())
            }
        }
    }

    pub fn tag_arity(&self, tag: &str) -> Option<usize> {
        self.tags.get(tag).copied()
    }

    pub fn pred_arity(&self, tag: &str) -> Option<usize> {
        self.pred_tags.get(tag).copied()
    }

    pub fn tags(&self) -> impl Iterator<Item = (&str, usize)> {
        self.tags.iter().map(|(t, a)| (t.as_str(), *a))
    }

    pub fn pred_tags(&self) -> impl Iterator<Item = (&str, usize)> {
        self.pred_tags.iter().map(|(t, a)| (t.as_str(), *a))
    }

    pub fn n_consts(&self) -> usize {
        self.consts.len()
    }

    pub fn const_name(&self, id: u32) -> &str {
        &self.consts[id as usize].0
    }

    pub fn const_atom(&self, id: u32) -> Atom {
        self.consts[id as usize].1
    }

    pub fn const_id(&self, name: &str) -> Option<u32> {
        self.consts.iter().position(|(n, _)| n == name).map(|i| i as u32)
    }

    pub fn const_names(&self) -> impl Iterator<Item = &str> {
        self.consts.iter().map(|(n, _)| n.as_str())
    }

    /// The full constant table; serves as a content fingerprint for caches.
    pub fn const_entries(&self) -> &[(String, Atom)] {
        &self.consts
    }

    /// Constant ids in canonical order: by witness value for the ordered
    /// sort, declaration order for equality.
    pub fn canonical_const_order(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (0..self.consts.len() as u32).collect();
        if self.sort == AtomSort::Ordered {
            ids.sort_by_key(|&i| self.consts[i as usize].1);
        }
        ids
    }

    /// True if `other` extends `self` by appending constants (tags ignored).
    pub fn is_prefix_of(&self, other: &Context) -> bool {
        self.sort == other.sort
            && self.consts.len() <= other.consts.len()
            && self.consts[..] == other.consts[..self.consts.len()]
    }

    /// A fresh atom distinct from every constant witness (and from `avoid`).
    pub fn fresh_atom(&self, avoid: &[Atom]) -> Atom {
        let mut n = self
            .consts
            .iter()
            .map(|(_, a)| a.0.ceil().to_integer())
            .chain(avoid.iter().map(|a| a.0.ceil().to_integer()))
            .max()
            .unwrap_or(0)
            + 1;
        loop {
            let cand = Atom::int(n);
            if !self.consts.iter().any(|(_, a)| *a == cand) && !avoid.contains(&cand) {
                return cand;
            }
            n += 1;
        }
    }
}

/// A term in a kernel constraint: a tuple position or a context constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CTerm {
    Var(u32),
    Const(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Rel::Eq => ord == Equal,
            Rel::Ne => ord != Equal,
            Rel::Lt => ord == Less,
            Rel::Le => ord != Greater,
            Rel::Gt => ord == Greater,
            Rel::Ge => ord != Less,
        }
    }

    pub fn needs_order(self) -> bool {
        !matches!(self, Rel::Eq | Rel::Ne)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }
}

/// Quantifier-free constraint over tuple positions and context constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Constraint {
    Bool(bool),
    Cmp(CTerm, Rel, CTerm),
    Not(Box<Constraint>),
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
}

impl Constraint {
    pub fn tt() -> Constraint {
        Constraint::Bool(true)
    }

    pub fn and(cs: Vec<Constraint>) -> Constraint {
        match cs.len() {
            0 => Constraint::Bool(true),
            1 => cs.into_iter().next().unwrap(),
            _ => Constraint::And(cs),
        }
    }

    pub fn or(cs: Vec<Constraint>) -> Constraint {
        match cs.len() {
            0 => Constraint::Bool(false),
            1 => cs.into_iter().next().unwrap(),
            _ => Constraint::Or(cs),
        }
    }

    /// Checks that every relation used is available in `sort` and every
    /// term is in range for `n_vars` variables over `ctx`.
    pub fn validate(&self, n_vars: usize, ctx: &Context) -> Result<(), AtomError> {
        match self {
            Constraint::Bool(_) => Ok(()),
            Constraint::Cmp(l, rel, r) => {
                if rel.needs_order() && ctx.sort() == AtomSort::Equality {
                    return Err(AtomError::SortMismatch(rel.symbol()));
                }
                for t in [l, r] {
                    match *t {
                        CTerm::Var(v) if (v as usize) < n_vars => {}
                        CTerm::Const(c) if (c as usize) < ctx.n_consts() => {}
                        CTerm::Var(v) => return Err(AtomError::UnknownName(format!("v{v}"))),
                        CTerm::Const(c) => return Err(AtomError::UnknownName(format!("c{c}"))),
                    }
                }
                Ok(())
            }
            Constraint::Not(c) => c.validate(n_vars, ctx),
            Constraint::And(cs) | Constraint::Or(cs) => {
                cs.iter().try_for_each(|c| c.validate(n_vars, ctx))
            }
        }
    }

    /// Three-valued evaluation under a partial assignment; `None` for
    /// "not yet determined". Used to prune the completion search.
    fn eval_partial(&self, assign: &dyn Fn(CTerm) -> Option<Rational64>) -> Option<bool> {
        match self {
            Constraint::Bool(b) => Some(*b),
            Constraint::Cmp(l, rel, r) => {
                let (a, b) = (assign(*l)?, assign(*r)?);
                Some(rel.holds(a.cmp(&b)))
            }
            Constraint::Not(c) => c.eval_partial(assign).map(|b| !b),
            Constraint::And(cs) => {
                let mut all = Some(true);
                for c in cs {
                    match c.eval_partial(assign) {
                        Some(false) => return Some(false),
                        Some(true) => {}
                        None => all = None,
                    }
                }
                all
            }
            Constraint::Or(cs) => {
                let mut any = Some(false);
                for c in cs {
                    match c.eval_partial(assign) {
                        Some(true) => return Some(true),
                        Some(false) => {}
                        None => any = None,
                    }
                }
                any
            }
        }
    }

    /// Evaluates under a total assignment of atoms to variables.
    pub fn eval(&self, vars: &[Atom], ctx: &Context) -> bool {
        self.eval_partial(&|t| match t {
            CTerm::Var(v) => Some(vars[v as usize].0),
            CTerm::Const(c) => Some(ctx.const_atom(c).0),
        })
        .expect("total assignment")
    }
}

/// One block of a complete type: positions (and at most one constant) that
/// hold the same atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Block {
    pub konst: Option<u32>,
    pub vars: Vec<u32>,
}

/// The canonical arrangement of `n_vars` tuple positions together with all
/// context constants.
///
/// For the ordered sort the blocks are listed in strictly increasing value
/// order; for equality, blocks holding a constant come first (in constant
/// order) followed by variable-only blocks ordered by least position.
/// Canonicality makes structural equality coincide with semantic equality,
/// so orbits are compared without ever materializing automorphisms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompleteType {
    n_vars: u32,
    blocks: Vec<Block>,
}

impl CompleteType {
    pub fn n_vars(&self) -> usize {
        self.n_vars as usize
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// The block index holding variable `v`.
    pub fn block_of_var(&self, v: u32) -> usize {
        self.blocks
            .iter()
            .position(|b| b.vars.contains(&v))
            .expect("variable in some block")
    }

    /// The block index holding constant `c`, if the constant is present.
    pub fn block_of_const(&self, c: u32) -> Option<usize> {
        self.blocks.iter().position(|b| b.konst == Some(c))
    }

    /// True if variable `v` shares its block with constant `c`.
    pub fn var_equals_const(&self, v: u32, c: u32) -> bool {
        self.blocks
            .iter()
            .any(|b| b.konst == Some(c) && b.vars.contains(&v))
    }

    fn canonicalize(mut self, sort: AtomSort, ctx: &Context) -> CompleteType {
        for b in &mut self.blocks {
            b.vars.sort_unstable();
        }
        match sort {
            AtomSort::Ordered => {
                // Block order is semantic; nothing to reorder.
            }
            AtomSort::Equality => {
                let order = ctx.canonical_const_order();
                let const_pos: BTreeMap<u32, usize> =
                    order.iter().enumerate().map(|(i, &c)| (c, i)).collect();
                self.blocks.sort_by_key(|b| match b.konst {
                    Some(c) => (0usize, const_pos[&c], 0u32),
                    None => (1, 0, b.vars[0]),
                });
            }
        }
        self
    }

    /// The defining constraint of this type: the conjunction of all
    /// variable-to-variable and variable-to-constant relations it fixes.
    pub fn defining_constraint(&self, sort: AtomSort) -> Constraint {
        let mut lits = Vec::new();
        let term_of = |b: &Block| -> CTerm {
            match b.konst {
                Some(c) => CTerm::Const(c),
                None => CTerm::Var(b.vars[0]),
            }
        };
        for b in &self.blocks {
            let rep = term_of(b);
            for &v in &b.vars {
                if CTerm::Var(v) != rep {
                    lits.push(Constraint::Cmp(CTerm::Var(v), Rel::Eq, rep));
                }
            }
        }
        // Relations between distinct blocks. Skip constant-constant pairs:
        // those are fixed by the context itself.
        for i in 0..self.blocks.len() {
            for j in (i + 1)..self.blocks.len() {
                let (a, b) = (&self.blocks[i], &self.blocks[j]);
                if a.vars.is_empty() && b.vars.is_empty() {
                    continue;
                }
                let rel = match sort {
                    AtomSort::Equality => Rel::Ne,
                    AtomSort::Ordered => Rel::Lt,
                };
                lits.push(Constraint::Cmp(term_of(a), rel, term_of(b)));
            }
        }
        Constraint::and(lits)
    }
}

/// The skeleton type of a context: every constant in its own block, no
/// variables.
fn const_skeleton(ctx: &Context) -> CompleteType {
    let blocks = ctx
        .canonical_const_order()
        .into_iter()
        .map(|c| Block {
            konst: Some(c),
            vars: Vec::new(),
        })
        .collect();
    CompleteType { n_vars: 0, blocks }
}

/// Value of each block of a partially built type, used to evaluate
/// constraints during the completion search. Variable-only blocks get
/// synthetic values consistent with the arrangement.
fn block_values(sort: AtomSort, ctx: &Context, blocks: &[Block]) -> Vec<Rational64> {
    match sort {
        AtomSort::Equality => {
            // Any pairwise-distinct values do; use constants' own witnesses
            // and fresh integers for the rest.
            let mut used: Vec<Rational64> =
                blocks.iter().filter_map(|b| b.konst).map(|c| ctx.const_atom(c).0).collect();
            blocks
                .iter()
                .map(|b| match b.konst {
                    Some(c) => ctx.const_atom(c).0,
                    None => {
                        let mut n = used
                            .iter()
                            .map(|r| r.ceil().to_integer())
                            .max()
                            .unwrap_or(0)
                            + 1;
                        while used.contains(&Rational64::from_integer(n)) {
                            n += 1;
                        }
                        let v = Rational64::from_integer(n);
                        used.push(v);
                        v
                    }
                })
                .collect()
        }
        AtomSort::Ordered => ordered_block_values(ctx, blocks),
    }
}

/// Deterministic witness values for an ordered arrangement: constants keep
/// their witnesses; runs of free blocks are filled by iterated midpoints
/// between anchors, and by unit steps below the least anchor and above the
/// greatest one.
fn ordered_block_values(ctx: &Context, blocks: &[Block]) -> Vec<Rational64> {
    let n = blocks.len();
    let mut vals: Vec<Option<Rational64>> = blocks
        .iter()
        .map(|b| b.konst.map(|c| ctx.const_atom(c).0))
        .collect();
    let anchors: Vec<usize> = (0..n).filter(|&i| vals[i].is_some()).collect();
    if anchors.is_empty() {
        for (i, v) in vals.iter_mut().enumerate() {
            *v = Some(Rational64::from_integer(i as i64));
        }
    } else {
        // Below the first anchor: descending unit steps.
        let first = anchors[0];
        for i in (0..first).rev() {
            let above = vals[i + 1].unwrap();
            vals[i] = Some(above - Rational64::one());
        }
        // Above the last anchor: ascending unit steps.
        let last = *anchors.last().unwrap();
        for i in (last + 1)..n {
            let below = vals[i - 1].unwrap();
            vals[i] = Some(below + Rational64::one());
        }
        // Between consecutive anchors: repeated midpoints, left to right.
        for w in anchors.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let top = vals[hi].unwrap();
            for i in (lo + 1)..hi {
                let below = vals[i - 1].unwrap();
                vals[i] = Some((below + top) / Rational64::from_integer(2));
            }
        }
    }
    vals.into_iter().map(|v| v.unwrap()).collect()
}

/// Enumerates every complete type of `n_vars` variables over `ctx` that is
/// consistent with `c`.  The search inserts variables one at a time into
/// the arrangement and prunes branches whose partial arrangement already
/// falsifies `c`.
///
/// The returned list is deterministic, duplicate-free, and sorted in
/// canonical order; its disjunction of defining constraints is equivalent
/// to `c`.  Results are memoized per thread: the fixpoint loops of the
/// checker ask for the same completions round after round.
pub fn complete(c: &Constraint, n_vars: usize, ctx: &Context) -> Result<Vec<CompleteType>, AtomError> {
    thread_local! {
        static MEMO: std::cell::RefCell<
            BTreeMap<(Vec<(String, Atom)>, AtomSort, Constraint, usize), Vec<CompleteType>>,
        > = std::cell::RefCell::new(BTreeMap::new());
    }
    let key = (
        ctx.consts.clone(),
        ctx.sort,
        c.clone(),
        n_vars,
    );
    if let Some(hit) = MEMO.with(|m| m.borrow().get(&key).cloned()) {
        return Ok(hit);
    }
    let out = complete_uncached(c, n_vars, ctx)?;
    MEMO.with(|m| m.borrow_mut().insert(key, out.clone()));
    Ok(out)
}

fn complete_uncached(
    c: &Constraint,
    n_vars: usize,
    ctx: &Context,
) -> Result<Vec<CompleteType>, AtomError> {
    c.validate(n_vars, ctx)?;
    let sort = ctx.sort();
    let mut out = Vec::new();
    let mut blocks = const_skeleton(ctx).blocks;

    fn search(
        sort: AtomSort,
        ctx: &Context,
        c: &Constraint,
        n_vars: usize,
        next_var: u32,
        blocks: &mut Vec<Block>,
        out: &mut Vec<CompleteType>,
    ) {
        // Prune using the values determined so far.
        let vals = block_values(sort, ctx, blocks);
        let assign = |t: CTerm| -> Option<Rational64> {
            match t {
                CTerm::Const(cid) => Some(ctx.const_atom(cid).0),
                CTerm::Var(v) => blocks
                    .iter()
                    .position(|b| b.vars.contains(&v))
                    .map(|i| vals[i]),
            }
        };
        if c.eval_partial(&assign) == Some(false) {
            return;
        }
        if next_var as usize == n_vars {
            if c.eval_partial(&assign) == Some(true) {
                let ty = CompleteType {
                    n_vars: n_vars as u32,
                    blocks: blocks.clone(),
                };
                out.push(ty.canonicalize(sort, ctx));
            }
            return;
        }
        let v = next_var;
        // Join an existing block.
        for i in 0..blocks.len() {
            blocks[i].vars.push(v);
            search(sort, ctx, c, n_vars, v + 1, blocks, out);
            blocks[i].vars.pop();
        }
        // Open a new block: one way for equality, one per gap for order.
        let positions: Vec<usize> = match sort {
            AtomSort::Equality => vec![blocks.len()],
            AtomSort::Ordered => (0..=blocks.len()).collect(),
        };
        for pos in positions {
            blocks.insert(
                pos,
                Block {
                    konst: None,
                    vars: vec![v],
                },
            );
            search(sort, ctx, c, n_vars, v + 1, blocks, out);
            blocks.remove(pos);
        }
    }

    search(sort, ctx, c, n_vars, 0, &mut blocks, &mut out);
    out.sort();
    out.dedup();
    Ok(out)
}

/// All completions of a type when the context gains the constants
/// `new_consts` (ids in `big`, in append order): each new constant is
/// inserted into every position consistent with its concrete witness
/// value.  This is the fast path behind context lifting; it agrees with
/// re-enumerating completions of the defining constraint.
pub fn lift_type(
    t: &CompleteType,
    new_consts: &[u32],
    big: &Context,
) -> Vec<CompleteType> {
    let mut acc = vec![t.blocks.clone()];
    for &cid in new_consts {
        let w = big.const_atom(cid);
        let mut next = Vec::new();
        for blocks in &acc {
            match big.sort() {
                AtomSort::Equality => {
                    // Own block, or merged into any variable-only block.
                    let mut with_new = blocks.clone();
                    with_new.push(Block {
                        konst: Some(cid),
                        vars: Vec::new(),
                    });
                    next.push(with_new);
                    for (i, b) in blocks.iter().enumerate() {
                        if b.konst.is_none() {
                            let mut merged = blocks.clone();
                            merged[i].konst = Some(cid);
                            next.push(merged);
                        }
                    }
                }
                AtomSort::Ordered => {
                    // The segment of variable-only blocks between the
                    // constant anchors surrounding w.
                    let anchor = |b: &Block| b.konst.map(|c| big.const_atom(c));
                    let lo = blocks
                        .iter()
                        .rposition(|b| anchor(b).is_some_and(|a| a < w));
                    let hi = blocks.iter().position(|b| anchor(b).is_some_and(|a| a > w));
                    let start = lo.map_or(0, |i| i + 1);
                    let end = hi.unwrap_or(blocks.len());
                    for pos in start..=end {
                        let mut inserted = blocks.clone();
                        inserted.insert(
                            pos,
                            Block {
                                konst: Some(cid),
                                vars: Vec::new(),
                            },
                        );
                        next.push(inserted);
                    }
                    for i in start..end {
                        debug_assert!(blocks[i].konst.is_none());
                        let mut merged = blocks.clone();
                        merged[i].konst = Some(cid);
                        next.push(merged);
                    }
                }
            }
        }
        acc = next;
    }
    let mut out: Vec<CompleteType> = acc
        .into_iter()
        .map(|blocks| {
            CompleteType {
                n_vars: t.n_vars,
                blocks,
            }
            .canonicalize(big.sort(), big)
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// True iff some assignment of atoms to the `n_vars` variables satisfies
/// `c` given the context witnesses.
pub fn satisfiable(c: &Constraint, n_vars: usize, ctx: &Context) -> Result<bool, AtomError> {
    // The completion search with early exit would do; reuse it directly
    // since fixture arities are small.
    Ok(!complete(c, n_vars, ctx)?.is_empty())
}

/// The unique complete type realized by a concrete tuple together with the
/// context constants.
pub fn type_of(tuple: &[Atom], ctx: &Context) -> CompleteType {
    let sort = ctx.sort();
    let mut blocks = const_skeleton(ctx).blocks;
    for (i, a) in tuple.iter().enumerate() {
        let v = i as u32;
        let existing = blocks.iter().position(|b| {
            let val = match b.konst {
                Some(c) => ctx.const_atom(c),
                None => {
                    let w = b.vars[0];
                    tuple[w as usize]
                }
            };
            val == *a
        });
        match existing {
            Some(i) => blocks[i].vars.push(v),
            None => {
                let pos = match sort {
                    AtomSort::Equality => blocks.len(),
                    AtomSort::Ordered => blocks
                        .iter()
                        .position(|b| {
                            let val = match b.konst {
                                Some(c) => ctx.const_atom(c),
                                None => tuple[b.vars[0] as usize],
                            };
                            val > *a
                        })
                        .unwrap_or(blocks.len()),
                };
                blocks.insert(
                    pos,
                    Block {
                        konst: None,
                        vars: vec![v],
                    },
                );
            }
        }
    }
    CompleteType {
        n_vars: tuple.len() as u32,
        blocks,
    }
    .canonicalize(sort, ctx)
}

/// Concrete atoms realizing `t`; `type_of(witness(t)) == t`.
pub fn witness(t: &CompleteType, ctx: &Context) -> Vec<Atom> {
    let vals = block_values(ctx.sort(), ctx, &t.blocks);
    let mut tuple = vec![Atom::int(0); t.n_vars()];
    for (bi, b) in t.blocks.iter().enumerate() {
        for &v in &b.vars {
            tuple[v as usize] = Atom(vals[bi]);
        }
    }
    tuple
}

/// Existential projection: the complete type of the variables in `keep`
/// (in the given order) induced by `t`.
pub fn project(t: &CompleteType, keep: &[u32], ctx: &Context) -> CompleteType {
    let renum: BTreeMap<u32, u32> = keep
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new as u32))
        .collect();
    let mut blocks: Vec<Block> = t
        .blocks
        .iter()
        .filter_map(|b| {
            let vars: Vec<u32> = b
                .vars
                .iter()
                .filter_map(|v| renum.get(v).copied())
                .collect();
            if vars.is_empty() && b.konst.is_none() {
                None
            } else {
                Some(Block {
                    konst: b.konst,
                    vars,
                })
            }
        })
        .collect();
    for b in &mut blocks {
        b.vars.sort_unstable();
    }
    CompleteType {
        n_vars: keep.len() as u32,
        blocks,
    }
    .canonicalize(ctx.sort(), ctx)
}

/// Drops the variables in `drop` (existential projection over the rest).
pub fn project_exists(t: &CompleteType, drop: &[u32], ctx: &Context) -> CompleteType {
    let keep: Vec<u32> = (0..t.n_vars as u32).filter(|v| !drop.contains(v)).collect();
    project(t, &keep, ctx)
}

/// Restricts a type to a smaller context: constants of `ctx` absent from
/// `sub` are struck out, empty blocks vanish, remaining constants are
/// renumbered by `sub`'s ids. `map` sends old constant ids to new ones.
pub fn reduct(t: &CompleteType, map: &BTreeMap<u32, u32>, sub: &Context) -> CompleteType {
    let blocks: Vec<Block> = t
        .blocks
        .iter()
        .filter_map(|b| {
            let konst = b.konst.and_then(|c| map.get(&c).copied());
            if konst.is_none() && b.vars.is_empty() {
                None
            } else {
                Some(Block {
                    konst,
                    vars: b.vars.clone(),
                })
            }
        })
        .collect();
    CompleteType {
        n_vars: t.n_vars,
        blocks,
    }
    .canonicalize(sub.sort(), sub)
}

/// What a binder parameter resolved to when a context was extended: a
/// freshly appended constant, or an alias of a constant that already
/// existed in the base context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamItem {
    Fresh(u32),
    Existing(u32),
}

/// Rewrites a type over an extended context into a type over the base
/// context in which the binder parameters become the leading variables:
/// parameter `i` becomes variable `i`, original variables shift up by
/// `params.len()`.  Fresh constants (appended by the extension) vanish into
/// their parameter variables; aliased parameters join the block of the
/// still-present base constant.
pub fn abstract_params(
    t: &CompleteType,
    params: &[ParamItem],
    base: &Context,
) -> CompleteType {
    let shift = params.len() as u32;
    let mut blocks: Vec<Block> = t
        .blocks
        .iter()
        .map(|b| Block {
            konst: b.konst,
            vars: b.vars.iter().map(|v| v + shift).collect(),
        })
        .collect();
    for (i, p) in params.iter().enumerate() {
        let c = match p {
            ParamItem::Fresh(c) | ParamItem::Existing(c) => *c,
        };
        let b = blocks
            .iter_mut()
            .find(|b| b.konst == Some(c))
            .expect("parameter constant present in type");
        b.vars.push(i as u32);
    }
    for b in &mut blocks {
        if let Some(c) = b.konst {
            if c as usize >= base.n_consts() {
                b.konst = None;
            }
        }
    }
    debug_assert!(blocks.iter().all(|b| b.konst.is_some() || !b.vars.is_empty()));
    CompleteType {
        n_vars: t.n_vars + shift,
        blocks,
    }
    .canonicalize(base.sort(), base)
}

/// Turns the listed constants into leading variables: variable `i` of the
/// result stands where constant `consts[i]` stood, the original variables
/// are shifted up by `consts.len()`, and remaining constants are renumbered
/// through `map` into the restricted context `sub`.
pub fn consts_to_vars_front(
    t: &CompleteType,
    consts: &[u32],
    map: &BTreeMap<u32, u32>,
    sub: &Context,
) -> CompleteType {
    let shift = consts.len() as u32;
    let mut blocks: Vec<Block> = t
        .blocks
        .iter()
        .map(|b| Block {
            konst: b.konst,
            vars: b.vars.iter().map(|v| v + shift).collect(),
        })
        .collect();
    for (k, &c) in consts.iter().enumerate() {
        let b = blocks
            .iter_mut()
            .find(|b| b.konst == Some(c))
            .expect("constant present in type");
        b.konst = None;
        b.vars.push(k as u32);
    }
    for b in &mut blocks {
        b.konst = b.konst.and_then(|c| map.get(&c).copied());
    }
    CompleteType {
        n_vars: t.n_vars + shift,
        blocks,
    }
    .canonicalize(sub.sort(), sub)
}

/// Pins trailing variables to constants: the inverse of
/// [`promote_consts`]. Fails (returns `None`) when the type places some
/// variable `vals[i]` outside the block of `consts[i]`.
pub fn bind_vars_to_consts(
    t: &CompleteType,
    vars: &[u32],
    consts: &[u32],
    ctx: &Context,
) -> Option<CompleteType> {
    debug_assert_eq!(vars.len(), consts.len());
    for (&v, &c) in vars.iter().zip(consts) {
        let bi = t.block_of_var(v);
        if t.blocks[bi].konst != Some(c) {
            return None;
        }
    }
    Some(project_exists(t, vars, ctx))
}

/// Rewrites a type by reassigning variables: old variable `v` becomes the
/// (possibly empty) set of new variables `assign[v]`, and each `(new_var,
/// const)` pin places a fresh variable in the block of a constant.  Old
/// blocks left without constants and without any new variable are
/// projected away.  This builds graphs of substitutions: duplicating every
/// variable into a left and a right copy yields the identity relation on
/// an orbit, and pinning right-side variables to other items yields the
/// graph of a reindexing map.
pub fn relabel_type(
    t: &CompleteType,
    assign: &[Vec<u32>],
    const_pins: &[(u32, u32)],
    new_n: u32,
    ctx: &Context,
) -> CompleteType {
    debug_assert_eq!(assign.len(), t.n_vars());
    let mut blocks: Vec<Block> = Vec::new();
    for b in &t.blocks {
        let mut vars: Vec<u32> = b
            .vars
            .iter()
            .flat_map(|v| assign[*v as usize].iter().copied())
            .collect();
        if let Some(c) = b.konst {
            vars.extend(
                const_pins
                    .iter()
                    .filter(|(_, k)| *k == c)
                    .map(|(v, _)| *v),
            );
        }
        if vars.is_empty() && b.konst.is_none() {
            continue;
        }
        vars.sort_unstable();
        blocks.push(Block {
            konst: b.konst,
            vars,
        });
    }
    CompleteType {
        n_vars: new_n,
        blocks,
    }
    .canonicalize(ctx.sort(), ctx)
}

/// The equivariant shape of a tuple-of-items arrangement: for each pair of
/// item positions, the comparison between their atoms. Constants are
/// forgotten, so two shapes are equal exactly when an automorphism of the
/// atoms (monotone for the ordered sort) maps one item list to the other.
pub fn equivariant_shape(
    t: &CompleteType,
    items: &[u32],
    sort: AtomSort,
) -> Vec<std::cmp::Ordering> {
    let pos: Vec<usize> = items.iter().map(|&v| t.block_of_var(v)).collect();
    let mut shape = Vec::with_capacity(items.len() * items.len());
    for &i in &pos {
        for &j in &pos {
            let o = match sort {
                AtomSort::Equality => {
                    if i == j {
                        std::cmp::Ordering::Equal
                    } else {
                        std::cmp::Ordering::Greater
                    }
                }
                AtomSort::Ordered => i.cmp(&j),
            };
            shape.push(o);
        }
    }
    shape
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(sort: AtomSort, consts: &[(&str, i64)]) -> Context {
        let mut c = Context::new(sort);
        for (n, v) in consts {
            c.add_const(n, Atom::int(*v)).unwrap();
        }
        c
    }

    // Independent oracles: direct enumeration of set partitions and of
    // ordered set partitions, with no shared code with `complete`.
    fn bell_partitions(n: usize) -> usize {
        fn go(n: usize, blocks: &mut Vec<Vec<usize>>, count: &mut usize, i: usize) {
            if i == n {
                *count += 1;
                return;
            }
            for b in 0..blocks.len() {
                blocks[b].push(i);
                go(n, blocks, count, i + 1);
                blocks[b].pop();
            }
            blocks.push(vec![i]);
            go(n, blocks, count, i + 1);
            blocks.pop();
        }
        let mut count = 0;
        go(n, &mut Vec::new(), &mut count, 0);
        count
    }

    fn ordered_bell(n: usize) -> usize {
        // Fubini numbers by the recurrence a(n) = sum C(n,k) a(n-k).
        let mut a = vec![1u64];
        for m in 1..=n {
            let mut s = 0u64;
            for k in 1..=m {
                let mut c = 1u64;
                for j in 0..k {
                    c = c * (m - j) as u64 / (j + 1) as u64;
                }
                s += c * a[m - k];
            }
            a.push(s);
        }
        a[n] as usize
    }

    #[test]
    fn orbit_counts_match_brute_force() {
        for n in 0..=5 {
            let eq = ctx(AtomSort::Equality, &[]);
            let or = ctx(AtomSort::Ordered, &[]);
            assert_eq!(
                complete(&Constraint::tt(), n, &eq).unwrap().len(),
                bell_partitions(n),
                "equality, n={n}"
            );
            assert_eq!(
                complete(&Constraint::tt(), n, &or).unwrap().len(),
                ordered_bell(n),
                "ordered, n={n}"
            );
        }
    }

    #[test]
    fn pair_orbit_counts() {
        let eq = ctx(AtomSort::Equality, &[]);
        let or = ctx(AtomSort::Ordered, &[]);
        assert_eq!(complete(&Constraint::tt(), 2, &eq).unwrap().len(), 2);
        assert_eq!(complete(&Constraint::tt(), 2, &or).unwrap().len(), 3);
    }

    #[test]
    fn unsatisfiable_constraints() {
        let eq = ctx(AtomSort::Equality, &[]);
        let c = Constraint::Cmp(CTerm::Var(0), Rel::Ne, CTerm::Var(0));
        assert!(!satisfiable(&c, 1, &eq).unwrap());

        let or = ctx(AtomSort::Ordered, &[]);
        let c = Constraint::And(vec![
            Constraint::Cmp(CTerm::Var(0), Rel::Lt, CTerm::Var(1)),
            Constraint::Cmp(CTerm::Var(1), Rel::Lt, CTerm::Var(0)),
        ]);
        assert!(!satisfiable(&c, 2, &or).unwrap());
    }

    #[test]
    fn satisfiable_avoiding_constants() {
        let eq = ctx(AtomSort::Equality, &[("c1", 1), ("c2", 2)]);
        let c = Constraint::And(vec![
            Constraint::Cmp(CTerm::Var(0), Rel::Ne, CTerm::Const(0)),
            Constraint::Cmp(CTerm::Var(0), Rel::Ne, CTerm::Const(1)),
        ]);
        assert!(satisfiable(&c, 1, &eq).unwrap());
        // Exactly one completion: the fresh block.
        assert_eq!(complete(&c, 1, &eq).unwrap().len(), 1);
    }

    #[test]
    fn order_relations_rejected_over_equality() {
        let eq = ctx(AtomSort::Equality, &[]);
        let c = Constraint::Cmp(CTerm::Var(0), Rel::Lt, CTerm::Var(1));
        assert!(matches!(
            satisfiable(&c, 2, &eq),
            Err(AtomError::SortMismatch(_))
        ));
    }

    #[test]
    fn type_of_examples() {
        let or = ctx(AtomSort::Ordered, &[]);
        let t = type_of(&[Atom::int(5), Atom::int(5)], &or);
        assert_eq!(t.blocks().len(), 1);
        assert_eq!(t.blocks()[0].vars, vec![0, 1]);

        let orc = ctx(AtomSort::Ordered, &[("c1", 3)]);
        let t = type_of(&[Atom::int(1), Atom::int(7)], &orc);
        // v0 < c1 < v1
        assert_eq!(t.blocks().len(), 3);
        assert_eq!(t.blocks()[0].vars, vec![0]);
        assert_eq!(t.blocks()[1].konst, Some(0));
        assert_eq!(t.blocks()[2].vars, vec![1]);
    }

    #[test]
    fn type_of_lands_in_completions() {
        let orc = ctx(AtomSort::Ordered, &[("c1", 3), ("c2", 7)]);
        let all = complete(&Constraint::tt(), 2, &orc).unwrap();
        for tuple in [
            [Atom::int(1), Atom::int(1)],
            [Atom::int(3), Atom::int(5)],
            [Atom::int(9), Atom::int(4)],
            [Atom::int(7), Atom::int(3)],
        ] {
            assert!(all.contains(&type_of(&tuple, &orc)));
        }
    }

    #[test]
    fn witness_round_trip() {
        let orc = ctx(AtomSort::Ordered, &[("c1", 3), ("c2", 7)]);
        for t in complete(&Constraint::tt(), 3, &orc).unwrap() {
            let w = witness(&t, &orc);
            assert_eq!(type_of(&w, &orc), t, "witness of {t:?} was {w:?}");
        }
        let eqc = ctx(AtomSort::Equality, &[("c1", 3)]);
        for t in complete(&Constraint::tt(), 3, &eqc).unwrap() {
            let w = witness(&t, &eqc);
            assert_eq!(type_of(&w, &eqc), t);
        }
    }

    #[test]
    fn witness_between_constants_is_midpoint() {
        let orc = ctx(AtomSort::Ordered, &[("c1", 3), ("c2", 7)]);
        let c = Constraint::And(vec![
            Constraint::Cmp(CTerm::Const(0), Rel::Lt, CTerm::Var(0)),
            Constraint::Cmp(CTerm::Var(0), Rel::Lt, CTerm::Const(1)),
        ]);
        let tys = complete(&c, 1, &orc).unwrap();
        assert_eq!(tys.len(), 1);
        assert_eq!(witness(&tys[0], &orc), vec![Atom::int(5)]);
    }

    #[test]
    fn projection_examples() {
        let or = ctx(AtomSort::Ordered, &[]);
        // v0 < v1 < v2, drop v1
        let c = Constraint::And(vec![
            Constraint::Cmp(CTerm::Var(0), Rel::Lt, CTerm::Var(1)),
            Constraint::Cmp(CTerm::Var(1), Rel::Lt, CTerm::Var(2)),
        ]);
        let t = complete(&c, 3, &or).unwrap().pop().unwrap();
        let p = project_exists(&t, &[1], &or);
        let lt = Constraint::Cmp(CTerm::Var(0), Rel::Lt, CTerm::Var(1));
        assert_eq!(p, complete(&lt, 2, &or).unwrap().pop().unwrap());
        // Drop everything: the skeleton.
        let e = project_exists(&t, &[0, 1, 2], &or);
        assert_eq!(e.n_vars(), 0);
    }

    #[test]
    fn projection_commutes_with_witness() {
        let orc = ctx(AtomSort::Ordered, &[("c1", 3), ("c2", 7)]);
        for t in complete(&Constraint::tt(), 3, &orc).unwrap() {
            let w = witness(&t, &orc);
            for drop in [&[0u32][..], &[1], &[2], &[0, 2]] {
                let kept: Vec<Atom> = (0..3u32)
                    .filter(|v| !drop.contains(v))
                    .map(|v| w[v as usize])
                    .collect();
                assert_eq!(type_of(&kept, &orc), project_exists(&t, drop, &orc));
            }
        }
    }

    #[test]
    fn completions_partition_satisfying_assignments() {
        // Disjointness and exhaustiveness of `complete`, sampled through
        // witnesses of the unconstrained completions.
        let orc = ctx(AtomSort::Ordered, &[("c1", 0), ("c2", 4)]);
        let c = Constraint::Or(vec![
            Constraint::Cmp(CTerm::Var(0), Rel::Lt, CTerm::Var(1)),
            Constraint::Cmp(CTerm::Var(0), Rel::Eq, CTerm::Const(0)),
        ]);
        let sat = complete(&c, 2, &orc).unwrap();
        for t in complete(&Constraint::tt(), 2, &orc).unwrap() {
            let w = witness(&t, &orc);
            assert_eq!(c.eval(&w, &orc), sat.contains(&t));
        }
    }

    #[test]
    fn binding_vars_to_constants() {
        let orc = ctx(AtomSort::Ordered, &[("c1", 3), ("c2", 7)]);
        for t in complete(&Constraint::tt(), 3, &orc).unwrap() {
            let bound = bind_vars_to_consts(&t, &[2], &[1], &orc);
            if t.var_equals_const(2, 1) {
                assert_eq!(bound, Some(project_exists(&t, &[2], &orc)));
            } else {
                assert_eq!(bound, None);
            }
        }
    }

    #[test]
    fn consts_to_vars_front_matches_completions() {
        // Over the restricted context, abstracting c2 away from a type and
        // then re-placing a variable where c2 sits must land back on a
        // completion of the abstraction.
        let full = ctx(AtomSort::Ordered, &[("c1", 3), ("c2", 7)]);
        let mut sub = Context::new(AtomSort::Ordered);
        sub.add_const("c1", Atom::int(3)).unwrap();
        let map: BTreeMap<u32, u32> = [(0u32, 0u32)].into_iter().collect();
        for t in complete(&Constraint::tt(), 1, &full).unwrap() {
            let abs = consts_to_vars_front(&t, &[1], &map, &sub);
            assert_eq!(abs.n_vars(), 2);
            // Realize the abstraction over the small context and check the
            // original variable relations survived.
            let w = witness(&abs, &sub);
            let small = type_of(&w, &sub);
            assert_eq!(small, abs);
        }
    }

    #[test]
    fn ordered_context_requires_increasing_witnesses() {
        let mut c = Context::new(AtomSort::Ordered);
        c.add_const("a", Atom::int(5)).unwrap();
        assert!(c.add_const("b", Atom::int(2)).is_err());
        assert!(c.add_const("a", Atom::int(9)).is_err());
    }
}
