//! The model checker: computes the semantics of a formula on an
//! orbit-finite Kripke model as an orbit-finite set of states.
//!
//! Orbit binders are evaluated one index orbit at a time: the context is
//! extended with witness constants for a representative of the orbit, the
//! body is evaluated there, and the result is closed under the orbit again
//! by projecting the witness constants away.  Fixpoints run as Kleene
//! iteration on relations between index tuples and states; the finite
//! number of such relations bounds the iteration.
//!
//! [`brute_force_eval`] is an independent oracle: it concretizes the model
//! over a finite atom pool and evaluates the naive semantics with binders
//! expanded to finite disjunctions.  On states whose atoms lie in the pool
//! the two agree whenever the pool is large enough for the binder depth.

use crate::atoms::{
    self, abstract_params, Atom, AtomError, AtomSort, Context, Ctx, ParamItem,
};
use crate::kripke::KripkeModel;
use crate::mu::{self, FixKind, Formula, MuError};
use crate::orbits::{join_types, Element, Orbit, OrbitRelation, OrbitSet, PairOrbit, Tag};
use crate::surface::SConstraint;
use num_rational::Rational64;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;
use std::sync::Arc;

#[derive(Debug, Clone, thiserror::Error)]
pub enum CheckError {
    #[error("{0}")]
    Atoms(#[from] AtomError),
    #[error("{0}")]
    Mu(#[from] MuError),
    #[error("free fixpoint variable `{0}` has no value in the environment")]
    FreeVariable(String),
    #[error("formula uses order constraints but the model has equality atoms")]
    NeedsOrderedAtoms,
    #[error("binder variable `{0}` collides with a declared constant name")]
    BinderShadowsConstant(String),
    #[error("state `{0}` is outside the model")]
    NoSuchState(String),
    #[error("fresh-atom pool too small: need at least {need} extra atoms, got {got}")]
    PoolTooSmall { need: usize, got: usize },
}

/// Values for free fixpoint variables: each variable maps to a relation
/// between its index tuples and states, over the model context.
#[derive(Debug, Clone, Default)]
pub struct Environment {
    entries: BTreeMap<String, (usize, OrbitRelation)>,
}

impl Environment {
    pub fn new() -> Environment {
        Environment::default()
    }

    /// Binds a scalar (0-parameter) variable to a state set.
    pub fn set_scalar(&mut self, name: &str, value: &OrbitSet) {
        let ctx = value.ctx().clone();
        let pairs = value
            .orbits()
            .iter()
            .map(|o| PairOrbit {
                left_tag: var_tag(name),
                left_arity: 0,
                right_tag: o.tag.clone(),
                right_arity: o.arity() as u32,
                ty: o.ty.clone(),
            })
            .collect();
        self.entries
            .insert(name.to_string(), (0, OrbitRelation::from_pairs(ctx, pairs)));
    }

    pub fn set_indexed(&mut self, name: &str, arity: usize, rel: OrbitRelation) {
        self.entries.insert(name.to_string(), (arity, rel));
    }

    pub fn get(&self, name: &str) -> Option<&(usize, OrbitRelation)> {
        self.entries.get(name)
    }
}

fn var_tag(name: &str) -> Tag {
    Tag::Named(format!("${name}"))
}

/// Evaluation state at one binder depth: the extended context, the model
/// components lifted to it, binder aliases, and fixpoint approximations.
/// Extensions are cached per evaluation call since fixpoint rounds revisit
/// the same binder orbits over and over.
#[derive(Clone)]
struct Scope {
    ctx: Ctx,
    states: Arc<OrbitSet>,
    trans: Arc<OrbitRelation>,
    sat: Arc<OrbitRelation>,
    /// binder name -> constant id in `ctx`
    aliases: BTreeMap<String, u32>,
    /// fixpoint variable -> (arity, approximation relation)
    env: BTreeMap<String, (usize, OrbitRelation)>,
    ext_cache: Rc<RefCell<BTreeMap<ExtKey, CachedExt>>>,
}

type ExtKey = (Vec<(String, Atom)>, Vec<String>, atoms::CompleteType);

#[derive(Clone)]
struct CachedExt {
    ctx: Ctx,
    states: Arc<OrbitSet>,
    trans: Arc<OrbitRelation>,
    sat: Arc<OrbitRelation>,
    alias_delta: Vec<(String, u32)>,
    items: Vec<ParamItem>,
}

impl Scope {
    fn resolve(&self, name: &str) -> Option<u32> {
        self.aliases
            .get(name)
            .copied()
            .or_else(|| self.ctx.const_id(name))
    }

    fn resolve_args(&self, args: &[String]) -> Result<Vec<u32>, CheckError> {
        args.iter()
            .map(|a| {
                self.resolve(a)
                    .ok_or_else(|| CheckError::Atoms(AtomError::UnknownName(a.clone())))
            })
            .collect()
    }

    /// Extends the context with witnesses for one completion of a binder:
    /// variables equal to an existing constant become aliases, each fresh
    /// block gets one appended constant.
    fn extend(
        &self,
        vars: &[String],
        ty: &atoms::CompleteType,
    ) -> Result<(Scope, Vec<ParamItem>), CheckError> {
        for v in vars {
            if self.resolve(v).is_some() {
                return Err(CheckError::BinderShadowsConstant(v.clone()));
            }
        }
        let key: ExtKey = (
            self.ctx.const_entries().to_vec(),
            vars.to_vec(),
            ty.clone(),
        );
        if let Some(hit) = self.ext_cache.borrow().get(&key).cloned() {
            let mut aliases = self.aliases.clone();
            aliases.extend(hit.alias_delta.iter().cloned());
            let scope = Scope {
                ctx: hit.ctx,
                states: hit.states,
                trans: hit.trans,
                sat: hit.sat,
                aliases,
                env: self.env.clone(),
                ext_cache: self.ext_cache.clone(),
            };
            return Ok((scope, hit.items));
        }
        let mut ctx = (*self.ctx).clone();
        let mut delta: Vec<(String, u32)> = Vec::new();
        let witness = atoms::witness(ty, &self.ctx);
        let mut items: Vec<Option<ParamItem>> = vec![None; vars.len()];
        for (i, v) in vars.iter().enumerate() {
            // Aliased to an existing constant?
            if let Some(c) = ty.blocks()[ty.block_of_var(i as u32)].konst {
                items[i] = Some(ParamItem::Existing(c));
                delta.push((v.clone(), c));
                continue;
            }
            // Same block as an earlier variable?
            let bi = ty.block_of_var(i as u32);
            if let Some(&j) = ty.blocks()[bi].vars.iter().find(|&&j| (j as usize) < i) {
                let prior = items[j as usize].expect("earlier var resolved");
                items[i] = Some(prior);
                let c = match prior {
                    ParamItem::Fresh(c) | ParamItem::Existing(c) => c,
                };
                delta.push((v.clone(), c));
                continue;
            }
            let id = ctx
                .extend_const(&format!("~{v}{}", ctx.n_consts()), witness[i])
                .map_err(CheckError::Atoms)?;
            items[i] = Some(ParamItem::Fresh(id));
            delta.push((v.clone(), id));
        }
        let ctx = Ctx::new(ctx);
        let cached = CachedExt {
            states: Arc::new(self.states.lift(&ctx)?),
            trans: Arc::new(self.trans.lift(&ctx)?),
            sat: Arc::new(self.sat.lift(&ctx)?),
            ctx,
            alias_delta: delta,
            items: items.into_iter().map(|i| i.unwrap()).collect(),
        };
        self.ext_cache.borrow_mut().insert(key, cached.clone());
        let mut aliases = self.aliases.clone();
        aliases.extend(cached.alias_delta.iter().cloned());
        let scope = Scope {
            ctx: cached.ctx.clone(),
            states: cached.states.clone(),
            trans: cached.trans.clone(),
            sat: cached.sat.clone(),
            aliases,
            env: self.env.clone(),
            ext_cache: self.ext_cache.clone(),
        };
        Ok((scope, cached.items))
    }

    /// Index types of a binder over the current context.
    fn binder_types(
        &self,
        vars: &[String],
        c: &SConstraint,
    ) -> Result<Vec<atoms::CompleteType>, CheckError> {
        let locals: Vec<String> = vars.to_vec();
        let kc = c
            .compile(&locals, &|n| self.resolve(n))
            .map_err(CheckError::Atoms)?;
        Ok(atoms::complete(&kc, vars.len(), &self.ctx)?)
    }
}

/// Computes the set of states where `f` holds, under `env` for free
/// variables.
pub fn eval(m: &KripkeModel, f: &Formula, env: &Environment) -> Result<OrbitSet, CheckError> {
    mu::validate(f)?;
    if f.uses_order() && m.ctx.sort() == AtomSort::Equality {
        return Err(CheckError::NeedsOrderedAtoms);
    }
    for v in f.free_fix_vars() {
        if env.get(&v).is_none() {
            return Err(CheckError::FreeVariable(v));
        }
    }
    let scope = Scope {
        ctx: m.ctx.clone(),
        states: Arc::new(m.states.clone()),
        trans: Arc::new(m.trans.clone()),
        sat: Arc::new(m.sat.clone()),
        aliases: BTreeMap::new(),
        env: env.entries.clone(),
        ext_cache: Rc::new(RefCell::new(BTreeMap::new())),
    };
    eval_in(&scope, f)
}

/// `f` holds in state `x` (for closed `f`).
pub fn holds(m: &KripkeModel, x: &Element, f: &Formula) -> Result<bool, CheckError> {
    if !m.contains_state(x)? {
        return Err(CheckError::NoSuchState(x.to_string()));
    }
    let v = eval(m, f, &Environment::new())?;
    Ok(v.member(x)?)
}

fn eval_in(scope: &Scope, f: &Formula) -> Result<OrbitSet, CheckError> {
    match f {
        Formula::Bool(true) => Ok((*scope.states).clone()),
        Formula::Bool(false) => Ok(OrbitSet::empty(scope.ctx.clone())),
        Formula::Pred(tag, args) => {
            let consts = scope.resolve_args(args)?;
            let mut orbits = Vec::new();
            for p in scope.sat.pairs() {
                if p.right_tag != Tag::pred(tag) || p.right_arity as usize != consts.len() {
                    continue;
                }
                let right_vars: Vec<u32> =
                    (p.left_arity..p.left_arity + p.right_arity).collect();
                if let Some(ty) =
                    atoms::bind_vars_to_consts(&p.ty, &right_vars, &consts, &scope.ctx)
                {
                    orbits.push(Orbit {
                        tag: p.left_tag.clone(),
                        ty,
                    });
                }
            }
            Ok(OrbitSet::from_orbits(scope.ctx.clone(), orbits))
        }
        Formula::Var(x, args) => {
            let (arity, rel) = scope
                .env
                .get(x)
                .ok_or_else(|| CheckError::FreeVariable(x.clone()))?;
            if *arity != args.len() {
                return Err(CheckError::Mu(MuError::VarArity {
                    var: x.clone(),
                    expected: *arity,
                    got: args.len(),
                }));
            }
            let consts = scope.resolve_args(args)?;
            let rel = rel.lift(&scope.ctx)?;
            let mut orbits = Vec::new();
            for p in rel.pairs() {
                let left_vars: Vec<u32> = (0..p.left_arity).collect();
                if let Some(ty) =
                    atoms::bind_vars_to_consts(&p.ty, &left_vars, &consts, &scope.ctx)
                {
                    orbits.push(Orbit {
                        tag: p.right_tag.clone(),
                        ty,
                    });
                }
            }
            Ok(OrbitSet::from_orbits(scope.ctx.clone(), orbits))
        }
        Formula::Not(g) => {
            let v = eval_in(scope, g)?;
            Ok(scope.states.difference(&v)?)
        }
        Formula::Or(gs) => {
            let mut acc = OrbitSet::empty(scope.ctx.clone());
            for g in gs {
                acc = acc.union(&eval_in(scope, g)?)?;
            }
            Ok(acc)
        }
        Formula::And(gs) => {
            let mut acc = (*scope.states).clone();
            for g in gs {
                acc = acc.intersect(&eval_in(scope, g)?)?;
            }
            Ok(acc)
        }
        Formula::Diamond(g) => {
            let v = eval_in(scope, g)?;
            Ok(scope.trans.preimage(&v)?)
        }
        Formula::Square(g) => {
            let v = eval_in(scope, g)?;
            let not_v = scope.states.difference(&v)?;
            let escape = scope.trans.preimage(&not_v)?;
            Ok(scope.states.difference(&escape)?)
        }
        Formula::OrbitOr(b, g) => {
            let mut acc = OrbitSet::empty(scope.ctx.clone());
            for ty in scope.binder_types(&b.vars, &b.constraint)? {
                let (inner, _) = scope.extend(&b.vars, &ty)?;
                let v = eval_in(&inner, g)?;
                acc = acc.union(&v.project_extension(&scope.ctx)?)?;
            }
            Ok(acc)
        }
        Formula::OrbitAnd(b, g) => {
            let mut acc = (*scope.states).clone();
            for ty in scope.binder_types(&b.vars, &b.constraint)? {
                let (inner, _) = scope.extend(&b.vars, &ty)?;
                let v = eval_in(&inner, g)?;
                // Intersection over one orbit of instances: complement of
                // the projected complement.
                let comp = inner.states.difference(&v)?;
                let escape = comp.project_extension(&scope.ctx)?;
                acc = acc.intersect(&scope.states.difference(&escape)?)?;
            }
            Ok(acc)
        }
        Formula::Fix(sys) => {
            // Index orbits per equation family, fixed for the whole run.
            // The extended scope for each index orbit is also fixed; only
            // the approximation environment changes between rounds.
            let mut families = Vec::new();
            for e in &sys.equations {
                let tys = scope.binder_types(&e.params, &e.constraint)?;
                let cells: Vec<(atoms::CompleteType, Scope, Vec<ParamItem>)> = tys
                    .into_iter()
                    .map(|ity| {
                        let (inner, items) = scope.extend(&e.params, &ity)?;
                        Ok((ity, inner, items))
                    })
                    .collect::<Result<_, CheckError>>()?;
                families.push((e, cells));
            }
            // Initial approximations: empty for mu, full for nu.
            let mut approx: BTreeMap<String, (usize, OrbitRelation)> = BTreeMap::new();
            for (e, cells) in &families {
                let rel = match sys.kind {
                    FixKind::Mu => OrbitRelation::empty(scope.ctx.clone()),
                    FixKind::Nu => {
                        let mut pairs = Vec::new();
                        for (ity, _, _) in cells {
                            for s in scope.states.orbits() {
                                for ty in join_types(ity, &s.ty, &scope.ctx)? {
                                    pairs.push(PairOrbit {
                                        left_tag: var_tag(&e.var),
                                        left_arity: e.params.len() as u32,
                                        right_tag: s.tag.clone(),
                                        right_arity: s.arity() as u32,
                                        ty,
                                    });
                                }
                            }
                        }
                        OrbitRelation::from_pairs(scope.ctx.clone(), pairs)
                    }
                };
                approx.insert(e.var.clone(), (e.params.len(), rel));
            }
            // Kleene iteration; termination is bounded by the number of
            // context-supported relations between indexes and states.
            loop {
                let mut next: BTreeMap<String, (usize, OrbitRelation)> = BTreeMap::new();
                for (e, cells) in &families {
                    let mut pairs = Vec::new();
                    for (_, inner, items) in cells {
                        let mut inner = inner.clone();
                        for (var, entry) in &approx {
                            inner.env.insert(var.clone(), entry.clone());
                        }
                        let v = eval_in(&inner, &e.body)?;
                        for o in v.orbits() {
                            let ty = abstract_params(&o.ty, items, &scope.ctx);
                            pairs.push(PairOrbit {
                                left_tag: var_tag(&e.var),
                                left_arity: e.params.len() as u32,
                                right_tag: o.tag.clone(),
                                right_arity: o.arity() as u32,
                                ty,
                            });
                        }
                    }
                    next.insert(
                        e.var.clone(),
                        (
                            e.params.len(),
                            OrbitRelation::from_pairs(scope.ctx.clone(), pairs),
                        ),
                    );
                }
                if next == approx {
                    break;
                }
                approx = next;
            }
            // Read off the entry component.
            let consts = scope.resolve_args(&sys.entry_args)?;
            let (_, rel) = &approx[&sys.entry];
            let mut orbits = Vec::new();
            for p in rel.pairs() {
                let left_vars: Vec<u32> = (0..p.left_arity).collect();
                if let Some(ty) =
                    atoms::bind_vars_to_consts(&p.ty, &left_vars, &consts, &scope.ctx)
                {
                    orbits.push(Orbit {
                        tag: p.right_tag.clone(),
                        ty,
                    });
                }
            }
            Ok(OrbitSet::from_orbits(scope.ctx.clone(), orbits))
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracle on a finite concretization
// ---------------------------------------------------------------------------

/// A finite slice of a model: all states, transitions and satisfaction
/// pairs whose atoms are drawn from a fixed pool.
#[derive(Debug, Clone)]
pub struct Concretization {
    pub pool: Vec<Atom>,
    pub states: Vec<Element>,
    pub trans: Vec<(Element, Element)>,
    pub sat: Vec<(Element, Element)>,
}

/// The deterministic fresh-atom pool: every context witness plus `extra`
/// atoms placed below, above and between the existing ones (midpoint
/// subdivision for ordered atoms, fresh integers for equality atoms).
pub fn atom_pool(ctx: &Context, extra: usize) -> Vec<Atom> {
    let mut pool: Vec<Atom> = (0..ctx.n_consts() as u32).map(|c| ctx.const_atom(c)).collect();
    match ctx.sort() {
        AtomSort::Equality => {
            for _ in 0..extra {
                let f = ctx.fresh_atom(&pool);
                pool.push(f);
            }
        }
        AtomSort::Ordered => {
            let mut added = 0;
            while added < extra {
                let mut sorted: Vec<Rational64> = pool.iter().map(|a| a.0).collect();
                sorted.sort();
                let mut candidates = Vec::new();
                if let (Some(min), Some(max)) = (sorted.first(), sorted.last()) {
                    candidates.push(min - Rational64::from_integer(1));
                    candidates.push(max + Rational64::from_integer(1));
                } else {
                    candidates.push(Rational64::from_integer(0));
                }
                for w in sorted.windows(2) {
                    candidates.push((w[0] + w[1]) / Rational64::from_integer(2));
                }
                for c in candidates {
                    if added < extra && !pool.iter().any(|a| a.0 == c) {
                        pool.push(Atom(c));
                        added += 1;
                    }
                }
            }
        }
    }
    pool
}

pub fn concretize(m: &KripkeModel, extra: usize) -> Concretization {
    let pool = atom_pool(&m.ctx, extra);
    Concretization {
        states: m.states.enumerate(&pool),
        trans: crate::orbits::enumerate_relation(&m.trans, &pool),
        sat: crate::orbits::enumerate_relation(&m.sat, &pool),
        pool,
    }
}

/// Naive semantics over the concretization: binders range over the pool,
/// fixpoints iterate over concrete index tuples.  Serves as the
/// independent oracle for [`eval`].
pub fn brute_force_eval(
    m: &KripkeModel,
    f: &Formula,
    extra: usize,
) -> Result<Vec<Element>, CheckError> {
    mu::validate(f)?;
    if f.uses_order() && m.ctx.sort() == AtomSort::Equality {
        return Err(CheckError::NeedsOrderedAtoms);
    }
    let depth = binder_depth(f);
    if extra < depth {
        return Err(CheckError::PoolTooSmall {
            need: depth,
            got: extra,
        });
    }
    let con = concretize(m, extra);
    let mut scope = BTreeMap::new();
    let mut env = BTreeMap::new();
    let out = bf(m, &con, f, &mut scope, &mut env)?;
    Ok(out.into_iter().collect())
}

/// Maximum number of nested atom binders (orbit connectives and indexed
/// fixpoint parameters) along any path.
pub fn binder_depth(f: &Formula) -> usize {
    match f {
        Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => 0,
        Formula::Not(g) | Formula::Diamond(g) | Formula::Square(g) => binder_depth(g),
        Formula::Or(gs) | Formula::And(gs) => {
            gs.iter().map(binder_depth).max().unwrap_or(0)
        }
        Formula::OrbitOr(b, g) | Formula::OrbitAnd(b, g) => b.vars.len() + binder_depth(g),
        Formula::Fix(sys) => sys
            .equations
            .iter()
            .map(|e| e.params.len() + binder_depth(&e.body))
            .max()
            .unwrap_or(0),
    }
}

type BfEnv = BTreeMap<(String, Vec<Atom>), BTreeSet<Element>>;

fn sconstraint_holds(
    c: &SConstraint,
    scope: &BTreeMap<String, Atom>,
    ctx: &Context,
) -> Result<bool, CheckError> {
    let get = |n: &str| -> Result<Atom, CheckError> {
        if let Some(a) = scope.get(n) {
            Ok(*a)
        } else if let Some(id) = ctx.const_id(n) {
            Ok(ctx.const_atom(id))
        } else {
            Err(CheckError::Atoms(AtomError::UnknownName(n.to_string())))
        }
    };
    Ok(match c {
        SConstraint::Bool(b) => *b,
        SConstraint::Cmp(l, r, t) => r.holds(get(l)?.cmp(&get(t)?)),
        SConstraint::Not(c) => !sconstraint_holds(c, scope, ctx)?,
        SConstraint::And(cs) => {
            for c in cs {
                if !sconstraint_holds(c, scope, ctx)? {
                    return Ok(false);
                }
            }
            true
        }
        SConstraint::Or(cs) => {
            for c in cs {
                if sconstraint_holds(c, scope, ctx)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

fn assignments(
    pool: &[Atom],
    vars: &[String],
    c: &SConstraint,
    scope: &BTreeMap<String, Atom>,
    ctx: &Context,
) -> Result<Vec<Vec<Atom>>, CheckError> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let tuple: Vec<Atom> = idx.iter().map(|&i| pool[i]).collect();
        let mut s2 = scope.clone();
        for (v, a) in vars.iter().zip(&tuple) {
            s2.insert(v.clone(), *a);
        }
        if sconstraint_holds(c, &s2, ctx)? {
            out.push(tuple);
        }
        let mut k = vars.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < pool.len() {
                break;
            }
            idx[k] = 0;
        }
        if idx.iter().all(|&i| i == 0) {
            return Ok(out);
        }
    }
}

fn bf(
    m: &KripkeModel,
    con: &Concretization,
    f: &Formula,
    scope: &mut BTreeMap<String, Atom>,
    env: &mut BfEnv,
) -> Result<BTreeSet<Element>, CheckError> {
    Ok(match f {
        Formula::Bool(true) => con.states.iter().cloned().collect(),
        Formula::Bool(false) => BTreeSet::new(),
        Formula::Pred(tag, args) => {
            let p = Element {
                tag: Tag::pred(tag),
                args: args
                    .iter()
                    .map(|a| {
                        scope.get(a).copied().or_else(|| {
                            m.ctx.const_id(a).map(|id| m.ctx.const_atom(id))
                        })
                        .ok_or_else(|| CheckError::Atoms(AtomError::UnknownName(a.clone())))
                    })
                    .collect::<Result<_, _>>()?,
            };
            con.sat
                .iter()
                .filter(|(_, q)| q == &p)
                .map(|(x, _)| x.clone())
                .collect()
        }
        Formula::Var(x, args) => {
            let key = (
                x.clone(),
                args.iter()
                    .map(|a| {
                        scope.get(a).copied().or_else(|| {
                            m.ctx.const_id(a).map(|id| m.ctx.const_atom(id))
                        })
                        .ok_or_else(|| CheckError::Atoms(AtomError::UnknownName(a.clone())))
                    })
                    .collect::<Result<_, _>>()?,
            );
            env.get(&key)
                .cloned()
                .ok_or_else(|| CheckError::FreeVariable(x.clone()))?
        }
        Formula::Not(g) => {
            let v = bf(m, con, g, scope, env)?;
            con.states.iter().filter(|x| !v.contains(x)).cloned().collect()
        }
        Formula::Or(gs) => {
            let mut acc = BTreeSet::new();
            for g in gs {
                acc.extend(bf(m, con, g, scope, env)?);
            }
            acc
        }
        Formula::And(gs) => {
            let mut acc: BTreeSet<Element> = con.states.iter().cloned().collect();
            for g in gs {
                let v = bf(m, con, g, scope, env)?;
                acc = acc.intersection(&v).cloned().collect();
            }
            acc
        }
        Formula::Diamond(g) => {
            let v = bf(m, con, g, scope, env)?;
            con.trans
                .iter()
                .filter(|(_, y)| v.contains(y))
                .map(|(x, _)| x.clone())
                .collect()
        }
        Formula::Square(g) => {
            let v = bf(m, con, g, scope, env)?;
            con.states
                .iter()
                .filter(|x| {
                    con.trans
                        .iter()
                        .all(|(a, y)| &a != x || v.contains(y))
                })
                .cloned()
                .collect()
        }
        Formula::OrbitOr(b, g) => {
            let mut acc = BTreeSet::new();
            for tuple in assignments(&con.pool, &b.vars, &b.constraint, scope, &m.ctx)? {
                for (v, a) in b.vars.iter().zip(&tuple) {
                    scope.insert(v.clone(), *a);
                }
                acc.extend(bf(m, con, g, scope, env)?);
                for v in &b.vars {
                    scope.remove(v);
                }
            }
            acc
        }
        Formula::OrbitAnd(b, g) => {
            let mut acc: BTreeSet<Element> = con.states.iter().cloned().collect();
            for tuple in assignments(&con.pool, &b.vars, &b.constraint, scope, &m.ctx)? {
                for (v, a) in b.vars.iter().zip(&tuple) {
                    scope.insert(v.clone(), *a);
                }
                let v = bf(m, con, g, scope, env)?;
                acc = acc.intersection(&v).cloned().collect();
                for v in &b.vars {
                    scope.remove(v);
                }
            }
            acc
        }
        Formula::Fix(sys) => {
            // Concrete index tuples per family.
            let mut keys: Vec<(String, Vec<Atom>, &Formula, &[String])> = Vec::new();
            for e in &sys.equations {
                for tuple in assignments(&con.pool, &e.params, &e.constraint, scope, &m.ctx)? {
                    keys.push((e.var.clone(), tuple, &e.body, &e.params));
                }
            }
            let init: BTreeSet<Element> = match sys.kind {
                FixKind::Mu => BTreeSet::new(),
                FixKind::Nu => con.states.iter().cloned().collect(),
            };
            for (var, tuple, _, _) in &keys {
                env.insert((var.clone(), tuple.clone()), init.clone());
            }
            loop {
                let mut changed = false;
                let mut round: Vec<((String, Vec<Atom>), BTreeSet<Element>)> = Vec::new();
                for (var, tuple, body, params) in &keys {
                    for (p, a) in params.iter().zip(tuple.iter()) {
                        scope.insert(p.clone(), *a);
                    }
                    let v = bf(m, con, body, scope, env)?;
                    for p in params.iter() {
                        scope.remove(p);
                    }
                    round.push(((var.clone(), tuple.clone()), v));
                }
                for (key, v) in round {
                    if env.get(&key) != Some(&v) {
                        env.insert(key, v);
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            let entry_key = (
                sys.entry.clone(),
                sys.entry_args
                    .iter()
                    .map(|a| {
                        scope.get(a).copied().or_else(|| {
                            m.ctx.const_id(a).map(|id| m.ctx.const_atom(id))
                        })
                        .ok_or_else(|| CheckError::Atoms(AtomError::UnknownName(a.clone())))
                    })
                    .collect::<Result<_, _>>()?,
            );
            let out = env
                .get(&entry_key)
                .cloned()
                .ok_or_else(|| CheckError::FreeVariable(sys.entry.clone()))?;
            for (var, tuple, _, _) in &keys {
                env.remove(&(var.clone(), tuple.clone()));
            }
            out
        }
    })
}

/// Checks that symbolic and brute-force evaluation agree on the pool:
/// returns the two element sets for reporting.
pub fn oracle_agreement(
    m: &KripkeModel,
    f: &Formula,
    extra: usize,
) -> Result<(Vec<Element>, Vec<Element>), CheckError> {
    let symbolic = eval(m, f, &Environment::new())?;
    let concrete = brute_force_eval(m, f, extra)?;
    let pool = atom_pool(&m.ctx, extra);
    let symbolic_elements = symbolic.enumerate(&pool);
    Ok((symbolic_elements, concrete))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::builtin_model;
    use crate::mu::{builtin_formula, parse_formula};

    fn star() -> KripkeModel {
        builtin_model("star", &[]).unwrap()
    }

    fn root() -> Element {
        Element::new("root", vec![])
    }

    #[test]
    fn truth_and_falsity() {
        let m = star();
        let t = eval(&m, &Formula::Bool(true), &Environment::new()).unwrap();
        assert!(t.equals(&m.states).unwrap());
        let f = eval(&m, &Formula::Bool(false), &Environment::new()).unwrap();
        assert!(f.is_empty());
    }

    #[test]
    fn diamond_on_star() {
        let m = star();
        // <> true: exactly the root has a successor.
        let f = parse_formula("<> true").unwrap();
        let v = eval(&m, &f, &Environment::new()).unwrap();
        assert!(v.member(&root()).unwrap());
        assert_eq!(v.n_orbits(), 1);
    }

    #[test]
    fn orbit_or_some_successor_pred() {
        let m = star();
        let f = builtin_formula("some-succ-pred").unwrap();
        let v = eval(&m, &f, &Environment::new()).unwrap();
        assert!(v.member(&root()).unwrap());
        assert!(!v.member(&Element::new("leaf", vec![Atom::int(5)])).unwrap());
    }

    #[test]
    fn psi_holds_at_star_root() {
        let m = star();
        let f = builtin_formula("psi").unwrap();
        let v = eval(&m, &f, &Environment::new()).unwrap();
        assert!(v.member(&root()).unwrap(), "psi holds at the root");
    }

    #[test]
    fn nu_diamond_is_empty_on_star() {
        // Leaves are dead ends, so no state starts an infinite path.
        let m = star();
        let f = builtin_formula("nu-diamond").unwrap();
        let v = eval(&m, &f, &Environment::new()).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn nu_diamond_on_increasing() {
        let m = builtin_model("increasing", &[]).unwrap();
        let f = builtin_formula("nu-diamond").unwrap();
        let v = eval(&m, &f, &Environment::new()).unwrap();
        assert!(v.equals(&m.states).unwrap());
    }

    #[test]
    fn p1_and_p2_on_increasing() {
        let m = builtin_model("increasing", &[]).unwrap();
        let f = builtin_formula("p1-and-p2").unwrap();
        let v = eval(&m, &f, &Environment::new()).unwrap();
        assert!(v.equals(&m.states).unwrap(), "both hold at every state");
    }

    #[test]
    fn p1_prime_fails_on_increasing() {
        let m = builtin_model("increasing", &[]).unwrap();
        let f = builtin_formula("p1-prime").unwrap();
        let v = eval(&m, &f, &Environment::new()).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn free_variable_reported() {
        let m = star();
        let f = parse_formula("X()").unwrap();
        assert!(matches!(
            eval(&m, &f, &Environment::new()),
            Err(CheckError::FreeVariable(_))
        ));
    }

    #[test]
    fn scalar_environment() {
        let m = star();
        let root_set = OrbitSet::singleton(m.ctx.clone(), &root()).unwrap();
        let mut env = Environment::new();
        env.set_scalar("X", &root_set);
        let f = parse_formula("<> X()").unwrap();
        let v = eval(&m, &f, &env).unwrap();
        assert!(v.is_empty(), "nothing reaches the root");
        let g = parse_formula("X()").unwrap();
        assert!(eval(&m, &g, &env).unwrap().equals(&root_set).unwrap());
    }

    #[test]
    fn order_formula_rejected_on_equality_model() {
        let m = star();
        let f = builtin_formula("infsucc-definer").unwrap();
        assert!(matches!(
            eval(&m, &f, &Environment::new()),
            Err(CheckError::NeedsOrderedAtoms)
        ));
    }

    #[test]
    fn oracle_agrees_on_star_fixtures() {
        let m = star();
        for name in ["psi", "p1", "p2", "nu-diamond", "some-succ-pred", "reach-pred"] {
            let f = builtin_formula(name).unwrap();
            let (sym, conc) = oracle_agreement(&m, &f, 4).unwrap();
            assert_eq!(sym, conc, "{name}");
        }
    }

    #[test]
    fn oracle_agrees_on_increasing_fixtures() {
        // The increasing model has unbounded ascending chains, so finite
        // truncation is only a sound oracle for formulas whose truth does
        // not depend on successors outside the pool (P1 and nu-diamond are
        // the canonical counterexamples: true on the infinite model, false
        // on every finite slice).
        let m = builtin_model("increasing", &[]).unwrap();
        for name in ["p2", "p1-prime", "some-pred", "reach-pred"] {
            let f = builtin_formula(name).unwrap();
            let (sym, conc) = oracle_agreement(&m, &f, 4).unwrap();
            assert_eq!(sym, conc, "{name}");
        }
    }

    #[test]
    fn evensucc_on_fans() {
        let f = builtin_formula("evensucc-definer").unwrap();
        for (n, expect) in [(2, true), (3, false)] {
            let m = builtin_model("fan", &[n]).unwrap();
            assert_eq!(
                holds(&m, &root(), &f).unwrap(),
                expect,
                "fan with {n} labels"
            );
        }
        let m = builtin_model("interval-fan", &[]).unwrap();
        assert!(!holds(&m, &root(), &f).unwrap(), "interval fan");
    }

    #[test]
    fn infsucc_definer_on_infsucc_model() {
        let m = builtin_model("infsucc-ordered", &[2]).unwrap();
        let f = builtin_formula("infsucc-definer").unwrap();
        let v = eval(&m, &f, &Environment::new()).unwrap();
        assert!(v.member(&Element::new("p", vec![])).unwrap());
        assert!(!v.member(&Element::new("q", vec![])).unwrap());
        assert!(!v.member(&Element::new("r", vec![Atom::int(1)])).unwrap());
    }

    #[test]
    fn chain_definer_on_chain_model() {
        let m = builtin_model("chain", &[3]).unwrap();
        let f = builtin_formula("chain-definer").unwrap();
        let v = eval(&m, &f, &Environment::new()).unwrap();
        assert!(v.member(&Element::new("p1", vec![])).unwrap());
        assert!(!v.member(&Element::new("q1", vec![])).unwrap());
    }

    #[test]
    fn pool_too_small_is_reported() {
        let m = star();
        let f = builtin_formula("psi").unwrap();
        assert!(matches!(
            brute_force_eval(&m, &f, 1),
            Err(CheckError::PoolTooSmall { .. })
        ));
    }

    #[test]
    fn monotone_environment() {
        // Enlarging rho(X) never shrinks the value of a positive formula.
        let m = star();
        let f = parse_formula("<> X()").unwrap();
        let small = OrbitSet::singleton(m.ctx.clone(), &Element::new("leaf", vec![Atom::int(3)]))
            .unwrap();
        let large = m.states.clone();
        let mut env_small = Environment::new();
        env_small.set_scalar("X", &small);
        let mut env_large = Environment::new();
        env_large.set_scalar("X", &large);
        let v_small = eval(&m, &f, &env_small).unwrap();
        let v_large = eval(&m, &f, &env_large).unwrap();
        assert!(v_small.subset(&v_large).unwrap());
    }
}
