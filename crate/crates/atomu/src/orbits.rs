//! Orbit-finite sets and relations, represented as finite unions of orbits.
//!
//! An orbit is a constructor tag together with the complete type of its atom
//! arguments relative to the ambient context.  Since distinct complete types
//! denote disjoint sets of tuples, an orbit-finite set is just a canonical
//! sorted list of orbits, and extensional equality is structural equality.

use crate::atoms::{
    self, Atom, AtomError, CompleteType, Constraint, Context, Ctx, type_of,
};
use std::collections::BTreeMap;
use std::fmt;

/// Constructor tag. Predicate tags live in their own namespace, so a model
/// may use the same name for a state and a basic predicate; cartesian
/// products produce structural pair tags.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    Named(String),
    Pred(String),
    Pair(Box<Tag>, Box<Tag>),
}

impl Tag {
    pub fn named(s: &str) -> Tag {
        Tag::Named(s.to_string())
    }

    pub fn pred(s: &str) -> Tag {
        Tag::Pred(s.to_string())
    }

    /// Arity per the context registry; pair tags add up.
    pub fn arity(&self, ctx: &Context) -> Result<usize, AtomError> {
        match self {
            Tag::Named(n) => ctx
                .tag_arity(n)
                .ok_or_else(|| AtomError::UnregisteredTag(n.clone())),
            Tag::Pred(n) => ctx
                .pred_arity(n)
                .ok_or_else(|| AtomError::UnregisteredTag(n.clone())),
            Tag::Pair(l, r) => Ok(l.arity(ctx)? + r.arity(ctx)?),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Named(n) | Tag::Pred(n) => write!(f, "{n}"),
            Tag::Pair(l, r) => write!(f, "({l},{r})"),
        }
    }
}

/// A concrete element: a tag applied to concrete atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Element {
    pub tag: Tag,
    pub args: Vec<Atom>,
}

impl Element {
    pub fn new(tag: &str, args: Vec<Atom>) -> Element {
        Element {
            tag: Tag::named(tag),
            args,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.tag)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// One orbit: all elements `tag(a1..an)` whose argument tuple realizes `ty`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Orbit {
    pub tag: Tag,
    pub ty: CompleteType,
}

impl Orbit {
    pub fn arity(&self) -> usize {
        self.ty.n_vars()
    }
}

/// A finite union of orbits over a shared context, kept sorted and
/// duplicate-free so that extensional equality is `==`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitSet {
    ctx: Ctx,
    orbits: Vec<Orbit>,
}

/// A finitely supported relation between tagged tuples: a union of pair
/// orbits, each a joint complete type over `left_arity + right_arity`
/// variables (left positions first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitRelation {
    ctx: Ctx,
    pairs: Vec<PairOrbit>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairOrbit {
    pub left_tag: Tag,
    pub left_arity: u32,
    pub right_tag: Tag,
    pub right_arity: u32,
    pub ty: CompleteType,
}

impl PairOrbit {
    fn left_vars(&self) -> Vec<u32> {
        (0..self.left_arity).collect()
    }

    fn right_vars(&self) -> Vec<u32> {
        (self.left_arity..self.left_arity + self.right_arity).collect()
    }

    /// The orbit of left components.
    pub fn left_orbit(&self, ctx: &Context) -> Orbit {
        Orbit {
            tag: self.left_tag.clone(),
            ty: atoms::project(&self.ty, &self.left_vars(), ctx),
        }
    }

    /// The orbit of right components.
    pub fn right_orbit(&self, ctx: &Context) -> Orbit {
        Orbit {
            tag: self.right_tag.clone(),
            ty: atoms::project(&self.ty, &self.right_vars(), ctx),
        }
    }
}

fn same_ctx(a: &Ctx, b: &Ctx) -> Result<(), AtomError> {
    if std::sync::Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(AtomError::ContextMismatch)
    }
}

impl OrbitSet {
    pub fn empty(ctx: Ctx) -> OrbitSet {
        OrbitSet {
            ctx,
            orbits: Vec::new(),
        }
    }

    pub fn from_orbits(ctx: Ctx, mut orbits: Vec<Orbit>) -> OrbitSet {
        orbits.sort();
        orbits.dedup();
        OrbitSet { ctx, orbits }
    }

    /// The set `{ tag(v1..vn) | c }`.
    pub fn comprehension(
        ctx: Ctx,
        tag: Tag,
        n_vars: usize,
        c: &Constraint,
    ) -> Result<OrbitSet, AtomError> {
        let arity = tag.arity(&ctx)?;
        if arity != n_vars {
            return Err(AtomError::ArityMismatch {
                tag: tag.to_string(),
                expected: arity,
                got: n_vars,
            });
        }
        let orbits = atoms::complete(c, n_vars, &ctx)?
            .into_iter()
            .map(|ty| Orbit {
                tag: tag.clone(),
                ty,
            })
            .collect();
        Ok(OrbitSet::from_orbits(ctx, orbits))
    }

    pub fn singleton(ctx: Ctx, x: &Element) -> Result<OrbitSet, AtomError> {
        let arity = x.tag.arity(&ctx)?;
        if arity != x.args.len() {
            return Err(AtomError::ArityMismatch {
                tag: x.tag.to_string(),
                expected: arity,
                got: x.args.len(),
            });
        }
        // Only exact when every argument equals a context constant;
        // otherwise this is the ctx-orbit of the element.
        let ty = type_of(&x.args, &ctx);
        Ok(OrbitSet::from_orbits(
            ctx,
            vec![Orbit {
                tag: x.tag.clone(),
                ty,
            }],
        ))
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn orbits(&self) -> &[Orbit] {
        &self.orbits
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    pub fn n_orbits(&self) -> usize {
        self.orbits.len()
    }

    pub fn contains_orbit(&self, o: &Orbit) -> bool {
        self.orbits.binary_search(o).is_ok()
    }

    pub fn union(&self, other: &OrbitSet) -> Result<OrbitSet, AtomError> {
        same_ctx(&self.ctx, &other.ctx)?;
        let mut orbits = self.orbits.clone();
        orbits.extend(other.orbits.iter().cloned());
        Ok(OrbitSet::from_orbits(self.ctx.clone(), orbits))
    }

    pub fn intersect(&self, other: &OrbitSet) -> Result<OrbitSet, AtomError> {
        same_ctx(&self.ctx, &other.ctx)?;
        let orbits = self
            .orbits
            .iter()
            .filter(|o| other.contains_orbit(o))
            .cloned()
            .collect();
        Ok(OrbitSet::from_orbits(self.ctx.clone(), orbits))
    }

    pub fn difference(&self, other: &OrbitSet) -> Result<OrbitSet, AtomError> {
        same_ctx(&self.ctx, &other.ctx)?;
        let orbits = self
            .orbits
            .iter()
            .filter(|o| !other.contains_orbit(o))
            .cloned()
            .collect();
        Ok(OrbitSet::from_orbits(self.ctx.clone(), orbits))
    }

    /// Cartesian product with structural pair tags.
    pub fn product(&self, other: &OrbitSet) -> Result<OrbitSet, AtomError> {
        same_ctx(&self.ctx, &other.ctx)?;
        let mut orbits = Vec::new();
        for a in &self.orbits {
            for b in &other.orbits {
                let joint = join_types(&a.ty, &b.ty, &self.ctx)?;
                for ty in joint {
                    orbits.push(Orbit {
                        tag: Tag::Pair(Box::new(a.tag.clone()), Box::new(b.tag.clone())),
                        ty,
                    });
                }
            }
        }
        Ok(OrbitSet::from_orbits(self.ctx.clone(), orbits))
    }

    pub fn equals(&self, other: &OrbitSet) -> Result<bool, AtomError> {
        same_ctx(&self.ctx, &other.ctx)?;
        Ok(self.orbits == other.orbits)
    }

    pub fn subset(&self, other: &OrbitSet) -> Result<bool, AtomError> {
        same_ctx(&self.ctx, &other.ctx)?;
        Ok(self.orbits.iter().all(|o| other.contains_orbit(o)))
    }

    pub fn member(&self, x: &Element) -> Result<bool, AtomError> {
        let arity = x.tag.arity(&self.ctx)?;
        if arity != x.args.len() {
            return Err(AtomError::ArityMismatch {
                tag: x.tag.to_string(),
                expected: arity,
                got: x.args.len(),
            });
        }
        let ty = type_of(&x.args, &self.ctx);
        Ok(self.contains_orbit(&Orbit {
            tag: x.tag.clone(),
            ty,
        }))
    }

    /// The least subset of the context constants that supports this set:
    /// a constant is in the support iff forgetting it changes the orbit
    /// decomposition in a way the remaining constants cannot express.
    pub fn least_support(&self) -> Vec<u32> {
        (0..self.ctx.n_consts() as u32)
            .filter(|&c| {
                let keep: Vec<u32> = (0..self.ctx.n_consts() as u32).filter(|&d| d != c).collect();
                !self.supported_by(&keep)
            })
            .collect()
    }

    /// Whether the constant subset `keep` supports this set.
    pub fn supported_by(&self, keep: &[u32]) -> bool {
        let (sub, map) = restrict_context(&self.ctx, keep);
        // Group full-context orbits by their reduct; the set is supported
        // iff it is a union of complete fibers.
        let mut fibers: BTreeMap<(Tag, CompleteType), (usize, usize)> = BTreeMap::new();
        let mut universe: BTreeMap<(Tag, usize), Vec<CompleteType>> = BTreeMap::new();
        for o in &self.orbits {
            universe.entry((o.tag.clone(), o.arity())).or_default();
        }
        for ((tag, arity), tys) in universe.iter_mut() {
            *tys = atoms::complete(&Constraint::tt(), *arity, &self.ctx).expect("true completes");
            for ty in tys.iter() {
                let red = atoms::reduct(ty, &map, &sub);
                let entry = fibers.entry((tag.clone(), red)).or_insert((0, 0));
                entry.1 += 1;
                if self.contains_orbit(&Orbit {
                    tag: tag.clone(),
                    ty: ty.clone(),
                }) {
                    entry.0 += 1;
                }
            }
        }
        fibers.values().all(|&(inside, total)| inside == 0 || inside == total)
    }

    /// Partition into orbits relative to the constant subset `keep`; each
    /// cell is a single orbit over the restricted context.
    pub fn orbits_under(&self, keep: &[u32]) -> Result<Vec<OrbitSet>, AtomError> {
        if !self.supported_by(keep) {
            return Err(AtomError::Invalid(format!(
                "constant subset {keep:?} does not support the set"
            )));
        }
        let (sub, map) = restrict_context(&self.ctx, keep);
        let sub = Ctx::new(sub);
        let mut cells: BTreeMap<Orbit, ()> = BTreeMap::new();
        for o in &self.orbits {
            let red = atoms::reduct(&o.ty, &map, &sub);
            cells.insert(
                Orbit {
                    tag: o.tag.clone(),
                    ty: red,
                },
                (),
            );
        }
        Ok(cells
            .into_keys()
            .map(|o| OrbitSet::from_orbits(sub.clone(), vec![o]))
            .collect())
    }

    /// Number of `keep`-supported subsets of this set.
    pub fn count_supported_subsets(&self, keep: &[u32]) -> Result<u128, AtomError> {
        let cells = self.orbits_under(keep)?;
        Ok(1u128 << cells.len())
    }

    /// All elements whose atoms are drawn from `pool`.
    pub fn enumerate(&self, pool: &[Atom]) -> Vec<Element> {
        let mut out = Vec::new();
        for o in &self.orbits {
            let n = o.arity();
            let mut idx = vec![0usize; n];
            loop {
                let args: Vec<Atom> = idx.iter().map(|&i| pool[i]).collect();
                if type_of(&args, &self.ctx) == o.ty {
                    out.push(Element {
                        tag: o.tag.clone(),
                        args,
                    });
                }
                // Advance the odometer.
                let mut k = n;
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < pool.len() {
                        break;
                    }
                    idx[k] = 0;
                }
                if idx.iter().all(|&i| i == 0) {
                    break;
                }
                if n == 0 {
                    break;
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Reinterprets the set over a context that extends this one by
    /// appended constants: each orbit splits into its completions.
    pub fn lift(&self, target: &Ctx) -> Result<OrbitSet, AtomError> {
        if std::sync::Arc::ptr_eq(&self.ctx, target) {
            return Ok(self.clone());
        }
        if !self.ctx.is_prefix_of(target) {
            return Err(AtomError::ContextMismatch);
        }
        let new_consts: Vec<u32> =
            (self.ctx.n_consts() as u32..target.n_consts() as u32).collect();
        let mut orbits = Vec::new();
        for o in &self.orbits {
            for ty in atoms::lift_type(&o.ty, &new_consts, target) {
                orbits.push(Orbit {
                    tag: o.tag.clone(),
                    ty,
                });
            }
        }
        Ok(OrbitSet::from_orbits(target.clone(), orbits))
    }

    /// Existentially projects away the constants appended beyond `base`:
    /// the result is the union of the base-context orbits of all elements.
    pub fn project_extension(&self, base: &Ctx) -> Result<OrbitSet, AtomError> {
        if std::sync::Arc::ptr_eq(&self.ctx, base) {
            return Ok(self.clone());
        }
        if !base.is_prefix_of(&self.ctx) {
            return Err(AtomError::ContextMismatch);
        }
        let map: BTreeMap<u32, u32> = (0..base.n_consts() as u32).map(|c| (c, c)).collect();
        let orbits = self
            .orbits
            .iter()
            .map(|o| Orbit {
                tag: o.tag.clone(),
                ty: atoms::reduct(&o.ty, &map, base),
            })
            .collect();
        Ok(OrbitSet::from_orbits(base.clone(), orbits))
    }

    /// One line per orbit: `tag(v1..vn) where <constraint>`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for o in &self.orbits {
            s.push_str(&dump_orbit(&o.tag, &o.ty, &self.ctx));
            s.push('\n');
        }
        s
    }
}

/// Renders a type as the `where` clause of the debug dump.
pub fn dump_orbit(tag: &Tag, ty: &CompleteType, ctx: &Context) -> String {
    let vars: Vec<String> = (0..ty.n_vars()).map(|i| format!("v{}", i + 1)).collect();
    format!(
        "{tag}({}) where {}",
        vars.join(","),
        render_constraint(&ty.defining_constraint(ctx.sort()), &vars, ctx)
    )
}

pub fn render_constraint(c: &Constraint, vars: &[String], ctx: &Context) -> String {
    use crate::atoms::CTerm;
    let term = |t: &CTerm| match *t {
        CTerm::Var(v) => vars[v as usize].clone(),
        CTerm::Const(k) => ctx.const_name(k).to_string(),
    };
    match c {
        Constraint::Bool(true) => "true".to_string(),
        Constraint::Bool(false) => "false".to_string(),
        Constraint::Cmp(l, r, t) => format!("{} {} {}", term(l), r.symbol(), term(t)),
        Constraint::Not(inner) => format!("!({})", render_constraint(inner, vars, ctx)),
        Constraint::And(cs) => cs
            .iter()
            .map(|c| match c {
                Constraint::Or(_) => format!("({})", render_constraint(c, vars, ctx)),
                _ => render_constraint(c, vars, ctx),
            })
            .collect::<Vec<_>>()
            .join(" and "),
        Constraint::Or(cs) => cs
            .iter()
            .map(|c| render_constraint(c, vars, ctx))
            .collect::<Vec<_>>()
            .join(" or "),
    }
}

/// All joint types over `a.n_vars() + b.n_vars()` variables whose left part
/// realizes `a` and right part realizes `b`.
pub fn join_types(
    a: &CompleteType,
    b: &CompleteType,
    ctx: &Context,
) -> Result<Vec<CompleteType>, AtomError> {
    let n = a.n_vars() + b.n_vars();
    let shifted = shift_constraint(&b.defining_constraint(ctx.sort()), a.n_vars() as u32);
    let c = Constraint::and(vec![a.defining_constraint(ctx.sort()), shifted]);
    atoms::complete(&c, n, ctx)
}

/// Shifts variable indices in a constraint by `by`.
pub fn shift_constraint(c: &Constraint, by: u32) -> Constraint {
    use crate::atoms::CTerm;
    let t = |t: &CTerm| match *t {
        CTerm::Var(v) => CTerm::Var(v + by),
        k => k,
    };
    match c {
        Constraint::Bool(b) => Constraint::Bool(*b),
        Constraint::Cmp(l, r, x) => Constraint::Cmp(t(l), *r, t(x)),
        Constraint::Not(inner) => Constraint::Not(Box::new(shift_constraint(inner, by))),
        Constraint::And(cs) => Constraint::And(cs.iter().map(|c| shift_constraint(c, by)).collect()),
        Constraint::Or(cs) => Constraint::Or(cs.iter().map(|c| shift_constraint(c, by)).collect()),
    }
}

/// The restriction of a context to a subset of its constants, together with
/// the old-to-new constant id map. Tags are kept.
pub fn restrict_context(ctx: &Context, keep: &[u32]) -> (Context, BTreeMap<u32, u32>) {
    let mut sub = Context::new(ctx.sort());
    let mut map = BTreeMap::new();
    let mut ordered: Vec<u32> = keep.to_vec();
    ordered.sort_unstable();
    ordered.dedup();
    for &c in &ordered {
        let id = sub
            .extend_const(ctx.const_name(c), ctx.const_atom(c))
            .expect("restriction keeps distinct names");
        map.insert(c, id);
    }
    for (t, a) in ctx.tags() {
        sub.register_tag(t, a).unwrap();
    }
    for (t, a) in ctx.pred_tags() {
        sub.register_pred_tag(t, a).unwrap();
    }
    (sub, map)
}

impl OrbitRelation {
    pub fn empty(ctx: Ctx) -> OrbitRelation {
        OrbitRelation {
            ctx,
            pairs: Vec::new(),
        }
    }

    pub fn from_pairs(ctx: Ctx, mut pairs: Vec<PairOrbit>) -> OrbitRelation {
        pairs.sort();
        pairs.dedup();
        OrbitRelation { ctx, pairs }
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn pairs(&self) -> &[PairOrbit] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn union(&self, other: &OrbitRelation) -> Result<OrbitRelation, AtomError> {
        same_ctx(&self.ctx, &other.ctx)?;
        let mut pairs = self.pairs.clone();
        pairs.extend(other.pairs.iter().cloned());
        Ok(OrbitRelation::from_pairs(self.ctx.clone(), pairs))
    }

    /// The relation `{ (ltag(v̄), rtag(w̄)) | c }` with `c` over the
    /// concatenated variables, left first.
    pub fn comprehension(
        ctx: Ctx,
        ltag: Tag,
        lar: usize,
        rtag: Tag,
        rar: usize,
        c: &Constraint,
    ) -> Result<OrbitRelation, AtomError> {
        for (t, want, got) in [(&ltag, ltag.arity(&ctx)?, lar), (&rtag, rtag.arity(&ctx)?, rar)] {
            if want != got {
                return Err(AtomError::ArityMismatch {
                    tag: t.to_string(),
                    expected: want,
                    got,
                });
            }
        }
        let pairs = atoms::complete(c, lar + rar, &ctx)?
            .into_iter()
            .map(|ty| PairOrbit {
                left_tag: ltag.clone(),
                left_arity: lar as u32,
                right_tag: rtag.clone(),
                right_arity: rar as u32,
                ty,
            })
            .collect();
        Ok(OrbitRelation::from_pairs(ctx, pairs))
    }

    /// `{ y | exists x in X. (x,y) in R }`.
    pub fn image(&self, x: &OrbitSet) -> Result<OrbitSet, AtomError> {
        same_ctx(&self.ctx, x.ctx())?;
        let orbits = self
            .pairs
            .iter()
            .filter(|p| x.contains_orbit(&p.left_orbit(&self.ctx)))
            .map(|p| p.right_orbit(&self.ctx))
            .collect();
        Ok(OrbitSet::from_orbits(self.ctx.clone(), orbits))
    }

    /// `{ x | exists y in Y. (x,y) in R }`.
    pub fn preimage(&self, y: &OrbitSet) -> Result<OrbitSet, AtomError> {
        same_ctx(&self.ctx, y.ctx())?;
        let orbits = self
            .pairs
            .iter()
            .filter(|p| y.contains_orbit(&p.right_orbit(&self.ctx)))
            .map(|p| p.left_orbit(&self.ctx))
            .collect();
        Ok(OrbitSet::from_orbits(self.ctx.clone(), orbits))
    }

    /// Pair orbits whose left component lies in `x`.
    pub fn restrict_left(&self, x: &OrbitSet) -> Result<OrbitRelation, AtomError> {
        same_ctx(&self.ctx, x.ctx())?;
        let pairs = self
            .pairs
            .iter()
            .filter(|p| x.contains_orbit(&p.left_orbit(&self.ctx)))
            .cloned()
            .collect();
        Ok(OrbitRelation::from_pairs(self.ctx.clone(), pairs))
    }

    pub fn left_projection(&self) -> OrbitSet {
        OrbitSet::from_orbits(
            self.ctx.clone(),
            self.pairs.iter().map(|p| p.left_orbit(&self.ctx)).collect(),
        )
    }

    pub fn right_projection(&self) -> OrbitSet {
        OrbitSet::from_orbits(
            self.ctx.clone(),
            self.pairs.iter().map(|p| p.right_orbit(&self.ctx)).collect(),
        )
    }

    /// Relation counterpart of [`OrbitSet::lift`].
    pub fn lift(&self, target: &Ctx) -> Result<OrbitRelation, AtomError> {
        if std::sync::Arc::ptr_eq(&self.ctx, target) {
            return Ok(self.clone());
        }
        if !self.ctx.is_prefix_of(target) {
            return Err(AtomError::ContextMismatch);
        }
        let new_consts: Vec<u32> =
            (self.ctx.n_consts() as u32..target.n_consts() as u32).collect();
        let mut pairs = Vec::new();
        for p in &self.pairs {
            for ty in atoms::lift_type(&p.ty, &new_consts, target) {
                pairs.push(PairOrbit {
                    left_tag: p.left_tag.clone(),
                    left_arity: p.left_arity,
                    right_tag: p.right_tag.clone(),
                    right_arity: p.right_arity,
                    ty,
                });
            }
        }
        Ok(OrbitRelation::from_pairs(target.clone(), pairs))
    }

    /// Membership of a concrete pair.
    pub fn member(&self, x: &Element, y: &Element) -> Result<bool, AtomError> {
        let args: Vec<Atom> = x.args.iter().chain(&y.args).copied().collect();
        let ty = type_of(&args, &self.ctx);
        Ok(self.pairs.iter().any(|p| {
            p.left_tag == x.tag
                && p.right_tag == y.tag
                && p.left_arity as usize == x.args.len()
                && p.right_arity as usize == y.args.len()
                && p.ty == ty
        }))
    }
}

/// Every element pair of the relation whose atoms come from `pool`.
pub fn enumerate_relation(r: &OrbitRelation, pool: &[Atom]) -> Vec<(Element, Element)> {
    let mut out = Vec::new();
    for p in r.pairs() {
        let n = (p.left_arity + p.right_arity) as usize;
        let mut idx = vec![0usize; n];
        loop {
            let args: Vec<Atom> = idx.iter().map(|&i| pool[i]).collect();
            if type_of(&args, r.ctx()) == p.ty {
                out.push((
                    Element {
                        tag: p.left_tag.clone(),
                        args: args[..p.left_arity as usize].to_vec(),
                    },
                    Element {
                        tag: p.right_tag.clone(),
                        args: args[p.left_arity as usize..].to_vec(),
                    },
                ));
            }
            let mut k = n;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < pool.len() {
                    break;
                }
                idx[k] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
            if n == 0 {
                break;
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{AtomSort, CTerm, Rel};

    fn eq_ctx_s() -> Ctx {
        let mut c = Context::new(AtomSort::Equality);
        c.add_const("c1", Atom::int(1)).unwrap();
        c.add_const("c2", Atom::int(2)).unwrap();
        c.register_tag("atom", 1).unwrap();
        c.register_tag("pairt", 2).unwrap();
        Ctx::new(c)
    }

    fn full_atoms(ctx: &Ctx) -> OrbitSet {
        OrbitSet::comprehension(ctx.clone(), Tag::named("atom"), 1, &Constraint::tt()).unwrap()
    }

    #[test]
    fn union_idempotent() {
        let ctx = eq_ctx_s();
        let x = full_atoms(&ctx);
        assert!(x.union(&x).unwrap().equals(&x).unwrap());
    }

    #[test]
    fn square_of_atoms_has_two_orbits_over_equality() {
        let mut c = Context::new(AtomSort::Equality);
        c.register_tag("atom", 1).unwrap();
        let ctx = Ctx::new(c);
        let a = full_atoms(&ctx);
        let sq = a.product(&a).unwrap();
        assert_eq!(sq.n_orbits(), 2);
    }

    #[test]
    fn square_of_atoms_has_three_orbits_over_order() {
        let mut c = Context::new(AtomSort::Ordered);
        c.register_tag("atom", 1).unwrap();
        let ctx = Ctx::new(c);
        let a = full_atoms(&ctx);
        let sq = a.product(&a).unwrap();
        assert_eq!(sq.n_orbits(), 3);
    }

    #[test]
    fn complement_of_finite_set() {
        let ctx = eq_ctx_s();
        let a = full_atoms(&ctx);
        let s = OrbitSet::comprehension(
            ctx.clone(),
            Tag::named("atom"),
            1,
            &Constraint::Or(vec![
                Constraint::Cmp(CTerm::Var(0), Rel::Eq, CTerm::Const(0)),
                Constraint::Cmp(CTerm::Var(0), Rel::Eq, CTerm::Const(1)),
            ]),
        )
        .unwrap();
        let co = a.difference(&s).unwrap();
        assert!(co.intersect(&s).unwrap().is_empty());
        assert!(co.union(&s).unwrap().equals(&a).unwrap());
        // Membership: a fresh atom is in the complement.
        assert!(co.member(&Element::new("atom", vec![Atom::int(9)])).unwrap());
        assert!(!co.member(&Element::new("atom", vec![Atom::int(1)])).unwrap());
        // least support of the complement is exactly {c1, c2}.
        assert_eq!(co.least_support(), vec![0, 1]);
        // And the full set of atoms is equivariant.
        assert_eq!(a.least_support(), Vec::<u32>::new());
    }

    #[test]
    fn subset_of_empty() {
        let ctx = eq_ctx_s();
        let x = full_atoms(&ctx);
        let e = OrbitSet::empty(ctx);
        assert!(e.subset(&x).unwrap());
        assert!(!x.subset(&e).unwrap());
    }

    #[test]
    fn orbits_under_examples() {
        let ctx = eq_ctx_s();
        let a = full_atoms(&ctx);
        // Equivariant: one cell under no constants.
        assert_eq!(a.orbits_under(&[]).unwrap().len(), 1);
        // Under {c1} over equality: {c1} and its complement.
        assert_eq!(a.orbits_under(&[0]).unwrap().len(), 2);

        let mut c = Context::new(AtomSort::Ordered);
        c.add_const("c1", Atom::int(1)).unwrap();
        c.register_tag("atom", 1).unwrap();
        let octx = Ctx::new(c);
        let oa = full_atoms(&octx);
        // below, equal, above
        assert_eq!(oa.orbits_under(&[0]).unwrap().len(), 3);
        assert_eq!(oa.count_supported_subsets(&[0]).unwrap(), 8);
        assert_eq!(a.count_supported_subsets(&[0]).unwrap(), 4);
        assert_eq!(a.count_supported_subsets(&[]).unwrap(), 2);
    }

    #[test]
    fn interval_support_is_endpoints() {
        let mut c = Context::new(AtomSort::Ordered);
        c.add_const("a", Atom::int(1)).unwrap();
        c.add_const("b", Atom::int(5)).unwrap();
        c.register_tag("atom", 1).unwrap();
        let ctx = Ctx::new(c);
        let iv = OrbitSet::comprehension(
            ctx,
            Tag::named("atom"),
            1,
            &Constraint::And(vec![
                Constraint::Cmp(CTerm::Const(0), Rel::Lt, CTerm::Var(0)),
                Constraint::Cmp(CTerm::Var(0), Rel::Lt, CTerm::Const(1)),
            ]),
        )
        .unwrap();
        assert_eq!(iv.least_support(), vec![0, 1]);
        assert_eq!(iv.n_orbits(), 1);
    }

    #[test]
    fn image_examples() {
        let ctx = {
            let mut c = Context::new(AtomSort::Ordered);
            c.add_const("c1", Atom::int(3)).unwrap();
            c.register_tag("atom", 1).unwrap();
            Ctx::new(c)
        };
        // identity relation
        let id = OrbitRelation::comprehension(
            ctx.clone(),
            Tag::named("atom"),
            1,
            Tag::named("atom"),
            1,
            &Constraint::Cmp(CTerm::Var(0), Rel::Eq, CTerm::Var(1)),
        )
        .unwrap();
        let x = OrbitSet::comprehension(
            ctx.clone(),
            Tag::named("atom"),
            1,
            &Constraint::Cmp(CTerm::Var(0), Rel::Gt, CTerm::Const(0)),
        )
        .unwrap();
        assert!(id.image(&x).unwrap().equals(&x).unwrap());
        assert!(id.image(&OrbitSet::empty(ctx.clone())).unwrap().is_empty());

        // strict order: image of {c1} is the open ray above c1
        let lt = OrbitRelation::comprehension(
            ctx.clone(),
            Tag::named("atom"),
            1,
            Tag::named("atom"),
            1,
            &Constraint::Cmp(CTerm::Var(0), Rel::Lt, CTerm::Var(1)),
        )
        .unwrap();
        let c1 = OrbitSet::comprehension(
            ctx.clone(),
            Tag::named("atom"),
            1,
            &Constraint::Cmp(CTerm::Var(0), Rel::Eq, CTerm::Const(0)),
        )
        .unwrap();
        let ray = OrbitSet::comprehension(
            ctx.clone(),
            Tag::named("atom"),
            1,
            &Constraint::Cmp(CTerm::Var(0), Rel::Gt, CTerm::Const(0)),
        )
        .unwrap();
        assert!(lt.image(&c1).unwrap().equals(&ray).unwrap());
    }

    #[test]
    fn four_equivariant_binary_relations_over_equality() {
        // Pair orbits of atom x atom over the empty context: diagonal and
        // off-diagonal. Equivariant relations are unions of these.
        let mut c = Context::new(AtomSort::Equality);
        c.register_tag("atom", 1).unwrap();
        let ctx = Ctx::new(c);
        let full = OrbitRelation::comprehension(ctx, Tag::named("atom"), 1, Tag::named("atom"), 1, &Constraint::tt()).unwrap();
        assert_eq!(full.pairs().len(), 2);
        assert_eq!(1usize << full.pairs().len(), 4);
    }

    #[test]
    fn support_lattice_property() {
        // X supported by T iff T contains the least support.
        let ctx = eq_ctx_s();
        let a = full_atoms(&ctx);
        let s = OrbitSet::comprehension(
            ctx.clone(),
            Tag::named("atom"),
            1,
            &Constraint::Cmp(CTerm::Var(0), Rel::Ne, CTerm::Const(0)),
        )
        .unwrap();
        let least = s.least_support();
        assert_eq!(least, vec![0]);
        for t in [vec![], vec![0], vec![1], vec![0, 1]] {
            let expect = least.iter().all(|c| t.contains(c));
            assert_eq!(s.supported_by(&t), expect, "T = {t:?}");
        }
        assert!(a.supported_by(&[]));
    }

    #[test]
    fn enumerate_concretization() {
        let ctx = eq_ctx_s();
        let s = OrbitSet::comprehension(
            ctx,
            Tag::named("atom"),
            1,
            &Constraint::Cmp(CTerm::Var(0), Rel::Ne, CTerm::Const(0)),
        )
        .unwrap();
        let pool = [Atom::int(1), Atom::int(2), Atom::int(7)];
        let got = s.enumerate(&pool);
        assert_eq!(
            got,
            vec![
                Element::new("atom", vec![Atom::int(2)]),
                Element::new("atom", vec![Atom::int(7)]),
            ]
        );
    }
}
