//! Atomic Kripke models: orbit-finite state sets with finitely supported
//! transition and satisfaction relations, a text DSL to define them, and
//! the example-model families used throughout the test suites.

use crate::atoms::{self, Atom, AtomError, AtomSort, Constraint, Context, Ctx};
use crate::orbits::{Element, Orbit, OrbitRelation, OrbitSet, PairOrbit, Tag};
use crate::surface::{parse_constraint, Lexer, ParseError, SConstraint, Tok};
use num_rational::Rational64;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Atoms(#[from] AtomError),
    #[error("transition or label mentions undeclared state tag `{0}`")]
    UndeclaredState(String),
    #[error("relation escapes the declared state set at tag `{0}`")]
    EscapesStates(String),
    #[error("state `{0}` is outside the model")]
    NoSuchState(String),
    #[error("unknown builtin model `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin `{name}`: {msg}")]
    BuiltinParams { name: String, msg: String },
}

/// An orbit-finite Kripke model over a declared context.
///
/// Basic predicates are tagged atom terms; `sat` relates states to them,
/// and `predicates` is the union of everything that can hold somewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KripkeModel {
    pub ctx: Ctx,
    pub states: OrbitSet,
    pub trans: OrbitRelation,
    pub sat: OrbitRelation,
    pub predicates: OrbitSet,
    /// Original declarations, kept so the printer can reproduce the source.
    decls: Vec<Decl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Decl {
    State {
        tag: String,
        vars: Vec<String>,
        constraint: SConstraint,
    },
    Label {
        tag: String,
        vars: Vec<String>,
        ptag: String,
        args: Vec<String>,
        constraint: SConstraint,
    },
    Trans {
        tag: String,
        vars: Vec<String>,
        tag2: String,
        vars2: Vec<String>,
        constraint: SConstraint,
    },
}

/// How the predicates of one state orbit look: each template pins every
/// predicate argument to a state argument or a constant, so the predicate
/// set of a concrete state is finite and directly instantiable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateArg {
    StateVar(u32),
    Const(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PredTemplate {
    pub tag: Tag,
    pub args: Vec<TemplateArg>,
}

/// Predicate shape of a state orbit: a finite template list, or infinite
/// (some satisfaction orbit leaves a predicate argument unpinned).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredShape {
    Finite(Vec<PredTemplate>),
    Infinite,
}

impl KripkeModel {
    /// Assembles a model from symbolic parts, validating endpoint
    /// containment and synthesizing declarations so the printer works.
    pub fn from_parts(
        ctx: Ctx,
        states: OrbitSet,
        trans: OrbitRelation,
        sat: OrbitRelation,
    ) -> Result<KripkeModel, ModelError> {
        let mut decls = Vec::new();
        for o in states.orbits() {
            let vars: Vec<String> = (0..o.arity()).map(|i| format!("v{}", i + 1)).collect();
            decls.push(Decl::State {
                tag: o.tag.to_string(),
                vars: vars.clone(),
                constraint: sconstraint_of_type(&o.ty, &vars, &ctx),
            });
        }
        for p in trans.pairs() {
            for (o, name) in [
                (p.left_orbit(&ctx), &p.left_tag),
                (p.right_orbit(&ctx), &p.right_tag),
            ] {
                if !states.contains_orbit(&o) {
                    return Err(ModelError::EscapesStates(name.to_string()));
                }
            }
            let vars: Vec<String> = (0..p.left_arity).map(|i| format!("v{}", i + 1)).collect();
            let vars2: Vec<String> = (0..p.right_arity).map(|i| format!("w{}", i + 1)).collect();
            let all: Vec<String> = vars.iter().chain(vars2.iter()).cloned().collect();
            decls.push(Decl::Trans {
                tag: p.left_tag.to_string(),
                vars: vars.clone(),
                tag2: p.right_tag.to_string(),
                vars2: vars2.clone(),
                constraint: sconstraint_of_type(&p.ty, &all, &ctx),
            });
        }
        for p in sat.pairs() {
            if !states.contains_orbit(&p.left_orbit(&ctx)) {
                return Err(ModelError::EscapesStates(p.left_tag.to_string()));
            }
            let vars: Vec<String> = (0..p.left_arity).map(|i| format!("v{}", i + 1)).collect();
            let args: Vec<String> = (0..p.right_arity).map(|i| format!("w{}", i + 1)).collect();
            let all: Vec<String> = vars.iter().chain(args.iter()).cloned().collect();
            decls.push(Decl::Label {
                tag: p.left_tag.to_string(),
                vars: vars.clone(),
                ptag: p.right_tag.to_string(),
                args: args.clone(),
                constraint: sconstraint_of_type(&p.ty, &all, &ctx),
            });
        }
        let predicates = sat.right_projection();
        Ok(KripkeModel {
            ctx,
            states,
            trans,
            sat,
            predicates,
            decls,
        })
    }

    /// Successor set of a set of states.
    pub fn successors(&self, set: &OrbitSet) -> Result<OrbitSet, AtomError> {
        self.trans.image(set)
    }

    /// The satisfaction relation restricted to the given states.
    pub fn pred_of(&self, set: &OrbitSet) -> Result<OrbitRelation, AtomError> {
        self.sat.restrict_left(set)
    }

    pub fn contains_state(&self, x: &Element) -> Result<bool, AtomError> {
        self.states.member(x)
    }

    /// Classifies every state orbit by predicate shape.
    pub fn pred_shapes(&self) -> BTreeMap<Orbit, PredShape> {
        let mut out: BTreeMap<Orbit, PredShape> = self
            .states
            .orbits()
            .iter()
            .map(|o| (o.clone(), PredShape::Finite(Vec::new())))
            .collect();
        for p in self.sat.pairs() {
            let left = p.left_orbit(&self.ctx);
            let entry = out.get_mut(&left).expect("validated: left in states");
            match (&mut *entry, template_of_pair(p)) {
                (PredShape::Finite(ts), Some(t)) => {
                    ts.push(t);
                    ts.sort();
                    ts.dedup();
                }
                (_, None) => *entry = PredShape::Infinite,
                (PredShape::Infinite, _) => {}
            }
        }
        out
    }

    /// Instantiates the finite predicate set of a concrete state.
    pub fn preds_of_state(&self, x: &Element) -> Result<Vec<Element>, ModelError> {
        let ty = atoms::type_of(&x.args, &self.ctx);
        let orbit = Orbit {
            tag: x.tag.clone(),
            ty,
        };
        if !self.states.contains_orbit(&orbit) {
            return Err(ModelError::NoSuchState(x.to_string()));
        }
        let shapes = self.pred_shapes();
        match shapes.get(&orbit) {
            Some(PredShape::Finite(ts)) => {
                let mut out: Vec<Element> = ts
                    .iter()
                    .map(|t| Element {
                        tag: t.tag.clone(),
                        args: t
                            .args
                            .iter()
                            .map(|a| match a {
                                TemplateArg::StateVar(v) => x.args[*v as usize],
                                TemplateArg::Const(c) => self.ctx.const_atom(*c),
                            })
                            .collect(),
                    })
                    .collect();
                out.sort();
                out.dedup();
                Ok(out)
            }
            _ => Err(ModelError::NoSuchState(format!(
                "{x}: predicate set is not finite"
            ))),
        }
    }
}

/// Pins each right-hand argument of a satisfaction pair orbit to a state
/// variable or constant; `None` when some argument is unpinned.
fn template_of_pair(p: &PairOrbit) -> Option<PredTemplate> {
    let mut args = Vec::new();
    for j in 0..p.right_arity {
        let v = p.left_arity + j;
        let bi = p.ty.block_of_var(v);
        let block = &p.ty.blocks()[bi];
        if let Some(c) = block.konst {
            args.push(TemplateArg::Const(c));
        } else if let Some(&w) = block.vars.iter().find(|&&w| w < p.left_arity) {
            args.push(TemplateArg::StateVar(w));
        } else {
            return None;
        }
    }
    Some(PredTemplate {
        tag: p.right_tag.clone(),
        args,
    })
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parses the model DSL:
///
/// ```text
/// atoms (equality|ordered)
/// const c1 [= 5] < c2 [= 7] < ...
/// state Tag(v1,...,vn) [where <constraint>]
/// label Tag(v...) : ptag(args) [where <constraint>]
/// trans Tag(v...) -> Tag2(w...) [where <constraint>]
/// ```
///
/// Comments start with `#`. Constants without explicit witnesses get
/// consecutive integers. Transition and label endpoints must stay within
/// the declared state orbits.
pub fn parse_model(src: &str) -> Result<KripkeModel, ModelError> {
    let mut lx = Lexer::new(src)?;
    let sort = {
        if !lx.eat_kw("atoms") {
            return Err(lx.error("model must start with `atoms equality|ordered`").into());
        }
        if lx.eat_kw("equality") {
            AtomSort::Equality
        } else if lx.eat_kw("ordered") {
            AtomSort::Ordered
        } else {
            return Err(lx.error("expected `equality` or `ordered`").into());
        }
    };
    let mut ctx = Context::new(sort);
    let mut decls = Vec::new();
    loop {
        if lx.peek() == &Tok::Eof {
            break;
        }
        if lx.eat_kw("const") {
            let mut next_auto = next_auto_witness(&ctx);
            loop {
                let name = lx.expect_ident().map_err(ParseError::from)?;
                let w = if lx.eat_sym("=") {
                    parse_atom_literal(&mut lx)?
                } else {
                    let a = Atom(next_auto);
                    a
                };
                ctx.add_const(&name, w)?;
                next_auto = next_auto_witness(&ctx);
                if lx.eat_sym("<") {
                    if sort == AtomSort::Equality {
                        return Err(lx
                            .error("`<` chains are only meaningful over ordered atoms")
                            .into());
                    }
                    continue;
                }
                if lx.eat_sym(",") {
                    continue;
                }
                break;
            }
            continue;
        }
        if lx.eat_kw("state") {
            let (tag, vars) = parse_head(&mut lx)?;
            let constraint = parse_opt_where(&mut lx)?;
            decls.push(Decl::State {
                tag,
                vars,
                constraint,
            });
            continue;
        }
        if lx.eat_kw("label") {
            let (tag, vars) = parse_head(&mut lx)?;
            lx.expect_sym(":").map_err(ParseError::from)?;
            let (ptag, args) = parse_head(&mut lx)?;
            let constraint = parse_opt_where(&mut lx)?;
            decls.push(Decl::Label {
                tag,
                vars,
                ptag,
                args,
                constraint,
            });
            continue;
        }
        if lx.eat_kw("trans") {
            let (tag, vars) = parse_head(&mut lx)?;
            lx.expect_sym("->").map_err(ParseError::from)?;
            let (tag2, vars2) = parse_head(&mut lx)?;
            let constraint = parse_opt_where(&mut lx)?;
            decls.push(Decl::Trans {
                tag,
                vars,
                tag2,
                vars2,
                constraint,
            });
            continue;
        }
        return Err(lx
            .error(format!(
                "expected `const`, `state`, `label` or `trans`, found {}",
                lx.peek()
            ))
            .into());
    }
    build_model(ctx, decls)
}

fn next_auto_witness(ctx: &Context) -> Rational64 {
    let max = (0..ctx.n_consts() as u32)
        .map(|c| ctx.const_atom(c).0.ceil().to_integer())
        .max()
        .unwrap_or(0);
    Rational64::from_integer(max + 1)
}

fn parse_atom_literal(lx: &mut Lexer) -> Result<Atom, ParseError> {
    let neg = lx.eat_sym("-");
    match lx.bump() {
        Tok::Number(n, d) => {
            let v = Rational64::new(n, d);
            Ok(Atom(if neg { -v } else { v }))
        }
        t => Err(lx.error(format!("expected a number, found {t}"))),
    }
}

fn parse_head(lx: &mut Lexer) -> Result<(String, Vec<String>), ModelError> {
    let tag = lx.expect_ident().map_err(ParseError::from)?;
    let mut vars = Vec::new();
    lx.expect_sym("(").map_err(ParseError::from)?;
    while !lx.eat_sym(")") {
        if !vars.is_empty() {
            lx.expect_sym(",").map_err(ParseError::from)?;
        }
        vars.push(lx.expect_ident().map_err(ParseError::from)?);
    }
    Ok((tag, vars))
}

fn parse_opt_where(lx: &mut Lexer) -> Result<SConstraint, ModelError> {
    if lx.eat_kw("where") {
        Ok(parse_constraint(lx)?)
    } else {
        Ok(SConstraint::tt())
    }
}

fn build_model(mut ctx: Context, decls: Vec<Decl>) -> Result<KripkeModel, ModelError> {
    // Register state tags first, then predicate tags.
    let mut state_tags: BTreeMap<String, usize> = BTreeMap::new();
    for d in &decls {
        if let Decl::State { tag, vars, .. } = d {
            state_tags.insert(tag.clone(), vars.len());
            ctx.register_tag(tag, vars.len())?;
        }
    }
    for d in &decls {
        if let Decl::Label { ptag, args, .. } = d {
            ctx.register_pred_tag(ptag, args.len())?;
        }
    }
    let ctx = Ctx::new(ctx);

    let compile = |vars: &[String], c: &SConstraint| -> Result<Constraint, ModelError> {
        let locals: Vec<String> = vars.to_vec();
        Ok(c.compile(&locals, &|n| ctx.const_id(n))?)
    };

    let mut states = OrbitSet::empty(ctx.clone());
    for d in &decls {
        if let Decl::State {
            tag,
            vars,
            constraint,
        } = d
        {
            let c = compile(vars, constraint)?;
            let s = OrbitSet::comprehension(ctx.clone(), Tag::named(tag), vars.len(), &c)?;
            states = states.union(&s)?;
        }
    }

    let mut trans = OrbitRelation::empty(ctx.clone());
    let mut sat = OrbitRelation::empty(ctx.clone());
    for d in &decls {
        match d {
            Decl::State { .. } => {}
            Decl::Trans {
                tag,
                vars,
                tag2,
                vars2,
                constraint,
            } => {
                for t in [tag, tag2] {
                    if !state_tags.contains_key(t) {
                        return Err(ModelError::UndeclaredState(t.clone()));
                    }
                }
                let (joint, extra) = joint_locals(vars, vars2);
                let mut c = constraint.compile(&joint, &|n| ctx.const_id(n))?;
                c = Constraint::and(vec![c, extra]);
                let r = OrbitRelation::comprehension(
                    ctx.clone(),
                    Tag::named(tag),
                    vars.len(),
                    Tag::named(tag2),
                    vars2.len(),
                    &c,
                )?;
                trans = trans.union(&r)?;
            }
            Decl::Label {
                tag,
                vars,
                ptag,
                args,
                constraint,
            } => {
                if !state_tags.contains_key(tag) {
                    return Err(ModelError::UndeclaredState(tag.clone()));
                }
                let (joint, extra) = joint_locals(vars, args);
                let mut c = constraint.compile(&joint, &|n| ctx.const_id(n))?;
                c = Constraint::and(vec![c, extra]);
                let r = OrbitRelation::comprehension(
                    ctx.clone(),
                    Tag::named(tag),
                    vars.len(),
                    Tag::pred(ptag),
                    args.len(),
                    &c,
                )?;
                sat = sat.union(&r)?;
            }
        }
    }

    // Endpoint containment.
    for p in trans.pairs() {
        for (o, name) in [
            (p.left_orbit(&ctx), &p.left_tag),
            (p.right_orbit(&ctx), &p.right_tag),
        ] {
            if !states.contains_orbit(&o) {
                return Err(ModelError::EscapesStates(name.to_string()));
            }
        }
    }
    for p in sat.pairs() {
        if !states.contains_orbit(&p.left_orbit(&ctx)) {
            return Err(ModelError::EscapesStates(p.left_tag.to_string()));
        }
    }

    let predicates = sat.right_projection();
    Ok(KripkeModel {
        ctx,
        states,
        trans,
        sat,
        predicates,
        decls,
    })
}

/// Left and right variable lists, sharing repeated names through fresh
/// right-side variables pinned by equations. `r` entries that name a left
/// variable or a constant are translated to equality constraints.
pub(crate) fn joint_locals_pub(l: &[String], r: &[String]) -> (Vec<String>, Constraint) {
    joint_locals(l, r)
}

fn joint_locals(l: &[String], r: &[String]) -> (Vec<String>, Constraint) {
    let mut joint: Vec<String> = l.to_vec();
    let mut eqs = Vec::new();
    for (j, name) in r.iter().enumerate() {
        let idx = (l.len() + j) as u32;
        if l.contains(name) || joint[..l.len()].contains(name) {
            let li = l.iter().position(|x| x == name).unwrap() as u32;
            joint.push(format!("~r{j}"));
            eqs.push(Constraint::Cmp(
                atoms::CTerm::Var(idx),
                atoms::Rel::Eq,
                atoms::CTerm::Var(li),
            ));
        } else if r[..j].contains(name) {
            let prev = r.iter().position(|x| x == name).unwrap() as u32;
            joint.push(format!("~r{j}"));
            eqs.push(Constraint::Cmp(
                atoms::CTerm::Var(idx),
                atoms::Rel::Eq,
                atoms::CTerm::Var(l.len() as u32 + prev),
            ));
        } else {
            joint.push(name.clone());
        }
    }
    (joint, Constraint::and(eqs))
}

/// Prints a model back in the DSL grammar; parsing the output rebuilds an
/// equal model.
pub fn print_model(m: &KripkeModel) -> String {
    let mut s = String::new();
    let sort = match m.ctx.sort() {
        AtomSort::Equality => "equality",
        AtomSort::Ordered => "ordered",
    };
    writeln!(s, "atoms {sort}").unwrap();
    if m.ctx.n_consts() > 0 {
        write!(s, "const ").unwrap();
        let sep = match m.ctx.sort() {
            AtomSort::Ordered => " < ",
            AtomSort::Equality => ", ",
        };
        let parts: Vec<String> = (0..m.ctx.n_consts() as u32)
            .map(|c| format!("{} = {}", m.ctx.const_name(c), m.ctx.const_atom(c)))
            .collect();
        writeln!(s, "{}", parts.join(sep)).unwrap();
    }
    for d in &m.decls {
        match d {
            Decl::State {
                tag,
                vars,
                constraint,
            } => {
                write!(s, "state {tag}({})", vars.join(",")).unwrap();
                if constraint != &SConstraint::Bool(true) {
                    write!(s, " where {constraint}").unwrap();
                }
                writeln!(s).unwrap();
            }
            Decl::Label {
                tag,
                vars,
                ptag,
                args,
                constraint,
            } => {
                write!(s, "label {tag}({}) : {ptag}({})", vars.join(","), args.join(",")).unwrap();
                if constraint != &SConstraint::Bool(true) {
                    write!(s, " where {constraint}").unwrap();
                }
                writeln!(s).unwrap();
            }
            Decl::Trans {
                tag,
                vars,
                tag2,
                vars2,
                constraint,
            } => {
                write!(s, "trans {tag}({}) -> {tag2}({})", vars.join(","), vars2.join(",")).unwrap();
                if constraint != &SConstraint::Bool(true) {
                    write!(s, " where {constraint}").unwrap();
                }
                writeln!(s).unwrap();
            }
        }
    }
    s
}

/// Parses a state element: `tag` or `tag(5, 7/2, ...)`.
pub fn parse_element(src: &str) -> Result<Element, ModelError> {
    let mut lx = Lexer::new(src)?;
    let tag = lx.expect_ident().map_err(ParseError::from)?;
    let mut args = Vec::new();
    if lx.eat_sym("(") {
        while !lx.eat_sym(")") {
            if !args.is_empty() {
                lx.expect_sym(",").map_err(ParseError::from)?;
            }
            args.push(parse_atom_literal(&mut lx)?);
        }
    }
    if lx.peek() != &Tok::Eof {
        return Err(lx.error(format!("unexpected {}", lx.peek())).into());
    }
    Ok(Element {
        tag: Tag::Named(tag),
        args,
    })
}

/// Merges two models over a shared constant table into one model whose
/// state tags are suffixed to keep the parts disjoint. Predicate tags are
/// shared, so formulas and bisimulation legality read across both parts.
pub fn disjoint_union(
    a: &KripkeModel,
    b: &KripkeModel,
    sa: &str,
    sb: &str,
) -> Result<KripkeModel, ModelError> {
    let rename = |src: &KripkeModel, suffix: &str| -> String {
        let mut out = String::new();
        for d in &src.decls {
            match d {
                Decl::State {
                    tag,
                    vars,
                    constraint,
                } => {
                    out.push_str(&format!("state {tag}_{suffix}({})", vars.join(",")));
                    if constraint != &SConstraint::Bool(true) {
                        out.push_str(&format!(" where {constraint}"));
                    }
                    out.push('\n');
                }
                Decl::Label {
                    tag,
                    vars,
                    ptag,
                    args,
                    constraint,
                } => {
                    out.push_str(&format!(
                        "label {tag}_{suffix}({}) : {ptag}({})",
                        vars.join(","),
                        args.join(",")
                    ));
                    if constraint != &SConstraint::Bool(true) {
                        out.push_str(&format!(" where {constraint}"));
                    }
                    out.push('\n');
                }
                Decl::Trans {
                    tag,
                    vars,
                    tag2,
                    vars2,
                    constraint,
                } => {
                    out.push_str(&format!(
                        "trans {tag}_{suffix}({}) -> {tag2}_{suffix}({})",
                        vars.join(","),
                        vars2.join(",")
                    ));
                    if constraint != &SConstraint::Bool(true) {
                        out.push_str(&format!(" where {constraint}"));
                    }
                    out.push('\n');
                }
            }
        }
        out
    };
    if a.ctx.sort() != b.ctx.sort() {
        return Err(ModelError::Atoms(AtomError::ContextMismatch));
    }
    // Shared constants must agree wherever names coincide.
    let mut consts: Vec<(String, Atom)> = (0..a.ctx.n_consts() as u32)
        .map(|c| (a.ctx.const_name(c).to_string(), a.ctx.const_atom(c)))
        .collect();
    for c in 0..b.ctx.n_consts() as u32 {
        let name = b.ctx.const_name(c).to_string();
        let atom = b.ctx.const_atom(c);
        match consts.iter().find(|(n, _)| n == &name) {
            Some((_, w)) if *w == atom => {}
            Some(_) => return Err(ModelError::Atoms(AtomError::DuplicateConstant(name))),
            None => consts.push((name, atom)),
        }
    }
    let mut src = String::new();
    let sort = match a.ctx.sort() {
        AtomSort::Equality => "equality",
        AtomSort::Ordered => "ordered",
    };
    writeln!(src, "atoms {sort}").unwrap();
    if !consts.is_empty() {
        if a.ctx.sort() == AtomSort::Ordered {
            consts.sort_by_key(|(_, w)| *w);
        }
        let parts: Vec<String> = consts
            .iter()
            .map(|(n, w)| format!("{n} = {w}"))
            .collect();
        let sep = match a.ctx.sort() {
            AtomSort::Ordered => " < ",
            AtomSort::Equality => ", ",
        };
        writeln!(src, "const {}", parts.join(sep)).unwrap();
    }
    src.push_str(&rename(a, sa));
    src.push_str(&rename(b, sb));
    parse_model(&src)
}

/// Maps a state of a disjoint-union part to its renamed element.
pub fn suffixed(x: &Element, suffix: &str) -> Element {
    Element {
        tag: Tag::Named(format!("{}_{suffix}", x.tag)),
        args: x.args.clone(),
    }
}

// ---------------------------------------------------------------------------
// Builtin models
// ---------------------------------------------------------------------------

/// Builds a named example model. Every builtin is generated as DSL text and
/// parsed, so each one exercises the parser and printer round trip.
///
/// Names (parameters in brackets): `star`, `increasing`, `infsucc(k)`,
/// `infsucc-ordered(k)`, `chain(n)`, `evensucc(n)`, `fan(n)`,
/// `interval-fan`, `freshpath(n)`, `freshpath-check(n)`.
pub fn builtin_model(name: &str, params: &[i64]) -> Result<KripkeModel, ModelError> {
    let need = |n: usize| -> Result<(), ModelError> {
        if params.len() != n {
            Err(ModelError::BuiltinParams {
                name: name.to_string(),
                msg: format!("expected {n} parameter(s), got {}", params.len()),
            })
        } else {
            Ok(())
        }
    };
    let positive = |v: i64, what: &str| -> Result<i64, ModelError> {
        if v <= 0 {
            Err(ModelError::BuiltinParams {
                name: name.to_string(),
                msg: format!("{what} must be positive"),
            })
        } else {
            Ok(v)
        }
    };
    let src = match name {
        // Root with an edge to one leaf per atom; the leaf for atom a
        // satisfies exactly p(a).
        "star" => {
            need(0)?;
            "atoms equality\n\
             state root()\n\
             state leaf(a)\n\
             label leaf(a) : p(a)\n\
             trans root() -> leaf(a)\n"
                .to_string()
        }
        // States are the atoms, a -> b iff a < b, each satisfying itself.
        "increasing" => {
            need(0)?;
            "atoms ordered\n\
             state at(a)\n\
             label at(a) : p(a)\n\
             trans at(a) -> at(b) where a < b\n"
                .to_string()
        }
        // Two fans: p reaches the labeled states off a 2k-element constant
        // set, q reaches exactly the constant set.
        "infsucc" | "infsucc-ordered" => {
            need(1)?;
            let k = positive(params[0], "k")?;
            let sort = if name == "infsucc" { "equality" } else { "ordered" };
            let consts: Vec<String> = (1..=2 * k).map(|i| format!("s{i}")).collect();
            let sep = if name == "infsucc" { ", " } else { " < " };
            let in_s = |v: &str| -> String {
                consts
                    .iter()
                    .map(|c| format!("{v} = {c}"))
                    .collect::<Vec<_>>()
                    .join(" or ")
            };
            let not_in_s = |v: &str| -> String {
                consts
                    .iter()
                    .map(|c| format!("{v} != {c}"))
                    .collect::<Vec<_>>()
                    .join(" and ")
            };
            format!(
                "atoms {sort}\n\
                 const {}\n\
                 state p()\n\
                 state q()\n\
                 state r(a)\n\
                 label r(a) : p(a)\n\
                 trans p() -> r(a) where {}\n\
                 trans q() -> r(a) where {}\n",
                consts.join(sep),
                not_in_s("a"),
                in_s("a"),
            )
        }
        // The two-lane chain gadget over 2n constants, finite and
        // supported by all of them.
        "chain" => {
            need(1)?;
            let n = positive(params[0], "n")?;
            if n < 2 {
                return Err(ModelError::BuiltinParams {
                    name: name.into(),
                    msg: "n must be at least 2".into(),
                });
            }
            let mut s = String::from("atoms equality\nconst ");
            let mut consts: Vec<String> = (0..=n).map(|i| format!("a{i}")).collect();
            consts.extend((1..n).map(|i| format!("b{i}")));
            s.push_str(&consts.join(", "));
            s.push('\n');
            for i in 1..=2 * n {
                s.push_str(&format!("state p{i}()\nstate q{i}()\n"));
            }
            for i in 1..n {
                s.push_str(&format!("state r{i}()\nstate s{i}()\n"));
            }
            s.push_str("state top()\nstate bot()\n");
            // Predicates: even p_i/q_i get a_{i/2-1}, odd get a_{(i+1)/2}.
            for i in 1..=2 * n {
                let a = if i % 2 == 0 { i / 2 - 1 } else { (i + 1) / 2 };
                s.push_str(&format!("label p{i}() : p(v) where v = a{a}\n"));
                s.push_str(&format!("label q{i}() : p(v) where v = a{a}\n"));
            }
            for i in 1..n {
                s.push_str(&format!("label r{i}() : p(v) where v = b{i}\n"));
                s.push_str(&format!("label s{i}() : p(v) where v = b{i}\n"));
            }
            s.push_str(&format!("label top() : p(v) where v = a{n}\n"));
            for i in 1..2 * n {
                s.push_str(&format!("trans p{i}() -> p{}()\n", i + 1));
                s.push_str(&format!("trans q{i}() -> q{}()\n", i + 1));
            }
            s.push_str(&format!("trans p{}() -> top()\n", 2 * n));
            s.push_str(&format!("trans q{}() -> bot()\n", 2 * n));
            for i in 1..n {
                s.push_str(&format!("trans p{}() -> r{i}()\n", 2 * i + 1));
                s.push_str(&format!("trans q{}() -> s{i}()\n", 2 * i + 1));
            }
            for i in 1..(n - 1) {
                s.push_str(&format!("trans r{i}() -> q{}()\n", 2 * i + 3));
                s.push_str(&format!("trans s{i}() -> p{}()\n", 2 * i + 3));
            }
            s.push_str(&format!("trans r{}() -> bot()\n", n - 1));
            s.push_str(&format!("trans s{}() -> top()\n", n - 1));
            s.push_str("trans top() -> top()\n");
            s
        }
        // p fans out to n labeled successors, q to 2n+1, with every
        // q-label above every p-label.
        "evensucc" => {
            need(1)?;
            let n = positive(params[0], "n")?;
            let mut consts: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
            consts.extend((1..=2 * n + 1).map(|i| format!("t{i}")));
            let in_set = |v: &str, names: &[String]| -> String {
                names
                    .iter()
                    .map(|c| format!("{v} = {c}"))
                    .collect::<Vec<_>>()
                    .join(" or ")
            };
            let s_names: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
            let t_names: Vec<String> = (1..=2 * n + 1).map(|i| format!("t{i}")).collect();
            format!(
                "atoms ordered\n\
                 const {}\n\
                 state p()\n\
                 state q()\n\
                 state r(a)\n\
                 label r(a) : p(a)\n\
                 trans p() -> r(a) where {}\n\
                 trans q() -> r(a) where {}\n",
                consts.join(" < "),
                in_set("a", &s_names),
                in_set("a", &t_names),
            )
        }
        // A root with n labeled leaves (ordered atoms, labels l1 < ... < ln).
        "fan" => {
            need(1)?;
            let n = positive(params[0], "n")?;
            let consts: Vec<String> = (1..=n).map(|i| format!("l{i}")).collect();
            let cond = consts
                .iter()
                .map(|c| format!("a = {c}"))
                .collect::<Vec<_>>()
                .join(" or ");
            format!(
                "atoms ordered\n\
                 const {}\n\
                 state root()\n\
                 state leaf(a) where {cond}\n\
                 label leaf(a) : p(a) where {cond}\n\
                 trans root() -> leaf(a) where {cond}\n",
                consts.join(" < "),
            )
        }
        // A root whose successors carry every label in the open interval
        // (c1; c2): infinitely many, so never finite-and-even.
        "interval-fan" => {
            need(0)?;
            "atoms ordered\n\
             const c1 < c2\n\
             state root()\n\
             state leaf(a) where c1 < a and a < c2\n\
             label leaf(a) : p(a) where c1 < a and a < c2\n\
             trans root() -> leaf(a) where c1 < a and a < c2\n"
                .to_string()
        }
        // Three-phase fresh-path witness model over constants
        // a1 < b1 < ... < an < bn, and its sub-model with the all-fresh
        // second-phase row removed.
        "freshpath" | "freshpath-check" => {
            need(1)?;
            let n = positive(params[0], "n")?;
            let keep_q0 = name == "freshpath";
            let mut s = String::from("atoms ordered\nconst ");
            let mut consts = Vec::new();
            for i in 1..=n {
                consts.push(format!("a{i}"));
                consts.push(format!("b{i}"));
            }
            s.push_str(&consts.join(" < "));
            s.push('\n');
            for i in 1..=n {
                s.push_str(&format!("state p{i}()\nlabel p{i}() : p(v) where v = a{i}\n"));
            }
            let rows: Vec<i64> = if keep_q0 { (0..=n).collect() } else { (1..=n).collect() };
            for &i in &rows {
                for j in 1..=n {
                    let lab = if i == j { format!("a{j}") } else { format!("b{j}") };
                    s.push_str(&format!(
                        "state q{i}_{j}()\nlabel q{i}_{j}() : p(v) where v = {lab}\n"
                    ));
                }
            }
            s.push_str("state r(c)\nlabel r(c) : p(c)\n");
            for i in 1..n {
                s.push_str(&format!("trans p{i}() -> p{}()\n", i + 1));
            }
            for &i in &rows {
                s.push_str(&format!("trans p{n}() -> q{i}_1()\n"));
                for j in 1..n {
                    s.push_str(&format!("trans q{i}_{j}() -> q{i}_{}()\n", j + 1));
                }
                s.push_str(&format!("trans q{i}_{n}() -> r(c)\n"));
            }
            s.push_str("trans r(c) -> r(d)\n");
            s
        }
        _ => return Err(ModelError::UnknownBuiltin(name.to_string())),
    };
    parse_model(&src)
}

/// Parses either `builtin:name(p1,p2,...)` or reads a model file path.
pub fn builtin_model_names() -> Vec<&'static str> {
    vec![
        "star",
        "increasing",
        "infsucc",
        "infsucc-ordered",
        "chain",
        "evensucc",
        "fan",
        "interval-fan",
        "freshpath",
        "freshpath-check",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_has_two_state_orbits_and_one_transition_orbit() {
        let m = builtin_model("star", &[]).unwrap();
        assert_eq!(m.states.n_orbits(), 2);
        assert_eq!(m.trans.pairs().len(), 1);
        assert_eq!(m.states.least_support(), Vec::<u32>::new());
    }

    #[test]
    fn star_successors_and_preds() {
        let m = builtin_model("star", &[]).unwrap();
        let root = OrbitSet::singleton(m.ctx.clone(), &Element::new("root", vec![])).unwrap();
        let succ = m.successors(&root).unwrap();
        let leaves =
            OrbitSet::comprehension(m.ctx.clone(), Tag::named("leaf"), 1, &Constraint::tt()).unwrap();
        assert!(succ.equals(&leaves).unwrap());
        assert!(m.pred_of(&root).unwrap().is_empty());
        // Leaves are dead ends.
        assert!(m.successors(&leaves).unwrap().is_empty());
    }

    #[test]
    fn increasing_model_shape() {
        let m = builtin_model("increasing", &[]).unwrap();
        assert_eq!(m.states.n_orbits(), 1);
        assert_eq!(m.trans.pairs().len(), 1);
        assert_eq!(m.states.least_support(), Vec::<u32>::new());
    }

    #[test]
    fn transition_into_undeclared_orbit_is_rejected() {
        let src = "atoms equality\nstate a()\ntrans a() -> nowhere()\n";
        assert!(matches!(
            parse_model(src),
            Err(ModelError::UndeclaredState(_))
        ));
    }

    #[test]
    fn escaping_transition_is_rejected() {
        let src = "atoms equality\nconst c1\n\
                   state s(a) where a = c1\n\
                   trans s(a) -> s(b)\n";
        assert!(matches!(parse_model(src), Err(ModelError::EscapesStates(_))));
    }

    #[test]
    fn empty_model_is_valid() {
        let m = parse_model("atoms equality\n").unwrap();
        assert_eq!(m.states.n_orbits(), 0);
    }

    #[test]
    fn builtins_round_trip_through_printer() {
        for (name, params) in [
            ("star", vec![]),
            ("increasing", vec![]),
            ("infsucc", vec![1]),
            ("infsucc-ordered", vec![1]),
            ("chain", vec![3]),
            ("evensucc", vec![2]),
            ("fan", vec![3]),
            ("interval-fan", vec![]),
            ("freshpath", vec![3]),
            ("freshpath-check", vec![3]),
        ] {
            let m = builtin_model(name, &params).unwrap();
            let printed = print_model(&m);
            let back = parse_model(&printed).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(back.states.equals(&m.states).unwrap(), "{name}");
            assert_eq!(back.trans, m.trans, "{name}");
            assert_eq!(back.sat, m.sat, "{name}");
        }
    }

    #[test]
    fn chain_support_is_all_constants() {
        let m = builtin_model("chain", &[3]).unwrap();
        // 2n constants for n = 3.
        assert_eq!(m.ctx.n_consts(), 6);
        let mut support = m.states.least_support();
        support.extend(
            m.sat
                .pairs()
                .iter()
                .flat_map(|p| p.ty.blocks())
                .filter_map(|b| b.konst),
        );
        support.sort_unstable();
        support.dedup();
        assert_eq!(support.len(), 6);
    }

    #[test]
    fn freshpath_phase_counts() {
        let k = builtin_model("freshpath", &[3]).unwrap();
        let kc = builtin_model("freshpath-check", &[3]).unwrap();
        let count = |m: &KripkeModel, prefix: &str| {
            m.states
                .orbits()
                .iter()
                .filter(|o| matches!(&o.tag, Tag::Named(t) if t.starts_with(prefix)))
                .count()
        };
        assert_eq!(count(&k, "p"), 3);
        assert_eq!(count(&k, "q"), 12);
        assert_eq!(count(&kc, "q"), 9);
        // Phase III is a single equivariant orbit (split into finer
        // ctx-orbits by the six constants).
        let r_part = OrbitSet::from_orbits(
            k.ctx.clone(),
            k.states
                .orbits()
                .iter()
                .filter(|o| o.tag == Tag::named("r"))
                .cloned()
                .collect(),
        );
        assert_eq!(r_part.least_support(), Vec::<u32>::new());
        assert_eq!(r_part.orbits_under(&[]).unwrap().len(), 1);
    }

    #[test]
    fn infsucc_fans() {
        let m = builtin_model("infsucc", &[2]).unwrap();
        assert_eq!(m.ctx.n_consts(), 4);
        let p = OrbitSet::singleton(m.ctx.clone(), &Element::new("p", vec![])).unwrap();
        let q = OrbitSet::singleton(m.ctx.clone(), &Element::new("q", vec![])).unwrap();
        // q reaches exactly the 4 constant-labeled states.
        assert_eq!(m.successors(&q).unwrap().n_orbits(), 4);
        // p reaches the single co-finite orbit.
        assert_eq!(m.successors(&p).unwrap().n_orbits(), 1);
    }

    #[test]
    fn pred_shapes_and_instances() {
        let m = builtin_model("star", &[]).unwrap();
        let shapes = m.pred_shapes();
        let root = Orbit {
            tag: Tag::named("root"),
            ty: atoms::type_of(&[], &m.ctx),
        };
        assert_eq!(shapes[&root], PredShape::Finite(vec![]));
        let leaf = Element::new("leaf", vec![Atom::int(7)]);
        let preds = m.preds_of_state(&leaf).unwrap();
        assert_eq!(
            preds,
            vec![Element {
                tag: Tag::pred("p"),
                args: vec![Atom::int(7)],
            }]
        );
    }

    #[test]
    fn disjoint_union_keeps_predicates_shared() {
        let a = builtin_model("freshpath", &[3]).unwrap();
        let b = builtin_model("freshpath-check", &[3]).unwrap();
        let u = disjoint_union(&a, &b, "l", "r").unwrap();
        assert_eq!(
            u.states.n_orbits(),
            a.states.n_orbits() + b.states.n_orbits()
        );
        assert!(u.contains_state(&Element::new("p1_l", vec![])).unwrap());
        assert!(u.contains_state(&Element::new("p1_r", vec![])).unwrap());
    }
}
