//! Syntax and static analysis for the atomic modal mu-calculus, scalar and
//! vectorial.
//!
//! Formulas carry orbit-binder connectives (`OR a where c . f`, dually
//! `AND`) and fixpoints over atom-indexed systems of equations.  A scalar
//! fixpoint is the degenerate system with one equation and no parameters.
//! Fixpoint variables may take atom arguments, which realizes an
//! orbit-finite family of equations as a single parameterized equation.

use crate::atoms::Rel;
use crate::surface::{parse_constraint, Lexer, ParseError, SConstraint, Tok};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixKind {
    Mu,
    Nu,
}

impl FixKind {
    pub fn dual(self) -> FixKind {
        match self {
            FixKind::Mu => FixKind::Nu,
            FixKind::Nu => FixKind::Mu,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            FixKind::Mu => "mu",
            FixKind::Nu => "nu",
        }
    }
}

/// Atom binder of an orbit connective: variables plus the constraint that
/// carves the index orbit out of full tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binder {
    pub vars: Vec<String>,
    pub constraint: SConstraint,
}

/// One parameterized equation `X(params) where c := body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub var: String,
    pub params: Vec<String>,
    pub constraint: SConstraint,
    pub body: Formula,
}

/// A fixpoint over a system of equations, entered at `entry(entry_args)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixSystem {
    pub kind: FixKind,
    pub entry: String,
    pub entry_args: Vec<String>,
    pub equations: Vec<Equation>,
}

impl FixSystem {
    /// A scalar fixpoint: one variable, no atom parameters.
    pub fn is_scalar(&self) -> bool {
        self.equations.len() == 1
            && self.equations[0].params.is_empty()
            && self.equations[0].constraint == SConstraint::Bool(true)
    }

    pub fn binds(&self, name: &str) -> bool {
        self.equations.iter().any(|e| e.var == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Bool(bool),
    /// Basic predicate `p(t1..tn)`; arguments name binder atoms or context
    /// constants.
    Pred(String, Vec<String>),
    /// Fixpoint variable occurrence `X(t1..tn)`.
    Var(String, Vec<String>),
    Not(Box<Formula>),
    Or(Vec<Formula>),
    And(Vec<Formula>),
    OrbitOr(Binder, Box<Formula>),
    OrbitAnd(Binder, Box<Formula>),
    Diamond(Box<Formula>),
    Square(Box<Formula>),
    Fix(Box<FixSystem>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn or2(a: Formula, b: Formula) -> Formula {
        Formula::Or(vec![a, b])
    }

    pub fn and2(a: Formula, b: Formula) -> Formula {
        Formula::And(vec![a, b])
    }

    pub fn diamond(f: Formula) -> Formula {
        Formula::Diamond(Box::new(f))
    }

    pub fn square(f: Formula) -> Formula {
        Formula::Square(Box::new(f))
    }

    pub fn pred(tag: &str, args: &[&str]) -> Formula {
        Formula::Pred(tag.to_string(), args.iter().map(|s| s.to_string()).collect())
    }

    pub fn var(name: &str, args: &[&str]) -> Formula {
        Formula::Var(name.to_string(), args.iter().map(|s| s.to_string()).collect())
    }

    pub fn orbit_or(vars: &[&str], c: SConstraint, body: Formula) -> Formula {
        Formula::OrbitOr(
            Binder {
                vars: vars.iter().map(|s| s.to_string()).collect(),
                constraint: c,
            },
            Box::new(body),
        )
    }

    pub fn orbit_and(vars: &[&str], c: SConstraint, body: Formula) -> Formula {
        Formula::OrbitAnd(
            Binder {
                vars: vars.iter().map(|s| s.to_string()).collect(),
                constraint: c,
            },
            Box::new(body),
        )
    }

    pub fn mu(var: &str, body: Formula) -> Formula {
        Formula::Fix(Box::new(FixSystem {
            kind: FixKind::Mu,
            entry: var.to_string(),
            entry_args: vec![],
            equations: vec![Equation {
                var: var.to_string(),
                params: vec![],
                constraint: SConstraint::tt(),
                body,
            }],
        }))
    }

    pub fn nu(var: &str, body: Formula) -> Formula {
        Formula::Fix(Box::new(FixSystem {
            kind: FixKind::Nu,
            entry: var.to_string(),
            entry_args: vec![],
            equations: vec![Equation {
                var: var.to_string(),
                params: vec![],
                constraint: SConstraint::tt(),
                body,
            }],
        }))
    }

    /// Free fixpoint variables.
    pub fn free_fix_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_fix_vars_into(&mut Vec::new(), &mut out);
        out
    }

    fn free_fix_vars_into(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::Bool(_) | Formula::Pred(..) => {}
            Formula::Var(x, _) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Formula::Not(f) | Formula::Diamond(f) | Formula::Square(f) => {
                f.free_fix_vars_into(bound, out)
            }
            Formula::Or(fs) | Formula::And(fs) => {
                fs.iter().for_each(|f| f.free_fix_vars_into(bound, out))
            }
            Formula::OrbitOr(_, f) | Formula::OrbitAnd(_, f) => f.free_fix_vars_into(bound, out),
            Formula::Fix(sys) => {
                let n = bound.len();
                bound.extend(sys.equations.iter().map(|e| e.var.clone()));
                for e in &sys.equations {
                    e.body.free_fix_vars_into(bound, out);
                }
                bound.truncate(n);
            }
        }
    }

    /// True when the formula has no free fixpoint variables.
    pub fn is_closed(&self) -> bool {
        self.free_fix_vars().is_empty()
    }

    /// Free atom names: binder variables and constants referenced but not
    /// bound here. Whether a name is a constant is decided by the caller.
    pub fn free_atom_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_atoms_into(&mut Vec::new(), &mut out);
        out
    }

    fn free_atoms_into(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        let add = |names: &[String], bound: &Vec<String>, out: &mut BTreeSet<String>| {
            for n in names {
                if !bound.contains(n) {
                    out.insert(n.clone());
                }
            }
        };
        match self {
            Formula::Bool(_) => {}
            Formula::Pred(_, args) | Formula::Var(_, args) => add(args, bound, out),
            Formula::Not(f) | Formula::Diamond(f) | Formula::Square(f) => {
                f.free_atoms_into(bound, out)
            }
            Formula::Or(fs) | Formula::And(fs) => {
                fs.iter().for_each(|f| f.free_atoms_into(bound, out))
            }
            Formula::OrbitOr(b, f) | Formula::OrbitAnd(b, f) => {
                let n = bound.len();
                bound.extend(b.vars.iter().cloned());
                let mut names = Vec::new();
                b.constraint.names(&mut names);
                add(&names, bound, out);
                f.free_atoms_into(bound, out);
                bound.truncate(n);
            }
            Formula::Fix(sys) => {
                add(&sys.entry_args, bound, out);
                for e in &sys.equations {
                    let mut names = Vec::new();
                    e.constraint.names(&mut names);
                    let n = bound.len();
                    bound.extend(e.params.iter().cloned());
                    add(&names, bound, out);
                    e.body.free_atoms_into(bound, out);
                    bound.truncate(n);
                }
            }
        }
    }

    /// True if any constraint in the formula uses an order relation, in
    /// which case the formula only makes sense over ordered atoms.
    pub fn uses_order(&self) -> bool {
        match self {
            Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => false,
            Formula::Not(f) | Formula::Diamond(f) | Formula::Square(f) => f.uses_order(),
            Formula::Or(fs) | Formula::And(fs) => fs.iter().any(|f| f.uses_order()),
            Formula::OrbitOr(b, f) | Formula::OrbitAnd(b, f) => {
                b.constraint.uses_order() || f.uses_order()
            }
            Formula::Fix(sys) => sys
                .equations
                .iter()
                .any(|e| e.constraint.uses_order() || e.body.uses_order()),
        }
    }
}

/// Errors raised by well-formedness checking.
#[derive(Debug, Clone, thiserror::Error)]
pub enum MuError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("fixpoint variable `{0}` occurs negatively")]
    NegativeOccurrence(String),
    #[error("variable `{0}` is bound twice on a syntactic path")]
    Rebinding(String),
    #[error("atom variable `{0}` is bound twice on a syntactic path")]
    AtomRebinding(String),
    #[error("unknown fixpoint variable `{0}`")]
    UnknownVar(String),
    #[error("variable `{var}` used with {got} arguments, bound with {expected}")]
    VarArity {
        var: String,
        expected: usize,
        got: usize,
    },
    #[error("entry variable `{0}` is not defined by any equation of its system")]
    MissingEntry(String),
    #[error("formula is not in negation normal form")]
    NotNnf,
    #[error("unknown builtin formula `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin formula `{name}` requires {want} atoms")]
    BuiltinSort { name: String, want: &'static str },
}

/// Full well-formedness: positivity of bound variables, single binding per
/// path for both fixpoint variables and atom binders, arity-consistent
/// variable use, entry variables present.
pub fn validate(f: &Formula) -> Result<(), MuError> {
    // (name, params, polarity under which occurrences are positive)
    fn go(
        f: &Formula,
        fix_scope: &mut Vec<(String, usize, bool)>,
        atom_scope: &mut Vec<String>,
        positive: bool,
    ) -> Result<(), MuError> {
        match f {
            Formula::Bool(_) | Formula::Pred(..) => Ok(()),
            Formula::Var(x, args) => {
                match fix_scope.iter().rev().find(|(n, _, _)| n == x) {
                    None => Ok(()), // free; the checker validates against the environment
                    Some((_, arity, pos)) => {
                        if args.len() != *arity {
                            return Err(MuError::VarArity {
                                var: x.clone(),
                                expected: *arity,
                                got: args.len(),
                            });
                        }
                        if positive != *pos {
                            return Err(MuError::NegativeOccurrence(x.clone()));
                        }
                        Ok(())
                    }
                }
            }
            Formula::Not(g) => go(g, fix_scope, atom_scope, !positive),
            Formula::Or(gs) | Formula::And(gs) => gs
                .iter()
                .try_for_each(|g| go(g, fix_scope, atom_scope, positive)),
            Formula::Diamond(g) | Formula::Square(g) => go(g, fix_scope, atom_scope, positive),
            Formula::OrbitOr(b, g) | Formula::OrbitAnd(b, g) => {
                for v in &b.vars {
                    if atom_scope.contains(v) {
                        return Err(MuError::AtomRebinding(v.clone()));
                    }
                }
                let n = atom_scope.len();
                atom_scope.extend(b.vars.iter().cloned());
                go(g, fix_scope, atom_scope, positive)?;
                atom_scope.truncate(n);
                Ok(())
            }
            Formula::Fix(sys) => {
                if !sys.binds(&sys.entry) {
                    return Err(MuError::MissingEntry(sys.entry.clone()));
                }
                for e in &sys.equations {
                    if fix_scope.iter().any(|(n, _, _)| n == &e.var) {
                        return Err(MuError::Rebinding(e.var.clone()));
                    }
                }
                let n = fix_scope.len();
                for e in &sys.equations {
                    fix_scope.push((e.var.clone(), e.params.len(), positive));
                }
                for e in &sys.equations {
                    for p in &e.params {
                        if atom_scope.contains(p) {
                            return Err(MuError::AtomRebinding(p.clone()));
                        }
                    }
                    let m = atom_scope.len();
                    atom_scope.extend(e.params.iter().cloned());
                    go(&e.body, fix_scope, atom_scope, positive)?;
                    atom_scope.truncate(m);
                }
                fix_scope.truncate(n);
                Ok(())
            }
        }
    }
    go(f, &mut Vec::new(), &mut Vec::new(), true)
}

/// Negation normal form: negations pushed down to basic predicates and
/// free variables, using De Morgan, modal duality and fixpoint duality.
pub fn nnf(f: &Formula) -> Formula {
    fn pos(f: &Formula) -> Formula {
        match f {
            Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => f.clone(),
            Formula::Not(g) => neg(g),
            Formula::Or(gs) => Formula::Or(gs.iter().map(pos).collect()),
            Formula::And(gs) => Formula::And(gs.iter().map(pos).collect()),
            Formula::OrbitOr(b, g) => Formula::OrbitOr(b.clone(), Box::new(pos(g))),
            Formula::OrbitAnd(b, g) => Formula::OrbitAnd(b.clone(), Box::new(pos(g))),
            Formula::Diamond(g) => Formula::Diamond(Box::new(pos(g))),
            Formula::Square(g) => Formula::Square(Box::new(pos(g))),
            Formula::Fix(sys) => Formula::Fix(Box::new(FixSystem {
                kind: sys.kind,
                entry: sys.entry.clone(),
                entry_args: sys.entry_args.clone(),
                equations: sys
                    .equations
                    .iter()
                    .map(|e| Equation {
                        var: e.var.clone(),
                        params: e.params.clone(),
                        constraint: e.constraint.clone(),
                        body: pos(&e.body),
                    })
                    .collect(),
            })),
        }
    }

    fn neg(f: &Formula) -> Formula {
        match f {
            Formula::Bool(b) => Formula::Bool(!b),
            Formula::Pred(..) | Formula::Var(..) => Formula::not(f.clone()),
            Formula::Not(g) => pos(g),
            Formula::Or(gs) => Formula::And(gs.iter().map(neg).collect()),
            Formula::And(gs) => Formula::Or(gs.iter().map(neg).collect()),
            Formula::OrbitOr(b, g) => Formula::OrbitAnd(b.clone(), Box::new(neg(g))),
            Formula::OrbitAnd(b, g) => Formula::OrbitOr(b.clone(), Box::new(neg(g))),
            Formula::Diamond(g) => Formula::Square(Box::new(neg(g))),
            Formula::Square(g) => Formula::Diamond(Box::new(neg(g))),
            Formula::Fix(sys) => {
                // ~mu X.{X_j := f_j}  =  nu X.{X_j := ~f_j[X_k := ~X_k]}
                let names: Vec<&str> = sys.equations.iter().map(|e| e.var.as_str()).collect();
                Formula::Fix(Box::new(FixSystem {
                    kind: sys.kind.dual(),
                    entry: sys.entry.clone(),
                    entry_args: sys.entry_args.clone(),
                    equations: sys
                        .equations
                        .iter()
                        .map(|e| Equation {
                            var: e.var.clone(),
                            params: e.params.clone(),
                            constraint: e.constraint.clone(),
                            body: neg(&negate_vars(&e.body, &names)),
                        })
                        .collect(),
                }))
            }
        }
    }

    fn negate_vars(f: &Formula, names: &[&str]) -> Formula {
        match f {
            Formula::Var(x, _) if names.contains(&x.as_str()) => Formula::not(f.clone()),
            Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => f.clone(),
            Formula::Not(g) => Formula::not(negate_vars(g, names)),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| negate_vars(g, names)).collect()),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| negate_vars(g, names)).collect()),
            Formula::OrbitOr(b, g) => {
                Formula::OrbitOr(b.clone(), Box::new(negate_vars(g, names)))
            }
            Formula::OrbitAnd(b, g) => {
                Formula::OrbitAnd(b.clone(), Box::new(negate_vars(g, names)))
            }
            Formula::Diamond(g) => Formula::Diamond(Box::new(negate_vars(g, names))),
            Formula::Square(g) => Formula::Square(Box::new(negate_vars(g, names))),
            Formula::Fix(sys) => {
                // Inner systems rebind their own variables; names shadowed
                // there cannot occur by path-uniqueness.
                Formula::Fix(Box::new(FixSystem {
                    kind: sys.kind,
                    entry: sys.entry.clone(),
                    entry_args: sys.entry_args.clone(),
                    equations: sys
                        .equations
                        .iter()
                        .map(|e| Equation {
                            var: e.var.clone(),
                            params: e.params.clone(),
                            constraint: e.constraint.clone(),
                            body: negate_vars(&e.body, names),
                        })
                        .collect(),
                }))
            }
        }
    }

    pos(f)
}

/// True when negation occurs only directly on predicates or variables.
pub fn is_nnf(f: &Formula) -> bool {
    match f {
        Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => true,
        Formula::Not(g) => matches!(**g, Formula::Pred(..) | Formula::Var(..)),
        Formula::Or(gs) | Formula::And(gs) => gs.iter().all(is_nnf),
        Formula::OrbitOr(_, g) | Formula::OrbitAnd(_, g) => is_nnf(g),
        Formula::Diamond(g) | Formula::Square(g) => is_nnf(g),
        Formula::Fix(sys) => sys.equations.iter().all(|e| is_nnf(&e.body)),
    }
}

/// Alternation depth, computed with the dependency refinement: a fixpoint
/// raises the depth of a dual-kind fixpoint subformula only when one of its
/// own bound variables occurs free inside it.  Fixpoint-free formulas have
/// depth 0 and a lone fixpoint has depth 1.  The same value drives the rank
/// assignment of evaluation games, which keeps the two in sync.
pub fn alternation_depth(f: &Formula) -> u32 {
    match f {
        Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => 0,
        Formula::Not(g) | Formula::Diamond(g) | Formula::Square(g) => alternation_depth(g),
        Formula::Or(gs) | Formula::And(gs) => {
            gs.iter().map(alternation_depth).max().unwrap_or(0)
        }
        Formula::OrbitOr(_, g) | Formula::OrbitAnd(_, g) => alternation_depth(g),
        Formula::Fix(sys) => {
            let own: BTreeSet<String> =
                sys.equations.iter().map(|e| e.var.clone()).collect();
            let mut depth = 1;
            for e in &sys.equations {
                depth = depth.max(alternation_depth(&e.body));
                let mut duals = Vec::new();
                collect_dependent_duals(&e.body, sys.kind, &own, &mut duals);
                for d in duals {
                    depth = depth.max(1 + alternation_depth(&d));
                }
            }
            depth
        }
    }
}

fn collect_dependent_duals(
    f: &Formula,
    kind: FixKind,
    vars: &BTreeSet<String>,
    out: &mut Vec<Formula>,
) {
    match f {
        Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => {}
        Formula::Not(g) | Formula::Diamond(g) | Formula::Square(g) => {
            collect_dependent_duals(g, kind, vars, out)
        }
        Formula::Or(gs) | Formula::And(gs) => gs
            .iter()
            .for_each(|g| collect_dependent_duals(g, kind, vars, out)),
        Formula::OrbitOr(_, g) | Formula::OrbitAnd(_, g) => {
            collect_dependent_duals(g, kind, vars, out)
        }
        Formula::Fix(sys) => {
            let free = f.free_fix_vars();
            if sys.kind == kind.dual() && free.iter().any(|x| vars.contains(x)) {
                out.push(f.clone());
            }
            for e in &sys.equations {
                collect_dependent_duals(&e.body, kind, vars, out);
            }
        }
    }
}

/// The least `k` such that every subformula occurrence carries an
/// accumulated binder support of length at most `k` along its path from
/// the root.
///
/// Descending into a disjunct or conjunct of any boolean connective, or
/// into the body of an equation of an atom-indexed fixpoint system, adds
/// the number of binder atoms free in the target; modalities and scalar
/// fixpoints do not extend the path support.  Context constants never
/// count: supports are taken relative to the declared context.
pub fn global_support_bound(f: &Formula) -> u32 {
    fn fv_binders(f: &Formula, scope: &[String]) -> usize {
        f.free_atom_names()
            .iter()
            .filter(|n| scope.contains(n))
            .count()
    }

    fn go(f: &Formula, scope: &mut Vec<String>, acc: u32, best: &mut u32) {
        *best = (*best).max(acc);
        match f {
            Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => {}
            Formula::Not(g) | Formula::Diamond(g) | Formula::Square(g) => {
                go(g, scope, acc, best)
            }
            Formula::Or(gs) | Formula::And(gs) => {
                for g in gs {
                    let step = fv_binders(g, scope) as u32;
                    go(g, scope, acc + step, best);
                }
            }
            Formula::OrbitOr(b, g) | Formula::OrbitAnd(b, g) => {
                let n = scope.len();
                scope.extend(b.vars.iter().cloned());
                let step = fv_binders(g, scope) as u32;
                go(g, scope, acc + step, best);
                scope.truncate(n);
            }
            Formula::Fix(sys) => {
                let scalar = sys.is_scalar();
                for e in &sys.equations {
                    let n = scope.len();
                    scope.extend(e.params.iter().cloned());
                    let step = if scalar {
                        0
                    } else {
                        fv_binders(&e.body, scope) as u32
                    };
                    go(&e.body, scope, acc + step, best);
                    scope.truncate(n);
                }
            }
        }
    }

    let mut best = 0;
    go(f, &mut Vec::new(), 0, &mut best);
    best
}

/// Rewrites every fixpoint system so that each one consists of a single
/// equation family, nesting the remaining families as inner fixpoints by
/// the simultaneous-substitution form of the Bekic principle. Semantics is
/// preserved; the checker cross-validates this on fixtures.
pub fn bekic_single_orbit(f: &Formula) -> Formula {
    fn subst_var(f: &Formula, target: &str, mk: &dyn Fn(&[String]) -> Formula) -> Formula {
        match f {
            Formula::Var(x, args) if x == target => mk(args),
            Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => f.clone(),
            Formula::Not(g) => Formula::not(subst_var(g, target, mk)),
            Formula::Or(gs) => {
                Formula::Or(gs.iter().map(|g| subst_var(g, target, mk)).collect())
            }
            Formula::And(gs) => {
                Formula::And(gs.iter().map(|g| subst_var(g, target, mk)).collect())
            }
            Formula::OrbitOr(b, g) => {
                Formula::OrbitOr(b.clone(), Box::new(subst_var(g, target, mk)))
            }
            Formula::OrbitAnd(b, g) => {
                Formula::OrbitAnd(b.clone(), Box::new(subst_var(g, target, mk)))
            }
            Formula::Diamond(g) => Formula::Diamond(Box::new(subst_var(g, target, mk))),
            Formula::Square(g) => Formula::Square(Box::new(subst_var(g, target, mk))),
            Formula::Fix(sys) => {
                if sys.binds(target) {
                    return f.clone();
                }
                Formula::Fix(Box::new(FixSystem {
                    kind: sys.kind,
                    entry: sys.entry.clone(),
                    entry_args: sys.entry_args.clone(),
                    equations: sys
                        .equations
                        .iter()
                        .map(|e| Equation {
                            var: e.var.clone(),
                            params: e.params.clone(),
                            constraint: e.constraint.clone(),
                            body: subst_var(&e.body, target, mk),
                        })
                        .collect(),
                }))
            }
        }
    }

    match f {
        Formula::Bool(_) | Formula::Pred(..) | Formula::Var(..) => f.clone(),
        Formula::Not(g) => Formula::not(bekic_single_orbit(g)),
        Formula::Or(gs) => Formula::Or(gs.iter().map(bekic_single_orbit).collect()),
        Formula::And(gs) => Formula::And(gs.iter().map(bekic_single_orbit).collect()),
        Formula::OrbitOr(b, g) => Formula::OrbitOr(b.clone(), Box::new(bekic_single_orbit(g))),
        Formula::OrbitAnd(b, g) => Formula::OrbitAnd(b.clone(), Box::new(bekic_single_orbit(g))),
        Formula::Diamond(g) => Formula::Diamond(Box::new(bekic_single_orbit(g))),
        Formula::Square(g) => Formula::Square(Box::new(bekic_single_orbit(g))),
        Formula::Fix(sys) => {
            let mut sys = FixSystem {
                kind: sys.kind,
                entry: sys.entry.clone(),
                entry_args: sys.entry_args.clone(),
                equations: sys
                    .equations
                    .iter()
                    .map(|e| Equation {
                        var: e.var.clone(),
                        params: e.params.clone(),
                        constraint: e.constraint.clone(),
                        body: bekic_single_orbit(&e.body),
                    })
                    .collect(),
            };
            while sys.equations.len() > 1 {
                // Keep the family defining the entry variable; fold the last
                // other family into every remaining body as a nested fixpoint.
                let victim_idx = (0..sys.equations.len())
                    .rev()
                    .find(|&i| sys.equations[i].var != sys.entry)
                    .expect("entry is a single family");
                let victim = sys.equations.remove(victim_idx);
                let kind = sys.kind;
                let mk = |args: &[String]| -> Formula {
                    Formula::Fix(Box::new(FixSystem {
                        kind,
                        entry: victim.var.clone(),
                        entry_args: args.to_vec(),
                        equations: vec![victim.clone()],
                    }))
                };
                for e in &mut sys.equations {
                    e.body = subst_var(&e.body, &victim.var, &mk);
                }
                // The folded family may itself reference other families;
                // those occurrences now live inside the nested fixpoints and
                // are substituted in later rounds as well.
            }
            Formula::Fix(Box::new(sys))
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing and printing
// ---------------------------------------------------------------------------

const KEYWORDS: &[&str] = &["mu", "nu", "OR", "AND", "where", "true", "false", "and", "or", "not"];

/// Parses a formula from DSL text; see the crate README for the grammar.
pub fn parse_formula(src: &str) -> Result<Formula, MuError> {
    let mut lx = Lexer::new(src).map_err(MuError::Parse)?;
    let f = parse_fml(&mut lx)?;
    if lx.peek() != &Tok::Eof {
        return Err(MuError::Parse(
            lx.error(format!("unexpected {}", lx.peek())),
        ));
    }
    validate(&f)?;
    Ok(f)
}

fn parse_fml(lx: &mut Lexer) -> Result<Formula, MuError> {
    parse_disj(lx)
}

fn parse_disj(lx: &mut Lexer) -> Result<Formula, MuError> {
    let mut parts = vec![parse_conj(lx)?];
    while lx.eat_sym("\\/") {
        parts.push(parse_conj(lx)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Formula::Or(parts)
    })
}

fn parse_conj(lx: &mut Lexer) -> Result<Formula, MuError> {
    let mut parts = vec![parse_prefix(lx)?];
    while lx.eat_sym("/\\") {
        parts.push(parse_prefix(lx)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Formula::And(parts)
    })
}

fn parse_prefix(lx: &mut Lexer) -> Result<Formula, MuError> {
    if lx.eat_sym("~") {
        return Ok(Formula::not(parse_prefix(lx)?));
    }
    if lx.eat_sym("<>") {
        return Ok(Formula::diamond(parse_prefix(lx)?));
    }
    if lx.eat_sym("[]") {
        return Ok(Formula::square(parse_prefix(lx)?));
    }
    if lx.at_ident("OR") || lx.at_ident("AND") {
        return parse_orbit_binder(lx);
    }
    if lx.at_ident("mu") || lx.at_ident("nu") {
        return parse_fix(lx);
    }
    parse_primary(lx)
}

fn parse_orbit_binder(lx: &mut Lexer) -> Result<Formula, MuError> {
    let is_or = lx.eat_kw("OR");
    if !is_or {
        lx.bump(); // AND
    }
    let mut vars = vec![lx.expect_ident().map_err(MuError::Parse)?];
    loop {
        if lx.eat_sym(",") {
            vars.push(lx.expect_ident().map_err(MuError::Parse)?);
            continue;
        }
        match lx.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                vars.push(lx.expect_ident().map_err(MuError::Parse)?);
            }
            _ => break,
        }
    }
    let constraint = if lx.eat_kw("where") {
        parse_constraint(lx).map_err(MuError::Parse)?
    } else {
        SConstraint::tt()
    };
    lx.expect_sym(".").map_err(MuError::Parse)?;
    let body = parse_prefix(lx)?;
    let b = Binder { vars, constraint };
    Ok(if is_or {
        Formula::OrbitOr(b, Box::new(body))
    } else {
        Formula::OrbitAnd(b, Box::new(body))
    })
}

fn parse_fix(lx: &mut Lexer) -> Result<Formula, MuError> {
    let kind = if lx.eat_kw("mu") {
        FixKind::Mu
    } else {
        lx.bump();
        FixKind::Nu
    };
    let entry = lx.expect_ident().map_err(MuError::Parse)?;
    let mut entry_args = Vec::new();
    if lx.eat_sym("(") {
        while !lx.eat_sym(")") {
            if !entry_args.is_empty() {
                lx.expect_sym(",").map_err(MuError::Parse)?;
            }
            entry_args.push(lx.expect_ident().map_err(MuError::Parse)?);
        }
    }
    if lx.eat_sym(".") {
        // Scalar form.
        let body = parse_prefix(lx)?;
        if !entry_args.is_empty() {
            return Err(MuError::Parse(
                lx.error("scalar fixpoint cannot take entry arguments"),
            ));
        }
        return Ok(Formula::Fix(Box::new(FixSystem {
            kind,
            entry: entry.clone(),
            entry_args,
            equations: vec![Equation {
                var: entry,
                params: vec![],
                constraint: SConstraint::tt(),
                body,
            }],
        })));
    }
    lx.expect_sym("{").map_err(MuError::Parse)?;
    let mut equations = Vec::new();
    loop {
        let var = lx.expect_ident().map_err(MuError::Parse)?;
        let mut params = Vec::new();
        if lx.eat_sym("(") {
            while !lx.eat_sym(")") {
                if !params.is_empty() {
                    lx.expect_sym(",").map_err(MuError::Parse)?;
                }
                params.push(lx.expect_ident().map_err(MuError::Parse)?);
            }
        }
        let constraint = if lx.eat_kw("where") {
            parse_constraint(lx).map_err(MuError::Parse)?
        } else {
            SConstraint::tt()
        };
        lx.expect_sym(":=").map_err(MuError::Parse)?;
        let body = parse_fml(lx)?;
        equations.push(Equation {
            var,
            params,
            constraint,
            body,
        });
        if lx.eat_sym(";") {
            continue;
        }
        lx.expect_sym("}").map_err(MuError::Parse)?;
        break;
    }
    Ok(Formula::Fix(Box::new(FixSystem {
        kind,
        entry,
        entry_args,
        equations,
    })))
}

fn parse_primary(lx: &mut Lexer) -> Result<Formula, MuError> {
    if lx.eat_sym("(") {
        let f = parse_fml(lx)?;
        lx.expect_sym(")").map_err(MuError::Parse)?;
        return Ok(f);
    }
    if lx.eat_kw("true") {
        return Ok(Formula::Bool(true));
    }
    if lx.eat_kw("false") {
        return Ok(Formula::Bool(false));
    }
    let name = lx.expect_ident().map_err(MuError::Parse)?;
    let mut args = Vec::new();
    if lx.eat_sym("(") {
        while !lx.eat_sym(")") {
            if !args.is_empty() {
                lx.expect_sym(",").map_err(MuError::Parse)?;
            }
            args.push(lx.expect_ident().map_err(MuError::Parse)?);
        }
    }
    // Uppercase initial: fixpoint variable; otherwise basic predicate.
    let is_var = name.chars().next().is_some_and(|c| c.is_uppercase());
    Ok(if is_var {
        Formula::Var(name, args)
    } else {
        Formula::Pred(name, args)
    })
}

/// Deterministic printer; `parse_formula(print_formula(f))` rebuilds `f`.
pub fn print_formula(f: &Formula) -> String {
    let mut s = String::new();
    print_fml(f, &mut s, 0);
    s
}

// prec: 0 disjunction, 1 conjunction, 2 prefix operand
fn print_fml(f: &Formula, s: &mut String, prec: u8) {
    let parens = |s: &mut String, need: bool, inner: &dyn Fn(&mut String)| {
        if need {
            s.push('(');
            inner(s);
            s.push(')');
        } else {
            inner(s);
        }
    };
    match f {
        Formula::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
        Formula::Pred(p, args) | Formula::Var(p, args) => {
            s.push_str(p);
            if !args.is_empty() || matches!(f, Formula::Var(..)) {
                s.push('(');
                s.push_str(&args.join(","));
                s.push(')');
            }
        }
        Formula::Not(g) => {
            s.push('~');
            print_fml(g, s, 2);
        }
        Formula::Diamond(g) => {
            s.push_str("<> ");
            print_fml(g, s, 2);
        }
        Formula::Square(g) => {
            s.push_str("[] ");
            print_fml(g, s, 2);
        }
        Formula::Or(gs) => parens(s, prec >= 1, &|s| {
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    s.push_str(" \\/ ");
                }
                print_fml(g, s, 1);
            }
        }),
        Formula::And(gs) => parens(s, prec >= 2, &|s| {
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    s.push_str(" /\\ ");
                }
                print_fml(g, s, 2);
            }
        }),
        Formula::OrbitOr(b, g) | Formula::OrbitAnd(b, g) => {
            s.push_str(if matches!(f, Formula::OrbitOr(..)) {
                "OR "
            } else {
                "AND "
            });
            s.push_str(&b.vars.join(","));
            if b.constraint != SConstraint::Bool(true) {
                s.push_str(" where ");
                s.push_str(&b.constraint.to_string());
            }
            s.push_str(" . ");
            print_fml(g, s, 2);
        }
        Formula::Fix(sys) => {
            s.push_str(sys.kind.keyword());
            s.push(' ');
            s.push_str(&sys.entry);
            if sys.is_scalar() {
                s.push_str(" . ");
                print_fml(&sys.equations[0].body, s, 2);
                return;
            }
            s.push('(');
            s.push_str(&sys.entry_args.join(","));
            s.push_str(") { ");
            for (i, e) in sys.equations.iter().enumerate() {
                if i > 0 {
                    s.push_str(" ; ");
                }
                s.push_str(&e.var);
                s.push('(');
                s.push_str(&e.params.join(","));
                s.push(')');
                if e.constraint != SConstraint::Bool(true) {
                    s.push_str(" where ");
                    s.push_str(&e.constraint.to_string());
                }
                s.push_str(" := ");
                print_fml(&e.body, s, 0);
            }
            s.push_str(" }");
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_formula(self))
    }
}

// ---------------------------------------------------------------------------
// The formula library
// ---------------------------------------------------------------------------

/// Builds one of the named example formulas. All of them speak about
/// models whose basic predicates are `p(a)` for atoms `a`.
///
/// Equality-atom formulas: `p1`, `p2`, `p1-and-p2`, `psi`, `chain-definer`,
/// `nu-diamond`, `some-pred`, `some-succ-pred`, `reach-pred`.
/// Ordered-atom formulas: `p1-prime`, `infsucc-definer`, `evensucc-definer`.
pub fn builtin_formula(name: &str) -> Result<Formula, MuError> {
    use Formula as F;
    let f = match name {
        // nu X. ((<> OR a . p(a)) /\ [] X)
        "p1" => F::nu(
            "X",
            F::and2(
                F::diamond(F::orbit_or(&["a"], SConstraint::tt(), F::pred("p", &["a"]))),
                F::square(F::var("X", &[])),
            ),
        ),
        // ~(mu X. (psi \/ <> X)), psi = OR a . (p(a) /\ <> mu Y. (p(a) \/ <> Y))
        "p2" => {
            let psi = F::orbit_or(
                &["a"],
                SConstraint::tt(),
                F::and2(
                    F::pred("p", &["a"]),
                    F::diamond(F::mu(
                        "Y",
                        F::or2(F::pred("p", &["a"]), F::diamond(F::var("Y", &[]))),
                    )),
                ),
            );
            F::not(F::mu("X", F::or2(psi, F::diamond(F::var("X", &[])))))
        }
        "p1-and-p2" => F::and2(builtin_formula("p1")?, builtin_formula("p2")?),
        // AND a,b where a < b . nu X. ((<> OR c where a < c and c < b . p(c)) /\ [] X)
        "p1-prime" => F::orbit_and(
            &["a", "b"],
            SConstraint::cmp("a", Rel::Lt, "b"),
            F::nu(
                "X",
                F::and2(
                    F::diamond(F::orbit_or(
                        &["c"],
                        SConstraint::and(vec![
                            SConstraint::cmp("a", Rel::Lt, "c"),
                            SConstraint::cmp("c", Rel::Lt, "b"),
                        ]),
                        F::pred("p", &["c"]),
                    )),
                    F::square(F::var("X", &[])),
                ),
            ),
        ),
        // AND a . <> (p(a) /\ AND b where b != a . ~p(b))
        "psi" => F::orbit_and(
            &["a"],
            SConstraint::tt(),
            F::diamond(F::and2(
                F::pred("p", &["a"]),
                F::orbit_and(
                    &["b"],
                    SConstraint::cmp("b", Rel::Ne, "a"),
                    F::not(F::pred("p", &["b"])),
                ),
            )),
        ),
        // OR a,b where a < b . AND c where a < c and c < b . <> p(c)
        "infsucc-definer" => F::orbit_or(
            &["a", "b"],
            SConstraint::cmp("a", Rel::Lt, "b"),
            F::orbit_and(
                &["c"],
                SConstraint::and(vec![
                    SConstraint::cmp("a", Rel::Lt, "c"),
                    SConstraint::cmp("c", Rel::Lt, "b"),
                ]),
                F::diamond(F::pred("p", &["c"])),
            ),
        ),
        // OR a . nu X(a) { X(b) := OR c . (theta(c) /\ <> (theta(b) /\ <> X(c))) }
        "chain-definer" => {
            let theta = |v: &str| -> Formula {
                F::and2(
                    F::pred("p", &[v]),
                    F::orbit_and(
                        &[&format!("{v}x")],
                        SConstraint::cmp(&format!("{v}x"), Rel::Ne, v),
                        F::not(F::pred("p", &[&format!("{v}x")])),
                    ),
                )
            };
            let body = F::orbit_or(
                &["c"],
                SConstraint::tt(),
                F::and2(
                    theta("c"),
                    F::diamond(F::and2(theta("b"), F::diamond(F::var("X", &["c"])))),
                ),
            );
            F::orbit_or(
                &["a"],
                SConstraint::tt(),
                F::Fix(Box::new(FixSystem {
                    kind: FixKind::Nu,
                    entry: "X".into(),
                    entry_args: vec!["a".into()],
                    equations: vec![Equation {
                        var: "X".into(),
                        params: vec!["b".into()],
                        constraint: SConstraint::tt(),
                        body,
                    }],
                })),
            )
        }
        // OR a . AND b where b < a . psi(b), with psi the even-count system.
        "evensucc-definer" => {
            // phi1(x,y): y is the least atom above x seen in a successor.
            let phi1 = |x: &str, y: &str, fresh: &str| -> Formula {
                F::and2(
                    F::diamond(F::pred("p", &[y])),
                    F::orbit_and(
                        &[fresh],
                        SConstraint::and(vec![
                            SConstraint::cmp(x, Rel::Lt, fresh),
                            SConstraint::cmp(fresh, Rel::Lt, y),
                        ]),
                        F::not(F::diamond(F::pred("p", &[fresh]))),
                    ),
                )
            };
            // phi2(x,y): y is the second-least such atom.
            let phi2 = |x: &str, y: &str| -> Formula {
                F::orbit_or(
                    &["e"],
                    SConstraint::and(vec![
                        SConstraint::cmp(x, Rel::Lt, "e"),
                        SConstraint::cmp("e", Rel::Lt, y),
                    ]),
                    F::and2(phi1(x, "e", "f1"), phi1("e", y, "f2")),
                )
            };
            // psi(b): the number of atoms above b holding in successors is
            // finite and even.
            let none_above = F::orbit_and(
                &["d1"],
                SConstraint::cmp("d1", Rel::Gt, "c"),
                F::not(F::diamond(F::pred("p", &["d1"]))),
            );
            let step = F::orbit_or(
                &["d"],
                SConstraint::cmp("d", Rel::Gt, "c"),
                F::and2(phi2("c", "d"), F::var("X", &["d"])),
            );
            let psi = F::Fix(Box::new(FixSystem {
                kind: FixKind::Mu,
                entry: "X".into(),
                entry_args: vec!["b".into()],
                equations: vec![Equation {
                    var: "X".into(),
                    params: vec!["c".into()],
                    constraint: SConstraint::cmp("c", Rel::Ge, "b"),
                    body: F::or2(none_above, step),
                }],
            }));
            F::orbit_or(
                &["a"],
                SConstraint::tt(),
                F::orbit_and(&["b"], SConstraint::cmp("b", Rel::Lt, "a"), psi),
            )
        }
        // nu X. <> X: an infinite path begins here.
        "nu-diamond" => F::nu("X", F::diamond(F::var("X", &[]))),
        // OR a . p(a)
        "some-pred" => F::orbit_or(&["a"], SConstraint::tt(), F::pred("p", &["a"])),
        // OR a . <> p(a)
        "some-succ-pred" => {
            F::orbit_or(&["a"], SConstraint::tt(), F::diamond(F::pred("p", &["a"])))
        }
        // mu X. ((OR a . p(a)) \/ <> X)
        "reach-pred" => F::mu(
            "X",
            F::or2(
                F::orbit_or(&["a"], SConstraint::tt(), F::pred("p", &["a"])),
                F::diamond(F::var("X", &[])),
            ),
        ),
        _ => return Err(MuError::UnknownBuiltin(name.to_string())),
    };
    validate(&f).expect("builtin formulas are well-formed");
    Ok(f)
}

/// Names of all builtin formulas, paired with whether they need ordered
/// atoms.
pub fn builtin_formula_names() -> Vec<(&'static str, bool)> {
    vec![
        ("p1", false),
        ("p2", false),
        ("p1-and-p2", false),
        ("psi", false),
        ("chain-definer", false),
        ("nu-diamond", false),
        ("some-pred", false),
        ("some-succ-pred", false),
        ("reach-pred", false),
        ("p1-prime", true),
        ("infsucc-definer", true),
        ("evensucc-definer", true),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_simple_fixpoint() {
        let f = parse_formula("mu X . (p(c1) \\/ <> X())").unwrap();
        match &f {
            Formula::Fix(sys) => {
                assert_eq!(sys.kind, FixKind::Mu);
                assert!(sys.is_scalar());
            }
            _ => panic!("expected fixpoint"),
        }
    }

    #[test]
    fn positivity_rejected() {
        assert!(matches!(
            parse_formula("mu X . ~X()"),
            Err(MuError::NegativeOccurrence(_))
        ));
        // Double negation is fine.
        assert!(parse_formula("mu X . ~~X()").is_ok());
    }

    #[test]
    fn rebinding_rejected() {
        assert!(matches!(
            parse_formula("mu X . mu X . X()"),
            Err(MuError::Rebinding(_))
        ));
        // Parallel binding on different paths is allowed.
        assert!(parse_formula("(mu X . X()) \\/ (mu X . X())").is_ok());
    }

    #[test]
    fn builtins_are_wellformed_and_round_trip() {
        for (name, _) in builtin_formula_names() {
            let f = builtin_formula(name).unwrap();
            assert!(f.is_closed(), "{name} must be closed");
            let printed = print_formula(&f);
            let back = parse_formula(&printed)
                .unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
            assert_eq!(back, f, "{name} round trip");
        }
    }

    #[test]
    fn psi_is_equivariant() {
        let f = builtin_formula("psi").unwrap();
        assert!(f.free_atom_names().is_empty());
    }

    #[test]
    fn nnf_examples() {
        // ~<>p = []~p
        let f = parse_formula("~<> p(a1)").unwrap();
        let g = nnf(&f);
        assert_eq!(g, parse_formula("[] ~p(a1)").unwrap());

        // De Morgan over an orbit disjunction
        let f = parse_formula("~OR a . p(a)").unwrap();
        assert_eq!(nnf(&f), parse_formula("AND a . ~p(a)").unwrap());

        // Fixpoint duality: ~mu X. ~<>~X() becomes a nu over <>.
        let f = parse_formula("~mu X . ~<>~X()").unwrap();
        let g = nnf(&f);
        match &g {
            Formula::Fix(sys) => {
                assert_eq!(sys.kind, FixKind::Nu);
                assert!(is_nnf(&g));
                assert_eq!(sys.equations[0].body, parse_formula("<> X()").unwrap());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nnf_is_idempotent_on_builtins() {
        for (name, _) in builtin_formula_names() {
            let f = builtin_formula(name).unwrap();
            let g = nnf(&f);
            assert!(is_nnf(&g), "{name}");
            assert_eq!(nnf(&g), g, "{name}");
            validate(&g).unwrap();
        }
    }

    #[test]
    fn alternation_depths() {
        assert_eq!(
            alternation_depth(&parse_formula("mu X . (p(a1) \\/ <> X())").unwrap()),
            1
        );
        // nu over an independent mu: no genuine alternation.
        assert_eq!(
            alternation_depth(
                &parse_formula("nu X . ([] X() /\\ mu Y . (p(a1) \\/ [] Y()))").unwrap()
            ),
            1
        );
        // Genuine dependency raises the depth.
        assert_eq!(
            alternation_depth(
                &parse_formula("nu X . mu Y . ((p(a1) /\\ <> X()) \\/ <> Y())").unwrap()
            ),
            2
        );
        assert_eq!(alternation_depth(&builtin_formula("p2").unwrap()), 1);
        assert_eq!(alternation_depth(&parse_formula("p(a1)").unwrap()), 0);
    }

    #[test]
    fn support_bounds() {
        assert_eq!(global_support_bound(&parse_formula("nu X . <> X()").unwrap()), 0);
        assert_eq!(
            global_support_bound(&parse_formula("OR a . <> p(a)").unwrap()),
            1
        );
        let psi = builtin_formula("psi").unwrap();
        // Path: AND a (body keeps a) -> conjunct AND b (a occurs in its
        // constraint, b below) -> ~p(b).
        assert_eq!(global_support_bound(&psi), 3);
        assert_eq!(global_support_bound(&builtin_formula("p1").unwrap()), 1);
    }

    #[test]
    fn bekic_leaves_single_families_alone() {
        for name in ["chain-definer", "p2", "nu-diamond"] {
            let f = builtin_formula(name).unwrap();
            assert_eq!(bekic_single_orbit(&f), f, "{name}");
        }
    }

    #[test]
    fn bekic_flattens_two_family_system() {
        let f = parse_formula(
            "mu X() { X() := p(a1) \\/ <> Y(a1) ; Y(b) := q(b) \\/ <> X() }",
        )
        .unwrap();
        let g = bekic_single_orbit(&f);
        validate(&g).unwrap();
        match &g {
            Formula::Fix(sys) => {
                assert_eq!(sys.equations.len(), 1);
                assert_eq!(sys.entry, "X");
                // The Y family is folded into the X body as a nested mu.
                let printed = print_formula(&g);
                assert!(printed.contains("mu Y"), "{printed}");
            }
            _ => panic!(),
        }
    }
}
