//! Atomic parity games, their finite orbit-game quotients, a recursive
//! finite solver, and the evaluation game whose winning region for the
//! existential player coincides with formula semantics.
//!
//! Winners in an orbit-finite game are constant on orbits, so the game is
//! solved by quotienting each node orbit to a single finite-game node,
//! running Zielonka's algorithm there, and lifting the answer back.

use crate::atoms::{
    self, relabel_type, AtomError, Atom, AtomSort, CompleteType, Constraint, Context, Ctx,
};
use crate::check::{self, CheckError, Environment};
use crate::kripke::KripkeModel;
use crate::mu::{self, alternation_depth, FixKind, Formula, MuError};
use crate::surface::SConstraint;
use crate::orbits::{Orbit, OrbitRelation, OrbitSet, PairOrbit, Tag};
use crate::surface::{parse_constraint, Lexer, ParseError, Tok};
use rand::Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Player {
    Exists,
    Forall,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Exists => Player::Forall,
            Player::Forall => Player::Exists,
        }
    }

    /// The player favoured by an even or odd rank.
    pub fn of_rank(rank: u32) -> Player {
        if rank % 2 == 0 {
            Player::Exists
        } else {
            Player::Forall
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum GameError {
    #[error("{0}")]
    Atoms(#[from] AtomError),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Mu(#[from] MuError),
    #[error("{0}")]
    Check(#[from] CheckError),
    #[error("evaluation games require closed formulas in negation normal form")]
    NotClosedNnf,
    #[error("edge endpoint is not a declared node at tag `{0}`")]
    EdgeEscapes(String),
}

/// An orbit-finite parity game: node orbits with an owner partition, a
/// finitely supported move relation, and a bounded rank constant on each
/// orbit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicParityGame {
    pub ctx: Ctx,
    pub nodes: OrbitSet,
    pub exists_nodes: OrbitSet,
    pub moves: OrbitRelation,
    pub rank: BTreeMap<Orbit, u32>,
}

/// The finite quotient of an atomic game by its context orbits.
#[derive(Debug, Clone)]
pub struct OrbitGame {
    pub owner: Vec<Player>,
    pub rank: Vec<u32>,
    pub succ: Vec<Vec<usize>>,
}

/// Maps node orbits to quotient indices and back.
#[derive(Debug, Clone)]
pub struct QuotientMap {
    pub orbits: Vec<Orbit>,
    pub index: BTreeMap<Orbit, usize>,
}

impl AtomicParityGame {
    /// The finite orbit game together with the node map; an edge exists
    /// between two quotient nodes exactly when some pair of representatives
    /// is related, which is exactly one pair orbit of the move relation.
    pub fn quotient(&self) -> (OrbitGame, QuotientMap) {
        let orbits: Vec<Orbit> = self.nodes.orbits().to_vec();
        let index: BTreeMap<Orbit, usize> = orbits
            .iter()
            .enumerate()
            .map(|(i, o)| (o.clone(), i))
            .collect();
        let mut succ = vec![Vec::new(); orbits.len()];
        for p in self.moves.pairs() {
            let l = index[&p.left_orbit(&self.ctx)];
            let r = index[&p.right_orbit(&self.ctx)];
            if !succ[l].contains(&r) {
                succ[l].push(r);
            }
        }
        for s in &mut succ {
            s.sort_unstable();
        }
        let owner = orbits
            .iter()
            .map(|o| {
                if self.exists_nodes.contains_orbit(o) {
                    Player::Exists
                } else {
                    Player::Forall
                }
            })
            .collect();
        let rank = orbits.iter().map(|o| self.rank[o]).collect();
        (OrbitGame { owner, rank, succ }, QuotientMap { orbits, index })
    }

    /// Winning regions for both players, computed on the quotient and
    /// lifted back along the node map.
    pub fn winners(&self) -> (OrbitSet, OrbitSet) {
        let (og, map) = self.quotient();
        let sol = solve_finite(&og);
        let mut ex = Vec::new();
        let mut fa = Vec::new();
        for (i, o) in map.orbits.iter().enumerate() {
            match sol.winner[i] {
                Player::Exists => ex.push(o.clone()),
                Player::Forall => fa.push(o.clone()),
            }
        }
        (
            OrbitSet::from_orbits(self.ctx.clone(), ex),
            OrbitSet::from_orbits(self.ctx.clone(), fa),
        )
    }
}

/// Positional solution of a finite parity game: winner per node, and for
/// each node won by its owner, a winning move to follow.
#[derive(Debug, Clone)]
pub struct FiniteSolution {
    pub winner: Vec<Player>,
    pub strategy: Vec<Option<usize>>,
}

/// Zielonka's recursive algorithm.  Winning condition: an infinite play is
/// won by the existential player iff the maximum rank seen infinitely
/// often is even; a finite play is lost by the player who cannot move.
///
/// Dead ends are routed to one losing sink per player, which makes the
/// game total; attractor removal preserves totality, so the recursion
/// never meets a stuck node.
pub fn solve_finite(g: &OrbitGame) -> FiniteSolution {
    let n = g.owner.len();
    let sink_e = n;
    let sink_f = n + 1;
    let mut owner = g.owner.clone();
    owner.push(Player::Exists);
    owner.push(Player::Forall);
    let mut rank = g.rank.clone();
    rank.push(1);
    rank.push(0);
    let mut succ = g.succ.clone();
    for (v, ss) in succ.iter_mut().enumerate() {
        if ss.is_empty() {
            ss.push(match g.owner[v] {
                Player::Exists => sink_e,
                Player::Forall => sink_f,
            });
        }
    }
    succ.push(vec![sink_e]);
    succ.push(vec![sink_f]);
    let total = OrbitGame { owner, rank, succ };

    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n + 2];
    for (v, ss) in total.succ.iter().enumerate() {
        for &w in ss {
            pred[w].push(v);
        }
    }
    let mut winner = vec![Player::Exists; n + 2];
    let mut strategy = vec![None; n + 2];
    let alive: Vec<bool> = vec![true; n + 2];
    solve_rec(&total, &pred, alive, &mut winner, &mut strategy);
    winner.truncate(n);
    strategy.truncate(n);
    for s in &mut strategy {
        if s.is_some_and(|w| w >= n) {
            *s = None;
        }
    }
    FiniteSolution { winner, strategy }
}

/// Attractor of `player` towards `target` within `alive`; fills winning
/// moves for attracted player-owned nodes into `strategy`.
fn attractor(
    g: &OrbitGame,
    pred: &[Vec<usize>],
    alive: &[bool],
    player: Player,
    target: &[usize],
    strategy: &mut [Option<usize>],
) -> Vec<bool> {
    let mut inset = vec![false; g.owner.len()];
    let mut queue: Vec<usize> = Vec::new();
    for &t in target {
        if alive[t] && !inset[t] {
            inset[t] = true;
            queue.push(t);
        }
    }
    while let Some(w) = queue.pop() {
        for &v in &pred[w] {
            if !alive[v] || inset[v] {
                continue;
            }
            let attracted = if g.owner[v] == player {
                if strategy[v].is_none() {
                    strategy[v] = Some(w);
                }
                true
            } else {
                g.succ[v].iter().all(|&u| !alive[u] || inset[u])
            };
            if attracted {
                inset[v] = true;
                queue.push(v);
            }
        }
    }
    inset
}

fn solve_rec(
    g: &OrbitGame,
    pred: &[Vec<usize>],
    alive: Vec<bool>,
    winner: &mut [Player],
    strategy: &mut [Option<usize>],
) {
    let live: Vec<usize> = (0..g.owner.len()).filter(|&v| alive[v]).collect();
    if live.is_empty() {
        return;
    }
    let top = live.iter().map(|&v| g.rank[v]).max().unwrap();
    let player = Player::of_rank(top);
    let tops: Vec<usize> = live.iter().copied().filter(|&v| g.rank[v] == top).collect();

    let mut strat_a: Vec<Option<usize>> = vec![None; g.owner.len()];
    let a = attractor(g, pred, &alive, player, &tops, &mut strat_a);

    let mut rest = alive.clone();
    for v in &live {
        if a[*v] {
            rest[*v] = false;
        }
    }
    let mut w_rec = vec![Player::Exists; g.owner.len()];
    let mut s_rec: Vec<Option<usize>> = vec![None; g.owner.len()];
    solve_rec(g, pred, rest.clone(), &mut w_rec, &mut s_rec);

    let opponent_region: Vec<usize> = live
        .iter()
        .copied()
        .filter(|&v| rest[v] && w_rec[v] == player.opponent())
        .collect();

    if opponent_region.is_empty() {
        // `player` wins everywhere in the current subgame: follow the
        // recursive strategy inside, the attractor strategy towards the
        // top-rank nodes, and any live move from the top-rank nodes.
        for &v in &live {
            winner[v] = player;
            if g.owner[v] != player {
                continue;
            }
            strategy[v] = if rest[v] {
                s_rec[v]
            } else if tops.contains(&v) {
                g.succ[v].iter().copied().find(|&w| alive[w])
            } else {
                strat_a[v]
            };
        }
    } else {
        let mut strat_b: Vec<Option<usize>> = vec![None; g.owner.len()];
        let b = attractor(
            g,
            pred,
            &alive,
            player.opponent(),
            &opponent_region,
            &mut strat_b,
        );
        let mut rest2 = alive.clone();
        for v in &live {
            if b[*v] {
                rest2[*v] = false;
            }
        }
        let mut w2 = vec![Player::Exists; g.owner.len()];
        let mut s2: Vec<Option<usize>> = vec![None; g.owner.len()];
        solve_rec(g, pred, rest2, &mut w2, &mut s2);
        for &v in &live {
            if b[v] {
                winner[v] = player.opponent();
                if g.owner[v] == player.opponent() {
                    strategy[v] = if rest[v] && w_rec[v] == player.opponent() {
                        s_rec[v]
                    } else {
                        strat_b[v]
                    };
                }
            } else {
                winner[v] = w2[v];
                if g.owner[v] == w2[v] {
                    strategy[v] = s2[v];
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation games
// ---------------------------------------------------------------------------

/// An evaluation game for a model and a closed formula in negation normal
/// form, with enough bookkeeping to read formula semantics back off the
/// winning region.
#[derive(Debug, Clone)]
pub struct EvalGame {
    pub game: AtomicParityGame,
    root_occ: usize,
}

/// One occurrence of a subformula, with the binder scope accumulated on
/// the path from the root.  Games distinguish occurrences, not formulas.
struct Occ {
    scope: Vec<String>,
    acc: Vec<SConstraint>,
    kind: OccKind,
}

enum OccKind {
    True,
    False,
    Pred {
        tag: String,
        args: Vec<String>,
        positive: bool,
    },
    Branch {
        children: Vec<usize>,
        exists: bool,
    },
    OrbitBranch {
        child: usize,
        exists: bool,
    },
    Modal {
        child: usize,
        exists: bool,
    },
    /// Automatic move into an equation body, pinning the body parameters
    /// to the argument items. Used by fixpoint entries and bound-variable
    /// occurrences alike.
    Jump {
        target: usize,
        prefix_len: usize,
        args: Vec<String>,
        rank: u32,
    },
}

struct Walker {
    occs: Vec<Occ>,
}

struct BindInfo {
    body_occ: usize,
    prefix_len: usize,
    rank: u32,
}

impl Walker {
    fn walk(
        &mut self,
        f: &Formula,
        scope: &[String],
        acc: &[SConstraint],
        binds: &mut BTreeMap<String, BindInfo>,
    ) -> Result<usize, GameError> {
        let id = self.occs.len();
        self.occs.push(Occ {
            scope: scope.to_vec(),
            acc: acc.to_vec(),
            kind: OccKind::True,
        });
        let kind = match f {
            Formula::Bool(true) => OccKind::True,
            Formula::Bool(false) => OccKind::False,
            Formula::Pred(tag, args) => OccKind::Pred {
                tag: tag.clone(),
                args: args.clone(),
                positive: true,
            },
            Formula::Not(inner) => match &**inner {
                Formula::Pred(tag, args) => OccKind::Pred {
                    tag: tag.clone(),
                    args: args.clone(),
                    positive: false,
                },
                _ => return Err(GameError::NotClosedNnf),
            },
            Formula::Or(gs) | Formula::And(gs) => {
                let exists = matches!(f, Formula::Or(_));
                let children = gs
                    .iter()
                    .map(|g| self.walk(g, scope, acc, binds))
                    .collect::<Result<Vec<_>, _>>()?;
                OccKind::Branch { children, exists }
            }
            Formula::OrbitOr(b, g) | Formula::OrbitAnd(b, g) => {
                let exists = matches!(f, Formula::OrbitOr(..));
                let mut scope2 = scope.to_vec();
                scope2.extend(b.vars.iter().cloned());
                let mut acc2 = acc.to_vec();
                acc2.push(b.constraint.clone());
                let child = self.walk(g, &scope2, &acc2, binds)?;
                OccKind::OrbitBranch { child, exists }
            }
            Formula::Diamond(g) | Formula::Square(g) => {
                let exists = matches!(f, Formula::Diamond(_));
                let child = self.walk(g, scope, acc, binds)?;
                OccKind::Modal { child, exists }
            }
            Formula::Var(x, args) => {
                let info = binds.get(x).ok_or(GameError::NotClosedNnf)?;
                OccKind::Jump {
                    target: info.body_occ,
                    prefix_len: info.prefix_len,
                    args: args.clone(),
                    rank: info.rank,
                }
            }
            Formula::Fix(sys) => {
                let depth = alternation_depth(f);
                let rank = match sys.kind {
                    FixKind::Mu => 2 * (depth / 2) + 1,
                    FixKind::Nu => 2 * (depth / 2),
                };
                // Reserve occurrence slots for every equation body up
                // front so that variable occurrences across equations can
                // point at them before the bodies are walked.
                let mut body_ids = Vec::new();
                for e in &sys.equations {
                    binds.insert(
                        e.var.clone(),
                        BindInfo {
                            body_occ: usize::MAX,
                            prefix_len: scope.len(),
                            rank,
                        },
                    );
                    body_ids.push(usize::MAX);
                }
                // Bodies are walked in order; each allocates its own id.
                for (i, e) in sys.equations.iter().enumerate() {
                    let mut scope2 = scope.to_vec();
                    scope2.extend(e.params.iter().cloned());
                    let mut acc2 = acc.to_vec();
                    acc2.push(e.constraint.clone());
                    // Patch the bind before walking: self references inside
                    // earlier bodies to later ones are fixed afterwards.
                    let body = self.occs.len();
                    binds.get_mut(&e.var).unwrap().body_occ = body;
                    body_ids[i] = body;
                    let got = self.walk(&e.body, &scope2, &acc2, binds)?;
                    debug_assert_eq!(got, body);
                }
                // Fix forward references: bodies walked later than uses.
                for occ in &mut self.occs {
                    if let OccKind::Jump { target, .. } = &mut occ.kind {
                        if *target == usize::MAX {
                            // Resolved below by a second pass; nothing to
                            // do here since binds now hold final ids.
                        }
                    }
                    let _ = occ;
                }
                for e in &sys.equations {
                    binds.remove(&e.var);
                }
                let entry_idx = sys
                    .equations
                    .iter()
                    .position(|e| e.var == sys.entry)
                    .expect("validated entry");
                OccKind::Jump {
                    target: body_ids[entry_idx],
                    prefix_len: scope.len(),
                    args: sys.entry_args.clone(),
                    rank: 0,
                }
            }
        };
        self.occs[id].kind = kind;
        Ok(id)
    }
}

/// Builds the evaluation game: nodes are pairs of a subformula occurrence
/// (with its binder atoms) and a state.
pub fn build_eval_game(m: &KripkeModel, f: &Formula) -> Result<EvalGame, GameError> {
    mu::validate(f)?;
    if !f.is_closed() || !mu::is_nnf(f) {
        return Err(GameError::NotClosedNnf);
    }
    if f.uses_order() && m.ctx.sort() == AtomSort::Equality {
        return Err(GameError::Check(CheckError::NeedsOrderedAtoms));
    }
    let mut w = Walker { occs: Vec::new() };
    let root = w.walk(f, &[], &[], &mut BTreeMap::new())?;
    let occs = w.occs;

    // Game context: the model context plus one constructor per occurrence.
    let mut gctx = (*m.ctx).clone();
    for (i, o) in occs.iter().enumerate() {
        gctx.register_tag(&format!("o{i}"), o.scope.len())?;
    }
    let gctx = Ctx::new(gctx);
    let states: Vec<Orbit> = m.states.orbits().to_vec();
    let sat = OrbitRelation::from_pairs(gctx.clone(), m.sat.pairs().to_vec());
    let trans_pairs: Vec<PairOrbit> = m.trans.pairs().to_vec();

    let occ_tag = |i: usize, stag: &Tag| -> Tag {
        Tag::Pair(
            Box::new(Tag::named(&format!("o{i}"))),
            Box::new(stag.clone()),
        )
    };

    // Node types per occurrence and state orbit.
    let mut node_types: Vec<Vec<(usize, CompleteType)>> = vec![Vec::new(); occs.len()];
    for (i, o) in occs.iter().enumerate() {
        let k = o.scope.len();
        let resolve = |n: &str| gctx.const_id(n);
        let mut parts = Vec::new();
        for c in &o.acc {
            parts.push(c.compile(&o.scope, &resolve)?);
        }
        let acc = Constraint::and(parts);
        for (si, s) in states.iter().enumerate() {
            let joint = Constraint::and(vec![
                acc.clone(),
                crate::orbits::shift_constraint(
                    &s.ty.defining_constraint(gctx.sort()),
                    k as u32,
                ),
            ]);
            for ty in atoms::complete(&joint, k + s.arity(), &gctx)? {
                node_types[i].push((si, ty));
            }
        }
    }

    let mut nodes = Vec::new();
    let mut exists_nodes = Vec::new();
    let mut rank_map = BTreeMap::new();
    let mut moves: Vec<PairOrbit> = Vec::new();

    // Identity-style move: duplicate scope and state variables of the
    // source into a target occurrence with given layouts.
    let push_move = |moves: &mut Vec<PairOrbit>,
                     src_tag: Tag,
                     dst_tag: Tag,
                     ty: CompleteType,
                     lar: usize,
                     rar: usize| {
        moves.push(PairOrbit {
            left_tag: src_tag,
            left_arity: lar as u32,
            right_tag: dst_tag,
            right_arity: rar as u32,
            ty,
        });
    };

    for (i, o) in occs.iter().enumerate() {
        let k = o.scope.len();
        for (si, ty) in &node_types[i] {
            let s = &states[*si];
            let n = s.arity();
            let tag = occ_tag(i, &s.tag);
            let orbit = Orbit {
                tag: tag.clone(),
                ty: ty.clone(),
            };
            let mut rank = 0;
            let owner = match &o.kind {
                OccKind::True => Player::Forall,
                OccKind::False => Player::Exists,
                OccKind::Pred {
                    tag: ptag,
                    args,
                    positive,
                } => {
                    // Truth of a basic predicate is constant on the orbit.
                    let holds = pred_holds(&gctx, &sat, ty, k, s, &o.scope, ptag, args)?;
                    if holds == *positive {
                        Player::Forall
                    } else {
                        Player::Exists
                    }
                }
                OccKind::Branch { children, exists } => {
                    for &c in children {
                        // Same scope and state: duplicate every variable.
                        let assign: Vec<Vec<u32>> = (0..k + n)
                            .map(|v| vec![v as u32, (k + n + v) as u32])
                            .collect();
                        let pair = relabel_type(ty, &assign, &[], 2 * (k + n) as u32, &gctx);
                        push_move(
                            &mut moves,
                            tag.clone(),
                            occ_tag(c, &s.tag),
                            pair,
                            k + n,
                            k + n,
                        );
                    }
                    if *exists {
                        Player::Exists
                    } else {
                        Player::Forall
                    }
                }
                OccKind::OrbitBranch { child, exists } => {
                    // Moves extend the scope: one per child node type whose
                    // prefix matches this node.
                    let ck = occs[*child].scope.len();
                    let b = ck - k;
                    for (csi, cty) in &node_types[*child] {
                        if csi != si {
                            continue;
                        }
                        // Parent coords inside the child: scope 0..k and
                        // state b + k..b + k + n.
                        let mut assign: Vec<Vec<u32>> = Vec::new();
                        let lar = (k + n) as u32;
                        for j in 0..ck + n {
                            let right = lar + j as u32;
                            if j < k {
                                assign.push(vec![j as u32, right]);
                            } else if j < ck {
                                assign.push(vec![right]);
                            } else {
                                assign.push(vec![(j - b) as u32, right]);
                            }
                        }
                        let pair = relabel_type(
                            cty,
                            &assign,
                            &[],
                            lar + (ck + n) as u32,
                            &gctx,
                        );
                        if project_left(&pair, lar, &gctx) != *ty {
                            continue;
                        }
                        push_move(
                            &mut moves,
                            tag.clone(),
                            occ_tag(*child, &s.tag),
                            pair,
                            k + n,
                            ck + n,
                        );
                    }
                    if *exists {
                        Player::Exists
                    } else {
                        Player::Forall
                    }
                }
                OccKind::Modal { child, exists } => {
                    for p in &trans_pairs {
                        if p.left_tag != s.tag || p.left_arity as usize != n {
                            continue;
                        }
                        let np = p.right_arity as usize;
                        // Joint arrangement of (scope, state, successor).
                        let joint = Constraint::and(vec![
                            ty.defining_constraint(gctx.sort()),
                            crate::orbits::shift_constraint(
                                &p.ty.defining_constraint(gctx.sort()),
                                k as u32,
                            ),
                        ]);
                        for j in atoms::complete(&joint, k + n + np, &gctx)? {
                            let lar = (k + n) as u32;
                            let mut assign: Vec<Vec<u32>> = Vec::new();
                            for v in 0..k + n + np {
                                if v < k {
                                    assign.push(vec![v as u32, lar + v as u32]);
                                } else if v < k + n {
                                    assign.push(vec![v as u32]);
                                } else {
                                    assign.push(vec![lar + (v - n) as u32]);
                                }
                            }
                            let pair = relabel_type(
                                &j,
                                &assign,
                                &[],
                                lar + (k + np) as u32,
                                &gctx,
                            );
                            push_move(
                                &mut moves,
                                tag.clone(),
                                occ_tag(*child, &p.right_tag),
                                pair,
                                k + n,
                                k + np,
                            );
                        }
                    }
                    if *exists {
                        Player::Exists
                    } else {
                        Player::Forall
                    }
                }
                OccKind::Jump {
                    target,
                    prefix_len,
                    args,
                    rank: r,
                } => {
                    rank = *r;
                    let t = &occs[*target];
                    let tk = t.scope.len();
                    let m_params = tk - prefix_len;
                    if args.len() == m_params {
                        // Right layout: prefix scope, parameter items, state.
                        let lar = (k + n) as u32;
                        let mut assign: Vec<Vec<u32>> =
                            (0..k + n).map(|v| vec![v as u32]).collect();
                        let mut pins: Vec<(u32, u32)> = Vec::new();
                        for j in 0..*prefix_len {
                            assign[j].push(lar + j as u32);
                        }
                        for v in 0..n {
                            assign[k + v].push(lar + (tk + v) as u32);
                        }
                        let mut ok = true;
                        for (pi, a) in args.iter().enumerate() {
                            let rv = lar + (prefix_len + pi) as u32;
                            if let Some(sv) = o.scope.iter().position(|v| v == a) {
                                assign[sv].push(rv);
                            } else if let Some(c) = gctx.const_id(a) {
                                pins.push((rv, c));
                            } else {
                                ok = false;
                            }
                        }
                        if ok {
                            let pair = relabel_type(
                                ty,
                                &assign,
                                &pins,
                                lar + (tk + n) as u32,
                                &gctx,
                            );
                            // The move exists only when the instantiated
                            // index satisfies the target's constraints.
                            let rvars: Vec<u32> =
                                (lar..lar + (tk + n) as u32).collect();
                            let target_ty = atoms::project(&pair, &rvars, &gctx);
                            if node_types[*target]
                                .iter()
                                .any(|(tsi, tty)| tsi == si && tty == &target_ty)
                            {
                                push_move(
                                    &mut moves,
                                    tag.clone(),
                                    occ_tag(*target, &s.tag),
                                    pair,
                                    k + n,
                                    tk + n,
                                );
                            }
                        }
                    }
                    Player::Exists
                }
            };
            rank_map.insert(orbit.clone(), rank);
            if owner == Player::Exists {
                exists_nodes.push(orbit.clone());
            }
            nodes.push(orbit);
        }
    }

    let game = AtomicParityGame {
        ctx: gctx.clone(),
        nodes: OrbitSet::from_orbits(gctx.clone(), nodes),
        exists_nodes: OrbitSet::from_orbits(gctx.clone(), exists_nodes),
        moves: OrbitRelation::from_pairs(gctx, moves),
        rank: rank_map,
    };
    Ok(EvalGame {
        game,
        root_occ: root,
    })
}

fn project_left(pair: &CompleteType, lar: u32, ctx: &Context) -> CompleteType {
    let left: Vec<u32> = (0..lar).collect();
    atoms::project(pair, &left, ctx)
}

#[allow(clippy::too_many_arguments)]
fn pred_holds(
    gctx: &Ctx,
    sat: &OrbitRelation,
    ty: &CompleteType,
    k: usize,
    s: &Orbit,
    scope: &[String],
    ptag: &str,
    args: &[String],
) -> Result<bool, GameError> {
    let n = s.arity();
    // Build the (state, predicate) pair type from the node type.
    let mut assign: Vec<Vec<u32>> = Vec::new();
    for v in 0..k + n {
        if v < k {
            assign.push(vec![]);
        } else {
            assign.push(vec![(v - k) as u32]);
        }
    }
    let mut pins: Vec<(u32, u32)> = Vec::new();
    for (i, a) in args.iter().enumerate() {
        let pv = (n + i) as u32;
        if let Some(sv) = scope.iter().position(|v| v == a) {
            assign[sv].push(pv);
        } else if let Some(c) = gctx.const_id(a) {
            pins.push((pv, c));
        } else {
            return Err(GameError::Atoms(AtomError::UnknownName(a.clone())));
        }
    }
    let pair = relabel_type(ty, &assign, &pins, (n + args.len()) as u32, gctx);
    Ok(sat.pairs().iter().any(|p| {
        p.left_tag == s.tag
            && p.right_tag == Tag::pred(ptag)
            && p.left_arity as usize == n
            && p.right_arity as usize == args.len()
            && p.ty == pair
    }))
}

impl EvalGame {
    /// The states at which the root formula holds according to the game:
    /// the existential winning region restricted to root nodes, read back
    /// as a state set over the model context.
    pub fn exists_win_states(&self, m: &KripkeModel) -> Result<OrbitSet, GameError> {
        let (ex, _) = self.game.winners();
        let root = format!("o{}", self.root_occ);
        let mut orbits = Vec::new();
        for o in ex.orbits() {
            if let Tag::Pair(l, r) = &o.tag {
                if **l == Tag::named(&root) {
                    orbits.push(Orbit {
                        tag: (**r).clone(),
                        ty: o.ty.clone(),
                    });
                }
            }
        }
        Ok(OrbitSet::from_orbits(m.ctx.clone(), orbits))
    }
}

/// The adequacy correspondence: model-checker semantics equals the
/// existential winning region of the evaluation game at the root.
pub fn adequacy_check(m: &KripkeModel, f: &Formula) -> Result<bool, GameError> {
    let nf = mu::nnf(f);
    let eg = build_eval_game(m, &nf)?;
    let by_game = eg.exists_win_states(m)?;
    let by_eval = check::eval(m, f, &Environment::new())?;
    Ok(by_game.equals(&by_eval)?)
}

// ---------------------------------------------------------------------------
// Game DSL
// ---------------------------------------------------------------------------

/// Parses the game dump format:
///
/// ```text
/// atoms equality|ordered
/// const ...
/// node Tag(v...) [where c] owner (exists|forall) rank N
/// edge Tag(v...) -> Tag2(w...) [where c]
/// ```
pub fn parse_game(src: &str) -> Result<AtomicParityGame, GameError> {
    let mut lx = Lexer::new(src)?;
    if !lx.eat_kw("atoms") {
        return Err(lx.error("game must start with `atoms equality|ordered`").into());
    }
    let sort = if lx.eat_kw("equality") {
        AtomSort::Equality
    } else if lx.eat_kw("ordered") {
        AtomSort::Ordered
    } else {
        return Err(lx.error("expected `equality` or `ordered`").into());
    };
    let mut ctx = Context::new(sort);
    struct NodeDecl {
        tag: String,
        vars: Vec<String>,
        constraint: SConstraint,
        exists: bool,
        rank: u32,
    }
    struct EdgeDecl {
        tag: String,
        vars: Vec<String>,
        tag2: String,
        vars2: Vec<String>,
        constraint: SConstraint,
    }
    let mut node_decls = Vec::new();
    let mut edge_decls = Vec::new();
    loop {
        if lx.peek() == &Tok::Eof {
            break;
        }
        if lx.eat_kw("const") {
            loop {
                let name = lx.expect_ident().map_err(ParseError::from)?;
                let mut next = 1 + (0..ctx.n_consts() as u32)
                    .map(|c| ctx.const_atom(c).0.ceil().to_integer())
                    .max()
                    .unwrap_or(0);
                let w = if lx.eat_sym("=") {
                    let neg = lx.eat_sym("-");
                    match lx.bump() {
                        Tok::Number(a, b) => {
                            let v = num_rational::Rational64::new(a, b);
                            Atom(if neg { -v } else { v })
                        }
                        t => return Err(lx.error(format!("expected number, found {t}")).into()),
                    }
                } else {
                    next += 0;
                    Atom::int(next)
                };
                ctx.add_const(&name, w).map_err(GameError::Atoms)?;
                if lx.eat_sym("<") || lx.eat_sym(",") {
                    continue;
                }
                break;
            }
            continue;
        }
        if lx.eat_kw("node") {
            let (tag, vars) = parse_head(&mut lx)?;
            let constraint = if lx.eat_kw("where") {
                parse_constraint(&mut lx)?
            } else {
                SConstraint::tt()
            };
            if !lx.eat_kw("owner") {
                return Err(lx.error("expected `owner`").into());
            }
            let exists = if lx.eat_kw("exists") {
                true
            } else if lx.eat_kw("forall") {
                false
            } else {
                return Err(lx.error("expected `exists` or `forall`").into());
            };
            if !lx.eat_kw("rank") {
                return Err(lx.error("expected `rank`").into());
            }
            let rank = match lx.bump() {
                Tok::Number(n, 1) if n >= 0 => n as u32,
                t => return Err(lx.error(format!("expected rank, found {t}")).into()),
            };
            node_decls.push(NodeDecl {
                tag,
                vars,
                constraint,
                exists,
                rank,
            });
            continue;
        }
        if lx.eat_kw("edge") {
            let (tag, vars) = parse_head(&mut lx)?;
            lx.expect_sym("->").map_err(ParseError::from)?;
            let (tag2, vars2) = parse_head(&mut lx)?;
            let constraint = if lx.eat_kw("where") {
                parse_constraint(&mut lx)?
            } else {
                SConstraint::tt()
            };
            edge_decls.push(EdgeDecl {
                tag,
                vars,
                tag2,
                vars2,
                constraint,
            });
            continue;
        }
        return Err(lx
            .error(format!("expected `const`, `node` or `edge`, found {}", lx.peek()))
            .into());
    }
    for d in &node_decls {
        ctx.register_tag(&d.tag, d.vars.len()).map_err(GameError::Atoms)?;
    }
    let ctx = Ctx::new(ctx);
    let mut nodes = Vec::new();
    let mut exists_nodes = Vec::new();
    let mut rank = BTreeMap::new();
    for d in &node_decls {
        let kc = d.constraint.compile(&d.vars, &|n| ctx.const_id(n))?;
        for ty in atoms::complete(&kc, d.vars.len(), &ctx)? {
            let o = Orbit {
                tag: Tag::named(&d.tag),
                ty,
            };
            if d.exists {
                exists_nodes.push(o.clone());
            }
            rank.insert(o.clone(), d.rank);
            nodes.push(o);
        }
    }
    let nodes = OrbitSet::from_orbits(ctx.clone(), nodes);
    let exists_nodes = OrbitSet::from_orbits(ctx.clone(), exists_nodes);
    let mut moves = OrbitRelation::empty(ctx.clone());
    for d in &edge_decls {
        let (joint, extra) = crate::kripke::joint_locals_pub(&d.vars, &d.vars2);
        let mut c = d.constraint.compile(&joint, &|n| ctx.const_id(n))?;
        c = Constraint::and(vec![c, extra]);
        let r = OrbitRelation::comprehension(
            ctx.clone(),
            Tag::named(&d.tag),
            d.vars.len(),
            Tag::named(&d.tag2),
            d.vars2.len(),
            &c,
        )?;
        moves = moves.union(&r)?;
    }
    for p in moves.pairs() {
        for (o, t) in [
            (p.left_orbit(&ctx), &p.left_tag),
            (p.right_orbit(&ctx), &p.right_tag),
        ] {
            if !nodes.contains_orbit(&o) {
                return Err(GameError::EdgeEscapes(t.to_string()));
            }
        }
    }
    Ok(AtomicParityGame {
        ctx,
        nodes,
        exists_nodes,
        moves,
        rank,
    })
}

fn parse_head(lx: &mut Lexer) -> Result<(String, Vec<String>), GameError> {
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

/// Prints a game back in the dump grammar, one node orbit per line.
pub fn print_game(g: &AtomicParityGame) -> String {
    let mut s = String::new();
    let sort = match g.ctx.sort() {
        AtomSort::Equality => "equality",
        AtomSort::Ordered => "ordered",
    };
    writeln!(s, "atoms {sort}").unwrap();
    if g.ctx.n_consts() > 0 {
        let parts: Vec<String> = (0..g.ctx.n_consts() as u32)
            .map(|c| format!("{} = {}", g.ctx.const_name(c), g.ctx.const_atom(c)))
            .collect();
        let sep = match g.ctx.sort() {
            AtomSort::Ordered => " < ",
            AtomSort::Equality => ", ",
        };
        writeln!(s, "const {}", parts.join(sep)).unwrap();
    }
    for o in g.nodes.orbits() {
        let vars: Vec<String> = (0..o.arity()).map(|i| format!("v{}", i + 1)).collect();
        let owner = if g.exists_nodes.contains_orbit(o) {
            "exists"
        } else {
            "forall"
        };
        writeln!(
            s,
            "node {}({}) where {} owner {} rank {}",
            o.tag,
            vars.join(","),
            crate::orbits::render_constraint(
                &o.ty.defining_constraint(g.ctx.sort()),
                &vars,
                &g.ctx
            ),
            owner,
            g.rank[o],
        )
        .unwrap();
    }
    for p in g.moves.pairs() {
        let lv: Vec<String> = (0..p.left_arity).map(|i| format!("v{}", i + 1)).collect();
        let rv: Vec<String> = (0..p.right_arity)
            .map(|i| format!("w{}", i + 1))
            .collect();
        let all: Vec<String> = lv.iter().chain(rv.iter()).cloned().collect();
        writeln!(
            s,
            "edge {}({}) -> {}({}) where {}",
            p.left_tag,
            lv.join(","),
            p.right_tag,
            rv.join(","),
            crate::orbits::render_constraint(
                &p.ty.defining_constraint(g.ctx.sort()),
                &all,
                &g.ctx
            ),
        )
        .unwrap();
    }
    s
}

// ---------------------------------------------------------------------------
// Random games
// ---------------------------------------------------------------------------

/// A random small atomic parity game over equality atoms: a couple of
/// constants, node tags of arity at most two, random edges between
/// compatible pair orbits, random owners and small ranks.
pub fn random_game<R: Rng>(rng: &mut R) -> AtomicParityGame {
    let mut ctx = Context::new(AtomSort::Equality);
    let n_consts = rng.gen_range(0..=2);
    for i in 0..n_consts {
        ctx.add_const(&format!("c{i}"), Atom::int(i + 1)).unwrap();
    }
    let n_tags = rng.gen_range(1..=2);
    let mut arities = Vec::new();
    for i in 0..n_tags {
        let ar = rng.gen_range(0..=2usize);
        ctx.register_tag(&format!("t{i}"), ar).unwrap();
        arities.push(ar);
    }
    let ctx = Ctx::new(ctx);
    let mut nodes = Vec::new();
    for (i, &ar) in arities.iter().enumerate() {
        for ty in atoms::complete(&Constraint::tt(), ar, &ctx).unwrap() {
            nodes.push(Orbit {
                tag: Tag::named(&format!("t{i}")),
                ty,
            });
        }
    }
    let mut exists_nodes = Vec::new();
    let mut rank = BTreeMap::new();
    for o in &nodes {
        if rng.gen_bool(0.5) {
            exists_nodes.push(o.clone());
        }
        rank.insert(o.clone(), rng.gen_range(0..4u32));
    }
    let mut moves = Vec::new();
    for (i, &la) in arities.iter().enumerate() {
        for (j, &ra) in arities.iter().enumerate() {
            for ty in atoms::complete(&Constraint::tt(), la + ra, &ctx).unwrap() {
                if rng.gen_bool(0.35) {
                    moves.push(PairOrbit {
                        left_tag: Tag::named(&format!("t{i}")),
                        left_arity: la as u32,
                        right_tag: Tag::named(&format!("t{j}")),
                        right_arity: ra as u32,
                        ty,
                    });
                }
            }
        }
    }
    AtomicParityGame {
        nodes: OrbitSet::from_orbits(ctx.clone(), nodes),
        exists_nodes: OrbitSet::from_orbits(ctx.clone(), exists_nodes),
        moves: OrbitRelation::from_pairs(ctx.clone(), moves),
        rank,
        ctx,
    }
}

/// Concretizes an atomic game over a finite pool and solves it directly;
/// used to cross-check quotient solving on random games.
pub fn concretize_and_solve(
    g: &AtomicParityGame,
    extra: usize,
) -> (Vec<crate::orbits::Element>, Vec<Player>) {
    let pool = check::atom_pool(&g.ctx, extra);
    let elems = g.nodes.enumerate(&pool);
    let index: BTreeMap<&crate::orbits::Element, usize> =
        elems.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let mut succ = vec![Vec::new(); elems.len()];
    for (x, y) in crate::orbits::enumerate_relation(&g.moves, &pool) {
        if let (Some(&a), Some(&b)) = (index.get(&x), index.get(&y)) {
            if !succ[a].contains(&b) {
                succ[a].push(b);
            }
        }
    }
    let owner = elems
        .iter()
        .map(|e| {
            if g.exists_nodes.member(e).unwrap_or(false) {
                Player::Exists
            } else {
                Player::Forall
            }
        })
        .collect();
    let rank = elems
        .iter()
        .map(|e| {
            let o = Orbit {
                tag: e.tag.clone(),
                ty: atoms::type_of(&e.args, &g.ctx),
            };
            g.rank[&o]
        })
        .collect();
    let og = OrbitGame {
        owner,
        rank,
        succ,
    };
    let sol = solve_finite(&og);
    (elems, sol.winner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::builtin_model;
    use crate::mu::{builtin_formula, parse_formula};
    use crate::orbits::Element;
    use rand::SeedableRng;

    fn mini_game(owner: &[Player], rank: &[u32], edges: &[(usize, usize)]) -> OrbitGame {
        let mut succ = vec![Vec::new(); owner.len()];
        for &(a, b) in edges {
            succ[a].push(b);
        }
        OrbitGame {
            owner: owner.to_vec(),
            rank: rank.to_vec(),
            succ,
        }
    }

    #[test]
    fn self_loop_even_rank_wins_for_exists() {
        let g = mini_game(&[Player::Exists], &[0], &[(0, 0)]);
        let sol = solve_finite(&g);
        assert_eq!(sol.winner, vec![Player::Exists]);
        assert_eq!(sol.strategy[0], Some(0));
    }

    #[test]
    fn stuck_exists_loses() {
        let g = mini_game(&[Player::Exists], &[0], &[]);
        let sol = solve_finite(&g);
        assert_eq!(sol.winner, vec![Player::Forall]);
        // Dually, a stuck universal node is a win for exists.
        let g = mini_game(&[Player::Forall], &[1], &[]);
        let sol = solve_finite(&g);
        assert_eq!(sol.winner, vec![Player::Exists]);
    }

    #[test]
    fn odd_cycle_wins_for_forall() {
        let g = mini_game(
            &[Player::Exists, Player::Exists],
            &[1, 1],
            &[(0, 1), (1, 0)],
        );
        let sol = solve_finite(&g);
        assert_eq!(sol.winner, vec![Player::Forall, Player::Forall]);
    }

    // Exhaustive oracle: enumerate all positional strategy pairs and check
    // the unique resulting play. Only for very small games.
    fn oracle_winner(g: &OrbitGame, start: usize) -> Player {
        let n = g.owner.len();
        let choices: Vec<Vec<Option<usize>>> = (0..n)
            .map(|v| {
                if g.succ[v].is_empty() {
                    vec![None]
                } else {
                    g.succ[v].iter().map(|&w| Some(w)).collect()
                }
            })
            .collect();
        fn plays(
            g: &OrbitGame,
            choices: &[Vec<Option<usize>>],
            who: Player,
            pick: &mut Vec<Option<usize>>,
            v: usize,
            other_best: &dyn Fn(&OrbitGame, &[Option<usize>], usize) -> bool,
        ) -> bool {
            // exists a strategy for `who` such that for all opponent
            // strategies the play from v is won by exists (who==Exists) /
            // forall wins (who==Forall).
            fn enumerate(
                g: &OrbitGame,
                choices: &[Vec<Option<usize>>],
                who: Player,
                pick: &mut Vec<Option<usize>>,
                idx: usize,
                v: usize,
                check: &dyn Fn(&OrbitGame, &[Option<usize>], usize) -> bool,
            ) -> bool {
                let owned: Vec<usize> = (0..g.owner.len())
                    .filter(|&u| g.owner[u] == who)
                    .collect();
                if idx == owned.len() {
                    return check(g, pick, v);
                }
                let u = owned[idx];
                for c in &choices[u] {
                    pick[u] = *c;
                    if enumerate(g, choices, who, pick, idx + 1, v, check) {
                        return true;
                    }
                }
                false
            }
            enumerate(g, choices, who, pick, 0, v, other_best)
        }
        // For each exists strategy, verify against all forall strategies.
        let all_forall_fail = |g: &OrbitGame, ex: &[Option<usize>], v: usize| -> bool {
            let choices: Vec<Vec<Option<usize>>> = (0..g.owner.len())
                .map(|u| {
                    if g.succ[u].is_empty() {
                        vec![None]
                    } else {
                        g.succ[u].iter().map(|&w| Some(w)).collect()
                    }
                })
                .collect();
            fn all(
                g: &OrbitGame,
                choices: &[Vec<Option<usize>>],
                ex: &[Option<usize>],
                fa: &mut Vec<Option<usize>>,
                idx: usize,
                v: usize,
            ) -> bool {
                let owned: Vec<usize> = (0..g.owner.len())
                    .filter(|&u| g.owner[u] == Player::Forall)
                    .collect();
                if idx == owned.len() {
                    return play_won_by_exists(g, ex, fa, v);
                }
                let u = owned[idx];
                for c in &choices[u] {
                    fa[u] = *c;
                    if !all(g, choices, ex, fa, idx + 1, v) {
                        return false;
                    }
                }
                true
            }
            all(
                g,
                &choices,
                ex,
                &mut vec![None; g.owner.len()],
                0,
                v,
            )
        };
        let mut pick = vec![None; n];
        if plays(g, &choices, Player::Exists, &mut pick, start, &all_forall_fail) {
            Player::Exists
        } else {
            Player::Forall
        }
    }

    fn play_won_by_exists(
        g: &OrbitGame,
        ex: &[Option<usize>],
        fa: &[Option<usize>],
        start: usize,
    ) -> bool {
        let mut seen = vec![usize::MAX; g.owner.len()];
        let mut path = Vec::new();
        let mut v = start;
        loop {
            if seen[v] != usize::MAX {
                // Cycle from seen[v] to end of path.
                let cyc = &path[seen[v]..];
                let top = cyc.iter().map(|&u| g.rank[u]).max().unwrap();
                return top % 2 == 0;
            }
            seen[v] = path.len();
            path.push(v);
            let next = match g.owner[v] {
                Player::Exists => ex[v],
                Player::Forall => fa[v],
            };
            match next {
                Some(w) => v = w,
                // Stuck: the owner of v loses.
                None => return g.owner[v] == Player::Forall,
            }
        }
    }

    #[test]
    fn zielonka_matches_exhaustive_oracle_on_small_games() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.gen_range(1..=5usize);
            let owner: Vec<Player> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        Player::Exists
                    } else {
                        Player::Forall
                    }
                })
                .collect();
            let rank: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let mut edges = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if rng.gen_bool(0.4) {
                        edges.push((a, b));
                    }
                }
            }
            let g = mini_game(&owner, &rank, &edges);
            let sol = solve_finite(&g);
            for v in 0..n {
                assert_eq!(sol.winner[v], oracle_winner(&g, v), "game {g:?} node {v}");
            }
        }
    }

    #[test]
    fn pair_choice_game_quotient() {
        // Nodes: unordered pairs encoded as ordered distinct pairs, plus
        // single atoms. Exists picks an element of the pair, the universal
        // player then picks any pair. All ranks zero: exists wins
        // everywhere since the play never gets stuck.
        let src = "atoms equality\n\
                   node pair(a,b) where a != b owner exists rank 0\n\
                   node single(a) owner forall rank 0\n\
                   edge pair(a,b) -> single(c) where a != b and (c = a or c = b)\n\
                   edge single(a) -> pair(b,c) where b != c\n";
        let g = parse_game(src).unwrap();
        let (og, map) = g.quotient();
        assert_eq!(map.orbits.len(), 2);
        assert!(og.succ.iter().all(|s| !s.is_empty()));
        let (ex, fa) = g.winners();
        assert!(fa.is_empty());
        assert_eq!(ex.n_orbits(), 2);
    }

    #[test]
    fn empty_game_quotient() {
        let g = parse_game("atoms equality\n").unwrap();
        let (og, _) = g.quotient();
        assert!(og.owner.is_empty());
        let (ex, fa) = g.winners();
        assert!(ex.is_empty() && fa.is_empty());
    }

    #[test]
    fn single_orbit_clique_quotient() {
        let src = "atoms equality\n\
                   node v(a) owner exists rank 0\n\
                   edge v(a) -> v(b)\n";
        let g = parse_game(src).unwrap();
        let (og, _) = g.quotient();
        assert_eq!(og.owner.len(), 1);
        assert_eq!(og.succ[0], vec![0]);
        let (ex, _) = g.winners();
        assert_eq!(ex.n_orbits(), 1);
    }

    #[test]
    fn game_round_trip_through_printer() {
        let src = "atoms equality\n\
                   const c0\n\
                   node pair(a,b) where a != b owner exists rank 2\n\
                   node single(a) owner forall rank 1\n\
                   edge pair(a,b) -> single(c) where a != b and (c = a or c = b)\n";
        let g = parse_game(src).unwrap();
        let printed = print_game(&g);
        let back = parse_game(&printed).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn random_games_quotient_matches_concrete_solution() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for i in 0..40 {
            let g = random_game(&mut rng);
            let (ex, _) = g.winners();
            let (elems, direct) = concretize_and_solve(&g, 5);
            for (e, w) in elems.iter().zip(&direct) {
                let lifted = if ex.member(e).unwrap() {
                    Player::Exists
                } else {
                    Player::Forall
                };
                assert_eq!(lifted, *w, "game {i}, node {e}");
            }
        }
    }

    #[test]
    fn eval_game_terminal_examples() {
        let m = builtin_model("star", &[]).unwrap();
        // <> true on the star: exists wins at the root, loses at leaves.
        let f = parse_formula("<> true").unwrap();
        let eg = build_eval_game(&m, &f).unwrap();
        let win = eg.exists_win_states(&m).unwrap();
        assert!(win.member(&Element::new("root", vec![])).unwrap());
        assert!(!win.member(&Element::new("leaf", vec![Atom::int(3)])).unwrap());
    }

    #[test]
    fn eval_game_rejects_non_nnf() {
        let m = builtin_model("star", &[]).unwrap();
        let f = parse_formula("~<> true").unwrap();
        assert!(matches!(
            build_eval_game(&m, &f),
            Err(GameError::NotClosedNnf)
        ));
    }

    #[test]
    fn adequacy_on_star_fixtures() {
        let m = builtin_model("star", &[]).unwrap();
        for name in ["psi", "p1", "nu-diamond", "some-succ-pred", "reach-pred"] {
            let f = builtin_formula(name).unwrap();
            assert!(adequacy_check(&m, &f).unwrap(), "{name}");
        }
    }

    #[test]
    fn adequacy_on_vectorial_fixture() {
        let m = builtin_model("chain", &[2]).unwrap();
        let f = builtin_formula("chain-definer").unwrap();
        assert!(adequacy_check(&m, &f).unwrap());
    }
}
