//! A small, deterministic CDCL solver used by the attack harness.
//!
//! Standard architecture: two-watched-literal propagation, first-UIP
//! conflict learning, VSIDS branching with phase saving, and Luby restarts.
//! Clauses can be added between `solve` calls and solving accepts
//! assumptions, which is how the attack loop separates the difference
//! constraint from the accumulated behavior constraints. All tie-breaking is
//! by variable index, so runs are reproducible.

use std::ops::Not;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Lit(u32);

impl Lit {
    pub fn positive(v: Var) -> Lit {
        Lit(v.0 << 1)
    }

    pub fn negative(v: Var) -> Lit {
        Lit(v.0 << 1 | 1)
    }

    pub fn with_sign(v: Var, value: bool) -> Lit {
        if value {
            Lit::positive(v)
        } else {
            Lit::negative(v)
        }
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_negative(self) -> bool {
        self.0 & 1 == 1
    }

    fn code(self) -> usize {
        self.0 as usize
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl std::fmt::Display for Lit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_negative() {
            write!(f, "-{}", self.var().0 + 1)
        } else {
            write!(f, "{}", self.var().0 + 1)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SatResult {
    Sat,
    Unsat,
}

/// The solving interface the attack code is written against.
pub trait SatBackend {
    fn new_var(&mut self) -> Var;
    fn add_clause(&mut self, lits: &[Lit]);
    fn solve(&mut self) -> SatResult;
    fn solve_with(&mut self, assumptions: &[Lit]) -> SatResult;
    /// Value of `v` in the model found by the last successful `solve`.
    fn model_value(&self, v: Var) -> bool;
    fn num_vars(&self) -> usize;
}

type ClauseRef = u32;

#[derive(Clone, Copy)]
struct Watch {
    clause: ClauseRef,
    blocker: Lit,
}

/// Max-heap over variables ordered by activity, ties to the lower index.
#[derive(Default)]
struct VarOrder {
    heap: Vec<Var>,
    pos: Vec<Option<u32>>,
}

impl VarOrder {
    fn grow(&mut self) {
        self.pos.push(None);
    }

    fn better(a: Var, b: Var, act: &[f64]) -> bool {
        let (aa, ab) = (act[a.index()], act[b.index()]);
        aa > ab || (aa == ab && a < b)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if Self::better(self.heap[i], self.heap[parent], act) {
                self.heap.swap(i, parent);
                self.pos[self.heap[i].index()] = Some(i as u32);
                i = parent;
            } else {
                break;
            }
        }
        self.pos[self.heap[i].index()] = Some(i as u32);
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        loop {
            let mut best = i;
            for child in [2 * i + 1, 2 * i + 2] {
                if child < self.heap.len() && Self::better(self.heap[child], self.heap[best], act)
                {
                    best = child;
                }
            }
            if best == i {
                break;
            }
            self.heap.swap(i, best);
            self.pos[self.heap[i].index()] = Some(i as u32);
            i = best;
        }
        self.pos[self.heap[i].index()] = Some(i as u32);
    }

    fn insert(&mut self, v: Var, act: &[f64]) {
        if self.pos[v.index()].is_some() {
            return;
        }
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<Var> {
        let top = *self.heap.first()?;
        self.pos[top.index()] = None;
        let last = self.heap.pop().expect("nonempty");
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn bumped(&mut self, v: Var, act: &[f64]) {
        if let Some(i) = self.pos[v.index()] {
            self.sift_up(i as usize, act);
        }
    }
}

const VAR_DECAY: f64 = 0.95;
const RESCALE_LIMIT: f64 = 1e100;
const RESTART_BASE: u64 = 100;

pub struct Solver {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<Watch>>,
    assign: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Option<ClauseRef>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    order: VarOrder,
    phase: Vec<bool>,
    seen: Vec<bool>,
    model: Vec<bool>,
    ok: bool,
    conflicts: u64,
    decisions: u64,
    propagations: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new()
    }
}

impl Solver {
    pub fn new() -> Self {
        Solver {
            clauses: Vec::new(),
            watches: Vec::new(),
            assign: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            order: VarOrder::default(),
            phase: Vec::new(),
            seen: Vec::new(),
            model: Vec::new(),
            ok: true,
            conflicts: 0,
            decisions: 0,
            propagations: 0,
        }
    }

    pub fn num_conflicts(&self) -> u64 {
        self.conflicts
    }

    pub fn num_decisions(&self) -> u64 {
        self.decisions
    }

    pub fn num_propagations(&self) -> u64 {
        self.propagations
    }

    fn value(&self, l: Lit) -> Option<bool> {
        self.assign[l.var().index()].map(|v| v != l.is_negative())
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<ClauseRef>) {
        debug_assert!(self.value(l).is_none());
        let v = l.var().index();
        self.assign[v] = Some(!l.is_negative());
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn attach(&mut self, cr: ClauseRef) {
        let (w0, w1) = (self.clauses[cr as usize][0], self.clauses[cr as usize][1]);
        self.watches[(!w0).code()].push(Watch { clause: cr, blocker: w1 });
        self.watches[(!w1).code()].push(Watch { clause: cr, blocker: w0 });
    }

    fn propagate(&mut self) -> Option<ClauseRef> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.code()]);
            let mut kept = 0;
            let mut i = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == Some(true) {
                    ws[kept] = w;
                    kept += 1;
                    continue;
                }
                let cr = w.clause as usize;
                if self.clauses[cr][0] == false_lit {
                    self.clauses[cr].swap(0, 1);
                }
                debug_assert_eq!(self.clauses[cr][1], false_lit);
                let first = self.clauses[cr][0];
                if self.value(first) == Some(true) {
                    ws[kept] = Watch { clause: w.clause, blocker: first };
                    kept += 1;
                    continue;
                }
                let mut moved = false;
                for j in 2..self.clauses[cr].len() {
                    let cand = self.clauses[cr][j];
                    if self.value(cand) != Some(false) {
                        self.clauses[cr].swap(1, j);
                        self.watches[(!cand).code()]
                            .push(Watch { clause: w.clause, blocker: first });
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[kept] = Watch { clause: w.clause, blocker: first };
                kept += 1;
                if self.value(first) == Some(false) {
                    // Conflict: keep the untouched tail and stop propagating.
                    while i < ws.len() {
                        ws[kept] = ws[i];
                        kept += 1;
                        i += 1;
                    }
                    ws.truncate(kept);
                    self.watches[p.code()] = ws;
                    self.qhead = self.trail.len();
                    return Some(w.clause);
                }
                self.enqueue(first, Some(w.clause));
            }
            ws.truncate(kept);
            self.watches[p.code()] = ws;
        }
        None
    }

    fn var_bump(&mut self, v: Var) {
        self.activity[v.index()] += self.var_inc;
        if self.activity[v.index()] > RESCALE_LIMIT {
            for a in &mut self.activity {
                *a *= 1.0 / RESCALE_LIMIT;
            }
            self.var_inc *= 1.0 / RESCALE_LIMIT;
        }
        self.order.bumped(v, &self.activity);
    }

    fn analyze(&mut self, mut confl: ClauseRef) -> (Vec<Lit>, u32) {
        let mut learned = vec![Lit(0)];
        let mut path = 0u32;
        let mut index = self.trail.len();
        let mut first = true;
        let uip;
        loop {
            let len = self.clauses[confl as usize].len();
            let start = usize::from(!first);
            for j in start..len {
                let q = self.clauses[confl as usize][j];
                let v = q.var();
                if !self.seen[v.index()] && self.level[v.index()] > 0 {
                    self.seen[v.index()] = true;
                    self.var_bump(v);
                    if self.level[v.index()] >= self.decision_level() {
                        path += 1;
                    } else {
                        learned.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let p = self.trail[index];
            self.seen[p.var().index()] = false;
            path -= 1;
            if path == 0 {
                uip = p;
                break;
            }
            confl = self.reason[p.var().index()].expect("non-UIP literal was propagated");
            first = false;
        }
        learned[0] = !uip;

        let bt = if learned.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learned.len() {
                if self.level[learned[i].var().index()] > self.level[learned[max_i].var().index()]
                {
                    max_i = i;
                }
            }
            learned.swap(1, max_i);
            self.level[learned[1].var().index()]
        };
        for &l in &learned[1..] {
            self.seen[l.var().index()] = false;
        }
        (learned, bt)
    }

    fn cancel_until(&mut self, target: u32) {
        if self.decision_level() <= target {
            return;
        }
        let bound = self.trail_lim[target as usize];
        while self.trail.len() > bound {
            let l = self.trail.pop().expect("trail nonempty");
            let v = l.var();
            self.phase[v.index()] = !l.is_negative();
            self.assign[v.index()] = None;
            self.reason[v.index()] = None;
            self.order.insert(v, &self.activity);
        }
        self.qhead = bound;
        self.trail_lim.truncate(target as usize);
    }

    fn record_learned(&mut self, learned: Vec<Lit>) {
        if learned.len() == 1 {
            self.enqueue(learned[0], None);
            return;
        }
        let cr = self.clauses.len() as ClauseRef;
        let assert_lit = learned[0];
        self.clauses.push(learned);
        self.attach(cr);
        self.enqueue(assert_lit, Some(cr));
    }

    fn luby(mut i: u64) -> u64 {
        let mut size = 1u64;
        let mut seq = 0u32;
        while size < i + 1 {
            seq += 1;
            size = 2 * size + 1;
        }
        while size - 1 != i {
            size = (size - 1) / 2;
            seq -= 1;
            i %= size;
        }
        1 << seq
    }

    fn pick_branch(&mut self) -> Option<Var> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.assign[v.index()].is_none() {
                return Some(v);
            }
        }
        None
    }

    fn search(&mut self, assumptions: &[Lit]) -> SatResult {
        let mut restart_count = 0u64;
        let mut budget = RESTART_BASE * Self::luby(restart_count);
        let mut since_restart = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return SatResult::Unsat;
                }
                let (learned, bt) = self.analyze(confl);
                self.cancel_until(bt);
                self.record_learned(learned);
                self.var_inc /= VAR_DECAY;
                continue;
            }
            if since_restart >= budget {
                restart_count += 1;
                budget = RESTART_BASE * Self::luby(restart_count);
                since_restart = 0;
                self.cancel_until(0);
                continue;
            }
            // Honor assumptions before free decisions, one level each.
            let mut made_decision = false;
            while (self.decision_level() as usize) < assumptions.len() {
                let a = assumptions[self.decision_level() as usize];
                match self.value(a) {
                    Some(true) => self.trail_lim.push(self.trail.len()),
                    Some(false) => return SatResult::Unsat,
                    None => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(a, None);
                        made_decision = true;
                        break;
                    }
                }
            }
            if made_decision {
                continue;
            }
            match self.pick_branch() {
                None => {
                    self.model = self.assign.iter().map(|a| a.expect("full model")).collect();
                    self.cancel_until(0);
                    return SatResult::Sat;
                }
                Some(v) => {
                    self.decisions += 1;
                    self.trail_lim.push(self.trail.len());
                    self.enqueue(Lit::with_sign(v, self.phase[v.index()]), None);
                }
            }
        }
    }
}

impl SatBackend for Solver {
    fn new_var(&mut self) -> Var {
        let v = Var(self.assign.len() as u32);
        self.assign.push(None);
        self.level.push(0);
        self.reason.push(None);
        self.activity.push(0.0);
        self.phase.push(false);
        self.seen.push(false);
        self.model.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.order.grow();
        self.order.insert(v, &self.activity);
        v
    }

    fn add_clause(&mut self, lits: &[Lit]) {
        if !self.ok {
            return;
        }
        self.cancel_until(0);
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_by_key(|l| l.0);
        c.dedup();
        for pair in c.windows(2) {
            if pair[0] == !pair[1] {
                return; // tautology
            }
        }
        c.retain(|&l| self.value(l) != Some(false));
        if c.iter().any(|&l| self.value(l) == Some(true)) {
            return;
        }
        match c.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cr = self.clauses.len() as ClauseRef;
                self.clauses.push(c);
                self.attach(cr);
            }
        }
    }

    fn solve(&mut self) -> SatResult {
        self.solve_with(&[])
    }

    fn solve_with(&mut self, assumptions: &[Lit]) -> SatResult {
        if !self.ok {
            return SatResult::Unsat;
        }
        self.cancel_until(0);
        let result = self.search(assumptions);
        self.cancel_until(0);
        result
    }

    fn model_value(&self, v: Var) -> bool {
        self.model[v.index()]
    }

    fn num_vars(&self) -> usize {
        self.assign.len()
    }
}
