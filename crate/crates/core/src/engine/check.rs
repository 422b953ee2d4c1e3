//! Bounded exhaustive proof over the reachable (design state, sample window)
//! product.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use super::monitor::Monitor;
use crate::domain::{Counterexample, DesignModel, Verdict};
use crate::svapars::PropertyAst;

pub const DEFAULT_DEPTH: usize = 16;
pub const DEFAULT_BUDGET: usize = 1_000_000;
/// Free-input bits per cycle the engine will enumerate.
pub const MAX_INPUT_BITS: u32 = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("property name `{0}` is not bound to a design signal")]
    UnboundName(String),
    #[error("depth {depth} is smaller than the property span {span}")]
    DepthTooSmall { depth: usize, span: usize },
}

/// A property together with the design signals its names refer to.
#[derive(Debug, Clone)]
pub struct BoundProperty<'d> {
    pub ast: PropertyAst,
    pub design: &'d DesignModel,
    /// Property name -> design signal name.
    pub binding: BTreeMap<String, String>,
}

impl<'d> BoundProperty<'d> {
    /// Bind every name of `ast` to the design signal of the same name.
    pub fn bind(ast: &PropertyAst, design: &'d DesignModel) -> Result<Self, EngineError> {
        let mut binding = BTreeMap::new();
        for s in ast.signals() {
            if !design.has_signal(&s) {
                return Err(EngineError::UnboundName(s));
            }
            binding.insert(s.clone(), s);
        }
        Ok(BoundProperty { ast: ast.clone(), design, binding })
    }

    /// Design signals the property observes, in design order.
    pub fn bound_signals(&self) -> Vec<String> {
        let mut v: Vec<String> = self.binding.values().cloned().collect();
        v.sort_by_key(|s| self.design.signal_index(s));
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub depth: usize,
    /// Maximum product states to visit before giving up.
    pub budget: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { depth: DEFAULT_DEPTH, budget: DEFAULT_BUDGET }
    }
}

impl CheckOptions {
    pub fn depth(depth: usize) -> Self {
        CheckOptions { depth, ..Default::default() }
    }
}

struct Product<'a> {
    design: &'a DesignModel,
    mon: Monitor,
    /// Design index of each property-local signal.
    project: Vec<usize>,
    n_state: usize,
    widths: Vec<u32>,
    combos: u64,
}

/// Product node key: design state, the number of remembered samples, then
/// the remembered projected samples (oldest first). The count equals the
/// cycle index until the window is full.
type Key = Vec<u64>;

struct Stepped {
    next: Key,
    violation: Option<usize>,
    hit: bool,
}

impl Product<'_> {
    fn inputs(&self, mut combo: u64) -> Vec<u64> {
        // first declared input is the most significant digit
        let mut v = vec![0; self.widths.len()];
        for (i, w) in self.widths.iter().enumerate().rev() {
            v[i] = combo & ((1u64 << w) - 1);
            combo >>= w;
        }
        v
    }

    fn window_len(&self, key: &Key) -> usize {
        key[self.n_state] as usize
    }

    fn step(&self, key: &Key, combo: u64) -> Stepped {
        let w = self.project.len();
        let len = self.window_len(key);
        // cycle index is exact below the horizon; beyond it only relative positions matter
        let t = len;
        let state = &key[..self.n_state];
        let reset_active = len == 0;
        let env = self.design.sample(state, &self.inputs(combo), reset_active);
        let next_state = self.design.step(&env, reset_active);
        let row: Vec<u64> = self.project.iter().map(|&i| env[i]).collect();
        let samples = &key[self.n_state + 1..];
        let get = |sig: usize, cycle: i64| -> u64 {
            if cycle < 0 {
                return 0;
            }
            let c = cycle as usize;
            if c == t {
                row[sig]
            } else {
                samples[c * w + sig]
            }
        };
        let chk = self.mon.check_at(t, &get);
        let keep = self.mon.horizon - 1;
        let drop = (len + 1).saturating_sub(keep);
        let mut next = next_state;
        next.push((len + 1 - drop) as u64);
        next.extend_from_slice(&samples[drop * w..]);
        next.extend_from_slice(&row);
        Stepped { next, violation: chk.violation, hit: chk.hit }
    }
}

/// Prove or refute `p` over every input sequence of up to `opts.depth` cycles
/// starting with one reset cycle.
pub fn check(p: &BoundProperty, opts: CheckOptions) -> Result<Verdict, EngineError> {
    let id = p.ast.name.clone();
    let span = p.ast.span();
    if opts.depth == 0 || opts.depth < span {
        return Err(EngineError::DepthTooSmall { depth: opts.depth, span });
    }
    let design = p.design;
    let names = p.ast.signals();
    let mut locals = HashMap::new();
    let mut project = Vec::new();
    for n in &names {
        let target = p.binding.get(n).ok_or_else(|| EngineError::UnboundName(n.clone()))?;
        let idx = design.signal_index(target).ok_or_else(|| EngineError::UnboundName(n.clone()))?;
        locals.insert(n.clone(), project.len());
        project.push(idx);
    }
    let Ok(mut mon) = Monitor::new(&p.ast, &locals) else {
        return Ok(Verdict::inconclusive(id, opts.depth, false, 0));
    };
    // one remembered sample is the minimum the key layout supports
    mon.horizon = mon.horizon.max(2);
    let widths: Vec<u32> = design.free_inputs().iter().map(|&i| design.signals()[i].width).collect();
    let bits: u32 = widths.iter().sum();
    if bits > MAX_INPUT_BITS {
        return Ok(Verdict::inconclusive(id, opts.depth, false, 0));
    }
    let prod = Product { design, mon, project, n_state: design.state_vars.len(), widths, combos: 1u64 << bits };

    let mut init: Key = design.reset_state();
    init.push(0);
    let mut visited: HashSet<Key> = HashSet::new();
    visited.insert(init.clone());
    let mut layer = vec![init.clone()];
    let mut hit = false;
    let mut fail_len = None;
    'bfs: for t in 0..opts.depth {
        let mut next_layer = Vec::new();
        for key in &layer {
            for combo in 0..prod.combos {
                let s = prod.step(key, combo);
                hit |= s.hit;
                if s.violation.is_some() {
                    fail_len = Some(t + 1);
                    break 'bfs;
                }
                if t + 1 < opts.depth && !visited.contains(&s.next) {
                    if visited.len() >= opts.budget {
                        return Ok(Verdict::inconclusive(id, opts.depth, hit, visited.len()));
                    }
                    visited.insert(s.next.clone());
                    next_layer.push(s.next);
                }
            }
        }
        if next_layer.is_empty() {
            break;
        }
        layer = next_layer;
    }
    let explored = visited.len();

    let Some(len) = fail_len else {
        return Ok(if hit {
            Verdict::proven(id, opts.depth, explored)
        } else {
            Verdict::vacuous(id, opts.depth, explored)
        });
    };

    // Greedy lexicographic reconstruction of the shortest violating sequence.
    let mut memo: HashMap<(Key, usize), bool> = HashMap::new();
    let mut key = init;
    let mut inputs = Vec::with_capacity(len);
    let mut violated_at = 0;
    for step in 0..len {
        let remaining = len - step;
        let mut chosen = None;
        for combo in 0..prod.combos {
            let s = prod.step(&key, combo);
            if remaining == 1 {
                if let Some(v) = s.violation {
                    // monitor cycles are relative once the window is full
                    violated_at = v + step - prod.window_len(&key);
                    chosen = Some((combo, s.next));
                    break;
                }
            } else if can_violate(&prod, &s.next, remaining - 1, &mut memo) {
                chosen = Some((combo, s.next));
                break;
            }
        }
        let (combo, next) = chosen.expect("a violating continuation exists");
        inputs.push(prod.inputs(combo));
        key = next;
    }
    let reset: Vec<bool> = (0..len).map(|t| t == 0).collect();
    let trace = design.simulate(&inputs, &reset);
    Ok(Verdict::failed(id, opts.depth, Counterexample { trace, inputs, violated_at }, explored))
}

/// Whether some input sequence of exactly `steps` cycles from `key` ends in a violation.
fn can_violate(prod: &Product, key: &Key, steps: usize, memo: &mut HashMap<(Key, usize), bool>) -> bool {
    if let Some(&r) = memo.get(&(key.clone(), steps)) {
        return r;
    }
    let mut found = false;
    for combo in 0..prod.combos {
        let s = prod.step(key, combo);
        found = if steps == 1 { s.violation.is_some() } else { can_violate(prod, &s.next, steps - 1, memo) };
        if found {
            break;
        }
    }
    memo.insert((key.clone(), steps), found);
    found
}
