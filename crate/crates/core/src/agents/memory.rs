use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::episode::{Action, Observation, TapTarget};
use crate::vehicle::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeTag {
    Effective,
    Ineffective,
    Invalid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub step: u32,
    pub summary: String,
    pub outcome: OutcomeTag,
}

/// Bounded log of reflections; the oldest entry goes first when full.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MemoryStore {
    capacity: usize,
    entries: VecDeque<MemoryEntry>,
}

impl MemoryStore {
    pub fn new(capacity: usize) -> Self {
        MemoryStore { capacity, entries: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: MemoryEntry) {
        if self.capacity == 0 {
            return;
        }
        while self.entries.len() >= self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.iter()
    }
}

/// One changed value between two observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Change {
    pub key: String,
    pub before: Option<Value>,
    pub after: Option<Value>,
}

/// Differences between consecutive observations.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StepDiff {
    pub screen: Option<(String, String)>,
    /// Values shown in the a11y tree, keyed by bound signal or node id.
    pub ui: Vec<Change>,
    /// Exposed environment signals (`motion.*`, `phenomenon.*`, `road.*`).
    pub env: Vec<Change>,
    pub invalid: Option<String>,
}

impl StepDiff {
    pub fn is_effective(&self) -> bool {
        self.screen.is_some() || !self.ui.is_empty()
    }
}

/// Values that change with time alone.
const CLOCK_KEYS: [&str; 1] = ["system.sim_clock"];

fn ui_values(obs: &Observation) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    if let Some(tree) = &obs.a11y {
        for n in tree.nodes() {
            if let Some(v) = &n.value {
                let key = n.binding.clone().unwrap_or_else(|| n.id.clone());
                if !CLOCK_KEYS.contains(&key.as_str()) {
                    out.entry(key).or_insert_with(|| v.clone());
                }
            }
        }
        if let Some(list) = tree.nodes().into_iter().find_map(|n| match &n.behavior {
            Some(crate::gui::Behavior::Scroll { page, .. }) => Some((n.id.clone(), *page)),
            _ => None,
        }) {
            out.insert(format!("{}.page", list.0), Value::Int(list.1 as i64));
        }
    }
    out
}

fn changes(a: &BTreeMap<String, Value>, b: &BTreeMap<String, Value>) -> Vec<Change> {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| Change { key: k.clone(), before: a.get(k).cloned(), after: b.get(k).cloned() })
        .collect()
}

pub fn diff(pre: &Observation, post: &Observation) -> StepDiff {
    let moved = pre.current_screen != post.current_screen;
    StepDiff {
        screen: moved.then(|| (pre.current_screen.name().to_string(), post.current_screen.name().to_string())),
        // values on different screens are not comparable
        ui: if moved { Vec::new() } else { changes(&ui_values(pre), &ui_values(post)) },
        env: changes(&pre.signals, &post.signals),
        invalid: post.event.clone(),
    }
}

fn show(v: &Option<Value>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => "absent".to_string(),
    }
}

pub fn describe_action(action: Option<&Action>) -> String {
    match action {
        Some(Action::Tap { target: TapTarget::Index { som_index } }) => format!("tap [{som_index}]"),
        Some(Action::Tap { target: TapTarget::Point { x, y } }) => format!("tap ({x},{y})"),
        Some(Action::Swipe { from, to }) => format!("swipe ({},{})->({},{})", from[0], from[1], to[0], to[1]),
        Some(Action::InputText { som_index, text }) => format!("type \"{text}\" into [{som_index}]"),
        Some(Action::ApiCall { name, .. }) => format!("call {name}"),
        Some(Action::Status { status }) => format!("status {status:?}"),
        Some(Action::Wait) => "wait".to_string(),
        None => "unparsable action".to_string(),
    }
}

/// Template reflection: a one-line summary and the memory entry for it.
pub fn reflect(pre: &Observation, action: Option<&Action>, post: &Observation) -> MemoryEntry {
    let d = diff(pre, post);
    let mut parts = Vec::new();
    if let Some((a, b)) = &d.screen {
        parts.push(format!("screen: {a}→{b}"));
    }
    for c in &d.ui {
        parts.push(format!("{}: {}→{}", c.key, show(&c.before), show(&c.after)));
    }
    let outcome = if d.invalid.is_some() {
        OutcomeTag::Invalid
    } else if d.is_effective() {
        OutcomeTag::Effective
    } else {
        OutcomeTag::Ineffective
    };
    let effect = match outcome {
        OutcomeTag::Invalid => format!("rejected ({})", d.invalid.as_deref().unwrap_or("")),
        OutcomeTag::Ineffective => "no effect".to_string(),
        OutcomeTag::Effective => parts.join("; "),
    };
    MemoryEntry {
        step: pre.step_index,
        summary: format!("step {}: {} -> {}", pre.step_index, describe_action(action), effect),
        outcome,
    }
}
