use serde::{Deserialize, Serialize};

use crate::model::{Nanos, ServiceClass};

/// Header fields visible to the SDN switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowHeader<'a> {
    pub src: &'a str,
    pub dst: &'a str,
    pub class: ServiceClass,
    pub port_label: &'a str,
}

/// Per-field exact match; `None` is a wildcard.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowMatch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub src: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dst: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<ServiceClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub port_label: Option<String>,
}

impl FlowMatch {
    pub fn matches(&self, h: &FlowHeader<'_>) -> bool {
        self.src.as_deref().is_none_or(|s| s == h.src)
            && self.dst.as_deref().is_none_or(|s| s == h.dst)
            && self.class.is_none_or(|c| c == h.class)
            && self.port_label.as_deref().is_none_or(|s| s == h.port_label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlowAction {
    Forward(String),
    /// Send a copy on both interfaces; the receiver deduplicates by packet id.
    Duplicate(String, String),
    Drop,
    ToController,
}

impl FlowAction {
    pub fn uses_interface(&self, iface: &str) -> bool {
        match self {
            FlowAction::Forward(a) => a == iface,
            FlowAction::Duplicate(a, b) => a == iface || b == iface,
            _ => false,
        }
    }
}

pub static TABLE_MISS: FlowAction = FlowAction::ToController;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRule {
    pub priority: u32,
    #[serde(rename = "match", default)]
    pub matches: FlowMatch,
    pub action: FlowAction,
    #[serde(default)]
    pub installed_at: Nanos,
    /// Assigned by the table on insertion.
    #[serde(skip)]
    pub insertion_index: u64,
}

impl FlowRule {
    pub fn new(priority: u32, matches: FlowMatch, action: FlowAction) -> Self {
        Self { priority, matches, action, installed_at: 0, insertion_index: 0 }
    }

    fn same_identity(&self, other: &FlowRule) -> bool {
        self.priority == other.priority && self.matches == other.matches && self.action == other.action
    }
}

/// Rules kept sorted by (priority desc, insertion_index asc).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowTable {
    rules: Vec<FlowRule>,
    next_index: u64,
}

impl FlowTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rules in lookup order.
    pub fn rules(&self) -> &[FlowRule] {
        &self.rules
    }

    /// Inserts `rule` unless an identical (priority, match, action) rule is
    /// present. Returns whether the table changed.
    pub fn insert(&mut self, mut rule: FlowRule) -> bool {
        if self.rules.iter().any(|r| r.same_identity(&rule)) {
            return false;
        }
        rule.insertion_index = self.next_index;
        self.next_index += 1;
        let pos = self.rules.partition_point(|r| r.priority >= rule.priority);
        self.rules.insert(pos, rule);
        true
    }

    /// Removes every rule with this priority and match.
    pub fn remove(&mut self, priority: u32, matches: &FlowMatch) -> usize {
        let before = self.rules.len();
        self.rules.retain(|r| !(r.priority == priority && r.matches == *matches));
        before - self.rules.len()
    }

    /// Rewrites every forwarding action on interface `from` to `to`.
    pub fn replace_interface(&mut self, from: &str, to: &str) -> usize {
        let mut n = 0;
        for r in &mut self.rules {
            let swap = |s: &mut String| {
                if s == from {
                    *s = to.to_string();
                    true
                } else {
                    false
                }
            };
            let changed = match &mut r.action {
                FlowAction::Forward(a) => swap(a),
                FlowAction::Duplicate(a, b) => swap(a) | swap(b),
                _ => false,
            };
            n += changed as usize;
        }
        n
    }

    pub fn lookup(&self, header: &FlowHeader<'_>) -> &FlowAction {
        flow_match(self, header)
    }
}

/// Action of the first rule in (priority desc, insertion asc) order that
/// matches; `TO_CONTROLLER` on a miss.
pub fn flow_match<'t>(table: &'t FlowTable, header: &FlowHeader<'_>) -> &'t FlowAction {
    table.rules.iter().find(|r| r.matches.matches(header)).map_or(&TABLE_MISS, |r| &r.action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RngStream;

    fn hdr<'a>(src: &'a str, dst: &'a str) -> FlowHeader<'a> {
        FlowHeader { src, dst, class: ServiceClass::Mmtc, port_label: "p0" }
    }

    #[test]
    fn empty_table_misses() {
        assert_eq!(flow_match(&FlowTable::new(), &hdr("a", "b")), &FlowAction::ToController);
    }

    #[test]
    fn higher_priority_wins() {
        let mut t = FlowTable::new();
        t.insert(FlowRule::new(5, FlowMatch::default(), FlowAction::Forward("wifi".into())));
        t.insert(FlowRule::new(10, FlowMatch { src: Some("a".into()), ..Default::default() }, FlowAction::Drop));
        assert_eq!(flow_match(&t, &hdr("a", "b")), &FlowAction::Drop);
        assert_eq!(flow_match(&t, &hdr("c", "b")), &FlowAction::Forward("wifi".into()));
    }

    #[test]
    fn equal_priority_breaks_by_insertion() {
        let mut t = FlowTable::new();
        t.insert(FlowRule::new(1, FlowMatch::default(), FlowAction::Drop));
        t.insert(FlowRule::new(1, FlowMatch::default(), FlowAction::Forward("x".into())));
        assert_eq!(flow_match(&t, &hdr("a", "b")), &FlowAction::Drop);
    }

    #[test]
    fn insert_is_idempotent() {
        let mut t = FlowTable::new();
        let r = FlowRule::new(1, FlowMatch::default(), FlowAction::Drop);
        assert!(t.insert(r.clone()));
        assert!(!t.insert(r));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn replace_interface_rewrites_forwarding() {
        let mut t = FlowTable::new();
        t.insert(FlowRule::new(1, FlowMatch::default(), FlowAction::Forward("old".into())));
        t.insert(FlowRule::new(2, FlowMatch::default(), FlowAction::Duplicate("old".into(), "b".into())));
        t.insert(FlowRule::new(3, FlowMatch { dst: Some("z".into()), ..Default::default() }, FlowAction::Drop));
        assert_eq!(t.replace_interface("old", "new"), 2);
        assert!(t.rules().iter().all(|r| !r.action.uses_interface("old")));
    }

    const NAMES: [&str; 3] = ["a", "b", "c"];
    const LABELS: [&str; 2] = ["p0", "p1"];

    fn random_table(rng: &mut RngStream) -> FlowTable {
        let mut t = FlowTable::new();
        for _ in 0..rng.below(33) {
            let opt = |rng: &mut RngStream| (rng.below(2) == 0).then(|| NAMES[rng.below(3) as usize].to_string());
            let m = FlowMatch {
                src: opt(rng),
                dst: opt(rng),
                class: (rng.below(2) == 0).then(|| ServiceClass::ALL[rng.below(3) as usize]),
                port_label: (rng.below(3) == 0).then(|| LABELS[rng.below(2) as usize].to_string()),
            };
            let action = match rng.below(4) {
                0 => FlowAction::Drop,
                1 => FlowAction::ToController,
                2 => FlowAction::Forward(format!("if{}", rng.below(3))),
                _ => FlowAction::Duplicate("if0".into(), "if1".into()),
            };
            t.insert(FlowRule::new(rng.below(8) as u32, m, action));
        }
        t
    }

    /// Evaluate every rule, sort the matches, take the first.
    fn oracle(t: &FlowTable, h: &FlowHeader<'_>) -> FlowAction {
        let mut hits: Vec<&FlowRule> = t
            .rules()
            .iter()
            .filter(|r| {
                r.matches.src.as_ref().is_none_or(|s| s == h.src)
                    && r.matches.dst.as_ref().is_none_or(|s| s == h.dst)
                    && r.matches.class.is_none_or(|c| c == h.class)
                    && r.matches.port_label.as_ref().is_none_or(|s| s == h.port_label)
            })
            .collect();
        hits.sort_by(|a, b| b.priority.cmp(&a.priority).then(a.insertion_index.cmp(&b.insertion_index)));
        hits.first().map_or(FlowAction::ToController, |r| r.action.clone())
    }

    #[test]
    fn random_tables_match_sort_oracle() {
        let mut rng = RngStream::derive(11, "flow-match");
        for _ in 0..20 {
            let t = random_table(&mut rng);
            for _ in 0..2_000 {
                let h = FlowHeader {
                    src: NAMES[rng.below(3) as usize],
                    dst: NAMES[rng.below(3) as usize],
                    class: ServiceClass::ALL[rng.below(3) as usize],
                    port_label: LABELS[rng.below(2) as usize],
                };
                assert_eq!(flow_match(&t, &h), &oracle(&t, &h));
            }
        }
    }
}
