use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::model::{Nanos, NS_PER_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MigrationStrategy {
    MakeBeforeBreak,
    BreakBeforeMake,
}

impl MigrationStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            MigrationStrategy::MakeBeforeBreak => "MAKE_BEFORE_BREAK",
            MigrationStrategy::BreakBeforeMake => "BREAK_BEFORE_MAKE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MigrationTiming {
    /// Time to bring a new radio link up.
    pub link_setup_ns: Nanos,
    /// Controller to switch message latency.
    pub control_latency_ns: Nanos,
}

impl Default for MigrationTiming {
    fn default() -> Self {
        Self { link_setup_ns: 20 * NS_PER_MS, control_latency_ns: NS_PER_MS }
    }
}

/// Radio side of a gateway: interfaces and the channel in use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayRadio {
    pub radios: u32,
    pub channels: Vec<String>,
    pub active: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MigrationStep {
    NewLinkUp,
    SwitchUpdate,
    OldLinkDown,
}

impl MigrationStep {
    pub fn as_str(self) -> &'static str {
        match self {
            MigrationStep::NewLinkUp => "new_link_up",
            MigrationStep::SwitchUpdate => "switch_update",
            MigrationStep::OldLinkDown => "old_link_down",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrationPlan {
    pub old_channel: String,
    pub new_channel: String,
    pub strategy: MigrationStrategy,
    pub started_at: Nanos,
    /// Steps in execution order; steps sharing a time run in this order.
    pub steps: Vec<(Nanos, MigrationStep)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationReport {
    pub gateway: String,
    pub old_channel: String,
    pub new_channel: String,
    pub strategy: MigrationStrategy,
    pub started_at: Nanos,
    pub overlap_start: Nanos,
    pub old_link_down_at: Nanos,
    pub new_link_up_at: Nanos,
    pub packets_lost_during_migration: u64,
}

impl MigrationPlan {
    fn at(&self, step: MigrationStep) -> Option<Nanos> {
        self.steps.iter().find(|(_, s)| *s == step).map(|&(t, _)| t)
    }

    pub fn is_noop(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn new_link_up_at(&self) -> Nanos {
        self.at(MigrationStep::NewLinkUp).unwrap_or(self.started_at)
    }

    pub fn old_link_down_at(&self) -> Nanos {
        self.at(MigrationStep::OldLinkDown).unwrap_or(self.started_at)
    }

    pub fn switch_update_at(&self) -> Nanos {
        self.at(MigrationStep::SwitchUpdate).unwrap_or(self.started_at)
    }

    /// Start of the interval with both links up. Without an overlap (break
    /// before make) this is the instant the old link went down.
    pub fn overlap_start(&self) -> Nanos {
        match self.strategy {
            MigrationStrategy::MakeBeforeBreak => self.new_link_up_at(),
            MigrationStrategy::BreakBeforeMake => self.old_link_down_at(),
        }
    }

    /// Whether a packet forwarded at `t` leaves on a link that is up. Steps
    /// at `t` take effect first.
    pub fn delivers_at(&self, t: Nanos) -> bool {
        if self.is_noop() {
            return true;
        }
        let done = |s| self.at(s).is_some_and(|x| x <= t);
        let on_new = done(MigrationStep::SwitchUpdate);
        if on_new {
            done(MigrationStep::NewLinkUp)
        } else {
            !done(MigrationStep::OldLinkDown)
        }
    }

    pub fn report(&self, gateway: &str, lost: u64) -> MigrationReport {
        MigrationReport {
            gateway: gateway.to_string(),
            old_channel: self.old_channel.clone(),
            new_channel: self.new_channel.clone(),
            strategy: self.strategy,
            started_at: self.started_at,
            overlap_start: self.overlap_start(),
            old_link_down_at: self.old_link_down_at(),
            new_link_up_at: self.new_link_up_at(),
            packets_lost_during_migration: lost,
        }
    }
}

/// Plans a switch of the gateway uplink to `new_channel` starting at `now`.
///
/// Make-before-break brings the new link up, moves the flow table over and
/// only then tears the old link down. Break-before-make drops the old link
/// at once; the new link and the table update follow after the link setup
/// time.
pub fn migrate_link(
    radio: &GatewayRadio,
    new_channel: &str,
    strategy: MigrationStrategy,
    now: Nanos,
    timing: MigrationTiming,
) -> Result<MigrationPlan, GatewayError> {
    if !radio.channels.iter().any(|c| c == new_channel) {
        return Err(GatewayError::UnknownChannel(new_channel.to_string()));
    }
    let mut plan = MigrationPlan {
        old_channel: radio.active.clone(),
        new_channel: new_channel.to_string(),
        strategy,
        started_at: now,
        steps: Vec::new(),
    };
    if new_channel == radio.active {
        return Ok(plan);
    }
    let setup = timing.link_setup_ns;
    let ctrl = timing.control_latency_ns;
    plan.steps = match strategy {
        MigrationStrategy::MakeBeforeBreak => {
            if radio.radios < 2 {
                return Err(GatewayError::NoSecondInterface);
            }
            vec![
                (now + setup, MigrationStep::NewLinkUp),
                (now + setup + ctrl, MigrationStep::SwitchUpdate),
                (now + setup + 2 * ctrl, MigrationStep::OldLinkDown),
            ]
        }
        MigrationStrategy::BreakBeforeMake => vec![
            (now, MigrationStep::OldLinkDown),
            (now + setup, MigrationStep::NewLinkUp),
            (now + setup, MigrationStep::SwitchUpdate),
        ],
    };
    Ok(plan)
}

/// Migration triggered by the monitoring feed: the active channel scored
/// below `ratio` × best alternative for `consecutive` samples in a row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoMigration {
    pub ratio: f64,
    pub consecutive: u32,
    pub strategy: MigrationStrategy,
}

impl Default for AutoMigration {
    fn default() -> Self {
        Self { ratio: 0.5, consecutive: 3, strategy: MigrationStrategy::MakeBeforeBreak }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MigrationTrigger {
    streak: u32,
}

impl MigrationTrigger {
    /// Feeds one round of samples; returns the channel to migrate to when
    /// the trigger fires. The streak restarts after firing.
    pub fn observe<'a>(&mut self, rule: &AutoMigration, active: f64, alternatives: &[(&'a str, f64)]) -> Option<&'a str> {
        let best = alternatives
            .iter()
            .copied()
            .reduce(|a, b| if b.1 > a.1 { b } else { a });
        match best {
            Some((ch, score)) if active < rule.ratio * score => {
                self.streak += 1;
                if self.streak >= rule.consecutive.max(1) {
                    self.streak = 0;
                    return Some(ch);
                }
            }
            _ => self.streak = 0,
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radio(radios: u32) -> GatewayRadio {
        GatewayRadio { radios, channels: vec!["wifi1".into(), "wifi2".into()], active: "wifi1".into() }
    }

    fn lost_on_flow(plan: &MigrationPlan, period: Nanos, until: Nanos) -> u64 {
        (0..until / period).filter(|k| !plan.delivers_at(k * period)).count() as u64
    }

    #[test]
    fn make_before_break_ordering_and_zero_loss() {
        let p = migrate_link(&radio(2), "wifi2", MigrationStrategy::MakeBeforeBreak, 1_000 * NS_PER_MS, MigrationTiming::default()).unwrap();
        let r = p.report("gw", 0);
        assert!(r.started_at <= r.overlap_start && r.overlap_start <= r.old_link_down_at);
        assert!(p.switch_update_at() < p.old_link_down_at());
        assert_eq!(lost_on_flow(&p, NS_PER_MS, 3_000 * NS_PER_MS), 0);
    }

    #[test]
    fn break_before_make_loses_gap_over_period() {
        let timing = MigrationTiming { link_setup_ns: 50 * NS_PER_MS, control_latency_ns: NS_PER_MS };
        let p = migrate_link(&radio(2), "wifi2", MigrationStrategy::BreakBeforeMake, 1_000 * NS_PER_MS, timing).unwrap();
        assert_eq!(lost_on_flow(&p, NS_PER_MS, 3_000 * NS_PER_MS), 50);
        let r = p.report("gw", 50);
        assert_eq!(r.overlap_start, r.old_link_down_at);
        assert_eq!(r.new_link_up_at - r.old_link_down_at, 50 * NS_PER_MS);
    }

    #[test]
    fn same_channel_is_noop() {
        let p = migrate_link(&radio(2), "wifi1", MigrationStrategy::MakeBeforeBreak, 7, MigrationTiming::default()).unwrap();
        let r = p.report("gw", 0);
        assert!(p.is_noop());
        assert_eq!((r.overlap_start, r.old_link_down_at), (7, 7));
    }

    #[test]
    fn single_radio_cannot_make_before_break() {
        let err = migrate_link(&radio(1), "wifi2", MigrationStrategy::MakeBeforeBreak, 0, MigrationTiming::default());
        assert_eq!(err, Err(GatewayError::NoSecondInterface));
        assert!(migrate_link(&radio(1), "wifi2", MigrationStrategy::BreakBeforeMake, 0, MigrationTiming::default()).is_ok());
    }

    #[test]
    fn unknown_channel() {
        let err = migrate_link(&radio(2), "lte", MigrationStrategy::BreakBeforeMake, 0, MigrationTiming::default());
        assert_eq!(err, Err(GatewayError::UnknownChannel("lte".into())));
    }

    #[test]
    fn trigger_needs_consecutive_samples() {
        let rule = AutoMigration::default();
        let mut t = MigrationTrigger::default();
        assert_eq!(t.observe(&rule, 0.2, &[("b", 0.9)]), None);
        assert_eq!(t.observe(&rule, 0.2, &[("b", 0.9)]), None);
        // recovery resets the streak
        assert_eq!(t.observe(&rule, 0.8, &[("b", 0.9)]), None);
        assert_eq!(t.observe(&rule, 0.2, &[("b", 0.9)]), None);
        assert_eq!(t.observe(&rule, 0.2, &[("b", 0.9)]), None);
        assert_eq!(t.observe(&rule, 0.2, &[("c", 0.3), ("b", 0.9)]), Some("b"));
    }
}
