use serde::{Deserialize, Serialize};

use crate::model::{Nanos, NS_PER_SEC, SECONDS_PER_YEAR};

const AJ_PER_J: f64 = 1e18;
const NW_PER_W: f64 = 1e9;

/// Battery and radio energy parameters of a wireless sensor device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyParams {
    pub battery_capacity_j: f64,
    pub sleep_power_w: f64,
    pub tx_energy_per_message_j: f64,
}

impl Default for EnergyParams {
    /// 2 Ah at 3 V, 15 µW sleep, 50 mJ per message.
    fn default() -> Self {
        Self { battery_capacity_j: 21_600.0, sleep_power_w: 15e-6, tx_energy_per_message_j: 0.05 }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.battery_capacity_j > 0.0 && self.battery_capacity_j.is_finite()) {
            return Err("battery_capacity_j must be > 0".into());
        }
        if !(self.sleep_power_w >= 0.0 && self.sleep_power_w.is_finite()) {
            return Err("sleep_power_w must be >= 0".into());
        }
        if !(self.tx_energy_per_message_j >= 0.0 && self.tx_energy_per_message_j.is_finite()) {
            return Err("tx_energy_per_message_j must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyOp {
    Sleep(Nanos),
    Tx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DeviceState {
    Alive,
    Dead,
}

/// Integer energy ledger. Energies are attojoules and powers nanowatts, so
/// `power × duration` is exact and `capacity − consumed = remaining` holds
/// without rounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Battery {
    capacity_aj: u128,
    consumed_aj: u128,
    sleep_nw: u128,
    tx_aj: u128,
    tx_count: u64,
}

impl Battery {
    pub fn new(p: &EnergyParams) -> Self {
        Self {
            capacity_aj: (p.battery_capacity_j * AJ_PER_J).round() as u128,
            consumed_aj: 0,
            sleep_nw: (p.sleep_power_w * NW_PER_W).round() as u128,
            tx_aj: (p.tx_energy_per_message_j * AJ_PER_J).round() as u128,
            tx_count: 0,
        }
    }

    pub fn capacity_aj(&self) -> u128 {
        self.capacity_aj
    }

    pub fn consumed_aj(&self) -> u128 {
        self.consumed_aj
    }

    /// Signed remaining energy in attojoules; negative once overdrawn.
    pub fn remaining_aj(&self) -> i128 {
        self.capacity_aj as i128 - self.consumed_aj as i128
    }

    pub fn remaining_j(&self) -> f64 {
        self.remaining_aj() as f64 / AJ_PER_J
    }

    pub fn tx_count(&self) -> u64 {
        self.tx_count
    }

    pub fn state(&self) -> DeviceState {
        if self.remaining_aj() <= 0 {
            DeviceState::Dead
        } else {
            DeviceState::Alive
        }
    }

    pub fn is_dead(&self) -> bool {
        self.state() == DeviceState::Dead
    }

    /// Applies `op` and returns the remaining energy in joules. Dead
    /// batteries are left unchanged.
    pub fn consume(&mut self, op: EnergyOp) -> f64 {
        if !self.is_dead() {
            self.consumed_aj += match op {
                EnergyOp::Sleep(d) => self.sleep_nw * d as u128,
                EnergyOp::Tx => {
                    self.tx_count += 1;
                    self.tx_aj
                }
            };
        }
        self.remaining_j()
    }

    /// Nanoseconds of sleep until the battery is empty, if sleep draws power.
    pub fn sleep_time_left(&self) -> Option<Nanos> {
        if self.sleep_nw == 0 {
            return None;
        }
        let rem = self.remaining_aj().max(0) as u128;
        Some(rem.div_ceil(self.sleep_nw).min(u64::MAX as u128) as Nanos)
    }
}

/// Closed-form lifetime in years at `duty` messages per hour.
pub fn lifetime_estimate(p: &EnergyParams, duty_per_hour: f64) -> f64 {
    let avg_power = p.sleep_power_w + duty_per_hour * p.tx_energy_per_message_j / 3600.0;
    p.battery_capacity_j / avg_power / SECONDS_PER_YEAR
}

/// Step simulation of the ledger: messages at a fixed interval with sleep
/// in between, until the battery is empty. Returns years.
pub fn simulate_lifetime(p: &EnergyParams, duty_per_hour: f64) -> f64 {
    let mut b = Battery::new(p);
    let mut t: Nanos = 0;
    if duty_per_hour <= 0.0 {
        return b.sleep_time_left().map_or(f64::INFINITY, |d| d as f64 / NS_PER_SEC as f64 / SECONDS_PER_YEAR);
    }
    let interval = (3600.0 * NS_PER_SEC as f64 / duty_per_hour).round() as Nanos;
    loop {
        if let Some(left) = b.sleep_time_left() {
            if left <= interval {
                t += left;
                break;
            }
        }
        b.consume(EnergyOp::Sleep(interval));
        t += interval;
        b.consume(EnergyOp::Tx);
        if b.is_dead() {
            break;
        }
        if b.sleep_nw == 0 && b.tx_aj == 0 {
            return f64::INFINITY;
        }
    }
    t as f64 / NS_PER_SEC as f64 / SECONDS_PER_YEAR
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NS_PER_HOUR;
    use proptest::prelude::*;

    #[test]
    fn tx_arithmetic() {
        let mut b = Battery::new(&EnergyParams { tx_energy_per_message_j: 0.01, ..EnergyParams::default() });
        assert_eq!(b.consume(EnergyOp::Tx), 21_599.99);
        assert_eq!(b.remaining_aj(), 21_599_990_000_000_000_000_000);
    }

    #[test]
    fn one_hour_of_sleep_costs_54_mj() {
        let mut b = Battery::new(&EnergyParams::default());
        b.consume(EnergyOp::Sleep(NS_PER_HOUR));
        assert_eq!(b.consumed_aj(), 54_000_000_000_000_000);
    }

    #[test]
    fn repeated_tx_kills_device() {
        let mut b = Battery::new(&EnergyParams { battery_capacity_j: 1.0, sleep_power_w: 0.0, tx_energy_per_message_j: 0.3 });
        for _ in 0..3 {
            b.consume(EnergyOp::Tx);
            assert!(!b.is_dead());
        }
        b.consume(EnergyOp::Tx);
        assert!(b.is_dead());
        let before = b.clone();
        b.consume(EnergyOp::Tx);
        assert_eq!(b, before);
    }

    #[test]
    fn worked_lifetimes() {
        let p = EnergyParams::default();
        // 21600 J / 15 µW = 1.44e9 s
        let y0 = 1.44e9 / (365.25 * 86_400.0);
        assert!((lifetime_estimate(&p, 0.0) - y0).abs() < 1e-9);
        assert!((lifetime_estimate(&p, 0.0) - 45.6).abs() < 0.05);
        // 15 µW + 0.05 J / 3600 s = 28.89 µW
        let y1 = 21_600.0 / (15e-6 + 0.05 / 3600.0) / (365.25 * 86_400.0);
        assert!((lifetime_estimate(&p, 1.0) - y1).abs() < 1e-9);
        assert!((lifetime_estimate(&p, 1.0) - 23.7).abs() < 0.05);
    }

    #[test]
    fn step_simulation_agrees_with_closed_form() {
        let p = EnergyParams::default();
        for duty in [0.0, 1.0, 4.0, 60.0, 1e4] {
            let closed = lifetime_estimate(&p, duty);
            let stepped = simulate_lifetime(&p, duty);
            assert!((stepped - closed).abs() / closed <= 0.01, "duty {duty}: {stepped} vs {closed}");
        }
    }

    proptest! {
        #[test]
        fn ledger_is_exact(ops in prop::collection::vec(prop_oneof![
            (0u64..10 * NS_PER_HOUR).prop_map(EnergyOp::Sleep),
            Just(EnergyOp::Tx),
        ], 0..200)) {
            let p = EnergyParams { battery_capacity_j: 5.0, ..EnergyParams::default() };
            let mut b = Battery::new(&p);
            let mut expected: u128 = 0;
            for op in ops {
                let dead_before = b.is_dead();
                b.consume(op);
                if !dead_before {
                    expected += match op { EnergyOp::Sleep(d) => 15_000 * d as u128, EnergyOp::Tx => 50_000_000_000_000_000 };
                }
                prop_assert_eq!(b.consumed_aj(), expected);
                prop_assert_eq!(b.capacity_aj() as i128 - b.consumed_aj() as i128, b.remaining_aj());
            }
        }

        #[test]
        fn more_duty_never_lengthens_life(duty in 0.0f64..1e4) {
            let p = EnergyParams::default();
            prop_assert!(lifetime_estimate(&p, 2.0 * duty) <= lifetime_estimate(&p, duty));
        }

        #[test]
        fn closed_form_within_one_percent(
            cap in 10.0f64..50_000.0,
            sleep in 1e-6f64..1e-3,
            tx in 1e-3f64..0.5,
            duty in 0.0f64..1e4,
        ) {
            let p = EnergyParams { battery_capacity_j: cap, sleep_power_w: sleep, tx_energy_per_message_j: tx };
            let closed = lifetime_estimate(&p, duty);
            // keep the step count bounded
            prop_assume!(closed * SECONDS_PER_YEAR * duty / 3600.0 < 2.0e6);
            let stepped = simulate_lifetime(&p, duty);
            prop_assert!((stepped - closed).abs() / closed <= 0.01, "{} vs {}", stepped, closed);
        }
    }
}
