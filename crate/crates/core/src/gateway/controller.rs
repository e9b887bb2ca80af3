use std::collections::BTreeMap;

use super::flow_table::{FlowMatch, FlowRule, FlowTable};
use super::GatewayError;

/// Table modification sent from the controller to a switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowMod {
    Add(FlowRule),
    Remove { priority: u32, matches: FlowMatch },
    ReplaceInterface { from: String, to: String },
}

impl FlowMod {
    pub fn apply(&self, table: &mut FlowTable) {
        match self {
            FlowMod::Add(r) => {
                table.insert(r.clone());
            }
            FlowMod::Remove { priority, matches } => {
                table.remove(*priority, matches);
            }
            FlowMod::ReplaceInterface { from, to } => {
                table.replace_interface(from, to);
            }
        }
    }
}

/// SDN controller. It keeps a logical mirror of every registered switch
/// and emits [`FlowMod`] messages; switches apply them when delivered.
#[derive(Debug, Clone, Default)]
pub struct SdnController {
    mirrors: BTreeMap<String, FlowTable>,
}

impl SdnController {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, switch_id: &str) {
        self.mirrors.entry(switch_id.to_string()).or_default();
    }

    pub fn mirror(&self, switch_id: &str) -> Option<&FlowTable> {
        self.mirrors.get(switch_id)
    }

    pub fn switches(&self) -> impl Iterator<Item = &str> {
        self.mirrors.keys().map(String::as_str)
    }

    fn send(&mut self, switch_id: &str, m: FlowMod) -> Result<FlowMod, GatewayError> {
        let mirror = self.mirrors.get_mut(switch_id).ok_or_else(|| GatewayError::UnknownSwitch(switch_id.to_string()))?;
        m.apply(mirror);
        Ok(m)
    }

    pub fn install_flow(&mut self, switch_id: &str, rule: FlowRule) -> Result<FlowMod, GatewayError> {
        self.send(switch_id, FlowMod::Add(rule))
    }

    pub fn remove_flow(&mut self, switch_id: &str, priority: u32, matches: FlowMatch) -> Result<FlowMod, GatewayError> {
        self.send(switch_id, FlowMod::Remove { priority, matches })
    }

    pub fn redirect(&mut self, switch_id: &str, from: &str, to: &str) -> Result<FlowMod, GatewayError> {
        self.send(switch_id, FlowMod::ReplaceInterface { from: from.to_string(), to: to.to_string() })
    }
}

/// Installs synchronously on both sides and returns the switch table.
pub fn install_flow<'t>(
    controller: &mut SdnController,
    switch_id: &str,
    switch: &'t mut FlowTable,
    rule: FlowRule,
) -> Result<&'t FlowTable, GatewayError> {
    controller.install_flow(switch_id, rule)?.apply(switch);
    Ok(switch)
}
