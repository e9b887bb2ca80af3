use serde::{Deserialize, Serialize};

use super::CorenetError;
use crate::model::{
    Attachments, BitsPerSecond, Nanos, Rejection, ServiceClass, Slice, SliceTable, TargetOverrides, ValidatedTopology,
    M2_PER_KM2,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRequest {
    pub id: String,
    pub service_class: ServiceClass,
    pub reserved_rate_bps: BitsPerSecond,
    pub cell_ids: Vec<String>,
    /// Per-packet deadline; defaults to the class latency budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_ns: Option<Nanos>,
    /// mMTC only. When absent, the density is taken from the devices
    /// attached to the requested cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_claim_per_km2: Option<f64>,
}

/// Devices per km² over `cells`, counting devices behind gateways.
fn observed_density(topo: &ValidatedTopology, attach: &Attachments, cells: &[crate::model::NodeId]) -> f64 {
    let area: f64 = cells.iter().filter_map(|&c| topo.cell(c)).map(|c| c.area_m2).sum();
    let devices = topo
        .device_ids()
        .filter(|&d| attach.root_cell(topo, d).is_some_and(|c| cells.contains(&c)))
        .count();
    devices as f64 / area * M2_PER_KM2
}

/// First-come-first-served admission. Capacity is checked cell by cell in
/// request order; for mMTC the density claim is then checked against the
/// class target.
pub fn admit_slice(
    topo: &ValidatedTopology,
    attach: &Attachments,
    existing: &SliceTable,
    targets: &TargetOverrides,
    request: &SliceRequest,
) -> Result<Slice, CorenetError> {
    if request.reserved_rate_bps == 0 {
        return Err(CorenetError::InvalidRequest(format!("slice {}: reserved_rate_bps must be > 0", request.id)));
    }
    if request.cell_ids.is_empty() {
        return Err(CorenetError::InvalidRequest(format!("slice {}: no cells requested", request.id)));
    }
    let mut cells = Vec::with_capacity(request.cell_ids.len());
    for id in &request.cell_ids {
        match topo.lookup(id).filter(|&n| topo.cell(n).is_some()) {
            Some(n) if !cells.contains(&n) => cells.push(n),
            Some(_) => {}
            None => return Err(CorenetError::UnknownCell(id.clone())),
        }
    }

    let target = targets.target(request.service_class);
    let mut slice = Slice {
        id: request.id.clone(),
        service_class: request.service_class,
        reserved_rate_bps: request.reserved_rate_bps,
        cell_ids: request.cell_ids.clone(),
        admitted: false,
        deadline_ns: request.deadline_ns.unwrap_or(target.user_plane_latency_budget_ns),
        rejection: None,
        cells: cells.clone(),
    };

    for &c in &cells {
        let cell = topo.cell(c).expect("checked above");
        let reserved = existing.reserved_in(c);
        if reserved.saturating_add(request.reserved_rate_bps) > cell.capacity_bps {
            slice.rejection = Some(Rejection::Capacity {
                cell: cell.id.clone(),
                capacity_bps: cell.capacity_bps,
                already_reserved_bps: reserved,
                requested_bps: request.reserved_rate_bps,
            });
            return Ok(slice);
        }
    }

    if request.service_class == ServiceClass::Mmtc {
        let claimed = request.density_claim_per_km2.unwrap_or_else(|| observed_density(topo, attach, &cells));
        let limit = target.device_density_per_km2;
        if claimed > limit {
            slice.rejection = Some(Rejection::Density { claimed_per_km2: claimed, limit_per_km2: limit });
            return Ok(slice);
        }
    }

    slice.admitted = true;
    Ok(slice)
}
