//! Synthetic radial 0.4 kV feeder construction.
//!
//! A feeder is generated from its DER count `n` under two family invariants:
//! the total installed DER power and the average transformer–node distance
//! are the same for every member. Nodes are equally spaced along the feeder,
//! so both invariants pin down the segment length uniquely:
//!
//! ```text
//! line_length   = avg_dist * 2 / (n + 1)
//! feeder_length = n * line_length = avg_dist * 2n / (n + 1)
//! ```
//!
//! Each node carries one DER with an equal share of the total power and an
//! inverter rated at `p_inst / cos_phi`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// DER counts of the four canonical feeders.
pub const CANONICAL_NODE_COUNTS: [usize; 4] = [1, 3, 9, 27];

/// Total installed DER power shared by the canonical family, kW.
pub const DEFAULT_TOTAL_P_KW: f64 = 200.0;

/// Average transformer–node distance shared by the canonical family, m.
pub const DEFAULT_AVG_DIST_M: f64 = 400.0;

/// Inverter power factor used to size apparent-power ratings.
pub const DEFAULT_COS_PHI: f64 = 0.9;

/// Default voltage band applied to all LV buses, per-unit.
pub const DEFAULT_V_MIN_PU: f64 = 0.9;
pub const DEFAULT_V_MAX_PU: f64 = 1.1;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("n_nodes must be at least 1")]
    NoNodes,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("cos_phi must lie in (0, 1], got {0}")]
    BadCosPhi(f64),
    #[error("voltage band requires 0 < v_min < v_max, got [{0}, {1}]")]
    BadVoltageBand(f64, f64),
    #[error("line parameters must satisfy r, x, c >= 0 and i_max > 0")]
    BadLineParams,
    #[error("transformer parameters must satisfy s_rated > 0 and vk >= vkr >= 0")]
    BadTrafoParams,
}

/// Electrical line parameters per km plus thermal rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub r_ohm_per_km: f64,
    pub x_ohm_per_km: f64,
    pub c_nf_per_km: f64,
    pub max_i_ka: f64,
    pub type_name: String,
}

impl Default for LineParams {
    /// Standard-type values for the NAYY 4x150 SE LV cable.
    fn default() -> Self {
        Self {
            r_ohm_per_km: 0.208,
            x_ohm_per_km: 0.080,
            c_nf_per_km: 261.0,
            max_i_ka: 0.270,
            type_name: "NAYY 4x150 SE".to_string(),
        }
    }
}

/// Two-winding transformer parameters (series impedance from the
/// short-circuit test, magnetizing branch from the no-load test).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafoParams {
    pub s_rated_mva: f64,
    pub v_hv_kv: f64,
    pub v_lv_kv: f64,
    pub vk_percent: f64,
    pub vkr_percent: f64,
    pub pfe_kw: f64,
    pub i0_percent: f64,
}

impl Default for TrafoParams {
    /// Standard-type values for a 0.4 MVA 20/0.4 kV distribution transformer.
    fn default() -> Self {
        Self {
            s_rated_mva: 0.4,
            v_hv_kv: 20.0,
            v_lv_kv: 0.4,
            vk_percent: 6.0,
            vkr_percent: 1.425,
            pfe_kw: 1.35,
            i0_percent: 0.3375,
        }
    }
}

impl TrafoParams {
    /// Human-readable rating label, e.g. `0.4 MVA 20/0.4 kV`.
    pub fn label(&self) -> String {
        format!(
            "{} MVA {}/{} kV",
            self.s_rated_mva, self.v_hv_kv, self.v_lv_kv
        )
    }
}

/// Parametric description of one synthetic feeder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSpec {
    /// Number of feeder nodes, one DER each.
    pub n_nodes: usize,
    /// Total installed DER active power, kW.
    pub total_installed_p_kw: f64,
    /// Average transformer–node distance, m.
    pub avg_trafo_node_dist_m: f64,
    /// Inverter power factor in (0, 1].
    pub cos_phi: f64,
    /// Lower voltage limit for LV buses, per-unit.
    pub v_min_pu: f64,
    /// Upper voltage limit for LV buses, per-unit.
    pub v_max_pu: f64,
    /// Slack (MV) bus voltage, per-unit.
    pub slack_v_pu: f64,
    pub line: LineParams,
    pub trafo: TrafoParams,
}

impl FeederSpec {
    /// Canonical family member with `n` DERs and default parameters.
    pub fn canonical(n: usize) -> Self {
        Self {
            n_nodes: n,
            total_installed_p_kw: DEFAULT_TOTAL_P_KW,
            avg_trafo_node_dist_m: DEFAULT_AVG_DIST_M,
            cos_phi: DEFAULT_COS_PHI,
            v_min_pu: DEFAULT_V_MIN_PU,
            v_max_pu: DEFAULT_V_MAX_PU,
            slack_v_pu: 1.0,
            line: LineParams::default(),
            trafo: TrafoParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.n_nodes == 0 {
            return Err(GridError::NoNodes);
        }
        if self.total_installed_p_kw <= 0.0 {
            return Err(GridError::NonPositive("total_installed_p_kw"));
        }
        if self.avg_trafo_node_dist_m <= 0.0 {
            return Err(GridError::NonPositive("avg_trafo_node_dist_m"));
        }
        if !(self.cos_phi > 0.0 && self.cos_phi <= 1.0) {
            return Err(GridError::BadCosPhi(self.cos_phi));
        }
        if !(0.0 < self.v_min_pu && self.v_min_pu < self.v_max_pu) {
            return Err(GridError::BadVoltageBand(self.v_min_pu, self.v_max_pu));
        }
        if self.slack_v_pu <= 0.0 {
            return Err(GridError::NonPositive("slack_v_pu"));
        }
        let l = &self.line;
        if l.r_ohm_per_km < 0.0 || l.x_ohm_per_km < 0.0 || l.c_nf_per_km < 0.0 || l.max_i_ka <= 0.0
        {
            return Err(GridError::BadLineParams);
        }
        let t = &self.trafo;
        if t.s_rated_mva <= 0.0
            || t.v_hv_kv <= 0.0
            || t.v_lv_kv <= 0.0
            || t.vkr_percent < 0.0
            || t.vk_percent < t.vkr_percent
            || t.pfe_kw < 0.0
            || t.i0_percent < 0.0
        {
            return Err(GridError::BadTrafoParams);
        }
        Ok(())
    }

    /// Length of one line segment between adjacent nodes, m.
    pub fn line_length_m(&self) -> f64 {
        self.avg_trafo_node_dist_m * 2.0 / (self.n_nodes as f64 + 1.0)
    }

    /// Total feeder length from the transformer to the last node, m.
    pub fn feeder_length_m(&self) -> f64 {
        self.n_nodes as f64 * self.line_length_m()
    }

    /// Installed active power per DER, kW.
    pub fn unit_p_kw(&self) -> f64 {
        self.total_installed_p_kw / self.n_nodes as f64
    }

    /// Apparent-power rating per DER inverter, kVA.
    pub fn unit_s_max_kva(&self) -> f64 {
        self.unit_p_kw() / self.cos_phi
    }

    /// Display row with the family's presentation rounding applied
    /// (lengths to whole meters, powers to one decimal).
    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            n_nodes: self.n_nodes,
            unit_p_kw: format!("{:.1}", self.unit_p_kw()),
            unit_s_max_kva: format!("{:.1}", self.unit_s_max_kva()),
            line_length_m: format!("{:.0}", self.line_length_m()),
            feeder_length_m: format!("{:.0}", self.feeder_length_m()),
            line_type: self.line.type_name.clone(),
            trafo_label: self.trafo.label(),
            voltage_band: format!("{}..{} pu", self.v_min_pu, self.v_max_pu),
        }
    }
}

/// Mean distance from the transformer to the nodes of an `n`-node feeder
/// with segment length `line_length_m`; inverse of
/// [`FeederSpec::line_length_m`]. Nodes sit at multiples of the segment
/// length, so the mean distance is `line_length * (n + 1) / 2`.
pub fn avg_trafo_node_distance_m(n_nodes: usize, line_length_m: f64) -> f64 {
    line_length_m * (n_nodes as f64 + 1.0) / 2.0
}

/// One DER and its setpoint box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerUnit {
    /// 1-based feeder node index; bus index is `node_index + 1`.
    pub node_index: usize,
    /// Installed active power, kW.
    pub p_inst_kw: f64,
    /// Inverter apparent-power rating, kVA.
    pub s_max_kva: f64,
}

impl DerUnit {
    /// Admissible active-power setpoints, kW.
    pub fn p_range(&self) -> (f64, f64) {
        (-self.p_inst_kw, self.p_inst_kw)
    }

    /// Admissible reactive-power setpoints, kvar.
    pub fn q_range(&self) -> (f64, f64) {
        (-self.s_max_kva, self.s_max_kva)
    }
}

/// One line segment of the radial chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub from_bus: usize,
    pub to_bus: usize,
    pub length_m: f64,
}

/// A fully built feeder.
///
/// Bus ordering: 0 = MV slack, 1 = LV transformer bus, `2..n+1` = feeder
/// nodes in distance order. The transformer connects buses 0 and 1; segment
/// `k` connects buses `k+1` and `k+2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub spec: FeederSpec,
    pub lines: Vec<LineSegment>,
    pub ders: Vec<DerUnit>,
}

impl GridModel {
    /// Total bus count including slack and transformer LV bus.
    pub fn n_buses(&self) -> usize {
        self.spec.n_nodes + 2
    }
}

/// Builds the radial chain for `spec`.
pub fn build_grid(spec: &FeederSpec) -> Result<GridModel, GridError> {
    spec.validate()?;
    let line_length = spec.line_length_m();
    let lines = (0..spec.n_nodes)
        .map(|k| LineSegment {
            from_bus: k + 1,
            to_bus: k + 2,
            length_m: line_length,
        })
        .collect();
    let ders = (1..=spec.n_nodes)
        .map(|node_index| DerUnit {
            node_index,
            p_inst_kw: spec.unit_p_kw(),
            s_max_kva: spec.unit_s_max_kva(),
        })
        .collect();
    Ok(GridModel {
        spec: spec.clone(),
        lines,
        ders,
    })
}

/// Table-style display row for one feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n_nodes: usize,
    pub unit_p_kw: String,
    pub unit_s_max_kva: String,
    pub line_length_m: String,
    pub feeder_length_m: String,
    pub line_type: String,
    pub trafo_label: String,
    pub voltage_band: String,
}

impl SummaryRow {
    /// Header matching [`SummaryRow::to_columns`].
    pub fn header() -> [&'static str; 8] {
        [
            "n_ders",
            "p_per_der_kw",
            "s_max_per_der_kva",
            "line_length_m",
            "feeder_length_m",
            "line_type",
            "trafo",
            "voltage_band",
        ]
    }

    pub fn to_columns(&self) -> [String; 8] {
        [
            self.n_nodes.to_string(),
            self.unit_p_kw.clone(),
            self.unit_s_max_kva.clone(),
            self.line_length_m.clone(),
            self.feeder_length_m.clone(),
            self.line_type.clone(),
            self.trafo_label.clone(),
            self.voltage_band.clone(),
        ]
    }
}
