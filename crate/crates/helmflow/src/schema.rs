//! JSON network files.
//!
//! ```json
//! {
//!   "name": "two-bus",
//!   "buses": [
//!     {"id": 0, "kind": "slack", "v": 1.0},
//!     {"id": 1, "kind": "pq", "p": -0.5, "q": -0.2},
//!     {"id": 2, "kind": "pv", "p": 0.3, "v": 1.05, "q_max": 0.4}
//!   ],
//!   "branches": [{"from": 0, "to": 1, "r": 0.0, "x": 0.1}]
//! }
//! ```
//!
//! `p` and `q` are injections in per unit (generation positive, loads
//! negative). Absent fields take per-kind defaults: `p = q = 0`, `v = 1` for
//! slack and PV buses, `angle = 0` (radians) for the slack. `q` is only legal
//! on PQ buses, `q_max`/`q_min` only on PV buses, `angle` only on the slack. The fields `g_shunt`, `b_shunt` (buses) and `b`, `tap` (branches)
//! are reserved; the engine has no shunt or transformer model and rejects them.

use std::fmt;

use helmflow_core::{Branch, Bus, BusKind, Network, NetworkError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed network file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{element}: unknown kind `{kind}` (expected slack, pq or pv)")]
    UnknownKind { element: String, kind: String },
    #[error("{element}: field `{field}` is not allowed here")]
    IllegalField { element: String, field: &'static str },
    #[error("{element}: `{field}` is reserved and not supported (no shunt or transformer model)")]
    Unsupported { element: String, field: &'static str },
    #[error("invalid network: {0}")]
    Validation(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub name: String,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: u32,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(default, skip_serializing)]
    pub g_shunt: Option<f64>,
    #[serde(default, skip_serializing)]
    pub b_shunt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    #[serde(default, skip_serializing)]
    pub b: Option<f64>,
    #[serde(default, skip_serializing)]
    pub tap: Option<f64>,
}

struct BusLabel(u32);

impl fmt::Display for BusLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bus {}", self.0)
    }
}

impl BusRecord {
    fn to_bus(&self) -> Result<Bus, SchemaError> {
        let element = BusLabel(self.id).to_string();
        if self.g_shunt.is_some() {
            return Err(SchemaError::Unsupported { element, field: "g_shunt" });
        }
        if self.b_shunt.is_some() {
            return Err(SchemaError::Unsupported { element, field: "b_shunt" });
        }
        let illegal = |field| SchemaError::IllegalField {
            element: element.clone(),
            field,
        };
        if self.angle.is_some() && self.kind != "slack" {
            return Err(illegal("angle"));
        }
        let p = self.p.unwrap_or(0.0);
        let v = self.v.unwrap_or(1.0);
        match self.kind.as_str() {
            "slack" => {
                for (set, field) in [(self.p, "p"), (self.q, "q"), (self.q_max, "q_max"), (self.q_min, "q_min")] {
                    if set.is_some() {
                        return Err(illegal(field));
                    }
                }
                let mut b = Bus::slack(self.id, v);
                b.slack_angle = self.angle.unwrap_or(0.0);
                Ok(b)
            }
            "pq" => {
                for (set, field) in [(self.v, "v"), (self.q_max, "q_max"), (self.q_min, "q_min")] {
                    if set.is_some() {
                        return Err(illegal(field));
                    }
                }
                Ok(Bus::pq(self.id, p, self.q.unwrap_or(0.0)))
            }
            "pv" => {
                if self.q.is_some() {
                    return Err(illegal("q"));
                }
                Ok(Bus::pv(self.id, p, v).with_q_limits(self.q_min, self.q_max))
            }
            other => Err(SchemaError::UnknownKind {
                element,
                kind: other.to_string(),
            }),
        }
    }

    fn from_bus(b: &Bus) -> Self {
        let (kind, p, q, v) = match b.kind {
            BusKind::Slack => ("slack", None, None, Some(b.v_setpoint)),
            BusKind::Pq => ("pq", Some(b.p_inject), Some(b.q_inject), None),
            BusKind::Pv => ("pv", Some(b.p_inject), None, Some(b.v_setpoint)),
        };
        BusRecord {
            id: b.id,
            kind: kind.to_string(),
            p,
            q,
            v,
            q_max: b.q_max,
            q_min: b.q_min,
            angle: (b.kind == BusKind::Slack && b.slack_angle != 0.0).then_some(b.slack_angle),
            g_shunt: None,
            b_shunt: None,
        }
    }
}

impl BranchRecord {
    fn to_branch(&self) -> Result<Branch, SchemaError> {
        let element = format!("branch {}-{}", self.from, self.to);
        if self.b.is_some() {
            return Err(SchemaError::Unsupported { element, field: "b" });
        }
        if self.tap.is_some() {
            return Err(SchemaError::Unsupported { element, field: "tap" });
        }
        Ok(Branch::new(self.from, self.to, self.r, self.x))
    }
}

impl NetworkFile {
    pub fn to_network(&self) -> Result<Network, SchemaError> {
        let buses = self.buses.iter().map(BusRecord::to_bus).collect::<Result<Vec<_>, _>>()?;
        let branches = self
            .branches
            .iter()
            .map(BranchRecord::to_branch)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Network::new(self.name.clone(), buses, branches)?)
    }

    pub fn from_network(net: &Network) -> Self {
        NetworkFile {
            name: net.name().to_string(),
            buses: net.buses().iter().map(BusRecord::from_bus).collect(),
            branches: net
                .branches()
                .iter()
                .map(|b| BranchRecord {
                    from: b.from,
                    to: b.to,
                    r: b.impedance.re,
                    x: b.impedance.im,
                    b: None,
                    tap: None,
                })
                .collect(),
        }
    }
}

/// Parses and validates a network file.
pub fn parse_network(text: &str) -> Result<Network, SchemaError> {
    let file: NetworkFile = serde_json::from_str(text)?;
    file.to_network()
}

/// Pretty-printed JSON that [`parse_network`] reads back to an equal network.
pub fn network_to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&NetworkFile::from_network(net)).expect("network serializes")
}
