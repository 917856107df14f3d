//! DER population: device ratings, operating boxes, node assignment, and
//! response behavior.

pub mod ahu;
pub mod response;
pub mod schedule;
pub mod stage;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};

pub use ahu::{ahu_discretize, unit_output};
pub use response::{respond, ResponseModel};
pub use schedule::{schedule, upscale_fast, Event, EventKind, Schedule, SchedulePlan, SolverPlan};
pub use stage::{rules_of_thumb, two_stage_target, StageTarget};

/// Lowest V1G charging rate (kW).
pub const V1G_MIN_RATE_KW: f64 = 1.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(try_from = "String")]
pub enum DerType {
    Ahu,
    V1g,
    V2g,
    Bess,
}

impl DerType {
    pub const ALL: [DerType; 4] = [DerType::Ahu, DerType::V1g, DerType::V2g, DerType::Bess];

    pub fn name(self) -> &'static str {
        match self {
            DerType::Ahu => "AHU",
            DerType::V1g => "V1G",
            DerType::V2g => "V2G",
            DerType::Bess => "BESS",
        }
    }

    /// On/off devices.
    pub fn is_discrete(self) -> bool {
        self == DerType::Ahu
    }
}

impl fmt::Display for DerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DerType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AHU" => Ok(DerType::Ahu),
            "V1G" => Ok(DerType::V1g),
            "V2G" => Ok(DerType::V2g),
            "BESS" => Ok(DerType::Bess),
            other => Err(Error::invalid(format!("unknown DER type `{other}`"))),
        }
    }
}

impl TryFrom<String> for DerType {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub id: String,
    pub der_type: DerType,
    /// Nameplate rating (kW); the full swing for V2G and BESS is
    /// `[-rating, rating]`.
    pub rating_kw: f64,
    /// Computing node, 0-based.
    pub node: usize,
    pub update_period_s: usize,
    pub offset_s: usize,
    pub response: ResponseModel,
    /// Only whole-kW absolute setpoints are accepted.
    pub integer_kw: bool,
}

impl DeviceSpec {
    pub fn discrete(&self) -> bool {
        self.der_type.is_discrete()
    }

    pub fn baseline(&self) -> f64 {
        baseline(self)
    }

    pub fn bounds(&self) -> (f64, f64) {
        bounds_from_spec(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(format!("device {}: {msg}", self.id)));
        if !(self.rating_kw > 0.0 && self.rating_kw.is_finite()) {
            return bad(format!("rating must be positive, got {}", self.rating_kw));
        }
        if self.update_period_s == 0 {
            return bad("update period must be at least 1 s".into());
        }
        self.response
            .validate()
            .map_err(|e| Error::invalid(format!("device {}: {e}", self.id)))
    }
}

/// Operating point around which the device's box is centered (kW).
pub fn baseline(spec: &DeviceSpec) -> f64 {
    match spec.der_type {
        DerType::V2g | DerType::Bess => 0.0,
        DerType::V1g => (V1G_MIN_RATE_KW + spec.rating_kw) / 2.0,
        DerType::Ahu => spec.rating_kw / 2.0,
    }
}

/// Box `[lower, upper]` relative to the baseline (kW).
pub fn bounds_from_spec(spec: &DeviceSpec) -> (f64, f64) {
    let r = spec.rating_kw.max(0.0);
    match spec.der_type {
        DerType::V2g | DerType::Bess => (-r, r),
        DerType::Ahu => (-r / 2.0, r / 2.0),
        DerType::V1g => {
            let half = ((r - V1G_MIN_RATE_KW) / 2.0).max(0.0);
            (-half, half)
        }
    }
}

/// Devices and their assignment to computing nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    devices: Vec<DeviceSpec>,
    n_nodes: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceRecord {
    id: String,
    node: String,
    #[serde(rename = "type")]
    der_type: String,
    rating_kw: f64,
    update_period_s: usize,
    offset_s: usize,
    delay_s: usize,
    settle_s: f64,
    spike_rate: f64,
    spike_min_kw: f64,
    spike_max_kw: f64,
    integer_kw: bool,
}

fn parse_node(s: &str) -> Result<usize> {
    let t = s.trim();
    let digits = t
        .strip_prefix('C')
        .or_else(|| t.strip_prefix('c'))
        .unwrap_or(t);
    match digits.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k - 1),
        _ => Err(Error::invalid(format!(
            "node `{s}` is not of the form C1, C2, ..."
        ))),
    }
}

impl Fleet {
    pub fn new(devices: Vec<DeviceSpec>, n_nodes: usize) -> Result<Self> {
        if devices.is_empty() {
            return Err(Error::invalid("fleet has no devices"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for d in &devices {
            d.validate()?;
            if d.node >= n_nodes {
                return Err(Error::NodeOutOfRange {
                    node: d.node,
                    n: n_nodes,
                });
            }
            if !ids.insert(d.id.as_str()) {
                return Err(Error::invalid(format!("duplicate device id `{}`", d.id)));
            }
        }
        for node in 0..n_nodes {
            let mut on_node = devices.iter().filter(|d| d.node == node);
            if let Some(first) = on_node.next() {
                for d in on_node {
                    if d.der_type != first.der_type {
                        return Err(Error::invalid(format!(
                            "node C{} mixes DER types",
                            node + 1
                        )));
                    }
                    if d.discrete() && d.rating_kw != first.rating_kw {
                        return Err(Error::invalid(format!(
                            "air handlers on node C{} differ in rating",
                            node + 1
                        )));
                    }
                }
            }
        }
        Ok(Self { devices, n_nodes })
    }

    /// Reads a fleet CSV with columns `id,node,type,rating_kw,
    /// update_period_s,offset_s,delay_s,settle_s,spike_rate,spike_min_kw,
    /// spike_max_kw,integer_kw`.
    pub fn read_csv(path: &Path, n_nodes: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, n_nodes).map_err(|e| match e {
            Error::Csv { message, .. } => Error::Csv {
                path: path.to_path_buf(),
                message,
            },
            Error::InvalidInput(message) => Error::Csv {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_reader(reader: impl std::io::Read, n_nodes: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut devices = Vec::new();
        for rec in rdr.deserialize::<DeviceRecord>() {
            let rec = rec.map_err(|e| Error::Csv {
                path: Default::default(),
                message: e.to_string(),
            })?;
            let at = |e: Error| Error::invalid(format!("device {}: {e}", rec.id));
            devices.push(DeviceSpec {
                der_type: rec.der_type.parse().map_err(at)?,
                node: parse_node(&rec.node).map_err(at)?,
                rating_kw: rec.rating_kw,
                update_period_s: rec.update_period_s,
                offset_s: rec.offset_s,
                response: ResponseModel {
                    delay_s: rec.delay_s,
                    settle_s: rec.settle_s,
                    spike_rate: rec.spike_rate,
                    spike_min_kw: rec.spike_min_kw,
                    spike_max_kw: rec.spike_max_kw,
                },
                integer_kw: rec.integer_kw,
                id: rec.id,
            });
        }
        Self::new(devices, n_nodes)
    }

    pub fn devices(&self) -> &[DeviceSpec] {
        &self.devices
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Device indices per node.
    pub fn node_map(&self) -> Vec<Vec<usize>> {
        let mut map = vec![Vec::new(); self.n_nodes];
        for (i, d) in self.devices.iter().enumerate() {
            map[d.node].push(i);
        }
        map
    }

    /// DER type served by each node, if any.
    pub fn node_types(&self) -> Vec<Option<DerType>> {
        let mut out = vec![None; self.n_nodes];
        for d in &self.devices {
            out[d.node] = Some(d.der_type);
        }
        out
    }

    /// Types present, in canonical order.
    pub fn types(&self) -> Vec<DerType> {
        DerType::ALL
            .into_iter()
            .filter(|t| self.devices.iter().any(|d| d.der_type == *t))
            .collect()
    }

    pub fn count(&self, t: DerType) -> usize {
        self.devices.iter().filter(|d| d.der_type == t).count()
    }

    /// `sum (upper - lower)` over devices (kW).
    pub fn total_capacity(&self) -> f64 {
        self.devices
            .iter()
            .map(|d| d.bounds().1 - d.bounds().0)
            .sum()
    }

    pub fn capacity_of(&self, t: DerType) -> f64 {
        self.devices
            .iter()
            .filter(|d| d.der_type == t)
            .map(|d| d.bounds().1 - d.bounds().0)
            .sum()
    }

    /// Sum of nameplate ratings (kW).
    pub fn total_rating(&self) -> f64 {
        self.devices.iter().map(|d| d.rating_kw).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(t: DerType, rating: f64) -> DeviceSpec {
        DeviceSpec {
            id: "d".into(),
            der_type: t,
            rating_kw: rating,
            node: 0,
            update_period_s: 1,
            offset_s: 0,
            response: ResponseModel::default(),
            integer_kw: false,
        }
    }

    #[test]
    fn baseline_examples() {
        assert!((baseline(&spec(DerType::V1g, 3.3)) - 2.45).abs() < 1e-12);
        assert_eq!(baseline(&spec(DerType::Ahu, 2.0)), 1.0);
        assert_eq!(baseline(&spec(DerType::Bess, 3.0)), 0.0);
        assert_eq!(baseline(&spec(DerType::V2g, 5.0)), 0.0);
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(bounds_from_spec(&spec(DerType::Ahu, 2.0)), (-1.0, 1.0));
        assert_eq!(bounds_from_spec(&spec(DerType::V2g, 5.0)), (-5.0, 5.0));
        let (lo, hi) = bounds_from_spec(&spec(DerType::V1g, 3.3));
        assert!((lo + 0.85).abs() < 1e-12 && (hi - 0.85).abs() < 1e-12);
        assert_eq!(bounds_from_spec(&spec(DerType::Bess, 0.0)), (0.0, 0.0));
    }

    #[test]
    fn csv_parsing() {
        let text = "\
id,node,type,rating_kw,update_period_s,offset_s,delay_s,settle_s,spike_rate,spike_min_kw,spike_max_kw,integer_kw
a1,C1,AHU,2,60,0,105,0,0,0,0,false
# comment
b1,C9,BESS,3,20,0,0,0,0,0,0,false
";
        let f = Fleet::from_reader(text.as_bytes(), 9).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.devices()[1].node, 8);
        assert_eq!(f.node_map()[0], vec![0]);
        assert_eq!(f.types(), vec![DerType::Ahu, DerType::Bess]);
        assert_eq!(f.total_rating(), 5.0);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let head = "id,node,type,rating_kw,update_period_s,offset_s,delay_s,settle_s,spike_rate,spike_min_kw,spike_max_kw,integer_kw\n";
        for row in [
            "a,C10,AHU,2,60,0,0,0,0,0,0,false",
            "a,C1,HEAT,2,60,0,0,0,0,0,0,false",
            "a,C1,AHU,0,60,0,0,0,0,0,0,false",
            "a,C1,AHU,2,0,0,0,0,0,0,0,false",
            "a,X,AHU,2,60,0,0,0,0,0,0,false",
        ] {
            assert!(
                Fleet::from_reader(format!("{head}{row}\n").as_bytes(), 9).is_err(),
                "{row}"
            );
        }
        let mixed =
            format!("{head}a,C1,AHU,2,60,0,0,0,0,0,0,false\nb,C1,V2G,5,1,0,0,0,0,0,0,false\n");
        assert!(Fleet::from_reader(mixed.as_bytes(), 9).is_err());
    }
}
