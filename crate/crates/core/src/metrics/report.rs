use serde::{Deserialize, Serialize};

use super::dci::DciReport;
use super::gcn::GcnResult;
use super::irs::IrsReport;
use super::mi::MiMatrix;
use super::modexp::ModExpReport;
use super::task::TaskReport;
use crate::error::{Error, Result};

/// All metric blocks computed for one embedding table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub n_rows: usize,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mi: Option<MiMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gcn: Option<GcnResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dci: Option<DciReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modexp: Option<ModExpReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irs: Option<IrsReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub tasks: Vec<TaskReport>,
}

/// 64-bit FNV-1a of the JSON form, as lowercase hex.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")))
    }
}

impl MetricReport {
    /// Checks every bounded quantity against its declared range.
    pub fn validate_ranges(&self) -> Result<()> {
        if let Some(mi) = &self.mi {
            if mi.values.iter().flatten().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidArgument("negative mutual information".into()));
            }
        }
        if let Some(g) = &self.gcn {
            if !(g.gcn >= 0.0 && g.total_correlation >= 0.0) {
                return Err(Error::InvalidArgument(format!("gcn {} / tc {} negative", g.gcn, g.total_correlation)));
            }
        }
        if let Some(d) = &self.dci {
            unit("dci.disentanglement", d.disentanglement.mean)?;
            unit("dci.completeness", d.completeness.mean)?;
            unit("dci.informativeness", d.informativeness.mean)?;
        }
        if let Some(m) = &self.modexp {
            unit("modularity", m.modularity)?;
            unit("explicitness", m.explicitness.mean)?;
        }
        if let Some(i) = &self.irs {
            unit("irs", i.score)?;
            i.per_factor.iter().try_for_each(|&v| unit("irs factor", v))?;
        }
        for t in &self.tasks {
            unit("accuracy", t.accuracy.mean)?;
            unit("f1_weighted", t.f1_weighted.mean)?;
            unit("f1_macro", t.f1_macro.mean)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
