//! Versioned JSON documents for instances and check inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{FisherInstance, GoodId, Provenance};
use crate::model::{Outcome, PdmInstance, PriceSystem, UtilitySpec};

pub const PDM_SCHEMA: &str = "pdm/1";
pub const FISHER_SCHEMA: &str = "fisher/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdmDocument {
    pub version: String,
    pub n: usize,
    pub m: usize,
    pub preferred: Vec<Vec<u8>>,
    pub budgets: Vec<f64>,
    pub utilities: Vec<UtilitySpec>,
}

impl From<&PdmInstance> for PdmDocument {
    fn from(p: &PdmInstance) -> Self {
        Self {
            version: PDM_SCHEMA.into(),
            n: p.n,
            m: p.m,
            preferred: p.preferred.clone(),
            budgets: p.budgets.clone(),
            utilities: p.utilities.clone(),
        }
    }
}

impl TryFrom<PdmDocument> for PdmInstance {
    type Error = Error;
    fn try_from(d: PdmDocument) -> Result<Self> {
        if d.version != PDM_SCHEMA {
            return Err(Error::InvalidInstance(format!("expected version {PDM_SCHEMA}, got {}", d.version)));
        }
        let inst = PdmInstance { n: d.n, m: d.m, preferred: d.preferred, budgets: d.budgets, utilities: d.utilities };
        inst.validate()?;
        Ok(inst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherDocument {
    pub version: String,
    pub n: usize,
    pub goods: Vec<GoodId>,
    pub budgets: Vec<f64>,
    pub utilities: Vec<UtilitySpec>,
    /// The PDM a reduced market came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<PdmDocument>,
}

impl From<&FisherInstance> for FisherDocument {
    fn from(f: &FisherInstance) -> Self {
        Self {
            version: FISHER_SCHEMA.into(),
            n: f.n,
            goods: f.goods.clone(),
            budgets: f.budgets.clone(),
            utilities: f.utilities.clone(),
            provenance: f.provenance.as_ref().map(|p| PdmDocument::from(&p.pdm)),
        }
    }
}

impl TryFrom<FisherDocument> for FisherInstance {
    type Error = Error;
    fn try_from(d: FisherDocument) -> Result<Self> {
        if d.version != FISHER_SCHEMA {
            return Err(Error::InvalidInstance(format!("expected version {FISHER_SCHEMA}, got {}", d.version)));
        }
        let provenance = d.provenance.map(PdmInstance::try_from).transpose()?.map(Provenance::from);
        let f = FisherInstance { n: d.n, goods: d.goods, budgets: d.budgets, utilities: d.utilities, provenance };
        f.validate()?;
        for u in &f.utilities {
            u.validate()?;
        }
        Ok(f)
    }
}

fn malformed(e: serde_json::Error) -> Error {
    Error::InvalidInstance(format!("malformed JSON: {e}"))
}

pub fn pdm_to_json(p: &PdmInstance) -> String {
    serde_json::to_string_pretty(&PdmDocument::from(p)).expect("instance serializes")
}

pub fn pdm_from_json(s: &str) -> Result<PdmInstance> {
    serde_json::from_str::<PdmDocument>(s).map_err(malformed)?.try_into()
}

pub fn fisher_to_json(f: &FisherInstance) -> String {
    serde_json::to_string_pretty(&FisherDocument::from(f)).expect("instance serializes")
}

pub fn fisher_from_json(s: &str) -> Result<FisherInstance> {
    serde_json::from_str::<FisherDocument>(s).map_err(malformed)?.try_into()
}

/// Input to the checkers. A solve result parses as one of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub allocation: Vec<Vec<f64>>,
    pub prices: PriceSystem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

pub fn certificate_from_json(s: &str) -> Result<Certificate> {
    serde_json::from_str(s).map_err(malformed)
}
