use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Principle {
    F,
    A,
    I,
    R,
}

impl Principle {
    pub const ALL: [Principle; 4] = [Principle::F, Principle::A, Principle::I, Principle::R];

    pub fn name(self) -> &'static str {
        match self {
            Principle::F => "Findable",
            Principle::A => "Accessible",
            Principle::I => "Interoperable",
            Principle::R => "Reusable",
        }
    }
}

/// The twelve FAIR checklist items, three per principle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FairItem {
    F1,
    F2,
    F3,
    A1,
    A2,
    A3,
    I1,
    I2,
    I3,
    R1,
    R2,
    R3,
}

impl FairItem {
    pub const ALL: [FairItem; 12] = [
        FairItem::F1,
        FairItem::F2,
        FairItem::F3,
        FairItem::A1,
        FairItem::A2,
        FairItem::A3,
        FairItem::I1,
        FairItem::I2,
        FairItem::I3,
        FairItem::R1,
        FairItem::R2,
        FairItem::R3,
    ];

    pub fn principle(self) -> Principle {
        use FairItem::*;
        match self {
            F1 | F2 | F3 => Principle::F,
            A1 | A2 | A3 => Principle::A,
            I1 | I2 | I3 => Principle::I,
            R1 | R2 | R3 => Principle::R,
        }
    }

    pub fn description(self) -> &'static str {
        use FairItem::*;
        match self {
            F1 => "persistent identifier present",
            F2 => "rich title/description present",
            F3 => "entry in a searchable registry",
            A1 => "retrieval protocol stated",
            A2 => "metadata accessible independent of the data",
            A3 => "access conditions stated",
            I1 => "standard data format used",
            I2 => "controlled vocabulary used",
            I3 => "qualified references to other data",
            R1 => "license present",
            R2 => "provenance present",
            R3 => "community standard followed",
        }
    }
}

impl fmt::Display for FairItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for FairItem {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FairItem::ALL
            .into_iter()
            .find(|i| i.to_string() == s)
            .ok_or_else(|| DatasetError::InvalidDescriptor(format!("unknown checklist item `{s}`")))
    }
}

/// Dataset-level metadata used for the FAIR checklist.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataDescriptor {
    pub checklist: BTreeMap<FairItem, bool>,
    pub title: Option<String>,
    pub identifier: Option<String>,
    pub license: Option<String>,
    pub provenance: Option<String>,
    pub access_protocol: Option<String>,
}

const TEXT_FIELDS: [&str; 5] = ["title", "identifier", "license", "provenance", "access_protocol"];

impl MetadataDescriptor {
    /// Parses a descriptor JSON document. Unknown top-level keys are ignored
    /// and returned as warnings; unknown checklist ids are an error.
    pub fn from_json(text: &str) -> Result<(Self, Vec<String>), DatasetError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| DatasetError::InvalidDescriptor(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| DatasetError::InvalidDescriptor("expected a JSON object".into()))?;

        let mut d = MetadataDescriptor::default();
        let mut warnings = Vec::new();
        for (key, v) in obj {
            match key.as_str() {
                "checklist" => {
                    let items = v.as_object().ok_or_else(|| {
                        DatasetError::InvalidDescriptor("`checklist` must be an object".into())
                    })?;
                    for (id, flag) in items {
                        let item: FairItem = id.parse()?;
                        let flag = flag.as_bool().ok_or_else(|| {
                            DatasetError::InvalidDescriptor(format!("checklist item `{id}` must be a boolean"))
                        })?;
                        d.checklist.insert(item, flag);
                    }
                }
                k if TEXT_FIELDS.contains(&k) => {
                    let s = match v {
                        serde_json::Value::Null => None,
                        serde_json::Value::String(s) => Some(s.clone()),
                        _ => {
                            return Err(DatasetError::InvalidDescriptor(format!(
                                "`{k}` must be a string"
                            )))
                        }
                    };
                    match k {
                        "title" => d.title = s,
                        "identifier" => d.identifier = s,
                        "license" => d.license = s,
                        "provenance" => d.provenance = s,
                        _ => d.access_protocol = s,
                    }
                }
                other => {
                    warn!(key = other, "ignoring unknown descriptor key");
                    warnings.push(format!("ignored unknown descriptor key `{other}`"));
                }
            }
        }
        Ok((d, warnings))
    }
}
