//! The IP manifest file: the declarative stand-in for a configuration
//! bitstream. It names the IPs to mount, their slot assignments, the
//! register layout each window exposes, and how host-visible parameter
//! names map onto registers. TOML, UTF-8, unknown keys rejected.
//!
//! ```toml
//! lib_name = "vision"
//! config_latency_s = 2.0
//!
//! [[ip]]
//! name = "SURF_detect"
//! slot = 0
//!
//! [[ip.register]]
//! name = "CTRL"
//! offset = 0x00
//! access = "rw"
//!
//! [[ip.param]]
//! name = "MinHessian"
//! register = "MIN_HESSIAN"
//! encoding = "q16_16"
//! ```

use super::RuntimeError;
use crate::ipcore::{Access, RegisterDef, RegisterSpec};
use serde::Deserialize;
use std::path::Path;

pub const DEFAULT_CONFIG_LATENCY_S: f64 = 2.0;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IpManifest {
    pub lib_name: String,
    #[serde(default = "default_latency")]
    pub config_latency_s: f64,
    #[serde(rename = "ip", default)]
    pub ips: Vec<ManifestIp>,
}

fn default_latency() -> f64 {
    DEFAULT_CONFIG_LATENCY_S
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifestIp {
    pub name: String,
    pub slot: usize,
    #[serde(rename = "register", default)]
    pub registers: Vec<ManifestRegister>,
    #[serde(rename = "param", default)]
    pub params: Vec<ManifestParam>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifestRegister {
    pub name: String,
    pub offset: u32,
    pub access: ManifestAccess,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ManifestAccess {
    Rw,
    Ro,
}

impl From<ManifestAccess> for Access {
    fn from(a: ManifestAccess) -> Self {
        match a {
            ManifestAccess::Rw => Access::ReadWrite,
            ManifestAccess::Ro => Access::ReadOnly,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifestParam {
    pub name: String,
    pub register: String,
    pub encoding: ParamEncoding,
}

/// How a host-side parameter value is turned into a register word.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
pub enum ParamEncoding {
    #[serde(rename = "u32")]
    U32,
    #[serde(rename = "q16_16")]
    Q16_16,
}

impl ParamEncoding {
    pub fn encode(self, value: f64) -> u32 {
        match self {
            ParamEncoding::U32 => value as u32,
            ParamEncoding::Q16_16 => crate::surf::qformat::from_f64(value) as u32,
        }
    }
}

impl ManifestIp {
    /// The register layout this entry declares, in manifest order.
    pub fn register_spec(&self) -> RegisterSpec {
        RegisterSpec {
            registers: self
                .registers
                .iter()
                .map(|r| RegisterDef::new(r.offset, &r.name, r.access.into()))
                .collect(),
        }
    }
}

impl IpManifest {
    pub fn load(path: &Path) -> Result<Self, RuntimeError> {
        if !path.exists() {
            return Err(RuntimeError::ConfigFileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| RuntimeError::BadManifest(format!("unreadable manifest: {e}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, RuntimeError> {
        let manifest: IpManifest =
            toml::from_str(text).map_err(|e| RuntimeError::BadManifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<(), RuntimeError> {
        if self.ips.is_empty() {
            return Err(RuntimeError::BadManifest("manifest declares no IPs".into()));
        }
        if !(self.config_latency_s.is_finite() && self.config_latency_s >= 0.0) {
            return Err(RuntimeError::BadManifest(
                "config_latency_s must be a non-negative number".into(),
            ));
        }
        // Slot clashes surface as SlotOccupied during mounting, not here.
        for ip in &self.ips {
            let mut param_names = std::collections::BTreeSet::new();
            for p in &ip.params {
                if !param_names.insert(p.name.clone()) {
                    return Err(RuntimeError::BadManifest(format!(
                        "ip {}: duplicate parameter {}",
                        ip.name, p.name
                    )));
                }
                if ip.registers.iter().all(|r| r.name != p.register) {
                    return Err(RuntimeError::BadManifest(format!(
                        "ip {}: parameter {} targets unknown register {}",
                        ip.name, p.name, p.register
                    )));
                }
            }
        }
        Ok(())
    }
}
