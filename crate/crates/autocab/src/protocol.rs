//! Newline-delimited JSON frames exchanged with external agents.
//!
//! The server opens with `{"proto":1}`. Every client frame gets exactly one
//! reply frame.

use std::collections::BTreeMap;

use autocab_core::episode::{ModalityConfig, NetworkStatus, Observation, TerminatedBy};
use autocab_core::geo::GeoFix;
use autocab_core::gui::{ScreenId, SomMap, UiTree};
use autocab_core::vehicle::Value;
use autocab_core::Digest;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::image::{decode_png, encode_png};

pub const PROTO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub proto: u32,
}

/// Modalities as either `"a11y,screen"` or `["a11y", "screen"]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModalityList {
    Text(String),
    List(Vec<String>),
}

impl ModalityList {
    pub fn config(&self) -> Result<ModalityConfig, String> {
        match self {
            ModalityList::Text(s) => ModalityConfig::from_list(s),
            ModalityList::List(v) => ModalityConfig::from_list(&v.join(",")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientFrame {
    Start {
        template_id: String,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        region: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modalities: Option<ModalityList>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_steps: Option<u32>,
    },
    Act {
        action: serde_json::Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reasoning: Option<String>,
    },
    End,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsFrame {
    pub step: u32,
    pub instruction: String,
    pub screen: ScreenId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a11y: Option<UiTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_png_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub som_png_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "som_map_keys")]
    pub som_map: Option<SomMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gps: Option<GeoFix>,
    pub signals: BTreeMap<String, Value>,
    pub network: NetworkStatus,
    /// Why the previous action was rejected, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    pub obs_digest: Digest,
}

/// JSON object keys are strings; integer keys do not survive the buffering
/// that tagged frames go through, so they are converted explicitly.
mod som_map_keys {
    use std::collections::BTreeMap;

    use autocab_core::gui::{Rect, SomMap};
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(map: &Option<SomMap>, s: S) -> Result<S::Ok, S::Error> {
        map.as_ref()
            .map(|m| m.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<String, Rect>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<SomMap>, D::Error> {
        let raw: Option<BTreeMap<String, Rect>> = Option::deserialize(d)?;
        raw.map(|m| {
            m.into_iter()
                .map(|(k, v)| k.parse::<u32>().map(|k| (k, v)).map_err(|_| D::Error::custom(format!("bad SoM index `{k}`"))))
                .collect()
        })
        .transpose()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("bad base64: {0}")]
    Base64(#[from] base64::DecodeError),
    #[error("bad PNG: {0}")]
    Png(#[from] png::DecodingError),
}

impl ObsFrame {
    pub fn from_observation(obs: &Observation) -> Self {
        let png = |b: &Option<autocab_core::gui::PixelBuffer>| b.as_ref().map(|b| B64.encode(encode_png(b)));
        ObsFrame {
            step: obs.step_index,
            instruction: obs.instruction.clone(),
            screen: obs.current_screen,
            a11y: obs.a11y.clone(),
            screen_png_b64: png(&obs.screen),
            som_png_b64: png(&obs.som_screen),
            som_map: obs.som_map.clone(),
            gps: obs.gps,
            signals: obs.signals.clone(),
            network: obs.network,
            event: obs.event.clone(),
            obs_digest: obs.digest(),
        }
    }

    /// Rebuilds the observation; its digest equals `obs_digest` when the
    /// frame arrived intact.
    pub fn to_observation(&self) -> Result<Observation, DecodeError> {
        let img = |s: &Option<String>| -> Result<_, DecodeError> {
            s.as_ref().map(|s| Ok(decode_png(&B64.decode(s)?)?)).transpose()
        };
        Ok(Observation {
            step_index: self.step,
            instruction: self.instruction.clone(),
            current_screen: self.screen,
            a11y: self.a11y.clone(),
            screen: img(&self.screen_png_b64)?,
            som_screen: img(&self.som_png_b64)?,
            som_map: self.som_map.clone(),
            gps: self.gps,
            signals: self.signals.clone(),
            network: self.network,
            event: self.event.clone(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadFrame,
    UnknownTemplate,
    UnknownRegion,
    GeoMismatch,
    BadModalities,
    NoSession,
    SessionActive,
    SessionInactive,
    Timeout,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerFrame {
    Obs(Box<ObsFrame>),
    Done {
        reward: u8,
        steps: u32,
        terminated_by: TerminatedBy,
    },
    Err {
        code: ErrorCode,
        msg: String,
    },
}

impl ServerFrame {
    pub fn err(code: ErrorCode, msg: impl Into<String>) -> Self {
        ServerFrame::Err { code, msg: msg.into() }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }
}
