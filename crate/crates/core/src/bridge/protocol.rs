//! Line-delimited JSON messages exchanged with an external detector.
//!
//! Framing: one UTF-8 JSON object per line, `\n` terminated, at most
//! [`MAX_LINE_BYTES`] bytes including the terminator. Unknown fields are
//! ignored on both sides.
//!
//! ```text
//! request:  {"id":7,"lang":"the red mug","rgb":{"path":"img/7.png"},
//!            "depth":{"base64":"..."},"intrinsics":{"fx":500,"fy":500,"cx":320,"cy":240}}
//! response: {"id":7,"detected":true,"u":301.5,"v":250,"depth_m":1.2,"confidence":0.83}
//!           {"id":7,"detected":false,"confidence":0.0}
//!           {"id":7,"error":"inference failed"}
//! ```

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::BridgeError;

pub const MAX_LINE_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Where the detector finds an image: a path it can read, or inline bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageRef {
    Path(String),
    Base64(String),
}

impl ImageRef {
    pub fn inline(bytes: &[u8]) -> Self {
        ImageRef::Base64(base64::engine::general_purpose::STANDARD.encode(bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRequest {
    pub id: u64,
    pub lang: String,
    pub rgb: ImageRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<ImageRef>,
    pub intrinsics: Intrinsics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionResponse {
    pub id: u64,
    pub detected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_m: Option<f64>,
    pub confidence: f64,
}

impl DetectionResponse {
    pub fn empty(id: u64, confidence: f64) -> Self {
        DetectionResponse {
            id,
            detected: false,
            u: None,
            v: None,
            depth_m: None,
            confidence,
        }
    }

    pub fn hit(id: u64, u: f64, v: f64, depth_m: f64, confidence: f64) -> Self {
        DetectionResponse {
            id,
            detected: true,
            u: Some(u),
            v: Some(v),
            depth_m: Some(depth_m),
            confidence,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.confidence >= 0.0 && self.confidence.is_finite()) {
            return Err(format!("confidence must be a finite number >= 0, got {}", self.confidence));
        }
        let fields = [self.u, self.v, self.depth_m];
        if self.detected {
            if fields.iter().any(|f| !f.is_some_and(f64::is_finite)) {
                return Err("detected response needs finite u, v and depth_m".into());
            }
        } else if fields.iter().any(Option::is_some) {
            return Err("undetected response must not carry u, v or depth_m".into());
        }
        Ok(())
    }
}

impl DetectionRequest {
    pub fn validate(&self) -> Result<(), String> {
        if self.lang.trim().is_empty() {
            return Err("lang must be non-empty".into());
        }
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0) {
            return Err("focal lengths must be positive".into());
        }
        Ok(())
    }
}

// Superset of every reply shape, used for parsing only.
#[derive(Deserialize)]
struct RawReply {
    id: Option<u64>,
    detected: Option<bool>,
    u: Option<f64>,
    v: Option<f64>,
    depth_m: Option<f64>,
    confidence: Option<f64>,
    error: Option<String>,
}

fn to_line<T: Serialize>(msg: &T) -> Result<String, BridgeError> {
    let mut line = serde_json::to_string(msg).map_err(|e| BridgeError::Malformed(e.to_string()))?;
    line.push('\n');
    if line.len() > MAX_LINE_BYTES {
        return Err(BridgeError::PayloadTooLarge(line.len()));
    }
    Ok(line)
}

pub fn encode_request(req: &DetectionRequest) -> Result<String, BridgeError> {
    req.validate().map_err(BridgeError::Malformed)?;
    to_line(req)
}

pub fn encode_response(resp: &DetectionResponse) -> Result<String, BridgeError> {
    resp.validate().map_err(BridgeError::Malformed)?;
    to_line(resp)
}

pub fn encode_error(id: u64, message: &str) -> String {
    let mut line = serde_json::json!({ "id": id, "error": message }).to_string();
    line.push('\n');
    line
}

pub fn parse_request(line: &str) -> Result<DetectionRequest, BridgeError> {
    if line.len() > MAX_LINE_BYTES {
        return Err(BridgeError::PayloadTooLarge(line.len()));
    }
    let req: DetectionRequest =
        serde_json::from_str(line.trim_end()).map_err(|e| BridgeError::Malformed(e.to_string()))?;
    req.validate().map_err(BridgeError::Malformed)?;
    Ok(req)
}

/// Parses a reply line. Error replies come back as [`BridgeError::Remote`].
pub fn parse_response(line: &str) -> Result<DetectionResponse, BridgeError> {
    if line.len() > MAX_LINE_BYTES {
        return Err(BridgeError::PayloadTooLarge(line.len()));
    }
    let raw: RawReply =
        serde_json::from_str(line.trim_end()).map_err(|e| BridgeError::Malformed(e.to_string()))?;
    let id = raw.id.ok_or_else(|| BridgeError::Malformed("reply without id".into()))?;
    if let Some(message) = raw.error {
        return Err(BridgeError::Remote { id, message });
    }
    let resp = DetectionResponse {
        id,
        detected: raw
            .detected
            .ok_or_else(|| BridgeError::Malformed("reply without detected flag".into()))?,
        u: raw.u,
        v: raw.v,
        depth_m: raw.depth_m,
        confidence: raw
            .confidence
            .ok_or_else(|| BridgeError::Malformed("reply without confidence".into()))?,
    };
    resp.validate().map_err(BridgeError::Malformed)?;
    Ok(resp)
}
