//! Pluggable object detectors behind a name-keyed registry.
//!
//! The `oracle` detector matches the known car-glyph luminance signature
//! by normalized cross-correlation at the fixed glyph widths; it is
//! exact on clean synthetic scenes. The `external` detector shells out
//! to a user-configured command that receives an image path and prints
//! detections as JSON. Both are selected at runtime through a
//! [`DetectorSpec`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::corruption::glyph::{glyph_height, luminance_template, TEMPLATE_WIDTHS};
use crate::data::BoundingBox;
use crate::raster::RasterImage;

use super::{Detection, EvalError};

/// Fully determines detector behavior: same spec + image, same result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

impl DetectorSpec {
    pub fn oracle() -> Self {
        Self {
            kind: "oracle".to_string(),
            parameters: BTreeMap::new(),
        }
    }

    pub fn external(command: impl Into<String>) -> Self {
        let mut parameters = BTreeMap::new();
        parameters.insert("command".to_string(), command.into());
        Self {
            kind: "external".to_string(),
            parameters,
        }
    }
}

pub trait Detector: Send + Sync {
    fn kind(&self) -> &str;
    fn detect(&self, image: &RasterImage) -> Result<Vec<Detection>, EvalError>;
}

pub type DetectorFactory =
    fn(&BTreeMap<String, String>) -> Result<Box<dyn Detector>, EvalError>;

/// Name-keyed factory registry; `oracle` and `external` ship built in.
pub struct DetectorRegistry {
    factories: BTreeMap<String, DetectorFactory>,
}

impl DetectorRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("oracle", |params| Ok(Box::new(OracleDetector::from_params(params)?)));
        reg.register("external", |params| {
            Ok(Box::new(ExternalDetector::from_params(params)?))
        });
        reg
    }

    pub fn register(&mut self, kind: &str, factory: DetectorFactory) {
        self.factories.insert(kind.to_string(), factory);
    }

    pub fn kinds(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn build(&self, spec: &DetectorSpec) -> Result<Box<dyn Detector>, EvalError> {
        let factory = self
            .factories
            .get(&spec.kind)
            .ok_or_else(|| EvalError::UnknownDetector(spec.kind.clone()))?;
        factory(&spec.parameters)
    }
}

impl Default for DetectorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// Build a detector from the default registry.
pub fn build_detector(spec: &DetectorSpec) -> Result<Box<dyn Detector>, EvalError> {
    DetectorRegistry::with_builtins().build(spec)
}

/// Default correlation acceptance threshold.
pub const ORACLE_THRESHOLD: f64 = 0.85;

/// Default minimum luminance standard deviation inside a window; flat
/// background regions fall well below this while glyphs sit far above.
pub const ORACLE_MIN_STD: f64 = 0.12;

/// Overlap above which two candidate detections count as duplicates.
const NMS_IOU: f64 = 0.3;

/// Exact template matcher over the glyph luminance signatures.
pub struct OracleDetector {
    pub threshold: f64,
    pub min_std: f64,
}

impl OracleDetector {
    pub fn new(threshold: f64, min_std: f64) -> Self {
        Self { threshold, min_std }
    }

    fn from_params(params: &BTreeMap<String, String>) -> Result<Self, EvalError> {
        let parse = |key: &str, default: f64| -> Result<f64, EvalError> {
            match params.get(key) {
                None => Ok(default),
                Some(raw) => raw.parse().map_err(|_| {
                    EvalError::BadDetectorParam {
                        key: key.to_string(),
                        value: raw.clone(),
                    }
                }),
            }
        };
        Ok(Self::new(
            parse("threshold", ORACLE_THRESHOLD)?,
            parse("min_std", ORACLE_MIN_STD)?,
        ))
    }
}

impl Default for OracleDetector {
    fn default() -> Self {
        Self::new(ORACLE_THRESHOLD, ORACLE_MIN_STD)
    }
}

struct Candidate {
    bb: BoundingBox,
    response: f64,
}

fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b) as f64;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() as f64 + b.area() as f64 - inter)
}

impl Detector for OracleDetector {
    fn kind(&self) -> &str {
        "oracle"
    }

    fn detect(&self, image: &RasterImage) -> Result<Vec<Detection>, EvalError> {
        let lum = image.luminance_plane();
        let (ih, iw) = lum.dim();
        let mut candidates: Vec<Candidate> = Vec::new();

        for width in TEMPLATE_WIDTHS {
            let tpl = luminance_template(width);
            let (th, tw) = tpl.dim();
            if th > ih || tw > iw {
                continue;
            }
            let n = (th * tw) as f64;
            let t_mean = tpl.sum() / n;
            let t_centered: Vec<f64> = tpl.iter().map(|v| v - t_mean).collect();
            let t_norm = t_centered.iter().map(|v| v * v).sum::<f64>().sqrt();

            for y0 in 0..=(ih - th) {
                for x0 in 0..=(iw - tw) {
                    let mut sum = 0.0;
                    let mut sum_sq = 0.0;
                    for ty in 0..th {
                        for tx in 0..tw {
                            let v = lum[[y0 + ty, x0 + tx]];
                            sum += v;
                            sum_sq += v * v;
                        }
                    }
                    let mean = sum / n;
                    let var = (sum_sq / n - mean * mean).max(0.0);
                    if var.sqrt() < self.min_std {
                        continue;
                    }
                    let mut dot = 0.0;
                    for ty in 0..th {
                        for tx in 0..tw {
                            dot += (lum[[y0 + ty, x0 + tx]] - mean)
                                * t_centered[ty * tw + tx];
                        }
                    }
                    let w_norm = (var * n).sqrt();
                    let ncc = dot / (w_norm * t_norm);
                    if ncc >= self.threshold {
                        candidates.push(Candidate {
                            bb: BoundingBox::new(
                                x0 as u32,
                                y0 as u32,
                                width,
                                glyph_height(width),
                            ),
                            response: ncc,
                        });
                    }
                }
            }
        }

        // Greedy non-maximum suppression, strongest response first; ties
        // break on position for determinism.
        candidates.sort_by(|a, b| {
            b.response
                .partial_cmp(&a.response)
                .expect("finite responses")
                .then(a.bb.y.cmp(&b.bb.y))
                .then(a.bb.x.cmp(&b.bb.x))
                .then(a.bb.w.cmp(&b.bb.w))
        });
        let mut kept: Vec<Candidate> = Vec::new();
        for cand in candidates {
            if kept.iter().all(|k| iou(&k.bb, &cand.bb) <= NMS_IOU) {
                kept.push(cand);
            }
        }

        Ok(kept
            .into_iter()
            .map(|c| Detection {
                box_: c.bb,
                label: "car".to_string(),
                confidence: c.response.clamp(0.0, 1.0),
            })
            .collect())
    }
}

#[derive(Deserialize)]
struct ExternalDoc {
    detections: Vec<ExternalDetection>,
}

#[derive(Deserialize)]
struct ExternalDetection {
    #[serde(rename = "box")]
    box_: [u32; 4],
    label: String,
    confidence: f64,
}

/// Adapter around a user-configured detection command. The command is
/// invoked with the image (written as a temporary PNG) appended as its
/// last argument and must print `{"detections":[...]}` on stdout.
pub struct ExternalDetector {
    command: String,
    args: Vec<String>,
}

impl ExternalDetector {
    fn from_params(params: &BTreeMap<String, String>) -> Result<Self, EvalError> {
        let command = params
            .get("command")
            .cloned()
            .ok_or_else(|| EvalError::DetectorUnavailable("external detector has no command".into()))?;
        let args = params
            .get("args")
            .map(|raw| raw.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default();
        Ok(Self { command, args })
    }
}

impl Detector for ExternalDetector {
    fn kind(&self) -> &str {
        "external"
    }

    fn detect(&self, image: &RasterImage) -> Result<Vec<Detection>, EvalError> {
        let dir = tempfile::tempdir().map_err(|e| {
            EvalError::DetectorUnavailable(format!("cannot create temp dir: {e}"))
        })?;
        let img_path = dir.path().join("frame.png");
        image
            .save_png(&img_path)
            .map_err(|e| EvalError::DetectorUnavailable(format!("cannot stage image: {e}")))?;

        let output = Command::new(&self.command)
            .args(&self.args)
            .arg(&img_path)
            .output()
            .map_err(|e| {
                EvalError::DetectorUnavailable(format!(
                    "failed to run {:?}: {e}",
                    self.command
                ))
            })?;
        if !output.status.success() {
            let mut msg = format!("{:?} exited with {}", self.command, output.status);
            if !output.stderr.is_empty() {
                let _ = write!(msg, ": {}", String::from_utf8_lossy(&output.stderr));
            }
            return Err(EvalError::DetectorUnavailable(msg));
        }
        let doc: ExternalDoc = serde_json::from_slice(&output.stdout).map_err(|e| {
            EvalError::DetectorUnavailable(format!("bad detector output: {e}"))
        })?;
        Ok(doc
            .detections
            .into_iter()
            .map(|d| Detection {
                box_: BoundingBox::new(d.box_[0], d.box_[1], d.box_[2], d.box_[3]),
                label: d.label,
                confidence: d.confidence.clamp(0.0, 1.0),
            })
            .collect())
    }
}
