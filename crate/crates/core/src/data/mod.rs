//! Aligned pair loading, dataset splitting, and lossless trio storage.

pub mod naming;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{RasterError, RasterImage};
use naming::{FileRole, NamingRegistry, NamingScheme};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing counterpart for {file}")]
    MissingCounterpart { file: String },
    #[error("pair {id}: distorted is {dw}x{dh} but clear is {cw}x{ch}")]
    DimensionMismatch {
        id: String,
        dw: u32,
        dh: u32,
        cw: u32,
        ch: u32,
    },
    #[error("trio {id}: member images differ in dimensions")]
    TrioDimensionMismatch { id: String },
    #[error(transparent)]
    DecodeFailure(#[from] RasterError),
    #[error("requested split of {requested} pairs but only {available} available")]
    InsufficientPairs { requested: usize, available: usize },
    #[error("unknown naming scheme {0:?}")]
    UnknownNamingScheme(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad manifest {path}: {msg}")]
    BadManifest { path: PathBuf, msg: String },
    #[error("ground truth for {id}: box ({x},{y},{w},{h}) outside {iw}x{ih} image")]
    BoxOutOfBounds {
        id: String,
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        iw: u32,
        ih: u32,
    },
    #[error("ground truth for {id}: {boxes} boxes but {labels} labels")]
    LabelCountMismatch {
        id: String,
        boxes: usize,
        labels: usize,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A distorted/clear training unit with equal-dimension members.
#[derive(Debug, Clone)]
pub struct AlignedPair {
    pub id: String,
    pub distorted: RasterImage,
    pub clear: RasterImage,
}

impl AlignedPair {
    pub fn new(id: String, distorted: RasterImage, clear: RasterImage) -> Result<Self, DataError> {
        if distorted.dims() != clear.dims() {
            let (dw, dh) = distorted.dims();
            let (cw, ch) = clear.dims();
            return Err(DataError::DimensionMismatch { id, dw, dh, cw, ch });
        }
        Ok(Self {
            id,
            distorted,
            clear,
        })
    }
}

/// A (distorted, predicted, clear) evaluation unit.
#[derive(Debug, Clone)]
pub struct EvaluationTrio {
    pub id: String,
    pub input: RasterImage,
    pub predicted: RasterImage,
    pub ground_truth: RasterImage,
}

impl EvaluationTrio {
    pub fn new(
        id: String,
        input: RasterImage,
        predicted: RasterImage,
        ground_truth: RasterImage,
    ) -> Result<Self, DataError> {
        if input.dims() != predicted.dims() || input.dims() != ground_truth.dims() {
            return Err(DataError::TrioDimensionMismatch { id });
        }
        Ok(Self {
            id,
            input,
            predicted,
            ground_truth,
        })
    }
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn fits_within(&self, image_w: u32, image_h: u32) -> bool {
        self.x + self.w <= image_w && self.y + self.h <= image_h
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn intersection_area(&self, other: &Self) -> u64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        if x1 > x0 && y1 > y0 {
            (x1 - x0) as u64 * (y1 - y0) as u64
        } else {
            0
        }
    }
}

/// Known object boxes for a rendered scene (category "car" only).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SceneGroundTruth {
    pub boxes: Vec<BoundingBox>,
    pub labels: Vec<String>,
}

impl SceneGroundTruth {
    pub fn validate(&self, id: &str, image_w: u32, image_h: u32) -> Result<(), DataError> {
        if self.boxes.len() != self.labels.len() {
            return Err(DataError::LabelCountMismatch {
                id: id.to_string(),
                boxes: self.boxes.len(),
                labels: self.labels.len(),
            });
        }
        for b in &self.boxes {
            if !b.fits_within(image_w, image_h) {
                return Err(DataError::BoxOutOfBounds {
                    id: id.to_string(),
                    x: b.x,
                    y: b.y,
                    w: b.w,
                    h: b.h,
                    iw: image_w,
                    ih: image_h,
                });
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SidecarDoc {
    boxes: Vec<[u32; 4]>,
    labels: Vec<String>,
}

/// Write the `<id>_boxes.json` sidecar for a scene.
pub fn write_ground_truth_sidecar(
    gt: &SceneGroundTruth,
    id: &str,
    dir: &Path,
) -> Result<PathBuf, DataError> {
    let doc = SidecarDoc {
        boxes: gt.boxes.iter().map(|b| [b.x, b.y, b.w, b.h]).collect(),
        labels: gt.labels.clone(),
    };
    let path = dir.join(format!("{id}_boxes.json"));
    let json = serde_json::to_string_pretty(&doc).expect("sidecar serializes");
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(path)
}

/// Read a `<id>_boxes.json` sidecar.
pub fn read_ground_truth_sidecar(path: &Path) -> Result<SceneGroundTruth, DataError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    let doc: SidecarDoc = serde_json::from_str(&raw).map_err(|e| DataError::BadManifest {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(SceneGroundTruth {
        boxes: doc
            .boxes
            .iter()
            .map(|b| BoundingBox::new(b[0], b[1], b[2], b[3]))
            .collect(),
        labels: doc.labels,
    })
}

/// Train/validation/test partition of aligned pairs.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<AlignedPair>,
    pub validation: Vec<AlignedPair>,
    pub test: Vec<AlignedPair>,
}

/// The paper-scale split ratio applied to smaller pools: 80:1:1, rounded
/// down per part.
pub fn proportional_counts(available: usize) -> (usize, usize, usize) {
    let unit = available / 82;
    let train = unit * 80;
    (train, unit, unit)
}

fn walk_files(root: &Path, out: &mut Vec<PathBuf>) -> Result<(), DataError> {
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        let path = entry.path();
        if path.is_dir() {
            walk_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Load every aligned pair under `root_path` using the named convention.
///
/// Pairs come back sorted by id. A distorted file without its clear mate
/// (or vice versa) fails the whole load; so does any dimension mismatch
/// or unreadable image.
pub fn load_pair_directory(
    root_path: &Path,
    naming_scheme: &str,
) -> Result<Vec<AlignedPair>, DataError> {
    let registry = NamingRegistry::with_builtins();
    let scheme = registry
        .get(naming_scheme)
        .ok_or_else(|| DataError::UnknownNamingScheme(naming_scheme.to_string()))?;
    load_pair_directory_with(root_path, scheme.as_ref())
}

/// Same as [`load_pair_directory`] but with an explicit scheme instance
/// (the hook for external dataset layouts).
pub fn load_pair_directory_with(
    root_path: &Path,
    scheme: &dyn NamingScheme,
) -> Result<Vec<AlignedPair>, DataError> {
    let mut files = Vec::new();
    walk_files(root_path, &mut files)?;

    let mut distorted: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut clear: BTreeMap<String, PathBuf> = BTreeMap::new();
    for path in files {
        let rel = path.strip_prefix(root_path).expect("walked under root");
        match scheme.role_of(rel) {
            FileRole::Distorted(id) => {
                distorted.insert(id, path);
            }
            FileRole::Clear(id) => {
                clear.insert(id, path);
            }
            FileRole::Unrelated => {}
        }
    }

    for (id, path) in &distorted {
        if !clear.contains_key(id) {
            return Err(DataError::MissingCounterpart {
                file: path.display().to_string(),
            });
        }
    }
    for (id, path) in &clear {
        if !distorted.contains_key(id) {
            return Err(DataError::MissingCounterpart {
                file: path.display().to_string(),
            });
        }
    }

    // BTreeMap iteration gives lexicographic id order; parallel decode
    // keeps that order through the indexed collect.
    let ids: Vec<&String> = distorted.keys().collect();
    ids.par_iter()
        .map(|id| {
            let d = RasterImage::load(&distorted[*id])?;
            let c = RasterImage::load(&clear[*id])?;
            AlignedPair::new((*id).clone(), d, c)
        })
        .collect()
}

/// Shuffle-then-partition split, a pure function of `(pairs, counts, seed)`.
pub fn split_dataset(
    pairs: Vec<AlignedPair>,
    counts: (usize, usize, usize),
    seed: u64,
) -> Result<DatasetSplit, DataError> {
    let order = split_indices(pairs.len(), counts, seed)?;
    let mut slots: Vec<Option<AlignedPair>> = pairs.into_iter().map(Some).collect();
    let take = |slots: &mut Vec<Option<AlignedPair>>, idxs: &[usize]| {
        idxs.iter()
            .map(|&i| slots[i].take().expect("index used once"))
            .collect::<Vec<_>>()
    };
    Ok(DatasetSplit {
        train: take(&mut slots, &order.0),
        validation: take(&mut slots, &order.1),
        test: take(&mut slots, &order.2),
    })
}

/// Shuffled index partition: (train, validation, test).
pub type SplitIndices = (Vec<usize>, Vec<usize>, Vec<usize>);

/// Index-level core of [`split_dataset`]: deterministic shuffle of
/// `0..available`, then partition into the three requested counts.
pub fn split_indices(
    available: usize,
    counts: (usize, usize, usize),
    seed: u64,
) -> Result<SplitIndices, DataError> {
    let requested = counts.0 + counts.1 + counts.2;
    if requested > available {
        return Err(DataError::InsufficientPairs {
            requested,
            available,
        });
    }
    let mut idx: Vec<usize> = (0..available).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let train = idx[..counts.0].to_vec();
    let val = idx[counts.0..counts.0 + counts.1].to_vec();
    let test = idx[counts.0 + counts.1..requested].to_vec();
    Ok((train, val, test))
}

#[derive(Serialize, Deserialize)]
struct TrioEntry {
    id: String,
    input: String,
    predicted: String,
    ground_truth: String,
}

#[derive(Serialize, Deserialize)]
struct TrioManifest {
    trios: Vec<TrioEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_fingerprint: Option<String>,
}

/// Store trios losslessly under `out_path` and return the manifest path.
///
/// Off-grid values are snapped onto the 1/255 grid by the PNG encoding;
/// reading back reproduces exactly the quantized pixels.
pub fn write_trio_set(trios: &[EvaluationTrio], out_path: &Path) -> Result<PathBuf, DataError> {
    write_trio_set_with_fingerprint(trios, out_path, None)
}

pub fn write_trio_set_with_fingerprint(
    trios: &[EvaluationTrio],
    out_path: &Path,
    config_fingerprint: Option<String>,
) -> Result<PathBuf, DataError> {
    fs::create_dir_all(out_path).map_err(io_err(out_path))?;
    let mut entries = Vec::with_capacity(trios.len());
    for trio in trios {
        let files = [
            (format!("{}_input.png", trio.id), &trio.input),
            (format!("{}_predicted.png", trio.id), &trio.predicted),
            (format!("{}_ground_truth.png", trio.id), &trio.ground_truth),
        ];
        for (name, img) in &files {
            img.save_png(&out_path.join(name))?;
        }
        entries.push(TrioEntry {
            id: trio.id.clone(),
            input: files[0].0.clone(),
            predicted: files[1].0.clone(),
            ground_truth: files[2].0.clone(),
        });
    }
    let manifest = TrioManifest {
        trios: entries,
        config_fingerprint,
    };
    let path = out_path.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(path)
}

/// Read a trio set back from its manifest.
pub fn read_trio_set(manifest_path: &Path) -> Result<Vec<EvaluationTrio>, DataError> {
    let raw = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let manifest: TrioManifest =
        serde_json::from_str(&raw).map_err(|e| DataError::BadManifest {
            path: manifest_path.to_path_buf(),
            msg: e.to_string(),
        })?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .trios
        .iter()
        .map(|e| {
            EvaluationTrio::new(
                e.id.clone(),
                RasterImage::load(&dir.join(&e.input))?,
                RasterImage::load(&dir.join(&e.predicted))?,
                RasterImage::load(&dir.join(&e.ground_truth))?,
            )
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PairEntry {
    id: String,
    rain: String,
    clear: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    boxes: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct PairManifest {
    pairs: Vec<PairEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_fingerprint: Option<String>,
}

impl PairManifest {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn fingerprint(&self) -> Option<&str> {
        self.config_fingerprint.as_deref()
    }
}

/// Write a synthesized pair dataset in the `suffix` layout, with box
/// sidecars and a manifest.
pub fn write_pair_dataset(
    items: &[(AlignedPair, SceneGroundTruth)],
    out_path: &Path,
    config_fingerprint: Option<String>,
) -> Result<PathBuf, DataError> {
    fs::create_dir_all(out_path).map_err(io_err(out_path))?;
    let mut entries = Vec::with_capacity(items.len());
    for (pair, gt) in items {
        let rain = format!("{}_rain.png", pair.id);
        let clear = format!("{}_clear.png", pair.id);
        pair.distorted.save_png(&out_path.join(&rain))?;
        pair.clear.save_png(&out_path.join(&clear))?;
        let boxes_path = write_ground_truth_sidecar(gt, &pair.id, out_path)?;
        entries.push(PairEntry {
            id: pair.id.clone(),
            rain,
            clear,
            boxes: Some(
                boxes_path
                    .file_name()
                    .expect("sidecar has a name")
                    .to_string_lossy()
                    .into_owned(),
            ),
        });
    }
    let manifest = PairManifest {
        pairs: entries,
        config_fingerprint,
    };
    let path = out_path.join("pairs_manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(path)
}

/// Read a pair-dataset manifest (for fingerprint checks and counting).
pub fn read_pair_manifest(path: &Path) -> Result<PairManifest, DataError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&raw).map_err(|e| DataError::BadManifest {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Load the `<id>_boxes.json` sidecars that accompany a pair directory.
pub fn load_ground_truth_sidecars(
    root_path: &Path,
) -> Result<BTreeMap<String, SceneGroundTruth>, DataError> {
    let mut files = Vec::new();
    walk_files(root_path, &mut files)?;
    let mut out = BTreeMap::new();
    for path in files {
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if let Some(id) = name.strip_suffix("_boxes.json") {
            out.insert(id.to_string(), read_ground_truth_sidecar(&path)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(value: f64) -> RasterImage {
        RasterImage::filled(8, 8, value).unwrap()
    }

    fn grid_image(w: u32, h: u32, salt: u32) -> RasterImage {
        RasterImage::from_fn(w, h, |c, x, y| {
            ((c as u32 * 31 + x * 7 + y * 13 + salt) % 256) as f64 / 255.0
        })
        .unwrap()
    }

    fn write_pair(dir: &Path, id: &str, w: u32, h: u32) {
        grid_image(w, h, 1)
            .save_png(&dir.join(format!("{id}_rain.png")))
            .unwrap();
        grid_image(w, h, 2)
            .save_png(&dir.join(format!("{id}_clear.png")))
            .unwrap();
    }

    #[test]
    fn loads_pairs_in_id_order() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["b", "a", "c"] {
            write_pair(dir.path(), id, 16, 16);
        }
        let pairs = load_pair_directory(dir.path(), "suffix").unwrap();
        let ids: Vec<&str> = pairs.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn missing_clear_mate_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_pair(dir.path(), "a", 16, 16);
        grid_image(16, 16, 9)
            .save_png(&dir.path().join("orphan_rain.png"))
            .unwrap();
        let err = load_pair_directory(dir.path(), "suffix").unwrap_err();
        match err {
            DataError::MissingCounterpart { file } => assert!(file.contains("orphan_rain")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn pair_dimension_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        grid_image(64, 60, 1)
            .save_png(&dir.path().join("p_rain.png"))
            .unwrap();
        grid_image(64, 64, 2)
            .save_png(&dir.path().join("p_clear.png"))
            .unwrap();
        let err = load_pair_directory(dir.path(), "suffix").unwrap_err();
        assert!(matches!(err, DataError::DimensionMismatch { .. }));
    }

    #[test]
    fn unknown_scheme_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_pair_directory(dir.path(), "mystery").unwrap_err();
        assert!(matches!(err, DataError::UnknownNamingScheme(_)));
    }

    #[test]
    fn split_paper_scale_counts() {
        let (train, val, test) = split_indices(50_000, (40_000, 500, 500), 7).unwrap();
        assert_eq!(train.len(), 40_000);
        assert_eq!(val.len(), 500);
        assert_eq!(test.len(), 500);
        // disjoint and within range
        let mut seen = vec![false; 50_000];
        for &i in train.iter().chain(&val).chain(&test) {
            assert!(!seen[i]);
            seen[i] = true;
        }
    }

    #[test]
    fn split_is_deterministic_in_seed() {
        let a = split_indices(1000, (800, 100, 100), 42).unwrap();
        let b = split_indices(1000, (800, 100, 100), 42).unwrap();
        assert_eq!(a, b);
        let c = split_indices(1000, (800, 100, 100), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_degenerate_all_train() {
        let pairs: Vec<AlignedPair> = (0..10)
            .map(|i| AlignedPair::new(format!("p{i}"), tiny(0.2), tiny(0.8)).unwrap())
            .collect();
        let split = split_dataset(pairs, (10, 0, 0), 123).unwrap();
        assert_eq!(split.train.len(), 10);
        assert!(split.validation.is_empty());
        assert!(split.test.is_empty());
    }

    #[test]
    fn split_insufficient_pairs() {
        let pairs: Vec<AlignedPair> = (0..5)
            .map(|i| AlignedPair::new(format!("p{i}"), tiny(0.2), tiny(0.8)).unwrap())
            .collect();
        let err = split_dataset(pairs, (4, 1, 1), 0).unwrap_err();
        assert!(matches!(
            err,
            DataError::InsufficientPairs {
                requested: 6,
                available: 5
            }
        ));
    }

    #[test]
    fn split_ids_disjoint() {
        let pairs: Vec<AlignedPair> = (0..20)
            .map(|i| AlignedPair::new(format!("p{i:02}"), tiny(0.3), tiny(0.7)).unwrap())
            .collect();
        let split = split_dataset(pairs, (16, 2, 2), 5).unwrap();
        let mut ids: Vec<&str> = split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .map(|p| p.id.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn proportional_counts_follow_80_1_1() {
        assert_eq!(proportional_counts(41_000), (40_000, 500, 500));
        assert_eq!(proportional_counts(82), (80, 1, 1));
        assert_eq!(proportional_counts(164), (160, 2, 2));
        assert_eq!(proportional_counts(81), (0, 0, 0));
    }

    fn trio(id: &str, salt: u32) -> EvaluationTrio {
        EvaluationTrio::new(
            id.to_string(),
            grid_image(16, 16, salt),
            grid_image(16, 16, salt + 1),
            grid_image(16, 16, salt + 2),
        )
        .unwrap()
    }

    #[test]
    fn trio_set_counts_files_and_entries() {
        let dir = tempfile::tempdir().unwrap();
        let trios = vec![trio("t0", 0), trio("t1", 10)];
        let manifest = write_trio_set(&trios, dir.path()).unwrap();
        let read = read_trio_set(&manifest).unwrap();
        assert_eq!(read.len(), 2);
        let n_pngs = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .map(|x| x == "png")
                    .unwrap_or(false)
            })
            .count();
        assert_eq!(n_pngs, 6);
    }

    #[test]
    fn empty_trio_set_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_trio_set(&[], dir.path()).unwrap();
        let read = read_trio_set(&manifest).unwrap();
        assert!(read.is_empty());
    }

    #[test]
    fn trio_round_trip_is_pixel_identical() {
        let dir = tempfile::tempdir().unwrap();
        let trios = vec![trio("t0", 3), trio("t1", 40)];
        let manifest = write_trio_set(&trios, dir.path()).unwrap();
        let read = read_trio_set(&manifest).unwrap();
        for (a, b) in trios.iter().zip(read.iter()) {
            assert_eq!(a.id, b.id);
            assert!(a.input.pixels_equal(&b.input));
            assert!(a.predicted.pixels_equal(&b.predicted));
            assert!(a.ground_truth.pixels_equal(&b.ground_truth));
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let gt = SceneGroundTruth {
            boxes: vec![BoundingBox::new(1, 2, 10, 8)],
            labels: vec!["car".to_string()],
        };
        let path = write_ground_truth_sidecar(&gt, "s0", dir.path()).unwrap();
        let back = read_ground_truth_sidecar(&path).unwrap();
        assert_eq!(back, gt);
        gt.validate("s0", 64, 64).unwrap();
        assert!(gt.validate("s0", 10, 9).is_err());
    }
}
