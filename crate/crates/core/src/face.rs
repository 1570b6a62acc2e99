//! Expression features (`face.v1`) from FaceMesh landmark tracks with
//! OpenFace action-unit intensities, one block per mimicry task.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{LandmarkTrack, Point3, TrackKind};
use crate::model::{FeatureVector, TaskKind};

pub const SCHEMA_ID: &str = "face.v1";
pub const TASK_SCHEMA_ID: &str = "face.task.v1";

/// Action units summarised per task: brow raisers, brow lowerer, cheek
/// raiser, nose wrinkler, lip-corner puller, lips part, jaw drop.
pub const AU_SUBSET: [&str; 8] = ["AU01", "AU02", "AU04", "AU06", "AU09", "AU12", "AU25", "AU26"];

/// Intensity above which an AU counts as active.
pub const AU_ACTIVE_THRESHOLD: f64 = 0.5;

/// FaceMesh landmark indices. "Right" and "left" are the subject's sides,
/// following MediaPipe's naming.
pub mod landmarks {
    pub const RIGHT_EYE_OUTER: usize = 33;
    pub const LEFT_EYE_OUTER: usize = 263;
    pub const RIGHT_MOUTH_CORNER: usize = 61;
    pub const LEFT_MOUTH_CORNER: usize = 291;
    pub const UPPER_LIP_TOP: usize = 0;
    pub const LOWER_LIP_BOTTOM: usize = 17;
    pub const UPPER_LIP_INNER: usize = 13;
    pub const LOWER_LIP_INNER: usize = 14;
    pub const RIGHT_BROW: [usize; 5] = [70, 63, 105, 66, 107];
    pub const LEFT_BROW: [usize; 5] = [300, 293, 334, 296, 336];

    /// Landmarks whose motion makes up the mobility amplitude.
    pub const MOBILITY_SUBSET: [usize; 16] = [
        RIGHT_MOUTH_CORNER,
        LEFT_MOUTH_CORNER,
        UPPER_LIP_TOP,
        LOWER_LIP_BOTTOM,
        UPPER_LIP_INNER,
        LOWER_LIP_INNER,
        RIGHT_BROW[0],
        RIGHT_BROW[1],
        RIGHT_BROW[2],
        RIGHT_BROW[3],
        RIGHT_BROW[4],
        LEFT_BROW[0],
        LEFT_BROW[1],
        LEFT_BROW[2],
        LEFT_BROW[3],
        LEFT_BROW[4],
    ];

    /// (right, left) mirror pairs used for asymmetry.
    pub const MIRROR_PAIRS: [(usize, usize); 6] = [
        (RIGHT_MOUTH_CORNER, LEFT_MOUTH_CORNER),
        (RIGHT_BROW[0], LEFT_BROW[0]),
        (RIGHT_BROW[1], LEFT_BROW[1]),
        (RIGHT_BROW[2], LEFT_BROW[2]),
        (RIGHT_BROW[3], LEFT_BROW[3]),
        (RIGHT_BROW[4], LEFT_BROW[4]),
    ];
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaceError {
    #[error("a frame carries no action-unit intensities")]
    MissingAUs,
    #[error("track has {0} frames, at least 2 are required")]
    TooFewFrames(usize),
    #[error("eye corners coincide in frame {0}")]
    DegenerateGeometry(usize),
    #[error("expected a face track")]
    NotAFaceTrack,
    #[error("{0} is not a facial-expression task")]
    NotAFaceTask(TaskKind),
    #[error("no facial-expression task present")]
    NoFaceTasks,
    #[error("{task}: {source}")]
    Task { task: TaskKind, source: Box<FaceError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub activation_fraction: f64,
}

impl AuStats {
    const ZERO: AuStats = AuStats { mean: 0.0, std: 0.0, max: 0.0, activation_fraction: 0.0 };
}

/// Per-AU summary over all frames. An AU missing from some frames counts as
/// intensity 0 there.
pub fn au_statistics(track: &LandmarkTrack) -> Result<BTreeMap<String, AuStats>, FaceError> {
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let n = track.frames.len();
    for (i, frame) in track.frames.iter().enumerate() {
        let aus = frame.aus.as_ref().ok_or(FaceError::MissingAUs)?;
        for (code, &v) in aus {
            series.entry(code.clone()).or_insert_with(|| vec![0.0; n])[i] = v;
        }
    }
    Ok(series
        .into_iter()
        .map(|(code, x)| {
            let mean = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let stats = AuStats {
                mean,
                std: var.sqrt(),
                max: x.iter().cloned().fold(f64::MIN, f64::max),
                activation_fraction: x.iter().filter(|v| **v > AU_ACTIVE_THRESHOLD).count() as f64 / n as f64,
            };
            (code, stats)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobility {
    pub amplitude: f64,
    pub asymmetry: f64,
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: Point3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Expresses every landmark in a face-centred frame: origin between the
/// outer eye corners, x along the eye line (towards the subject's left),
/// unit length equal to the inter-ocular distance.
fn normalized_frames(track: &LandmarkTrack) -> Result<Vec<Vec<Point3>>, FaceError> {
    use landmarks::{LEFT_EYE_OUTER, RIGHT_EYE_OUTER};
    track
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let (r, l) = (f.points[RIGHT_EYE_OUTER], f.points[LEFT_EYE_OUTER]);
            let iod = norm(sub(l, r));
            let planar = (l[0] - r[0]).hypot(l[1] - r[1]);
            if !(iod > 1e-9 && planar > 1e-9) {
                return Err(FaceError::DegenerateGeometry(i));
            }
            let origin = [(l[0] + r[0]) / 2.0, (l[1] + r[1]) / 2.0, (l[2] + r[2]) / 2.0];
            let (ux, uy) = ((l[0] - r[0]) / planar, (l[1] - r[1]) / planar);
            Ok(f.points
                .iter()
                .map(|&p| {
                    let d = sub(p, origin);
                    [(d[0] * ux + d[1] * uy) / iod, (-d[0] * uy + d[1] * ux) / iod, d[2] / iod]
                })
                .collect())
        })
        .collect()
}

/// Mobility over explicit landmark subsets.
pub fn landmark_mobility_on(
    track: &LandmarkTrack,
    subset: &[usize],
    pairs: &[(usize, usize)],
) -> Result<Mobility, FaceError> {
    if track.kind != TrackKind::Face {
        return Err(FaceError::NotAFaceTrack);
    }
    if track.frames.len() < 2 {
        return Err(FaceError::TooFewFrames(track.frames.len()));
    }
    let frames = normalized_frames(track)?;
    let first = &frames[0];
    let displacement = |t: usize, j: usize| sub(frames[t][j], first[j]);

    let amplitude = if subset.is_empty() {
        0.0
    } else {
        subset
            .iter()
            .map(|&j| (0..frames.len()).map(|t| norm(displacement(t, j))).fold(0.0, f64::max))
            .sum::<f64>()
            / subset.len() as f64
    };
    let asymmetry = if pairs.is_empty() {
        0.0
    } else {
        let mut total = 0.0;
        for t in 1..frames.len() {
            for &(right, left) in pairs {
                let dr = displacement(t, right);
                let dl = displacement(t, left);
                total += norm(sub(dl, [-dr[0], dr[1], dr[2]]));
            }
        }
        total / ((frames.len() - 1) * pairs.len()) as f64
    };
    Ok(Mobility { amplitude, asymmetry })
}

/// Mean peak displacement of mouth and brow landmarks from the first frame,
/// and mean left/right mismatch of mirrored landmark displacements, both in
/// inter-ocular units.
pub fn landmark_mobility(track: &LandmarkTrack) -> Result<Mobility, FaceError> {
    landmark_mobility_on(track, &landmarks::MOBILITY_SUBSET, &landmarks::MIRROR_PAIRS)
}

/// `face.task.v1` block for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionFeatures {
    pub task: TaskKind,
    pub features: FeatureVector,
}

/// Names of one task block, unprefixed.
pub fn task_feature_names() -> Vec<String> {
    let mut names = Vec::new();
    for au in AU_SUBSET {
        for stat in ["mean", "std", "max", "active"] {
            names.push(format!("{au}_{stat}"));
        }
    }
    names.extend(["mobility_amplitude", "mobility_asymmetry", "present"].map(String::from));
    names
}

/// Names of the combined `face.v1` vector.
pub fn feature_names() -> Vec<String> {
    TaskKind::FACE
        .iter()
        .flat_map(|t| task_feature_names().into_iter().map(move |n| format!("{t}.{n}")))
        .collect()
}

/// Positions of one task's block inside `face.v1`.
pub fn task_feature_indices(task: TaskKind) -> Option<Vec<usize>> {
    let block = task_feature_names().len();
    let pos = TaskKind::FACE.iter().position(|t| *t == task)?;
    Some((pos * block..(pos + 1) * block).collect())
}

fn absent_block() -> Vec<f64> {
    vec![0.0; task_feature_names().len()]
}

pub fn extract_expression_features(task: TaskKind, track: &LandmarkTrack) -> Result<ExpressionFeatures, FaceError> {
    if !TaskKind::FACE.contains(&task) {
        return Err(FaceError::NotAFaceTask(task));
    }
    let wrap = |e: FaceError| FaceError::Task { task, source: Box::new(e) };
    let stats = au_statistics(track).map_err(wrap)?;
    let mobility = landmark_mobility(track).map_err(wrap)?;
    let mut values = Vec::with_capacity(35);
    for au in AU_SUBSET {
        let s = stats.get(au).copied().unwrap_or(AuStats::ZERO);
        values.extend([s.mean, s.std, s.max, s.activation_fraction]);
    }
    values.extend([mobility.amplitude, mobility.asymmetry, 1.0]);
    let features = FeatureVector::new(TASK_SCHEMA_ID, task_feature_names(), values)
        .map_err(|_| wrap(FaceError::DegenerateGeometry(0)))?;
    Ok(ExpressionFeatures { task, features })
}

/// Concatenates per-task blocks in task order; absent tasks are zeros with
/// `present = 0`.
pub fn combine_expression_features(blocks: &[ExpressionFeatures]) -> Result<FeatureVector, FaceError> {
    if blocks.is_empty() {
        return Err(FaceError::NoFaceTasks);
    }
    let mut values = Vec::new();
    for task in TaskKind::FACE {
        match blocks.iter().find(|b| b.task == task) {
            Some(b) => values.extend_from_slice(&b.features.values),
            None => values.extend(absent_block()),
        }
    }
    FeatureVector::new(SCHEMA_ID, feature_names(), values).map_err(|_| FaceError::NoFaceTasks)
}

/// The `face.v1` vector from whichever expression tracks are present.
pub fn extract_face_features(tracks: &BTreeMap<TaskKind, LandmarkTrack>) -> Result<FeatureVector, FaceError> {
    if let Some(t) = tracks.keys().find(|t| !TaskKind::FACE.contains(t)) {
        return Err(FaceError::NotAFaceTask(*t));
    }
    let blocks = tracks
        .iter()
        .map(|(task, track)| extract_expression_features(*task, track))
        .collect::<Result<Vec<_>, _>>()?;
    combine_expression_features(&blocks)
}
