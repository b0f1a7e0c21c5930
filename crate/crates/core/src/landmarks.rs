//! Landmark frames, indexing schemes and the adapter onto named points.
//!
//! Coordinates are image coordinates with `y` growing downward, so a nose
//! that sits below the eye line has a positive vertical offset.
//!
//! "Left" and "right" always mean image left and image right, not the
//! subject's anatomical sides.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Landmark indexing scheme of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// 68-point layout (iBUG 300-W / dlib), indexed from 0.
    Dlib68,
    /// 468-point face mesh.
    Mesh468,
    /// The named point set of [`SemanticPoints`], in [`SEMANTIC_LAYOUT`] order.
    Semantic,
}

/// Points in a semantic frame: 6 per eye, 6 mouth, nose tip, 2 outer eye corners.
pub const SEMANTIC_POINT_COUNT: usize = 21;

/// Role of each index of a semantic-scheme frame.
pub const SEMANTIC_LAYOUT: [&str; SEMANTIC_POINT_COUNT] = [
    "left_eye.p1",
    "left_eye.p2",
    "left_eye.p3",
    "left_eye.p4",
    "left_eye.p5",
    "left_eye.p6",
    "right_eye.p1",
    "right_eye.p2",
    "right_eye.p3",
    "right_eye.p4",
    "right_eye.p5",
    "right_eye.p6",
    "mouth.p61",
    "mouth.p63",
    "mouth.p64",
    "mouth.p65",
    "mouth.p66",
    "mouth.p67",
    "nose_tip",
    "left_eye_outer_corner",
    "right_eye_outer_corner",
];

impl Scheme {
    pub const fn point_count(self) -> usize {
        match self {
            Scheme::Dlib68 => 68,
            Scheme::Mesh468 => 468,
            Scheme::Semantic => SEMANTIC_POINT_COUNT,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Scheme::Dlib68 => "dlib68",
            Scheme::Mesh468 => "mesh468",
            Scheme::Semantic => "semantic",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = LandmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dlib68" => Ok(Scheme::Dlib68),
            "mesh468" => Ok(Scheme::Mesh468),
            "semantic" => Ok(Scheme::Semantic),
            other => Err(LandmarkError::UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LandmarkError {
    #[error("unknown landmark scheme '{0}'")]
    UnknownScheme(String),
    #[error("scheme {scheme} expects {expected} points, got {actual}")]
    PointCount {
        scheme: Scheme,
        expected: usize,
        actual: usize,
    },
    #[error("frame without a face must carry no points (got {0})")]
    PointsWithoutFace(usize),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("timestamp {0} is negative or not finite")]
    BadTimestamp(f64),
    #[error("frame scheme {frame} does not match map scheme {map}")]
    SchemeMismatch { frame: Scheme, map: Scheme },
    #[error("malformed scheme map: {0}")]
    MalformedMap(String),
    #[error("the semantic scheme needs no index map")]
    SemanticNeedsNoMap,
}

/// One timestamped set of 2-D landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    t: f64,
    scheme: Scheme,
    points: Vec<Point>,
    face_present: bool,
}

impl LandmarkFrame {
    /// A face-present frame. The point count must match the scheme.
    pub fn new(t: f64, scheme: Scheme, points: Vec<Point>) -> Result<Self, LandmarkError> {
        check_timestamp(t)?;
        if points.len() != scheme.point_count() {
            return Err(LandmarkError::PointCount {
                scheme,
                expected: scheme.point_count(),
                actual: points.len(),
            });
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(LandmarkError::NonFinite(i));
        }
        Ok(Self {
            t,
            scheme,
            points,
            face_present: true,
        })
    }

    /// A frame in which the detector found no face.
    pub fn absent(t: f64, scheme: Scheme) -> Result<Self, LandmarkError> {
        check_timestamp(t)?;
        Ok(Self {
            t,
            scheme,
            points: Vec::new(),
            face_present: false,
        })
    }

    /// Validating constructor covering both the present and absent cases.
    pub fn from_parts(
        t: f64,
        scheme: Scheme,
        face_present: bool,
        points: Vec<Point>,
    ) -> Result<Self, LandmarkError> {
        if face_present {
            Self::new(t, scheme, points)
        } else if !points.is_empty() {
            Err(LandmarkError::PointsWithoutFace(points.len()))
        } else {
            Self::absent(t, scheme)
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn face_present(&self) -> bool {
        self.face_present
    }

    /// Applies `f` to every coordinate pair. Used for geometric property tests.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Result<Self, LandmarkError> {
        Self::from_parts(
            self.t,
            self.scheme,
            self.face_present,
            self.points.iter().copied().map(f).collect(),
        )
    }
}

fn check_timestamp(t: f64) -> Result<(), LandmarkError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(LandmarkError::BadTimestamp(t))
    }
}

/// Scheme-independent named points consumed by every metric.
///
/// Eye hexagons follow the EAR ordering: `p1` and `p4` are the horizontal
/// corners, `(p2, p6)` and `(p3, p5)` the vertical pairs. The mouth holds
/// the inner-lip points `p61, p63, p64, p65, p66, p67` in that order, so
/// `mouth[0]`/`mouth[3]` are the corners and `(mouth[1], mouth[5])`,
/// `(mouth[2], mouth[4])` the vertical pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticPoints {
    pub left_eye: [Point; 6],
    pub right_eye: [Point; 6],
    pub mouth: [Point; 6],
    pub nose_tip: Point,
    pub left_eye_outer_corner: Point,
    pub right_eye_outer_corner: Point,
}

impl SemanticPoints {
    pub fn inter_ocular_distance(&self) -> f64 {
        self.left_eye_outer_corner
            .distance(&self.right_eye_outer_corner)
    }

    /// Flattens into [`SEMANTIC_LAYOUT`] order.
    pub fn to_vec(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(SEMANTIC_POINT_COUNT);
        out.extend_from_slice(&self.left_eye);
        out.extend_from_slice(&self.right_eye);
        out.extend_from_slice(&self.mouth);
        out.push(self.nose_tip);
        out.push(self.left_eye_outer_corner);
        out.push(self.right_eye_outer_corner);
        out
    }

    pub fn to_frame(&self, t: f64) -> Result<LandmarkFrame, LandmarkError> {
        LandmarkFrame::new(t, Scheme::Semantic, self.to_vec())
    }
}

/// Index map from one scheme's point list onto [`SemanticPoints`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeMap {
    pub scheme: Scheme,
    pub eye_left_indices: [usize; 6],
    pub eye_right_indices: [usize; 6],
    pub mouth_indices: [usize; 6],
    pub nose_tip_index: usize,
    /// Outer corners of the left and right eye.
    pub eye_corner_indices: [usize; 2],
}

/// 68-point layout, 0-based. Left eye 36..41, right eye 42..47, inner lip
/// 60..67, nose tip 30. The mouth picks 60, 62, 63, 64, 65, 66, i.e. the
/// 1-based points 61, 63, 64, 65, 66, 67.
pub const DLIB68_MAP: SchemeMap = SchemeMap {
    scheme: Scheme::Dlib68,
    eye_left_indices: [36, 37, 38, 39, 40, 41],
    eye_right_indices: [42, 43, 44, 45, 46, 47],
    mouth_indices: [60, 62, 63, 64, 65, 66],
    nose_tip_index: 30,
    eye_corner_indices: [36, 45],
};

/// 468-point mesh. These are the eye contour and inner-lip indices in
/// common use for EAR/MAR on the mesh; the choice is conventional.
pub const MESH468_MAP: SchemeMap = SchemeMap {
    scheme: Scheme::Mesh468,
    eye_left_indices: [33, 160, 158, 133, 153, 144],
    eye_right_indices: [362, 385, 387, 263, 373, 380],
    mouth_indices: [78, 13, 312, 308, 317, 14],
    nose_tip_index: 1,
    eye_corner_indices: [33, 263],
};

pub const SEMANTIC_MAP: SchemeMap = SchemeMap {
    scheme: Scheme::Semantic,
    eye_left_indices: [0, 1, 2, 3, 4, 5],
    eye_right_indices: [6, 7, 8, 9, 10, 11],
    mouth_indices: [12, 13, 14, 15, 16, 17],
    nose_tip_index: 18,
    eye_corner_indices: [19, 20],
};

/// The shipped map for a detector scheme.
pub fn builtin_scheme_map(scheme: Scheme) -> Result<SchemeMap, LandmarkError> {
    match scheme {
        Scheme::Dlib68 => Ok(DLIB68_MAP),
        Scheme::Mesh468 => Ok(MESH468_MAP),
        Scheme::Semantic => Err(LandmarkError::SemanticNeedsNoMap),
    }
}

/// Map to use for frames of `scheme`: the builtin map, or identity for semantic frames.
pub fn map_for(scheme: Scheme) -> &'static SchemeMap {
    match scheme {
        Scheme::Dlib68 => &DLIB68_MAP,
        Scheme::Mesh468 => &MESH468_MAP,
        Scheme::Semantic => &SEMANTIC_MAP,
    }
}

impl SchemeMap {
    fn roles(&self) -> impl Iterator<Item = (&'static str, usize)> + '_ {
        let eyes = self
            .eye_left_indices
            .iter()
            .zip(&SEMANTIC_LAYOUT[0..6])
            .chain(self.eye_right_indices.iter().zip(&SEMANTIC_LAYOUT[6..12]));
        eyes.chain(self.mouth_indices.iter().zip(&SEMANTIC_LAYOUT[12..18]))
            .map(|(i, r)| (*r, *i))
            .chain(std::iter::once(("nose_tip", self.nose_tip_index)))
    }

    /// All indices are in range, and no index serves two roles. The outer
    /// eye corners may coincide with an eye hexagon's horizontal endpoint
    /// of the same eye, since that is the same anatomical point.
    pub fn validate(&self) -> Result<(), LandmarkError> {
        let n = self.scheme.point_count();
        let mut seen: Vec<(usize, &'static str)> = Vec::with_capacity(19);
        for (role, idx) in self.roles() {
            if idx >= n {
                return Err(LandmarkError::MalformedMap(format!(
                    "{role} index {idx} out of range for {}",
                    self.scheme
                )));
            }
            if let Some((_, other)) = seen.iter().find(|(i, _)| *i == idx) {
                return Err(LandmarkError::MalformedMap(format!(
                    "index {idx} used for both {other} and {role}"
                )));
            }
            seen.push((idx, role));
        }
        let corners = [
            (self.eye_corner_indices[0], &self.eye_left_indices, "left"),
            (self.eye_corner_indices[1], &self.eye_right_indices, "right"),
        ];
        for (idx, eye, side) in corners {
            if idx >= n {
                return Err(LandmarkError::MalformedMap(format!(
                    "{side} eye corner index {idx} out of range for {}",
                    self.scheme
                )));
            }
            let is_own_endpoint = idx == eye[0] || idx == eye[3];
            if !is_own_endpoint && seen.iter().any(|(i, _)| *i == idx) {
                return Err(LandmarkError::MalformedMap(format!(
                    "{side} eye corner index {idx} reuses another role"
                )));
            }
        }
        if self.eye_corner_indices[0] == self.eye_corner_indices[1] {
            return Err(LandmarkError::MalformedMap(
                "both eye corners share one index".into(),
            ));
        }
        Ok(())
    }

    /// Number of distinct frame indices the map reads.
    pub fn distinct_indices(&self) -> usize {
        let mut all: Vec<usize> = self.roles().map(|(_, i)| i).collect();
        all.extend(self.eye_corner_indices);
        all.sort_unstable();
        all.dedup();
        all.len()
    }
}

fn pick6(points: &[Point], idx: &[usize; 6]) -> Result<[Point; 6], LandmarkError> {
    let mut out = [Point::default(); 6];
    for (slot, &i) in out.iter_mut().zip(idx) {
        *slot = pick(points, i)?;
    }
    Ok(out)
}

fn pick(points: &[Point], i: usize) -> Result<Point, LandmarkError> {
    points.get(i).copied().ok_or_else(|| {
        LandmarkError::MalformedMap(format!("index {i} out of range ({} points)", points.len()))
    })
}

/// Selects the named points of `frame` through `map`. `Ok(None)` when the
/// frame carries no face.
pub fn to_semantic(
    frame: &LandmarkFrame,
    map: &SchemeMap,
) -> Result<Option<SemanticPoints>, LandmarkError> {
    if frame.scheme != map.scheme {
        return Err(LandmarkError::SchemeMismatch {
            frame: frame.scheme,
            map: map.scheme,
        });
    }
    if !frame.face_present {
        return Ok(None);
    }
    let pts = &frame.points;
    Ok(Some(SemanticPoints {
        left_eye: pick6(pts, &map.eye_left_indices)?,
        right_eye: pick6(pts, &map.eye_right_indices)?,
        mouth: pick6(pts, &map.mouth_indices)?,
        nose_tip: pick(pts, map.nose_tip_index)?,
        left_eye_outer_corner: pick(pts, map.eye_corner_indices[0])?,
        right_eye_outer_corner: pick(pts, map.eye_corner_indices[1])?,
    }))
}
