//! 68-point facial landmark geometry.
//!
//! Points follow the iBUG 68-point layout (0-based): jaw 0..=16, brows
//! 17..=26, nose 27..=35, eyes 36..=47, mouth 48..=67. Coordinates are in
//! image pixels with y growing downward.

use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of landmarks in one set.
pub const NUM_LANDMARKS: usize = 68;

/// Outer upper-lip top middle.
pub const UPPER_LIP_OUTER: usize = 51;
/// Outer lower-lip bottom middle.
pub const LOWER_LIP_OUTER: usize = 57;
/// Inner upper-lip middle.
pub const UPPER_LIP_INNER: usize = 62;
/// Inner lower-lip middle.
pub const LOWER_LIP_INNER: usize = 66;

/// Smallest face height (pixels) accepted for a landmark set.
pub const MIN_FACE_HEIGHT_PX: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("expected {NUM_LANDMARKS} landmarks, got {0}")]
    WrongCount(usize),
    #[error("landmark {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("degenerate face: height {height} px is below {MIN_FACE_HEIGHT_PX} px")]
    DegenerateFace { height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Div<f64> for Point {
    type Output = Point;
    fn div(self, rhs: f64) -> Point {
        Point::new(self.x / rhs, self.y / rhs)
    }
}

fn y_extent(points: &[Point]) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.y), hi.max(p.y))
    });
    hi - lo
}

/// A validated set of 68 landmarks in pixel coordinates.
///
/// Construction guarantees exactly 68 finite points and a face height of at
/// least [`MIN_FACE_HEIGHT_PX`].
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Box<[Point; NUM_LANDMARKS]>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>) -> Result<Self, GeometryError> {
        let count = points.len();
        let points: Box<[Point; NUM_LANDMARKS]> = points
            .into_boxed_slice()
            .try_into()
            .map_err(|_| GeometryError::WrongCount(count))?;
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite { index });
        }
        let height = y_extent(&points[..]);
        if height.is_nan() || height < MIN_FACE_HEIGHT_PX {
            return Err(GeometryError::DegenerateFace { height });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point; NUM_LANDMARKS] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point {
        self.points[index]
    }

    /// Midpoint of the inner-lip middles (62 and 66).
    pub fn mouth_center(&self) -> Point {
        self.points[UPPER_LIP_INNER].midpoint(self.points[LOWER_LIP_INNER])
    }

    /// Vertical extent of the whole set: `max(y) - min(y)`.
    pub fn face_height(&self) -> f64 {
        y_extent(&self.points[..])
    }

    /// Shift the origin to the mouth center and divide by the face height.
    pub fn normalize(&self) -> NormalizedLandmarks {
        let center = self.mouth_center();
        let height = self.face_height();
        let mut out = [Point::default(); NUM_LANDMARKS];
        for (dst, &src) in out.iter_mut().zip(self.points.iter()) {
            *dst = (src - center) / height;
        }
        NormalizedLandmarks { points: out }
    }

    /// Apply `f` to every point, re-validating the result.
    pub fn map(&self, f: impl Fn(Point) -> Point) -> Result<Self, GeometryError> {
        Self::new(self.points.iter().map(|&p| f(p)).collect())
    }

    /// Uniform scale about the origin followed by a translation.
    pub fn scaled_translated(&self, scale: f64, offset: Point) -> Result<Self, GeometryError> {
        self.map(|p| p * scale + offset)
    }
}

/// Landmarks after normalization: mouth-centered, in units of face height.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLandmarks {
    points: [Point; NUM_LANDMARKS],
}

impl NormalizedLandmarks {
    pub fn points(&self) -> &[Point; NUM_LANDMARKS] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point {
        self.points[index]
    }

    pub fn mouth_center(&self) -> Point {
        self.points[UPPER_LIP_INNER].midpoint(self.points[LOWER_LIP_INNER])
    }

    pub fn y_extent(&self) -> f64 {
        y_extent(&self.points)
    }
}
