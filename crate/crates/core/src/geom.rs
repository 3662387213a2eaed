//! Pixel and continuous point types shared by every module.
//!
//! Pixel centers sit at integer coordinates, `x` grows to the right and `y`
//! grows downward (image convention). Angles are in degrees, measured
//! counter-clockwise as seen on screen, with 0° pointing along +x.

use serde::{Deserialize, Serialize};

/// Integer pixel coordinate. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Pixel {
    pub x: i32,
    pub y: i32,
}

impl Pixel {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn to_point(self) -> Point {
        Point::new(self.x as f64, self.y as f64)
    }

    pub fn dist(self, other: Pixel) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        dx.hypot(dy)
    }
}

impl From<[i32; 2]> for Pixel {
    fn from([x, y]: [i32; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Pixel> for [i32; 2] {
    fn from(p: Pixel) -> Self {
        [p.x, p.y]
    }
}

/// Continuous point in pixel units. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Nearest pixel (pixel centers are at integer coordinates).
    pub fn pixel(self) -> Pixel {
        Pixel::new(self.x.round() as i32, self.y.round() as i32)
    }

    /// Unit step along a heading given in screen-CCW degrees.
    pub fn heading_unit(heading_deg: f64) -> Point {
        let rad = heading_deg.to_radians();
        Point::new(rad.cos(), -rad.sin())
    }

    /// Screen-CCW heading (degrees) of the vector from `self` to `to`.
    pub fn heading_to(self, to: Point) -> f64 {
        (-(to.y - self.y)).atan2(to.x - self.x).to_degrees()
    }

    pub fn offset(self, dir: Point, len: f64) -> Point {
        Point::new(self.x + dir.x * len, self.y + dir.y * len)
    }

    pub fn lerp(self, to: Point, t: f64) -> Point {
        Point::new(self.x + (to.x - self.x) * t, self.y + (to.y - self.y) * t)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl From<Pixel> for Point {
    fn from(p: Pixel) -> Self {
        p.to_point()
    }
}

/// Wraps an angle into (-180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let mut r = a % 360.0;
    if r <= -180.0 {
        r += 360.0;
    } else if r > 180.0 {
        r -= 360.0;
    }
    r + 0.0 // folds -0.0 into 0.0
}
