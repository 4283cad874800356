use serde::{Deserialize, Serialize};

/// Point in the table frame, meters. The robot base sits at the origin on the
/// near edge; `x` runs left to right, `y` away from the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Distance from the robot base.
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Position,
    pub max: Position,
}

impl Rect {
    pub const fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Rect {
            min: Position::new(min_x, min_y),
            max: Position::new(max_x, max_y),
        }
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Euclidean distance from `p` to the rectangle (zero inside).
    pub fn distance_to(&self, p: Position) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    pub fn center(&self) -> Position {
        Position::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Every fixed distance the simulator and the affordance predicates rely on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub table: Rect,
    pub reach_radius: f64,
    pub blocking_radius: f64,
    /// Distance from the base a pulled bowl ends up at.
    pub pull_distance: f64,
    pub holder_position: Position,
    pub dumbwaiter_position: Position,
    pub sweep_zone: Rect,
    /// Physical bowl radius, used for placement spacing and rendering.
    pub bowl_radius: f64,
}

pub const GEOMETRY: Geometry = Geometry {
    table: Rect::new(-0.6, 0.0, 0.6, 0.8),
    reach_radius: 0.6,
    blocking_radius: 0.12,
    pull_distance: 0.45,
    holder_position: Position::new(-0.45, 0.40),
    dumbwaiter_position: Position::new(0.46, 0.66),
    sweep_zone: Rect::new(0.36, 0.56, 0.56, 0.76),
    bowl_radius: 0.06,
};

impl Geometry {
    pub fn table_center(&self) -> Position {
        self.table.center()
    }

    /// Where `pull_bowl_closer` leaves a bowl at `p`: the point on the segment
    /// toward the table center that lies `pull_distance` from the base. Bowls
    /// already that close stay put (`None`).
    pub fn pulled_position(&self, p: Position) -> Option<Position> {
        let r = self.pull_distance;
        if p.norm() <= r {
            return None;
        }
        let c = self.table_center();
        let (dx, dy) = (c.x - p.x, c.y - p.y);
        let a = dx * dx + dy * dy;
        let b = 2.0 * (p.x * dx + p.y * dy);
        let k = p.x * p.x + p.y * p.y - r * r;
        let disc = (b * b - 4.0 * a * k).max(0.0);
        let t = ((-b - disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
        Some(Position::new(p.x + t * dx, p.y + t * dy))
    }
}
