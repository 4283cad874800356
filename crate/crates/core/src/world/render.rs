//! Top-down schematic raster of the table, written as binary PPM (P6).

use super::{BowlLocation, DoorState, Position, WorldState, GEOMETRY};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 960,
            height: 540,
        }
    }
}

const BACKGROUND: [u8; 3] = [64, 64, 72];
const TABLE: [u8; 3] = [196, 164, 120];
const HOLDER: [u8; 3] = [90, 90, 90];
const SPOON: [u8; 3] = [210, 210, 220];
const DOOR_CLOSED: [u8; 3] = [70, 70, 160];
const DOOR_OPEN: [u8; 3] = [150, 170, 230];
const RUNNING: [u8; 3] = [40, 200, 40];
const SPILL_MARK: [u8; 3] = [220, 0, 0];
const MARGIN: f64 = 20.0;

/// Named bowl colors understood by the renderer; unknown names render gray.
pub fn bowl_rgb(color: &str) -> [u8; 3] {
    match color {
        "white" => [245, 245, 245],
        "green" => [40, 160, 70],
        "blue" => [40, 90, 220],
        "yellow" => [240, 210, 40],
        "red" => [220, 40, 40],
        "purple" => [130, 50, 170],
        "pink" => [240, 140, 190],
        "orange" => [245, 140, 30],
        "brown" => [120, 72, 40],
        "black" => [20, 20, 20],
        "cyan" => [40, 200, 210],
        "gray" | "grey" => [150, 150, 150],
        _ => [128, 128, 128],
    }
}

/// Maps table coordinates to pixels; the far edge of the table is at the top.
#[derive(Debug, Clone, Copy)]
pub struct PixelMap {
    scale: f64,
    origin_x: f64,
    origin_y: f64,
}

impl PixelMap {
    pub fn new(cfg: RenderConfig) -> Self {
        let t = GEOMETRY.table;
        let sx = (cfg.width as f64 - 2.0 * MARGIN) / t.width();
        let sy = (cfg.height as f64 - 2.0 * MARGIN) / t.height();
        let scale = sx.min(sy);
        let origin_x = (cfg.width as f64 - scale * t.width()) / 2.0;
        let origin_y = (cfg.height as f64 - scale * t.height()) / 2.0;
        PixelMap {
            scale,
            origin_x,
            origin_y,
        }
    }

    pub fn pixel_of(&self, p: Position) -> (f64, f64) {
        let t = GEOMETRY.table;
        (
            self.origin_x + (p.x - t.min.x) * self.scale,
            self.origin_y + (t.max.y - p.y) * self.scale,
        )
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

struct Canvas {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Canvas {
    fn new(width: u32, height: u32, fill: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            pixels.extend_from_slice(&fill);
        }
        Canvas {
            width,
            height,
            pixels,
        }
    }

    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = ((y as u32 * self.width + x as u32) * 3) as usize;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    fn fill_rect(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: [u8; 3]) {
        let (xa, xb) = (x0.min(x1).round() as i64, x0.max(x1).round() as i64);
        let (ya, yb) = (y0.min(y1).round() as i64, y0.max(y1).round() as i64);
        for y in ya..=yb {
            for x in xa..=xb {
                self.put(x, y, c);
            }
        }
    }

    fn fill_disc(&mut self, (cx, cy): (f64, f64), r: f64, c: [u8; 3]) {
        let (ya, yb) = ((cy - r).floor() as i64, (cy + r).ceil() as i64);
        let (xa, xb) = ((cx - r).floor() as i64, (cx + r).ceil() as i64);
        for y in ya..=yb {
            for x in xa..=xb {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r {
                    self.put(x, y, c);
                }
            }
        }
    }

    fn cross(&mut self, (cx, cy): (f64, f64), half: f64, c: [u8; 3]) {
        let n = (half * 2.0).ceil() as i64;
        for i in -n..=n {
            let t = i as f64 / 2.0;
            for w in -1..=1 {
                self.put((cx + t).round() as i64 + w, (cy + t).round() as i64, c);
                self.put((cx + t).round() as i64 + w, (cy - t).round() as i64, c);
            }
        }
    }

    fn into_ppm(self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Renders the state as a P6 pixmap. Same state, same bytes.
pub fn render_topdown(state: &WorldState, cfg: RenderConfig) -> Vec<u8> {
    let map = PixelMap::new(cfg);
    let mut canvas = Canvas::new(cfg.width, cfg.height, BACKGROUND);
    let t = GEOMETRY.table;
    canvas.fill_rect(map.pixel_of(t.min), map.pixel_of(t.max), TABLE);

    let dw = &state.dumbwaiter;
    let zone = dw.sweep_zone;
    let door_color = match dw.door {
        DoorState::Open => DOOR_OPEN,
        DoorState::Closed => DOOR_CLOSED,
    };
    match dw.door {
        DoorState::Open => canvas.fill_rect(map.pixel_of(zone.min), map.pixel_of(zone.max), door_color),
        DoorState::Closed => {
            let bar_min = Position::new(zone.min.x, zone.max.y - 0.02);
            canvas.fill_rect(map.pixel_of(bar_min), map.pixel_of(zone.max), door_color)
        }
    }
    if dw.running {
        canvas.fill_disc(map.pixel_of(dw.position), 0.015 * map.scale(), RUNNING);
    }

    let hp = map.pixel_of(state.holder_position);
    let hs = 0.03 * map.scale();
    canvas.fill_rect((hp.0 - hs, hp.1 - hs), (hp.0 + hs, hp.1 + hs), HOLDER);
    if !state.manipulator.holding_spoon {
        canvas.fill_disc(hp, 0.012 * map.scale(), SPOON);
    }

    let radius = GEOMETRY.bowl_radius * map.scale();
    for bowl in state.bowls.iter().filter(|b| b.location == BowlLocation::Table) {
        let center = map.pixel_of(bowl.position);
        canvas.fill_disc(center, radius, bowl_rgb(&bowl.color));
        if bowl.amount > 0.0 {
            let frac = (bowl.amount / 10.0).clamp(0.1, 1.0);
            canvas.fill_disc(center, radius * 0.8 * frac.sqrt(), bowl.contents.rgb());
        }
        if bowl.spilled {
            canvas.cross(center, radius, SPILL_MARK);
        }
    }
    canvas.into_ppm()
}
