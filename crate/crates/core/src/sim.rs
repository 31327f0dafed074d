//! Planar tabletop push world.
//!
//! Objects are discs resting on a rectangular table whose back strip is a
//! raised shelf. An action sweeps a disc-shaped effector along a polyline of
//! waypoints; any object the effector overlaps is translated along the sweep
//! direction until the two discs are externally tangent. The effector only
//! exists while an action runs, so a state is fully described by the object
//! positions and a timestep counter.
//!
//! Coordinates are meters with the origin at the front-left table corner,
//! `x` along the width and `y` towards the shelf.

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::Image;

/// Timesteps consumed by one action, homing included.
pub const ACTION_TIMESTEPS: u64 = 1000;

/// Distance below which effector and object count as touching, meters.
pub const CONTACT_TOLERANCE: f64 = 1e-12;

pub const MIN_WAYPOINTS: usize = 2;
pub const MAX_WAYPOINTS: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    fn offset(self, dir: Point, t: f64) -> Point {
        Point::new(self.x + dir.x * t, self.y + dir.y * t)
    }

    fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }
}

/// Axis-aligned rectangle, inclusive on all sides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    /// Largest `t >= 0` such that `p + t * dir` stays inside the rectangle.
    fn ray_exit(&self, p: Point, dir: Point) -> f64 {
        fn axis(pos: f64, d: f64, lo: f64, hi: f64) -> f64 {
            if d > 0.0 {
                (hi - pos) / d
            } else if d < 0.0 {
                (lo - pos) / d
            } else {
                f64::INFINITY
            }
        }
        let tx = axis(p.x, dir.x, self.min.x, self.max.x);
        let ty = axis(p.y, dir.y, self.min.y, self.max.y);
        tx.min(ty).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableGeometry {
    pub width: f64,
    pub depth: f64,
    /// Depth of the raised strip along the back edge.
    pub shelf_depth: f64,
    pub effector_radius: f64,
}

impl Default for TableGeometry {
    fn default() -> Self {
        Self {
            width: 0.70,
            depth: 0.50,
            shelf_depth: 0.15,
            effector_radius: 0.02,
        }
    }
}

impl TableGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.width, self.depth, self.shelf_depth, self.effector_radius];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config("table dimensions and effector radius must be positive"));
        }
        if self.shelf_depth >= self.depth {
            return Err(Error::config(format!(
                "shelf depth {} must be smaller than table depth {}",
                self.shelf_depth, self.depth
            )));
        }
        Ok(())
    }

    /// y coordinate of the shelf edge.
    pub fn shelf_edge(&self) -> f64 {
        self.depth - self.shelf_depth
    }

    pub fn table(&self) -> Rect {
        Rect {
            min: Point::new(0.0, 0.0),
            max: Point::new(self.width, self.depth),
        }
    }

    /// The part of the table the effector can sweep over.
    pub fn reachable(&self) -> Rect {
        Rect {
            min: Point::new(0.0, 0.0),
            max: Point::new(self.width, self.shelf_edge()),
        }
    }

    /// Where the center of a pushable disc of `radius` may lie.
    pub fn pushable_region(&self, radius: f64) -> Rect {
        Rect {
            min: Point::new(radius, radius),
            max: Point::new(self.width - radius, self.shelf_edge() - radius),
        }
    }

    pub fn on_shelf(&self, p: Point) -> bool {
        p.y > self.shelf_edge()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectState {
    pub id: u8,
    pub center: Point,
    pub radius: f64,
}

impl ObjectState {
    pub const DEFAULT_RADIUS: f64 = 0.03;

    pub fn new(id: u8, x: f64, y: f64) -> Self {
        Self {
            id,
            center: Point::new(x, y),
            radius: Self::DEFAULT_RADIUS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub objects: Vec<ObjectState>,
    pub timestep: u64,
}

impl WorldState {
    pub fn positions(&self) -> Vec<Point> {
        self.objects.iter().map(|o| o.center).collect()
    }
}

/// An effector sweep along 2..=11 waypoints.
///
/// Two waypoints form a single start/end push; longer lists are multi-segment
/// polylines. Coordinates are stored at `f32` precision so that an action
/// survives the experience log unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct PushAction {
    waypoints: Vec<Point>,
}

impl PushAction {
    pub fn new(waypoints: Vec<Point>) -> Result<Self> {
        if !(MIN_WAYPOINTS..=MAX_WAYPOINTS).contains(&waypoints.len()) {
            return Err(Error::config(format!(
                "push action needs {MIN_WAYPOINTS}..={MAX_WAYPOINTS} waypoints, got {}",
                waypoints.len()
            )));
        }
        if waypoints.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::config("push action waypoints must be finite"));
        }
        let waypoints = waypoints
            .into_iter()
            .map(|p| Point::new(p.x as f32 as f64, p.y as f32 as f64))
            .collect();
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn segment_count(&self) -> usize {
        self.waypoints.len() - 1
    }

    pub fn duration(&self) -> u64 {
        ACTION_TIMESTEPS
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.waypoints.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn within(&self, geometry: &TableGeometry) -> bool {
        let table = geometry.table();
        self.waypoints.iter().all(|p| table.contains(*p))
    }
}

/// Fixed-resolution top-view camera.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
        }
    }
}

const TABLE_DARK: f32 = 0.26;
const TABLE_LIGHT: f32 = 0.32;
const SHELF: f32 = 0.48;
const SHELF_EDGE: f32 = 0.70;
const OBJECT_INTENSITY: [f32; 3] = [0.95, 0.80, 0.62];

pub fn object_intensity(id: u8) -> f32 {
    OBJECT_INTENSITY[id as usize % OBJECT_INTENSITY.len()]
}

/// Simulator configuration: table geometry plus camera.
#[derive(Clone, Debug, PartialEq)]
pub struct PushWorld {
    geometry: TableGeometry,
    camera: Camera,
    background: Image,
}

impl PushWorld {
    pub fn new(geometry: TableGeometry, camera: Camera) -> Result<Self> {
        geometry.validate()?;
        if camera.width == 0 || camera.height == 0 {
            return Err(Error::config("camera resolution must be positive"));
        }
        let background = render_background(&geometry, camera);
        Ok(Self {
            geometry,
            camera,
            background,
        })
    }

    pub fn geometry(&self) -> &TableGeometry {
        &self.geometry
    }

    pub fn camera(&self) -> Camera {
        self.camera
    }

    /// Places `layout` on the table at timestep 0.
    ///
    /// Every disc must lie fully on the table, must not straddle the shelf
    /// edge and must not overlap another disc.
    pub fn reset(&self, layout: &[ObjectState]) -> Result<WorldState> {
        if layout.is_empty() {
            return Err(Error::config("layout must contain at least one object"));
        }
        let g = &self.geometry;
        for (i, o) in layout.iter().enumerate() {
            if !(o.radius.is_finite() && o.radius > 0.0) {
                return Err(Error::config(format!("object {} has non-positive radius", o.id)));
            }
            let on_table = Rect {
                min: Point::new(o.radius, o.radius),
                max: Point::new(g.width - o.radius, g.depth - o.radius),
            };
            if !on_table.contains(o.center) {
                return Err(Error::config(format!(
                    "object {} at ({}, {}) is out of table bounds",
                    o.id, o.center.x, o.center.y
                )));
            }
            let edge = g.shelf_edge();
            if o.center.y > edge - o.radius && o.center.y < edge + o.radius {
                return Err(Error::config(format!("object {} straddles the shelf edge", o.id)));
            }
            for other in &layout[..i] {
                if other.id == o.id {
                    return Err(Error::config(format!("duplicate object id {}", o.id)));
                }
                if other.center.distance(o.center) < other.radius + o.radius {
                    return Err(Error::config(format!(
                        "objects {} and {} overlap",
                        other.id, o.id
                    )));
                }
            }
        }
        let mut objects = layout.to_vec();
        objects.sort_by_key(|o| o.id);
        Ok(WorldState {
            objects,
            timestep: 0,
        })
    }

    /// Sweeps the effector along `action` and returns the resulting state.
    pub fn apply_action(&self, state: &WorldState, action: &PushAction) -> WorldState {
        debug_assert!(action.within(&self.geometry));
        let mut next = state.clone();
        for (from, to) in action.segments() {
            for obj in next.objects.iter_mut() {
                if self.geometry.on_shelf(obj.center) {
                    continue;
                }
                obj.center = sweep_segment(
                    obj.center,
                    obj.radius,
                    from,
                    to,
                    self.geometry.effector_radius,
                    &self.geometry.pushable_region(obj.radius),
                );
            }
        }
        next.timestep += action.duration();
        next
    }

    /// The empty-table image.
    pub fn background(&self) -> &Image {
        &self.background
    }

    pub fn render(&self, state: &WorldState) -> Image {
        let mut img = self.background.clone();
        for obj in &state.objects {
            let value = object_intensity(obj.id);
            for (col, row) in self.disc_footprint(obj.center, obj.radius) {
                img.set(col, row, value);
            }
        }
        img
    }

    /// World coordinates of a pixel center.
    pub fn pixel_center(&self, col: usize, row: usize) -> Point {
        pixel_center(&self.geometry, self.camera, col, row)
    }

    /// Pixels whose centers lie inside the disc.
    pub fn disc_footprint(&self, center: Point, radius: f64) -> Vec<(usize, usize)> {
        let cam = self.camera;
        let sx = self.geometry.width / cam.width as f64;
        let sy = self.geometry.depth / cam.height as f64;
        let col_lo = (((center.x - radius) / sx).floor().max(0.0)) as usize;
        let col_hi = (((center.x + radius) / sx).ceil() as usize).min(cam.width);
        let row_lo = (((self.geometry.depth - center.y - radius) / sy).floor().max(0.0)) as usize;
        let row_hi = (((self.geometry.depth - center.y + radius) / sy).ceil() as usize).min(cam.height);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for row in row_lo..row_hi {
            for col in col_lo..col_hi {
                let p = self.pixel_center(col, row);
                let (dx, dy) = (p.x - center.x, p.y - center.y);
                if dx * dx + dy * dy <= r2 {
                    out.push((col, row));
                }
            }
        }
        out
    }
}

fn pixel_center(g: &TableGeometry, cam: Camera, col: usize, row: usize) -> Point {
    let sx = g.width / cam.width as f64;
    let sy = g.depth / cam.height as f64;
    Point::new((col as f64 + 0.5) * sx, g.depth - (row as f64 + 0.5) * sy)
}

fn render_background(g: &TableGeometry, cam: Camera) -> Image {
    let mut img = Image::new(cam.width, cam.height, TABLE_DARK);
    let sy = g.depth / cam.height as f64;
    let edge = g.shelf_edge();
    for row in 0..cam.height {
        for col in 0..cam.width {
            let p = pixel_center(g, cam, col, row);
            let value = if (p.y - edge).abs() <= sy / 2.0 {
                SHELF_EDGE
            } else if p.y > edge {
                SHELF
            } else if (col / 8 + row / 8) % 2 == 0 {
                TABLE_DARK
            } else {
                TABLE_LIGHT
            };
            img.set(col, row, value);
        }
    }
    img
}

/// Closed-form result of sweeping the effector from `from` to `to` past one
/// disc. If the discs ever overlap, the object ends tangent to the effector's
/// final position, ahead of it along the sweep; its travel is cut short where
/// it would leave `bounds`.
fn sweep_segment(
    center: Point,
    radius: f64,
    from: Point,
    to: Point,
    effector_radius: f64,
    bounds: &Rect,
) -> Point {
    let delta = to.sub(from);
    let length = delta.dot(delta).sqrt();
    if length == 0.0 {
        return center;
    }
    let dir = Point::new(delta.x / length, delta.y / length);
    let rel = center.sub(from);
    let along = rel.dot(dir);
    let perp = dir.cross(rel);
    let reach = effector_radius + radius;
    // discs closer than `contact` touch; the margin keeps a disc left exactly
    // tangent by the previous segment from being caught by rounding noise
    let contact = reach - CONTACT_TOLERANCE;
    if perp.abs() >= contact {
        return center;
    }
    let contact_chord = (contact * contact - perp * perp).sqrt();
    if along <= -contact_chord || along >= length + contact_chord {
        return center;
    }
    let half_chord = (reach * reach - perp * perp).sqrt();
    let travel = (length + half_chord - along).min(bounds.ray_exit(center, dir));
    bounds.clamp(center.offset(dir, travel))
}

/// Uniform non-overlapping placement of `count` discs in the pushable region.
pub fn random_layout<R: Rng + ?Sized>(
    rng: &mut R,
    geometry: &TableGeometry,
    count: usize,
    radius: f64,
) -> Result<Vec<ObjectState>> {
    if !(1..=3).contains(&count) {
        return Err(Error::config(format!("object count must be 1..=3, got {count}")));
    }
    let region = geometry.pushable_region(radius);
    if region.min.x > region.max.x || region.min.y > region.max.y {
        return Err(Error::config("objects do not fit on the reachable table"));
    }
    let mut objects: Vec<ObjectState> = Vec::with_capacity(count);
    let mut attempts = 0;
    while objects.len() < count {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::config("could not place objects without overlap"));
        }
        let center = Point::new(
            rng.gen_range(region.min.x..=region.max.x),
            rng.gen_range(region.min.y..=region.max.y),
        );
        if objects.iter().all(|o| o.center.distance(center) >= o.radius + radius) {
            objects.push(ObjectState {
                id: objects.len() as u8,
                center,
                radius,
            });
        }
    }
    Ok(objects)
}
