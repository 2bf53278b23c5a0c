//! Bin scenes, the synthetic top-down camera and image utilities.
//!
//! The camera is orthographic: pixel `(u, v)` looks straight down at world
//! point `((u − cx)·mpp, (v − cy)·mpp)`. The bin is centred on the world
//! origin with its long side along `x`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::catalog::{Catalog, ObjectModel};
use crate::error::{Error, Result};
use crate::geometry::{Pose2, Shape, Vec2};

pub const BACKGROUND_COLOR: [u8; 3] = [58, 62, 70];
/// Color of the floor visible around the bin.
pub const RIM_COLOR: [u8; 3] = [24, 24, 24];
/// Attempts granted to the rejection sampler for a whole scene.
pub const PLACEMENT_BUDGET: usize = 10_000;
pub const CROP_SIZE: usize = 250;
pub const PATCH_SIZE: usize = 227;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceModel {
    /// Bin extent along x.
    pub bin_length: f64,
    /// Bin extent along y.
    pub bin_width: f64,
    /// Camera-frame depth of the bin floor.
    pub z_bin: f64,
    /// Clearance kept above the bin floor when descending.
    pub delta_h: f64,
}

impl Default for WorkspaceModel {
    fn default() -> Self {
        Self {
            bin_length: 0.50,
            bin_width: 0.40,
            z_bin: 1.0,
            delta_h: 0.005,
        }
    }
}

impl WorkspaceModel {
    pub fn validate(&self, finger_length: f64) -> Result<()> {
        if !(self.bin_length > 0.0 && self.bin_width > 0.0 && self.z_bin > 0.0) {
            return Err(Error::invalid("bin dimensions and z_bin must be positive"));
        }
        if !(self.delta_h > 0.0 && self.delta_h < finger_length) {
            return Err(Error::invalid("delta_h must lie in (0, finger length)"));
        }
        Ok(())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x.abs() <= self.bin_length / 2.0 && p.y.abs() <= self.bin_width / 2.0
    }

    pub fn contains_shape(&self, shape: &Shape) -> bool {
        let b = shape.aabb();
        self.contains(b.min) && self.contains(b.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    pub meters_per_pixel: f64,
    pub camera_height: f64,
    pub principal_point: (f64, f64),
}

impl Default for CameraModel {
    /// 0.5 mm pixels; the 0.50 × 0.40 m bin spans 1000 × 800 px with a
    /// 140 px rim so the stride-32 prediction grid reaches every bin wall.
    fn default() -> Self {
        Self::centered(1280, 1080, 0.0005)
    }
}

impl CameraModel {
    /// Camera whose principal point is the image centre.
    pub fn centered(width: usize, height: usize, meters_per_pixel: f64) -> Self {
        Self {
            width,
            height,
            meters_per_pixel,
            camera_height: 1.0,
            principal_point: ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0),
        }
    }

    pub fn validate(&self, workspace: &WorkspaceModel) -> Result<()> {
        if !(self.meters_per_pixel > 0.0) || self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera needs positive size and pixel pitch"));
        }
        let (u0, v0) = self.world_to_pixel(Vec2::new(
            -workspace.bin_length / 2.0 + self.meters_per_pixel / 2.0,
            -workspace.bin_width / 2.0 + self.meters_per_pixel / 2.0,
        ));
        let (u1, v1) = self.world_to_pixel(Vec2::new(
            workspace.bin_length / 2.0 - self.meters_per_pixel / 2.0,
            workspace.bin_width / 2.0 - self.meters_per_pixel / 2.0,
        ));
        let eps = 1e-6;
        if u0 < -eps
            || v0 < -eps
            || u1 > self.width as f64 - 1.0 + eps
            || v1 > self.height as f64 - 1.0 + eps
        {
            return Err(Error::invalid("camera does not see the whole bin"));
        }
        Ok(())
    }

    /// Inclusive pixel ranges `(u_min, u_max, v_min, v_max)` of the bin floor.
    pub fn bin_pixel_bounds(&self, workspace: &WorkspaceModel) -> (usize, usize, usize, usize) {
        let half = Vec2::new(workspace.bin_length / 2.0, workspace.bin_width / 2.0);
        let (u0, v0) = self.world_to_pixel(-half);
        let (u1, v1) = self.world_to_pixel(half);
        let lo = |x: f64| x.ceil().max(0.0) as usize;
        let hi = |x: f64, n: usize| (x.floor() as usize).min(n - 1);
        (lo(u0), hi(u1, self.width), lo(v0), hi(v1, self.height))
    }

    /// Whether `(u, v)` falls on a pixel; pixel `i` covers `[i − ½, i + ½)`.
    pub fn in_image(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && v >= -0.5 && u < self.width as f64 - 0.5 && v < self.height as f64 - 0.5
    }

    pub fn world_to_pixel(&self, p: Vec2) -> (f64, f64) {
        (
            p.x / self.meters_per_pixel + self.principal_point.0,
            p.y / self.meters_per_pixel + self.principal_point.1,
        )
    }

    fn pixel_point(&self, u: f64, v: f64) -> Vec2 {
        Vec2::new(
            (u - self.principal_point.0) * self.meters_per_pixel,
            (v - self.principal_point.1) * self.meters_per_pixel,
        )
    }

    /// Orthographic back-projection; depth passes through.
    pub fn pixel_to_world(&self, u: f64, v: f64, z: f64) -> Result<(f64, f64, f64)> {
        if !self.in_image(u, v) {
            return Err(Error::invalid(format!("pixel ({u}, {v}) is outside the image")));
        }
        let p = self.pixel_point(u, v);
        Ok((p.x, p.y, z))
    }
}

/// Row-major image. Color samples hold 8-bit values, depth samples meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn filled(width: usize, height: usize, pixel: &[f32]) -> Self {
        let mut data = Vec::with_capacity(width * height * pixel.len());
        for _ in 0..width * height {
            data.extend_from_slice(pixel);
        }
        Self {
            width,
            height,
            channels: pixel.len(),
            data,
        }
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn pixel(&self, u: usize, v: usize) -> &[f32] {
        let i = (v * self.width + u) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, u: usize, v: usize) -> &mut [f32] {
        let i = (v * self.width + u) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Color image as 8-bit samples.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn save_color_png(&self, path: &Path) -> Result<()> {
        if self.channels != 3 {
            return Err(Error::invalid("color PNG needs a 3-channel image"));
        }
        write_png(
            path,
            self.width,
            self.height,
            png::ColorType::Rgb,
            png::BitDepth::Eight,
            &self.to_rgb8(),
        )
    }

    /// 16-bit grayscale, depth quantized to millimeters.
    pub fn save_depth_png(&self, path: &Path) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::invalid("depth PNG needs a 1-channel image"));
        }
        let bytes: Vec<u8> = self
            .data
            .iter()
            .flat_map(|d| ((d * 1000.0).round().clamp(0.0, 65535.0) as u16).to_be_bytes())
            .collect();
        write_png(
            path,
            self.width,
            self.height,
            png::ColorType::Grayscale,
            png::BitDepth::Sixteen,
            &bytes,
        )
    }

    pub fn save_gray_png(&self, path: &Path) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::invalid("gray PNG needs a 1-channel image"));
        }
        write_png(
            path,
            self.width,
            self.height,
            png::ColorType::Grayscale,
            png::BitDepth::Eight,
            &self.to_rgb8(),
        )
    }

    /// Loads an 8-bit RGB/gray PNG or a 16-bit millimeter depth PNG.
    pub fn load_png(path: &Path) -> Result<Self> {
        let png_err = |e: png::DecodingError| Error::Png {
            path: path.into(),
            message: e.to_string(),
        };
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder.read_info().map_err(png_err)?;
        let size = reader.output_buffer_size().ok_or_else(|| Error::Png {
            path: path.into(),
            message: "image too large".into(),
        })?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf).map_err(png_err)?;
        buf.truncate(info.buffer_size());
        let (w, h) = (info.width as usize, info.height as usize);
        let unsupported = || Error::Png {
            path: path.into(),
            message: format!("unsupported format {:?} {:?}", info.color_type, info.bit_depth),
        };
        let (channels, data) = match (info.color_type, info.bit_depth) {
            (png::ColorType::Rgb, png::BitDepth::Eight) => {
                (3, buf.iter().map(|b| *b as f32).collect())
            }
            (png::ColorType::Grayscale, png::BitDepth::Eight) => {
                (1, buf.iter().map(|b| *b as f32).collect())
            }
            (png::ColorType::Grayscale, png::BitDepth::Sixteen) => (
                1,
                buf.chunks(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / 1000.0)
                    .collect(),
            ),
            _ => return Err(unsupported()),
        };
        Ok(Self {
            width: w,
            height: h,
            channels,
            data,
        })
    }

    /// Adds zero-mean Gaussian noise, clamping color samples to the 8-bit range.
    pub fn add_gaussian_noise(&mut self, sigma: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
        let color = self.channels == 3;
        for v in &mut self.data {
            let mut x = *v as f64 + normal.sample(&mut rng);
            if color {
                x = x.clamp(0.0, 255.0);
            }
            *v = x as f32;
        }
    }
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    bytes: &[u8],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(depth);
    encoder.set_compression(png::Compression::Fast);
    let to_err = |e: png::EncodingError| Error::Png {
        path: path.into(),
        message: e.to_string(),
    };
    let mut writer = encoder.write_header().map_err(to_err)?;
    writer.write_image_data(bytes).map_err(to_err)?;
    writer.finish().map_err(to_err)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub object: ObjectModel,
    pub pose: Pose2,
}

impl Placement {
    pub fn world_footprint(&self) -> Shape {
        self.object.footprint.transformed(&self.pose)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub placements: Vec<Placement>,
    pub workspace: WorkspaceModel,
    pub seed: u64,
}

impl Scene {
    pub fn empty(workspace: WorkspaceModel, seed: u64) -> Self {
        Self {
            placements: Vec::new(),
            workspace,
            seed,
        }
    }

    /// Tallest object whose footprint covers `p`.
    pub fn object_at(&self, p: Vec2) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, pl) in self.placements.iter().enumerate() {
            if pl.world_footprint().contains(p)
                && best.is_none_or(|b| self.placements[b].object.height < pl.object.height)
            {
                best = Some(i);
            }
        }
        best
    }

    /// Camera-frame depth of the visible surface at `p`.
    pub fn surface_depth(&self, p: Vec2) -> f64 {
        match self.object_at(p) {
            Some(i) => self.workspace.z_bin - self.placements[i].object.height,
            None => self.workspace.z_bin,
        }
    }

    /// Minimum boundary clearance over all object pairs.
    pub fn min_clearance(&self) -> f64 {
        let shapes: Vec<Shape> = self.placements.iter().map(Placement::world_footprint).collect();
        let mut best = f64::INFINITY;
        for i in 0..shapes.len() {
            for j in i + 1..shapes.len() {
                best = best.min(shapes[i].distance(&shapes[j]));
            }
        }
        best
    }

    /// One `object_id x y yaw` line per placement.
    pub fn to_text(&self) -> String {
        let mut s = format!("# seed {}\n", self.seed);
        for p in &self.placements {
            let pos = p.pose.position();
            writeln!(s, "{} {} {} {}", p.object.id, pos.x, pos.y, p.pose.yaw()).unwrap();
        }
        s
    }

    pub fn parse(text: &str, catalog: &Catalog, workspace: WorkspaceModel) -> Result<Self> {
        let mut scene = Scene::empty(workspace, 0);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# seed") {
                scene.seed = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(format!("scene:{}", lineno + 1), "bad seed"))?;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = format!("scene:{}", lineno + 1);
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 4 {
                return Err(Error::parse(at, "expected `object_id x y yaw`"));
            }
            let object = catalog
                .get(tokens[0])
                .ok_or_else(|| Error::parse(&at, format!("unknown object {}", tokens[0])))?
                .clone();
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(&at, format!("bad number `{s}`")))
            };
            let pose = Pose2::new(Vec2::new(num(tokens[1])?, num(tokens[2])?), num(tokens[3])?);
            scene.placements.push(Placement { object, pose });
        }
        Ok(scene)
    }
}

/// Places `n_objects` drawn from `catalog` uniformly at random in the bin with
/// pairwise boundary clearance at least `min_spacing`.
///
/// Objects are drawn without replacement while the catalog lasts. The whole
/// scene shares a budget of [`PLACEMENT_BUDGET`] pose proposals.
pub fn generate_scene(
    catalog: &[ObjectModel],
    n_objects: usize,
    min_spacing: f64,
    seed: u64,
    workspace: &WorkspaceModel,
) -> Result<Scene> {
    if n_objects == 0 || catalog.is_empty() {
        return Err(Error::invalid("a scene needs at least one object and a catalog"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = Vec::with_capacity(n_objects);
    let mut pool: Vec<usize> = Vec::new();
    while order.len() < n_objects {
        if pool.is_empty() {
            pool = (0..catalog.len()).collect();
        }
        let k = rng.random_range(0..pool.len());
        order.push(pool.swap_remove(k));
    }

    let mut scene = Scene::empty(*workspace, seed);
    let mut placed: Vec<Shape> = Vec::with_capacity(n_objects);
    let mut attempts = 0;
    for &idx in &order {
        let object = &catalog[idx];
        loop {
            if attempts == PLACEMENT_BUDGET {
                return Err(Error::PlacementInfeasible {
                    requested: n_objects,
                    placed: placed.len(),
                    attempts,
                });
            }
            attempts += 1;
            let x = rng.random_range(-workspace.bin_length / 2.0..workspace.bin_length / 2.0);
            let y = rng.random_range(-workspace.bin_width / 2.0..workspace.bin_width / 2.0);
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let pose = Pose2::new(Vec2::new(x, y), yaw);
            let shape = object.footprint.transformed(&pose);
            if !workspace.contains_shape(&shape) {
                continue;
            }
            if placed.iter().any(|other| other.distance(&shape) < min_spacing) {
                continue;
            }
            placed.push(shape);
            scene.placements.push(Placement {
                object: object.clone(),
                pose,
            });
            break;
        }
    }
    Ok(scene)
}

/// Index of the visible object per pixel of the window `[u0, u0+w) × [v0, v0+h)`.
/// `None` marks bin background, `Some(None)` pixels outside the image.
fn rasterize_owners(
    scene: &Scene,
    camera: &CameraModel,
    u0: i64,
    v0: i64,
    w: usize,
    h: usize,
) -> Vec<Option<Option<usize>>> {
    let mut owners: Vec<Option<Option<usize>>> = vec![Some(None); w * h];
    for row in 0..h {
        for col in 0..w {
            let (u, v) = (u0 + col as i64, v0 + row as i64);
            if u < 0 || v < 0 || u >= camera.width as i64 || v >= camera.height as i64 {
                owners[row * w + col] = None;
            }
        }
    }
    let mut tallest = vec![f64::NEG_INFINITY; w * h];
    for (i, pl) in scene.placements.iter().enumerate() {
        let shape = pl.world_footprint();
        let bb = shape.aabb();
        let (umin, vmin) = camera.world_to_pixel(bb.min);
        let (umax, vmax) = camera.world_to_pixel(bb.max);
        let clamp_col = |u: f64| (u - u0 as f64).clamp(-1.0, w as f64) as i64;
        let clamp_row = |v: f64| (v - v0 as f64).clamp(-1.0, h as f64) as i64;
        let (c0, c1) = (clamp_col(umin.floor()).max(0), clamp_col(umax.ceil()).min(w as i64 - 1));
        let (r0, r1) = (clamp_row(vmin.floor()).max(0), clamp_row(vmax.ceil()).min(h as i64 - 1));
        for row in r0..=r1 {
            for col in c0..=c1 {
                let k = row as usize * w + col as usize;
                if owners[k].is_none() || pl.object.height <= tallest[k] {
                    continue;
                }
                let p = camera.pixel_point((u0 + col) as f64, (v0 + row) as f64);
                if shape.contains(p) {
                    owners[k] = Some(Some(i));
                    tallest[k] = pl.object.height;
                }
            }
        }
    }
    owners
}

/// Color render of an arbitrary pixel window; pixels outside the image are zero.
pub fn render_color_window(
    scene: &Scene,
    camera: &CameraModel,
    u0: i64,
    v0: i64,
    w: usize,
    h: usize,
) -> Image {
    let owners = rasterize_owners(scene, camera, u0, v0, w, h);
    let mut img = Image::zeros(w, h, 3);
    for (k, owner) in owners.iter().enumerate() {
        let rgb = match owner {
            None => continue,
            Some(None) => {
                let (col, row) = ((k % w) as i64, (k / w) as i64);
                if scene.workspace.contains(camera.pixel_point((u0 + col) as f64, (v0 + row) as f64)) {
                    BACKGROUND_COLOR
                } else {
                    RIM_COLOR
                }
            }
            Some(Some(i)) => scene.placements[*i].object.color,
        };
        for c in 0..3 {
            img.data[3 * k + c] = rgb[c] as f32;
        }
    }
    img
}

pub fn render_color(scene: &Scene, camera: &CameraModel) -> Image {
    render_color_window(scene, camera, 0, 0, camera.width, camera.height)
}

pub fn render_depth(scene: &Scene, camera: &CameraModel) -> Image {
    let owners = rasterize_owners(scene, camera, 0, 0, camera.width, camera.height);
    let z_bin = scene.workspace.z_bin;
    let data = owners
        .iter()
        .map(|owner| match owner {
            Some(Some(i)) => (z_bin - scene.placements[*i].object.height) as f32,
            _ => z_bin as f32,
        })
        .collect();
    Image {
        width: camera.width,
        height: camera.height,
        channels: 1,
        data,
    }
}

/// Per-pixel owner map of the full image (object index or `None` for background).
pub fn render_owners(scene: &Scene, camera: &CameraModel) -> Vec<Option<usize>> {
    rasterize_owners(scene, camera, 0, 0, camera.width, camera.height)
        .into_iter()
        .map(|o| o.flatten())
        .collect()
}

/// Bilinear resample (pixel-centre aligned, edge-clamped).
pub fn resize_bilinear(image: &Image, out_w: usize, out_h: usize) -> Image {
    let mut out = Image::zeros(out_w, out_h, image.channels);
    let sx = image.width as f64 / out_w as f64;
    let sy = image.height as f64 / out_h as f64;
    let taps = |i: usize, scale: f64, n: usize| {
        let s = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
        let i0 = (s.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, (s - i0 as f64) as f32)
    };
    for oy in 0..out_h {
        let (y0, y1, fy) = taps(oy, sy, image.height);
        for ox in 0..out_w {
            let (x0, x1, fx) = taps(ox, sx, image.width);
            for c in 0..image.channels {
                let p00 = image.pixel(x0, y0)[c];
                let p10 = image.pixel(x1, y0)[c];
                let p01 = image.pixel(x0, y1)[c];
                let p11 = image.pixel(x1, y1)[c];
                let top = p00 + (p10 - p00) * fx;
                let bottom = p01 + (p11 - p01) * fx;
                out.pixel_mut(ox, oy)[c] = top + (bottom - top) * fy;
            }
        }
    }
    out
}

/// `crop × crop` window whose centre is `(u, v)`, zero-padded beyond the image.
pub fn crop_window(image: &Image, u: i64, v: i64, crop: usize) -> Image {
    let (u0, v0) = (u - (crop / 2) as i64, v - (crop / 2) as i64);
    let mut out = Image::zeros(crop, crop, image.channels);
    for row in 0..crop {
        let sv = v0 + row as i64;
        if sv < 0 || sv >= image.height as i64 {
            continue;
        }
        for col in 0..crop {
            let su = u0 + col as i64;
            if su < 0 || su >= image.width as i64 {
                continue;
            }
            out.pixel_mut(col, row)
                .copy_from_slice(image.pixel(su as usize, sv as usize));
        }
    }
    out
}

pub fn crop_resize(image: &Image, u: i64, v: i64, crop: usize, out: usize) -> Image {
    resize_bilinear(&crop_window(image, u, v, crop), out, out)
}

/// Planner input patch around `(u, v)` rendered straight from the scene.
/// Identical to `crop_resize(&render_color(scene, camera), u, v, 250, 227)`.
pub fn render_patch(scene: &Scene, camera: &CameraModel, u: i64, v: i64) -> Image {
    let half = (CROP_SIZE / 2) as i64;
    let window = render_color_window(scene, camera, u - half, v - half, CROP_SIZE, CROP_SIZE);
    resize_bilinear(&window, PATCH_SIZE, PATCH_SIZE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use approx::assert_abs_diff_eq;

    fn disk(r: f64) -> ObjectModel {
        ObjectModel::new("disk", Shape::circle(Vec2::ZERO, r).unwrap(), 0.1, 0.1, 0.5, [200, 10, 10])
            .unwrap()
    }

    fn single(object: ObjectModel, at: Vec2) -> Scene {
        Scene {
            placements: vec![Placement {
                object,
                pose: Pose2::new(at, 0.0),
            }],
            workspace: WorkspaceModel::default(),
            seed: 0,
        }
    }

    #[test]
    fn default_camera_sees_bin() {
        let cam = CameraModel::default();
        cam.validate(&WorkspaceModel::default()).unwrap();
        let small = CameraModel::centered(600, 800, 0.0005);
        assert!(small.validate(&WorkspaceModel::default()).is_err());
    }

    #[test]
    fn pixel_world_mapping() {
        let cam = CameraModel::default();
        let (cx, cy) = cam.principal_point;
        let (x, y, z) = cam.pixel_to_world(cx, cy, 0.7).unwrap();
        assert_eq!((x, y, z), (0.0, 0.0, 0.7));
        let (x, y, _) = cam.pixel_to_world(cx + 100.0, cy, 0.7).unwrap();
        assert_abs_diff_eq!(x, 0.05, epsilon = 1e-15);
        assert_eq!(y, 0.0);
        let cam1 = CameraModel {
            meters_per_pixel: 0.001,
            ..cam
        };
        let (x, _, _) = cam1.pixel_to_world(cx + 100.0, cy, 0.7).unwrap();
        assert_abs_diff_eq!(x, 0.1, epsilon = 1e-15);
        assert!(cam.pixel_to_world(-1.0, 0.0, 1.0).is_err());
        assert!(cam.pixel_to_world(0.0, 1079.5, 1.0).is_err());
        assert!(cam.pixel_to_world(1279.0, 1079.0, 1.0).is_ok());
        for &(wx, wy) in &[(0.1, -0.05), (-0.2437, 0.1999), (0.0, 0.0)] {
            let (u, v) = cam.world_to_pixel(Vec2::new(wx, wy));
            let (x, y, _) = cam.pixel_to_world(u, v, 1.0).unwrap();
            assert_abs_diff_eq!(x, wx, epsilon = 1e-12);
            assert_abs_diff_eq!(y, wy, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_scene_renders_background() {
        let scene = Scene::empty(WorkspaceModel::default(), 0);
        let cam = CameraModel::default();
        let color = render_color(&scene, &cam);
        let (u0, u1, v0, v1) = cam.bin_pixel_bounds(&scene.workspace);
        assert_eq!((u1 - u0 + 1, v1 - v0 + 1), (1000, 800));
        for v in 0..cam.height {
            for u in 0..cam.width {
                let inside = (u0..=u1).contains(&u) && (v0..=v1).contains(&v);
                let want = if inside { BACKGROUND_COLOR } else { RIM_COLOR };
                assert_eq!(color.pixel(u, v), want.map(|c| c as f32));
            }
        }
        let depth = render_depth(&scene, &cam);
        assert!(depth.data.iter().all(|d| *d == 1.0));
    }

    #[test]
    fn centred_disk_render() {
        let r = 0.04;
        let scene = single(disk(r), Vec2::ZERO);
        let cam = CameraModel::default();
        let color = render_color(&scene, &cam);
        let depth = render_depth(&scene, &cam);
        let (cx, cy) = cam.principal_point;
        let r_px = r / cam.meters_per_pixel;
        let mut count = 0usize;
        for v in 0..cam.height {
            for u in 0..cam.width {
                let d = ((u as f64 - cx).powi(2) + (v as f64 - cy).powi(2)).sqrt();
                let is_obj = color.pixel(u, v)[0] == 200.0;
                if d < r_px - 1.0 {
                    assert!(is_obj);
                    assert_abs_diff_eq!(depth.pixel(u, v)[0], 0.9, epsilon = 1e-6);
                }
                if d > r_px + 1.0 {
                    assert!(!is_obj);
                }
                count += is_obj as usize;
            }
        }
        let expected = std::f64::consts::PI * r_px * r_px;
        assert!((count as f64 - expected).abs() / expected < 0.02);
    }

    #[test]
    fn polygon_pixel_area_matches() {
        let cat = Catalog::shipped();
        let cam = CameraModel::default();
        for id in ["sponge", "box", "cleanser", "banana"] {
            let obj = cat.require(id).unwrap().clone();
            let area = obj.footprint.area();
            let mut scene = single(obj, Vec2::new(0.013, -0.021));
            scene.placements[0].pose = Pose2::new(Vec2::new(0.013, -0.021), 0.7);
            let color = render_color(&scene, &cam);
            let bg = BACKGROUND_COLOR.map(|c| c as f32);
            let rim = RIM_COLOR.map(|c| c as f32);
            let count = color.data.chunks(3).filter(|p| *p != bg && *p != rim).count();
            let px_area = area / cam.meters_per_pixel.powi(2);
            assert!(
                (count as f64 - px_area).abs() / px_area < 0.02,
                "{id}: {count} vs {px_area}"
            );
        }
    }

    #[test]
    fn crops() {
        let uniform = Image::filled(600, 400, &[7.0, 8.0, 9.0]);
        let p = crop_resize(&uniform, 300, 200, CROP_SIZE, PATCH_SIZE);
        assert_eq!((p.width, p.height), (227, 227));
        assert!(p.data.chunks(3).all(|px| px == [7.0, 8.0, 9.0]));

        let corner = crop_window(&uniform, 0, 0, CROP_SIZE);
        // only the bottom-right quadrant overlaps the image
        assert_eq!(corner.pixel(0, 0), [0.0, 0.0, 0.0]);
        assert_eq!(corner.pixel(200, 0), [0.0, 0.0, 0.0]);
        assert_eq!(corner.pixel(0, 200), [0.0, 0.0, 0.0]);
        assert_eq!(corner.pixel(200, 200), [7.0, 8.0, 9.0]);
        assert_eq!(corner.pixel(125, 125), [7.0, 8.0, 9.0]);
        assert_eq!(corner.pixel(124, 125), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn resample_keeps_constant_disk_interior() {
        let scene = single(disk(0.03), Vec2::ZERO);
        let cam = CameraModel::default();
        let color = render_color(&scene, &cam);
        let (cx, cy) = cam.principal_point;
        let patch = crop_resize(&color, cx.round() as i64, cy.round() as i64, 250, 227);
        // disk radius is 60 px in the window → ~54.5 px in the patch
        for v in 100..127 {
            for u in 100..127 {
                assert_eq!(patch.pixel(u, v), [200.0, 10.0, 10.0]);
            }
        }
    }

    #[test]
    fn crop_is_translation_covariant() {
        let mut img = Image::zeros(500, 400, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = ((i * 7919) % 251) as f32;
        }
        let d = (13i64, -9i64);
        let mut shifted = Image::zeros(500, 400, 3);
        for v in 0..400i64 {
            for u in 0..500i64 {
                let (su, sv) = (u - d.0, v - d.1);
                if (0..500).contains(&su) && (0..400).contains(&sv) {
                    shifted
                        .pixel_mut(u as usize, v as usize)
                        .copy_from_slice(img.pixel(su as usize, sv as usize));
                }
            }
        }
        let a = crop_resize(&img, 240, 200, CROP_SIZE, PATCH_SIZE);
        let b = crop_resize(&shifted, 240 + d.0, 200 + d.1, CROP_SIZE, PATCH_SIZE);
        assert_eq!(a, b);
    }

    #[test]
    fn render_patch_matches_full_render_crop() {
        let cat = Catalog::shipped();
        let ws = WorkspaceModel::default();
        let scene = generate_scene(cat.objects(), 5, 0.04, 3, &ws).unwrap();
        let cam = CameraModel::default();
        let full = render_color(&scene, &cam);
        for &(u, v) in &[(640, 540), (10, 1070), (1279, 0), (123, 456)] {
            assert_eq!(
                render_patch(&scene, &cam, u, v),
                crop_resize(&full, u, v, CROP_SIZE, PATCH_SIZE)
            );
        }
    }

    #[test]
    fn scene_generation() {
        let cat = Catalog::shipped();
        let ws = WorkspaceModel::default();
        let one = generate_scene(&cat.objects()[..1], 1, 10.0, 1, &ws).unwrap();
        assert_eq!(one.placements.len(), 1);
        assert!(ws.contains_shape(&one.placements[0].world_footprint()));

        let five = generate_scene(&cat.objects()[..5], 5, 0.05, 9, &ws).unwrap();
        assert_eq!(five.placements.len(), 5);
        assert!(five.min_clearance() >= 0.05);
        for p in &five.placements {
            assert!(ws.contains_shape(&p.world_footprint()));
        }
        assert_eq!(five, generate_scene(&cat.objects()[..5], 5, 0.05, 9, &ws).unwrap());

        let err = generate_scene(&cat.objects()[..2], 2, 1.0, 1, &ws).unwrap_err();
        assert!(matches!(err, Error::PlacementInfeasible { placed: 1, .. }));
        assert!(generate_scene(&cat.objects()[..2], 0, 0.0, 1, &ws).is_err());
    }

    #[test]
    fn color_and_depth_agree() {
        let cat = Catalog::shipped();
        let ws = WorkspaceModel::default();
        let cam = CameraModel::default();
        let scene = generate_scene(cat.objects(), 5, 0.04, 11, &ws).unwrap();
        let color = render_color(&scene, &cam);
        let depth = render_depth(&scene, &cam);
        let bg = BACKGROUND_COLOR.map(|c| c as f32);
        let rim = RIM_COLOR.map(|c| c as f32);
        let shapes: Vec<Shape> = scene.placements.iter().map(Placement::world_footprint).collect();
        for v in (0..cam.height).step_by(3) {
            for u in (0..cam.width).step_by(3) {
                let is_obj = color.pixel(u, v) != bg && color.pixel(u, v) != rim;
                assert_eq!(is_obj, depth.pixel(u, v)[0] < ws.z_bin as f32);
                let p = cam.pixel_point(u as f64, v as f64);
                let owners = shapes.iter().filter(|s| s.contains(p)).count();
                assert!(owners <= 1, "pixel ({u},{v}) has {owners} owners");
            }
        }
        assert_eq!(color, render_color(&scene, &cam));
    }

    #[test]
    fn scene_text_round_trip() {
        let cat = Catalog::shipped();
        let ws = WorkspaceModel::default();
        let scene = generate_scene(cat.objects(), 4, 0.04, 5, &ws).unwrap();
        let back = Scene::parse(&scene.to_text(), &cat, ws).unwrap();
        assert_eq!(back.seed, 5);
        assert_eq!(back.placements.len(), 4);
        for (a, b) in scene.placements.iter().zip(&back.placements) {
            assert_eq!(a.object.id, b.object.id);
            assert_eq!(a.pose, b.pose);
        }
    }

    #[test]
    fn png_round_trips() {
        let dir = std::env::temp_dir().join(format!("grasplab-png-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cat = Catalog::shipped();
        let ws = WorkspaceModel::default();
        let cam = CameraModel::centered(300, 200, 0.002);
        let scene = generate_scene(cat.objects(), 3, 0.02, 2, &ws).unwrap();
        let color = render_color(&scene, &cam);
        color.save_color_png(&dir.join("c.png")).unwrap();
        assert_eq!(Image::load_png(&dir.join("c.png")).unwrap(), color);
        let depth = render_depth(&scene, &cam);
        depth.save_depth_png(&dir.join("d.png")).unwrap();
        let back = Image::load_png(&dir.join("d.png")).unwrap();
        for (a, b) in depth.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 0.0005 + 1e-6);
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn noise_is_seeded() {
        let mut a = Image::filled(10, 10, &[100.0, 100.0, 100.0]);
        let mut b = a.clone();
        a.add_gaussian_noise(5.0, 1);
        b.add_gaussian_noise(5.0, 1);
        assert_eq!(a, b);
        assert!(a.data.iter().any(|v| *v != 100.0));
    }
}
