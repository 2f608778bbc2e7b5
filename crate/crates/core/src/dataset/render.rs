//! Deterministic rasterizer for the procedural datasets.
//!
//! Shapes are rasterized at twice the target resolution with a binary
//! inside test and box-downsampled, so every pixel is a multiple of 1/4.

use crate::dataset::schema::{ConceptSchema, ConceptVector, DatasetId};
use crate::error::{Error, Result};

/// H×W×C image, channels interleaved, values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{} pixels for a {height}x{width}x{channels} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self { height, width, channels, pixels })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, pixels: vec![0.0; height * width * channels] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Writes the image in channel-major (C, H, W) order.
    pub fn write_chw<T: From<f32>>(&self, out: &mut [T]) {
        let plane = self.height * self.width;
        debug_assert_eq!(out.len(), plane * self.channels);
        for (p, px) in self.pixels.chunks_exact(self.channels).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                out[c * plane + p] = T::from(v);
            }
        }
    }

    /// Inverse of [`Image::write_chw`]; values are clamped into [0, 1].
    pub fn from_chw(height: usize, width: usize, channels: usize, data: &[f32]) -> Self {
        let plane = height * width;
        let mut pixels = vec![0.0; plane * channels];
        for c in 0..channels {
            for p in 0..plane {
                pixels[p * channels + c] = data[c * plane + p].clamp(0.0, 1.0);
            }
        }
        Self { height, width, channels, pixels }
    }

    /// Mean squared difference per value.
    pub fn mean_sq_diff(&self, other: &Image) -> f64 {
        let n = self.pixels.len().max(1) as f64;
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| f64::from(a - b).powi(2))
            .sum::<f64>()
            / n
    }
}

pub const SUPERSAMPLE: usize = 2;

/// HSV to RGB at full saturation and value 0.9.
pub fn hue_to_rgb(hue: f64) -> [f64; 3] {
    const VALUE: f64 = 0.9;
    let h = hue.rem_euclid(1.0) * 6.0;
    let sector = h.floor() as usize % 6;
    let f = h - h.floor();
    let (p, q, t) = (0.0, VALUE * (1.0 - f), VALUE * f);
    match sector {
        0 => [VALUE, t, p],
        1 => [q, VALUE, p],
        2 => [p, VALUE, t],
        3 => [p, q, VALUE],
        4 => [t, p, VALUE],
        _ => [VALUE, p, q],
    }
}

fn scalar_of(schema: &ConceptSchema, c: &ConceptVector, name: &str) -> Result<f64> {
    let i = schema
        .concept_index(name)
        .ok_or_else(|| Error::InvalidSchema(format!("missing concept `{name}`")))?;
    schema
        .value(i, c)
        .scalar()
        .ok_or_else(|| Error::InvalidSchema(format!("concept `{name}` is not scalar")))
}

fn label_of<'a>(schema: &'a ConceptSchema, c: &ConceptVector, name: &str) -> Result<&'a str> {
    let i = schema
        .concept_index(name)
        .ok_or_else(|| Error::InvalidSchema(format!("missing concept `{name}`")))?;
    schema
        .value(i, c)
        .label()
        .ok_or_else(|| Error::InvalidSchema(format!("concept `{name}` is not a label")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sprite {
    Square,
    Ellipse,
    Heart,
}

impl Sprite {
    fn parse(label: &str) -> Result<Self> {
        match label {
            "square" => Ok(Sprite::Square),
            "ellipse" => Ok(Sprite::Ellipse),
            "heart" => Ok(Sprite::Heart),
            other => Err(Error::InvalidSchema(format!("unknown sprite `{other}`"))),
        }
    }

    /// Inside test in the sprite's local frame (unit half-extent, y down).
    fn contains(self, x: f64, y: f64) -> bool {
        match self {
            Sprite::Square => x.abs() <= 1.0 && y.abs() <= 1.0,
            Sprite::Ellipse => x * x + (y / 0.5).powi(2) <= 1.0,
            Sprite::Heart => {
                let hx = 1.15 * x;
                let hy = -1.15 * y + 0.12;
                let r = hx * hx + hy * hy - 1.0;
                r * r * r - hx * hx * hy * hy * hy <= 0.0
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Solid {
    Cube,
    Cylinder,
    Sphere,
    Capsule,
}

impl Solid {
    fn parse(label: &str) -> Result<Self> {
        match label {
            "cube" => Ok(Solid::Cube),
            "cylinder" => Ok(Solid::Cylinder),
            "sphere" => Ok(Solid::Sphere),
            "capsule" => Ok(Solid::Capsule),
            other => Err(Error::InvalidSchema(format!("unknown object shape `{other}`"))),
        }
    }

    fn contains(self, x: f64, y: f64) -> bool {
        match self {
            Solid::Cube => x.abs() <= 1.0 && y.abs() <= 1.0,
            Solid::Cylinder => {
                let body = x.abs() <= 0.8 && (-0.6..=1.0).contains(&y);
                let cap = (x / 0.8).powi(2) + ((y + 0.6) / 0.3).powi(2) <= 1.0;
                body || cap
            }
            Solid::Sphere => x * x + y * y <= 1.0,
            Solid::Capsule => {
                let r = 0.55;
                let body = x.abs() <= r && y.abs() <= 0.45;
                let top = x * x + (y + 0.45).powi(2) <= r * r;
                let bottom = x * x + (y - 0.45).powi(2) <= r * r;
                body || top || bottom
            }
        }
    }
}

pub fn check_resolution(resolution: usize) -> Result<()> {
    if resolution == 32 || resolution == 64 {
        Ok(())
    } else {
        Err(Error::InvalidResolution(resolution))
    }
}

/// Supersampled canvas of per-subpixel colours, averaged down on finish.
struct Canvas {
    resolution: usize,
    channels: usize,
    acc: Vec<f64>,
}

impl Canvas {
    fn new(resolution: usize, channels: usize) -> Self {
        Self { resolution, channels, acc: vec![0.0; resolution * resolution * channels] }
    }

    fn paint(&mut self, mut colour_at: impl FnMut(f64, f64) -> Option<[f64; 3]>) {
        let sub = self.resolution * SUPERSAMPLE;
        let inv = 1.0 / sub as f64;
        for sy in 0..sub {
            let v = (sy as f64 + 0.5) * inv;
            for sx in 0..sub {
                let u = (sx as f64 + 0.5) * inv;
                if let Some(rgb) = colour_at(u, v) {
                    let p = (sy / SUPERSAMPLE) * self.resolution + sx / SUPERSAMPLE;
                    for c in 0..self.channels {
                        self.acc[p * self.channels + c] += rgb[c];
                    }
                }
            }
        }
    }

    fn finish(self) -> Image {
        let norm = (SUPERSAMPLE * SUPERSAMPLE) as f64;
        let pixels = self.acc.iter().map(|v| (v / norm).clamp(0.0, 1.0) as f32).collect();
        Image { height: self.resolution, width: self.resolution, channels: self.channels, pixels }
    }
}

fn render_sprite(schema: &ConceptSchema, c: &ConceptVector, resolution: usize) -> Result<Image> {
    let sprite = Sprite::parse(label_of(schema, c, "shape")?)?;
    let scale = scalar_of(schema, c, "scale")?;
    let theta = scalar_of(schema, c, "rotation")?;
    let cx = 0.2 + 0.6 * scalar_of(schema, c, "pos_x")?;
    let cy = 0.2 + 0.6 * scalar_of(schema, c, "pos_y")?;
    let fill = match schema.concept_index("colour") {
        Some(i) => schema
            .value(i, c)
            .rgb()
            .ok_or_else(|| Error::InvalidSchema("concept `colour` is not RGB".into()))?,
        None => [1.0, 1.0, 1.0],
    };
    let half = 0.18 * scale;
    let (sin, cos) = theta.sin_cos();
    let mut canvas = Canvas::new(resolution, schema.channels());
    canvas.paint(|u, v| {
        let (dx, dy) = (u - cx, v - cy);
        let x = (cos * dx + sin * dy) / half;
        let y = (-sin * dx + cos * dy) / half;
        sprite.contains(x, y).then_some(fill)
    });
    Ok(canvas.finish())
}

/// Rows at or below this fraction of the height belong to the floor band.
pub const HORIZON: f64 = 0.5;

fn render_scene(schema: &ConceptSchema, c: &ConceptVector, resolution: usize) -> Result<Image> {
    let floor = hue_to_rgb(scalar_of(schema, c, "floor_hue")?);
    let wall = hue_to_rgb(scalar_of(schema, c, "wall_hue")?);
    let object = hue_to_rgb(scalar_of(schema, c, "object_hue")?);
    let scale = scalar_of(schema, c, "scale")?;
    let solid = Solid::parse(label_of(schema, c, "shape")?)?;
    let shear = scalar_of(schema, c, "orientation")?.to_radians().tan();
    let half = 0.12 * (0.75 + 0.5 * scale);
    let (cx, cy) = (0.5, 0.55);
    let mut canvas = Canvas::new(resolution, 3);
    canvas.paint(|u, v| {
        let y = (v - cy) / half;
        let x = (u - cx) / half - shear * y;
        if solid.contains(x, y) {
            Some(object)
        } else if v < HORIZON {
            Some(wall)
        } else {
            Some(floor)
        }
    });
    Ok(canvas.finish())
}

/// Renders the image of one concept vector. Pure and deterministic.
pub fn render(schema: &ConceptSchema, c: &ConceptVector, resolution: usize) -> Result<Image> {
    check_resolution(resolution)?;
    schema.check(c)?;
    match schema.dataset_id() {
        DatasetId::Dsprites | DatasetId::DspritesColour => render_sprite(schema, c, resolution),
        DatasetId::Shapes3dProxy => render_scene(schema, c, resolution),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::schema::{build_schema, GREEN, PURPLE};

    fn dsprites() -> ConceptSchema {
        build_schema(DatasetId::Dsprites, None).unwrap()
    }

    fn centroid_x(img: &Image) -> f64 {
        let (mut m, mut sx) = (0.0, 0.0);
        for y in 0..img.height() {
            for x in 0..img.width() {
                let v = f64::from(img.get(y, x, 0));
                m += v;
                sx += v * x as f64;
            }
        }
        sx / m
    }

    fn bbox(img: &Image) -> (usize, usize, usize, usize) {
        let (mut y0, mut x0, mut y1, mut x1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.get(y, x, 0) > 0.0 {
                    y0 = y0.min(y);
                    x0 = x0.min(x);
                    y1 = y1.max(y);
                    x1 = x1.max(x);
                }
            }
        }
        (y0, x0, y1, x1)
    }

    #[test]
    fn white_sprites_are_single_channel_and_saturated() {
        let s = dsprites();
        let img = render(&s, &ConceptVector::new(vec![0, 0, 5, 0, 16, 16]), 64).unwrap();
        assert_eq!(img.channels(), 1);
        assert_eq!((img.height(), img.width()), (64, 64));
        // Interior pixels are fully covered, edges are fractional.
        assert!(img.pixels().iter().any(|&p| p == 1.0));
        assert!(img.pixels().iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(img.pixels().iter().all(|&p| (p * 4.0).fract() == 0.0));
    }

    #[test]
    fn position_moves_centroid() {
        let s = dsprites();
        for shape in 0..3 {
            let left = render(&s, &ConceptVector::new(vec![0, shape, 3, 7, 0, 10]), 64).unwrap();
            let right = render(&s, &ConceptVector::new(vec![0, shape, 3, 7, 31, 10]), 64).unwrap();
            assert!(centroid_x(&right) > centroid_x(&left) + 20.0);
        }
        let mut last = f64::NEG_INFINITY;
        for px in 0..32 {
            let img = render(&s, &ConceptVector::new(vec![0, 2, 2, 0, px, 5]), 32).unwrap();
            let cx = centroid_x(&img);
            assert!(cx > last, "pos_x {px}: {cx} <= {last}");
            last = cx;
        }
    }

    #[test]
    fn translation_and_scale_locality() {
        let s = dsprites();
        let a = render(&s, &ConceptVector::new(vec![0, 0, 2, 0, 4, 4]), 64).unwrap();
        let b = render(&s, &ConceptVector::new(vec![0, 0, 2, 0, 20, 4]), 64).unwrap();
        let (ay0, ax0, ay1, ax1) = bbox(&a);
        let (by0, bx0, by1, bx1) = bbox(&b);
        assert_eq!((ay0, ay1), (by0, by1));
        assert!(bx0 > ax0 && bx1 > ax1);
        assert_eq!(ax1 - ax0, bx1 - bx0);

        let mut last = 0.0;
        for scale in 0..6 {
            let img = render(&s, &ConceptVector::new(vec![0, 1, scale, 3, 16, 16]), 64).unwrap();
            let area: f64 = img.pixels().iter().map(|&p| f64::from(p)).sum();
            assert!(area > last);
            last = area;
        }
    }

    #[test]
    fn coloured_sprites_use_fill_rgb() {
        let s = build_schema(DatasetId::DspritesColour, Some((GREEN, PURPLE))).unwrap();
        let img = render(&s, &ConceptVector::new(vec![0, 0, 5, 0, 16, 16, 1]), 32).unwrap();
        assert_eq!(img.channels(), 3);
        for px in img.pixels().chunks(3) {
            assert_eq!(px[1], 0.0);
            assert_eq!(px[0], px[2]);
        }
        assert!(img.pixels().iter().any(|&p| p == 1.0));
    }

    #[test]
    fn floor_hue_only_changes_floor_band() {
        let s = build_schema(DatasetId::Shapes3dProxy, None).unwrap();
        let a = render(&s, &ConceptVector::new(vec![1, 4, 7, 3, 2, 5]), 64).unwrap();
        let b = render(&s, &ConceptVector::new(vec![6, 4, 7, 3, 2, 5]), 64).unwrap();
        let mut changed = 0;
        for y in 0..64 {
            for x in 0..64 {
                for c in 0..3 {
                    if a.get(y, x, c) != b.get(y, x, c) {
                        assert!(y as f64 >= HORIZON * 64.0, "diff at row {y}");
                        changed += 1;
                    }
                }
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn scene_shapes_differ() {
        let s = build_schema(DatasetId::Shapes3dProxy, None).unwrap();
        let imgs: Vec<Image> = (0..4)
            .map(|shape| render(&s, &ConceptVector::new(vec![0, 3, 6, 7, shape, 7]), 32).unwrap())
            .collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(imgs[i].mean_sq_diff(&imgs[j]) > 0.0);
            }
        }
    }

    #[test]
    fn invalid_resolution() {
        let s = dsprites();
        let c = ConceptVector::new(vec![0; 6]);
        assert!(matches!(render(&s, &c, 48), Err(Error::InvalidResolution(48))));
    }

    #[test]
    fn hue_grid_is_distinct() {
        let colours: Vec<[f64; 3]> = (0..10).map(|i| hue_to_rgb(i as f64 / 10.0)).collect();
        for i in 0..10 {
            for j in i + 1..10 {
                assert_ne!(colours[i], colours[j]);
            }
        }
        assert_eq!(hue_to_rgb(0.0), [0.9, 0.0, 0.0]);
    }
}
