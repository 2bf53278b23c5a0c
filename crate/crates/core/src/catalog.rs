//! Object models and the line-delimited shape catalog.
//!
//! Catalog grammar, one object per line; lines starting with `#` are comments:
//!
//! ```text
//! <id> <part> [+ <part> ...] <height> <mass> <friction> [#rrggbb]
//! part := circle <cx> <cy> <r>
//!       | rect <cx> <cy> <w> <h> [<angle_deg>]
//!       | rrect <cx> <cy> <w> <h> <corner_r>
//!       | poly <x1> <y1> <x2> <y2> <x3> <y3> ...
//! ```
//!
//! Part coordinates are in the object's local frame, in meters. Several parts
//! joined by `+` form a union footprint. The color token is optional; when
//! absent a color is derived from the id.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Shape, Vec2};

/// The shipped YCB stand-in catalog. Dimensions are invented.
pub const DEFAULT_CATALOG: &str = include_str!("../data/catalog.txt");

/// Objects used during blind collection.
pub const SEEN_OBJECTS: [&str; 5] = ["sponge", "pringles", "box", "banana", "ball"];
/// Objects held out of collection.
pub const NOVEL_OBJECTS: [&str; 5] = ["apple", "tomato_can", "mug", "cleanser", "spatula"];

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectModel {
    pub id: String,
    /// Footprint in the object frame; the frame origin is the object reference point.
    pub footprint: Shape,
    pub height: f64,
    pub mass: f64,
    pub surface_friction: f64,
    pub color: [u8; 3],
}

impl ObjectModel {
    pub fn new(
        id: impl Into<String>,
        footprint: Shape,
        height: f64,
        mass: f64,
        surface_friction: f64,
        color: [u8; 3],
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::invalid("object id must be a non-empty word"));
        }
        if !(height > 0.0) || !(mass > 0.0) || !(surface_friction >= 0.0) {
            return Err(Error::invalid(format!(
                "object {id}: height and mass must be positive, friction non-negative"
            )));
        }
        Ok(Self {
            id,
            footprint,
            height,
            mass,
            surface_friction,
            color,
        })
    }

    /// Largest distance from the reference point to the footprint.
    pub fn characteristic_length(&self) -> f64 {
        self.footprint.bounding_radius(Vec2::ZERO)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    objects: Vec<ObjectModel>,
}

impl Catalog {
    pub fn new(objects: Vec<ObjectModel>) -> Result<Self> {
        for (i, o) in objects.iter().enumerate() {
            if objects[..i].iter().any(|p| p.id == o.id) {
                return Err(Error::invalid(format!("duplicate object id {}", o.id)));
            }
        }
        Ok(Self { objects })
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_CATALOG, "catalog.txt").expect("shipped catalog parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut objects = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = format!("{origin}:{}", lineno + 1);
            objects.push(parse_object(line).map_err(|msg| Error::parse(at, msg))?);
        }
        Self::new(objects)
    }

    pub fn objects(&self) -> &[ObjectModel] {
        &self.objects
    }

    pub fn get(&self, id: &str) -> Option<&ObjectModel> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn require(&self, id: &str) -> Result<&ObjectModel> {
        self.get(id)
            .ok_or_else(|| Error::invalid(format!("object {id} is not in the catalog")))
    }

    /// Objects with the given ids, in the given order.
    pub fn subset(&self, ids: &[&str]) -> Result<Vec<ObjectModel>> {
        ids.iter().map(|id| self.require(id).cloned()).collect()
    }

    pub fn to_text(&self) -> String {
        self.objects.iter().map(|o| format_object(o) + "\n").collect()
    }
}

fn parse_object(line: &str) -> std::result::Result<ObjectModel, String> {
    let mut tokens: Vec<&str> = line.split_whitespace().collect();
    let color = match tokens.last() {
        Some(t) if t.starts_with('#') => {
            let c = parse_color(t)?;
            tokens.pop();
            Some(c)
        }
        _ => None,
    };
    if tokens.len() < 6 {
        return Err("expected `id part... height mass friction`".into());
    }
    let id = tokens[0].to_string();
    let n = tokens.len();
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
    let height = num(tokens[n - 3])?;
    let mass = num(tokens[n - 2])?;
    let friction = num(tokens[n - 1])?;
    let mut parts = Vec::new();
    for part in tokens[1..n - 3].split(|t| *t == "+") {
        parts.push(parse_part(part)?);
    }
    let footprint = if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Shape::union(parts).map_err(|e| e.to_string())?
    };
    let color = color.unwrap_or_else(|| color_from_id(&id));
    ObjectModel::new(id, footprint, height, mass, friction, color).map_err(|e| e.to_string())
}

fn parse_part(tokens: &[&str]) -> std::result::Result<Shape, String> {
    let (kind, args) = tokens.split_first().ok_or("empty shape part")?;
    let nums: Vec<f64> = args
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| format!("bad number `{s}`")))
        .collect::<std::result::Result<_, _>>()?;
    let arity = |n: usize| {
        if nums.len() == n {
            Ok(())
        } else {
            Err(format!("`{kind}` takes {n} numbers, got {}", nums.len()))
        }
    };
    let shape = match *kind {
        "circle" => {
            arity(3)?;
            Shape::circle(Vec2::new(nums[0], nums[1]), nums[2])
        }
        "rect" => {
            if nums.len() != 4 && nums.len() != 5 {
                return Err(format!("`rect` takes 4 or 5 numbers, got {}", nums.len()));
            }
            let angle = nums.get(4).copied().unwrap_or(0.0).to_radians();
            Shape::rectangle(Vec2::new(nums[0], nums[1]), nums[2], nums[3], angle)
        }
        "rrect" => {
            arity(5)?;
            ConvexPolygon::rounded_rectangle(
                Vec2::new(nums[0], nums[1]),
                nums[2],
                nums[3],
                nums[4],
                4,
            )
            .map(Shape::ConvexPolygon)
        }
        "poly" => {
            if nums.len() < 6 || nums.len() % 2 != 0 {
                return Err("`poly` takes an even number (≥ 6) of coordinates".into());
            }
            Shape::polygon(nums.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect())
        }
        other => return Err(format!("unknown shape kind `{other}`")),
    };
    shape.map_err(|e| e.to_string())
}

fn parse_color(token: &str) -> std::result::Result<[u8; 3], String> {
    let hex = token.trim_start_matches('#');
    if hex.len() != 6 {
        return Err(format!("bad color `{token}`"));
    }
    let byte = |i: usize| {
        u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| format!("bad color `{token}`"))
    };
    Ok([byte(0)?, byte(2)?, byte(4)?])
}

fn color_from_id(id: &str) -> [u8; 3] {
    // FNV-1a, kept away from the dark bin background
    let mut h: u32 = 0x811c_9dc5;
    for b in id.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    [
        128 + (h & 0x7f) as u8,
        128 + ((h >> 8) & 0x7f) as u8,
        128 + ((h >> 16) & 0x7f) as u8,
    ]
}

fn format_shape(shape: &Shape) -> String {
    match shape {
        Shape::Circle { center, radius } => format!("circle {} {} {}", center.x, center.y, radius),
        Shape::ConvexPolygon(p) => {
            let coords: Vec<String> = p
                .vertices()
                .iter()
                .map(|v| format!("{} {}", v.x, v.y))
                .collect();
            format!("poly {}", coords.join(" "))
        }
        Shape::Union(parts) => parts
            .iter()
            .map(format_shape)
            .collect::<Vec<_>>()
            .join(" + "),
    }
}

fn format_object(o: &ObjectModel) -> String {
    format!(
        "{} {} {} {} {} #{:02x}{:02x}{:02x}",
        o.id,
        format_shape(&o.footprint),
        o.height,
        o.mass,
        o.surface_friction,
        o.color[0],
        o.color[1],
        o.color[2]
    )
}
