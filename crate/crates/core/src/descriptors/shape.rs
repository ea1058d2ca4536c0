use std::collections::HashMap;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::color::distance_sq;

/// Foreground pixels differ from the background by more than this
/// Euclidean RGB distance.
pub const FOREGROUND_THRESHOLD: u32 = 32;

pub const SQUARE_MIN: f64 = 0.9;
pub const SQUARE_MAX: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Square,
    Tall,
    Wide,
}

impl ShapeClass {
    /// Square on [0.9, 1.1], wide above, tall below.
    pub fn from_aspect_ratio(ratio: f64) -> Self {
        if ratio > SQUARE_MAX {
            ShapeClass::Wide
        } else if ratio < SQUARE_MIN {
            ShapeClass::Tall
        } else {
            ShapeClass::Square
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeClass::Square => "square",
            ShapeClass::Tall => "tall",
            ShapeClass::Wide => "wide",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptor {
    pub class: ShapeClass,
    /// Foreground bounding-box width / height.
    pub aspect_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// Most frequent color on the 1-pixel border; ties go to the smallest
/// packed RGB value.
pub fn border_mode(img: &RgbImage) -> [u8; 3] {
    let (w, h) = img.dimensions();
    let mut counts: HashMap<[u8; 3], u32> = HashMap::new();
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                *counts.entry(img.get_pixel(x, y).0).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .map(|(c, _)| c)
        .unwrap_or([0, 0, 0])
}

/// Foreground bounding box `(width, height)`; the whole image when no pixel
/// stands out from the background.
pub fn foreground_bbox(img: &RgbImage) -> (u32, u32) {
    let background = border_mode(img);
    let limit = FOREGROUND_THRESHOLD * FOREGROUND_THRESHOLD;
    let mut bounds: Option<(u32, u32, u32, u32)> = None;
    for (x, y, px) in img.enumerate_pixels() {
        if distance_sq(px.0, background) > limit {
            bounds = Some(match bounds {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
    }
    match bounds {
        Some((x0, y0, x1, y1)) => (x1 - x0 + 1, y1 - y0 + 1),
        None => img.dimensions(),
    }
}

pub fn extract_shape(img: &RgbImage) -> ShapeDescriptor {
    let (w, h) = foreground_bbox(img);
    let aspect_ratio = f64::from(w) / f64::from(h);
    ShapeDescriptor {
        class: ShapeClass::from_aspect_ratio(aspect_ratio),
        aspect_ratio,
        text: None,
    }
}
