//! Image descriptor extraction.
//!
//! Four independent extractors each pull one feature out of an image:
//! average color, foreground shape, printed text (OCR) and a natural-language
//! caption. Color and shape run natively on decoded pixels; OCR and caption
//! go through the configured providers. [`extract_all`] runs an enabled
//! subset and emits one image-to-descriptor relation per extractor.

pub mod color;
pub mod shape;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use color::{color_similarity, extract_color, ColorDescriptor};
pub use shape::{extract_shape, ShapeClass, ShapeDescriptor};

use crate::providers::{ProviderError, Providers};

/// Most OCR tokens linked from one image, by descending confidence.
pub const MAX_OCR_TOKENS: usize = 16;

/// Descriptor name used when OCR ran but found no text.
pub const NO_TEXT: &str = "ocr:(none)";

/// One image feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Lambda {
    Color = 1,
    Shape = 2,
    Ocr = 3,
    Caption = 4,
}

impl Lambda {
    pub const ALL: [Lambda; 4] = [Lambda::Color, Lambda::Shape, Lambda::Ocr, Lambda::Caption];

    pub fn name(self) -> &'static str {
        match self {
            Lambda::Color => "color",
            Lambda::Shape => "shape",
            Lambda::Ocr => "ocr",
            Lambda::Caption => "caption",
        }
    }

    /// Namespace prefix of this extractor's descriptor entity names.
    pub fn prefix(self) -> String {
        format!("{}:", self.name())
    }

    /// OCR and caption failures are tolerated; color and shape are not.
    pub fn is_optional(self) -> bool {
        matches!(self, Lambda::Ocr | Lambda::Caption)
    }

    /// Which extractor produced a descriptor entity, judged by its name.
    pub fn of_descriptor(name: &str) -> Option<Lambda> {
        Lambda::ALL.into_iter().find(|l| name.starts_with(&l.prefix()))
    }
}

impl From<Lambda> for u8 {
    fn from(l: Lambda) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Lambda {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Lambda::Color),
            2 => Ok(Lambda::Shape),
            3 => Ok(Lambda::Ocr),
            4 => Ok(Lambda::Caption),
            _ => Err(format!("unknown extractor {v} (expected 1-4)")),
        }
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

impl FromStr for Lambda {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let n: u8 = s
            .trim()
            .trim_start_matches(['λ', 'l', 'L'])
            .parse()
            .map_err(|_| format!("invalid extractor '{s}'"))?;
        Lambda::try_from(n)
    }
}

/// Parse a comma-separated extractor list such as `1,2,3,4`.
pub fn parse_lambdas(s: &str) -> Result<BTreeSet<Lambda>, String> {
    let set: BTreeSet<Lambda> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    if set.is_empty() {
        return Err("extractor set is empty".into());
    }
    Ok(set)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OcrDescriptor {
    pub tokens: Vec<String>,
    pub confidences: Vec<f64>,
}

impl OcrDescriptor {
    pub fn token_set(&self) -> BTreeSet<String> {
        self.tokens.iter().cloned().collect()
    }

    /// Distinct tokens ordered by descending confidence, first occurrence
    /// winning ties, capped at [`MAX_OCR_TOKENS`].
    pub fn top_tokens(&self) -> Vec<String> {
        let mut order: Vec<usize> = (0..self.tokens.len()).collect();
        order.sort_by(|&a, &b| self.confidences[b].total_cmp(&self.confidences[a]));
        let mut seen = BTreeSet::new();
        order
            .into_iter()
            .map(|i| &self.tokens[i])
            .filter(|t| seen.insert(t.as_str()))
            .take(MAX_OCR_TOKENS)
            .cloned()
            .collect()
    }
}

/// Everything the extractors learned about one image. A `None` field means
/// the extractor was disabled or failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSet {
    pub color: Option<ColorDescriptor>,
    pub shape: Option<ShapeDescriptor>,
    pub ocr: Option<OcrDescriptor>,
    pub caption: Option<String>,
    pub image_embedding_id: Option<String>,
}

impl DescriptorSet {
    pub fn has(&self, lambda: Lambda) -> bool {
        match lambda {
            Lambda::Color => self.color.is_some(),
            Lambda::Shape => self.shape.is_some(),
            Lambda::Ocr => self.ocr.is_some(),
            Lambda::Caption => self.caption.is_some(),
        }
    }

    /// One-line summary restricted to the given extractors.
    pub fn summary(&self, lambdas: &BTreeSet<Lambda>) -> String {
        let mut parts = Vec::new();
        if lambdas.contains(&Lambda::Color) {
            if let Some(c) = &self.color {
                parts.push(format!("color {}", c.named_color));
            }
        }
        if lambdas.contains(&Lambda::Shape) {
            if let Some(s) = &self.shape {
                match &s.text {
                    Some(t) => parts.push(format!("shape {} ({t})", s.class.as_str())),
                    None => parts.push(format!("shape {}", s.class.as_str())),
                }
            }
        }
        if lambdas.contains(&Lambda::Ocr) {
            if let Some(o) = &self.ocr {
                if !o.tokens.is_empty() {
                    parts.push(format!("text \"{}\"", o.top_tokens().join(" ")));
                }
            }
        }
        if lambdas.contains(&Lambda::Caption) {
            if let Some(c) = &self.caption {
                parts.push(format!("caption: {c}"));
            }
        }
        parts.join("; ")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DescriptorError {
    #[error("could not decode image: {0}")]
    Decode(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("extractor set is empty")]
    NoExtractors,
}

/// Decode PNG or JPEG bytes into RGB.
pub fn decode(bytes: &[u8]) -> Result<RgbImage, DescriptorError> {
    let img = image::load_from_memory(bytes)
        .map_err(|e| DescriptorError::Decode(e.to_string()))?
        .to_rgb8();
    if img.width() == 0 || img.height() == 0 {
        return Err(DescriptorError::Decode("image has no pixels".into()));
    }
    Ok(img)
}

fn normalize_ocr_token(token: &str) -> String {
    let kept: String = token
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Run OCR and normalize: lowercase, punctuation stripped, provider order
/// preserved. Tokens that normalize to nothing are dropped with their
/// confidence.
pub fn extract_ocr(providers: &Providers, bytes: &[u8]) -> Result<OcrDescriptor, DescriptorError> {
    let raw = providers.ocr(bytes)?;
    let mut out = OcrDescriptor::default();
    for (token, conf) in raw.tokens.iter().zip(raw.confidences) {
        let token = normalize_ocr_token(token);
        if !token.is_empty() {
            out.tokens.push(token);
            out.confidences.push(conf.clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

pub fn extract_caption(providers: &Providers, bytes: &[u8]) -> Result<String, DescriptorError> {
    Ok(providers.caption(bytes)?)
}

/// A descriptor entity to create (or merge into).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorValue {
    pub name: String,
    pub description: String,
}

/// An (image, descriptor...) relation produced by one extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorRelation {
    pub lambda: Lambda,
    pub values: Vec<DescriptorValue>,
    pub relation_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageExtraction {
    pub descriptors: DescriptorSet,
    pub relations: Vec<DescriptorRelation>,
    /// Optional extractors that failed, with the reason.
    pub failures: Vec<(Lambda, String)>,
}

fn relations_for(lambda: Lambda, set: &DescriptorSet) -> Option<DescriptorRelation> {
    let (values, relation_text) = match lambda {
        Lambda::Color => {
            let c = set.color.as_ref()?;
            let [r, g, b] = c.avg_rgb;
            (
                vec![DescriptorValue {
                    name: format!("color:{}", c.named_color),
                    description: format!("named color {}", c.named_color),
                }],
                format!("color {} (average rgb {r}, {g}, {b})", c.named_color),
            )
        }
        Lambda::Shape => {
            let s = set.shape.as_ref()?;
            let class = s.class.as_str();
            let mut text = format!("shape {class} (aspect ratio {:.3})", s.aspect_ratio);
            if let Some(t) = &s.text {
                text.push_str(": ");
                text.push_str(t);
            }
            (
                vec![DescriptorValue {
                    name: format!("shape:{class}"),
                    description: format!("shape class {class}"),
                }],
                text,
            )
        }
        Lambda::Ocr => {
            let o = set.ocr.as_ref()?;
            let top = o.top_tokens();
            if top.is_empty() {
                (
                    vec![DescriptorValue {
                        name: NO_TEXT.into(),
                        description: "no legible text on packaging".into(),
                    }],
                    "ocr text: (none)".into(),
                )
            } else {
                let values = top
                    .iter()
                    .map(|t| DescriptorValue {
                        name: format!("ocr:{t}"),
                        description: format!("text \"{t}\" printed on packaging"),
                    })
                    .collect();
                (values, format!("ocr text: {}", top.join(" ")))
            }
        }
        Lambda::Caption => {
            let c = set.caption.as_ref()?;
            (
                vec![DescriptorValue {
                    name: format!("caption:{c}"),
                    description: c.clone(),
                }],
                format!("caption: {c}"),
            )
        }
    };
    Some(DescriptorRelation {
        lambda,
        values,
        relation_text,
    })
}

/// Run exactly the enabled extractors on one image.
///
/// Decode, color and shape failures abort the image. OCR and caption
/// failures leave that descriptor empty, are reported in
/// [`ImageExtraction::failures`], and emit no relation.
pub fn extract_all(
    bytes: &[u8],
    enabled: &BTreeSet<Lambda>,
    providers: &Providers,
) -> Result<ImageExtraction, DescriptorError> {
    if enabled.is_empty() {
        return Err(DescriptorError::NoExtractors);
    }
    let img = decode(bytes)?;
    let mut set = DescriptorSet::default();
    let mut failures = Vec::new();
    for &lambda in enabled {
        match lambda {
            Lambda::Color => set.color = Some(extract_color(&img)),
            Lambda::Shape => {
                let mut s = extract_shape(&img);
                match providers.shape_text(bytes) {
                    Ok(text) => s.text = text,
                    Err(e) => log::warn!("shape text unavailable: {e}"),
                }
                set.shape = Some(s);
            }
            Lambda::Ocr => match extract_ocr(providers, bytes) {
                Ok(o) => set.ocr = Some(o),
                Err(e) => failures.push((lambda, e.to_string())),
            },
            Lambda::Caption => match extract_caption(providers, bytes) {
                Ok(c) => set.caption = Some(c),
                Err(e) => failures.push((lambda, e.to_string())),
            },
        }
    }
    let relations = enabled
        .iter()
        .filter_map(|&l| relations_for(l, &set))
        .collect();
    Ok(ImageExtraction {
        descriptors: set,
        relations,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids;
    use crate::providers::mock::{FixtureMap, Unreachable};
    use crate::providers::{OcrOutput, ProviderKind};
    use image::{ImageFormat, Rgb};
    use std::io::Cursor;

    fn png(img: &RgbImage) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        out.into_inner()
    }

    fn sample() -> Vec<u8> {
        let mut img = RgbImage::from_pixel(40, 40, Rgb([255, 255, 255]));
        for y in 5..35 {
            for x in 15..25 {
                img.put_pixel(x, y, Rgb([0, 0, 200]));
            }
        }
        png(&img)
    }

    fn fixtures_for(bytes: &[u8]) -> FixtureMap {
        let mut fx = FixtureMap::default();
        let h = ids::image_id(bytes);
        fx.ocr.insert(
            h.clone(),
            OcrOutput {
                tokens: vec!["ZYN".into(), "Cool".into(), "Mint!".into()],
                confidences: vec![0.9, 0.8, 0.7],
            },
        );
        fx.captions.insert(h, "a blue tin of mint pouches".into());
        fx
    }

    fn all() -> BTreeSet<Lambda> {
        Lambda::ALL.into_iter().collect()
    }

    #[test]
    fn lambda_parsing() {
        assert_eq!(parse_lambdas("1,2,3,4").unwrap(), all());
        assert_eq!(
            parse_lambdas("λ1, 3").unwrap(),
            [Lambda::Color, Lambda::Ocr].into_iter().collect()
        );
        assert!(parse_lambdas("5").is_err());
        assert!(parse_lambdas("").is_err());
        assert_eq!(serde_json::to_string(&Lambda::Ocr).unwrap(), "3");
    }

    #[test]
    fn ocr_tokens_are_normalized() {
        let bytes = sample();
        let p = Providers::mock(fixtures_for(&bytes));
        let o = extract_ocr(&p, &bytes).unwrap();
        assert_eq!(o.tokens, ["zyn", "cool", "mint"]);
        assert_eq!(o.confidences.len(), 3);
    }

    #[test]
    fn empty_ocr_output() {
        let p = Providers::mock(FixtureMap::default());
        assert_eq!(extract_ocr(&p, b"anything").unwrap(), OcrDescriptor::default());
    }

    #[test]
    fn unreachable_ocr_reports_attempts() {
        let p = Providers::mock(FixtureMap::default()).with_ocr(Unreachable(ProviderKind::Ocr));
        let err = extract_ocr(&p, b"x").unwrap_err();
        assert!(matches!(
            err,
            DescriptorError::Provider(ProviderError::Transport { attempts: 1, .. })
        ));
    }

    #[test]
    fn identical_images_caption_once() {
        let bytes = sample();
        let p = Providers::mock(fixtures_for(&bytes));
        let copy = bytes.clone();
        assert_eq!(extract_caption(&p, &bytes).unwrap(), "a blue tin of mint pouches");
        assert_eq!(extract_caption(&p, &copy).unwrap(), "a blue tin of mint pouches");
        assert_eq!(p.counts().caption, 1);
    }

    #[test]
    fn extract_only_color() {
        let bytes = sample();
        let p = Providers::mock(fixtures_for(&bytes));
        let out = extract_all(&bytes, &[Lambda::Color].into_iter().collect(), &p).unwrap();
        assert!(out.descriptors.color.is_some());
        assert!(out.descriptors.shape.is_none() && out.descriptors.ocr.is_none());
        assert!(out.descriptors.caption.is_none());
        assert_eq!(out.relations.len(), 1);
        // Disabled extractors never reach their providers.
        assert_eq!(p.counts().ocr + p.counts().caption, 0);
    }

    #[test]
    fn extract_all_four() {
        let bytes = sample();
        let p = Providers::mock(fixtures_for(&bytes));
        let out = extract_all(&bytes, &all(), &p).unwrap();
        assert_eq!(out.relations.len(), 4);
        assert_eq!(out.descriptors.shape.as_ref().unwrap().class, ShapeClass::Tall);
        let ocr = out.relations.iter().find(|r| r.lambda == Lambda::Ocr).unwrap();
        assert_eq!(ocr.values.len(), 3);
    }

    #[test]
    fn optional_failure_is_recorded_and_skipped() {
        let bytes = sample();
        let p = Providers::mock(FixtureMap::default());
        let out = extract_all(&bytes, &all(), &p).unwrap();
        assert!(out.descriptors.caption.is_none());
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].0, Lambda::Caption);
        assert_eq!(out.relations.len(), 3);
        let ocr = out.relations.iter().find(|r| r.lambda == Lambda::Ocr).unwrap();
        assert_eq!(ocr.values[0].name, NO_TEXT);
    }

    #[test]
    fn undecodable_image_aborts() {
        let p = Providers::mock(FixtureMap::default());
        assert!(matches!(
            extract_all(b"not an image", &all(), &p),
            Err(DescriptorError::Decode(_))
        ));
    }

    #[test]
    fn extraction_is_deterministic() {
        let bytes = sample();
        let a = extract_all(&bytes, &all(), &Providers::mock(fixtures_for(&bytes))).unwrap();
        let b = extract_all(&bytes, &all(), &Providers::mock(fixtures_for(&bytes))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn top_tokens_cap_and_order() {
        let o = OcrDescriptor {
            tokens: (0..20).map(|i| format!("t{i}")).collect(),
            confidences: (0..20).map(|i| f64::from(i) / 20.0).collect(),
        };
        let top = o.top_tokens();
        assert_eq!(top.len(), MAX_OCR_TOKENS);
        assert_eq!(top[0], "t19");
    }

    #[test]
    fn jpeg_is_accepted() {
        let img = RgbImage::from_pixel(16, 16, Rgb([255, 0, 0]));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Jpeg).unwrap();
        let decoded = decode(&out.into_inner()).unwrap();
        assert_eq!(extract_color(&decoded).named_color, "red");
    }
}
