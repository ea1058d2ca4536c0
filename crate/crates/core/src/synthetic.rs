//! Deterministic synthetic corpus for tests and demos.
//!
//! Eight fictional brands each sell four flavors. Every (brand, flavor)
//! pair has one product document paragraph and one generated PNG whose
//! packaging color follows the flavor and whose silhouette varies. Mock
//! OCR, caption and shape-text answers are keyed by image hash.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Cursor};
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use serde_json::json;

use crate::ids;
use crate::providers::mock::FixtureMap;
use crate::providers::OcrOutput;

pub const BRANDS: [&str; 8] = [
    "Polar",
    "Vento",
    "Kestrel",
    "Nordic Frost",
    "Auric",
    "Lumen",
    "Tidal",
    "Ember",
];

const CITIES: [&str; 8] = [
    "Harbor City",
    "Lakeview",
    "Stonebridge",
    "Glenmoor",
    "Redfield",
    "Ashford",
    "Port Marlow",
    "Cedar Falls",
];

/// (tobacco type, product type, container)
const TYPES: [(&str, &str, &str); 4] = [
    ("oral nicotine", "pouch", "tin"),
    ("e-cigarette", "disposable vape", "device"),
    ("cigar", "cigarillo", "pack"),
    ("smokeless tobacco", "snus", "can"),
];

/// Flavors and the packaging color each one is sold in.
pub const FLAVORS: [(&str, &str, [u8; 3]); 8] = [
    ("Cool Mint", "green", [0, 128, 0]),
    ("Wild Berry", "purple", [128, 0, 128]),
    ("Citrus Zest", "yellow", [255, 255, 0]),
    ("Dark Coffee", "maroon", [128, 0, 0]),
    ("Vanilla Cream", "silver", [192, 192, 192]),
    ("Red Cinnamon", "red", [255, 0, 0]),
    ("Wintergreen", "teal", [0, 128, 128]),
    ("Blue Razz", "blue", [0, 0, 255]),
];

const STRENGTHS: [&str; 4] = ["3 mg", "6 mg", "9 mg", "12 mg"];
const SHAPES: [&str; 3] = ["square", "tall", "wide"];
const CANVAS: u32 = 48;

/// One catalog product.
#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub brand: usize,
    pub slot: usize,
    pub flavor: usize,
    pub shape: usize,
}

impl Product {
    pub fn brand_name(&self) -> &'static str {
        BRANDS[self.brand]
    }

    pub fn flavor_name(&self) -> &'static str {
        FLAVORS[self.flavor].0
    }

    pub fn color_name(&self) -> &'static str {
        FLAVORS[self.flavor].1
    }

    pub fn types(&self) -> (&'static str, &'static str, &'static str) {
        TYPES[self.brand % TYPES.len()]
    }

    pub fn file_name(&self) -> String {
        format!("{}-{}.png", slug(self.brand_name()), slug(self.flavor_name()))
    }
}

fn slug(s: &str) -> String {
    s.to_ascii_lowercase().replace(' ', "-")
}

/// Brand `b` sells flavors b, b+2, b+4, b+6 (mod 8), so every flavor is
/// carried by four brands across two product types.
pub fn products() -> Vec<Product> {
    let mut out = Vec::new();
    for brand in 0..BRANDS.len() {
        for slot in 0..4 {
            out.push(Product {
                brand,
                slot,
                flavor: (brand + 2 * slot) % FLAVORS.len(),
                shape: (brand + slot) % SHAPES.len(),
            });
        }
    }
    out
}

fn brands_with_flavor(flavor: usize) -> Vec<Product> {
    products().into_iter().filter(|p| p.flavor == flavor).collect()
}

/// Packaging render: a flavor-colored silhouette on a shifted background.
pub fn render(p: &Product) -> RgbImage {
    let base = FLAVORS[p.flavor].2;
    // Large enough to separate foreground from border, small enough to keep
    // the average nearest to the flavor color.
    let shift = 20 + 2 * p.brand as u8;
    let bg = base.map(|c| if c < 160 { c + shift } else { c - shift });
    // Every silhouette covers 900 pixels, so the average color depends only
    // on flavor and brand.
    let slim = p.brand % 2 == 0;
    let (w, h) = match (SHAPES[p.shape], slim) {
        ("square", _) => (30, 30),
        ("tall", true) => (20, 45),
        ("tall", false) => (25, 36),
        (_, true) => (45, 20),
        (_, false) => (36, 25),
    };
    let mut img = RgbImage::from_pixel(CANVAS, CANVAS, Rgb(bg));
    let (x0, y0) = ((CANVAS - w) / 2, (CANVAS - h) / 2);
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            img.put_pixel(x, y, Rgb(base));
        }
    }
    img
}

pub fn png_bytes(img: &RgbImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}

fn ocr_for(p: &Product) -> OcrOutput {
    // Two products have illegible packaging.
    if (p.brand, p.slot) == (3, 1) || (p.brand, p.slot) == (7, 3) {
        return OcrOutput::default();
    }
    let mut tokens: Vec<String> = p
        .brand_name()
        .split(' ')
        .chain(p.flavor_name().split(' '))
        .map(str::to_ascii_uppercase)
        .collect();
    tokens.push(STRENGTHS[p.slot].replace(' ', "").to_ascii_uppercase());
    let confidences = (0..tokens.len()).map(|i| 0.99 - 0.05 * i as f64).collect();
    OcrOutput {
        tokens,
        confidences,
    }
}

fn caption_for(p: &Product) -> String {
    let (_, product_type, container) = p.types();
    format!(
        "a {} {} {container} of {} {} {product_type}",
        p.color_name(),
        SHAPES[p.shape],
        p.brand_name(),
        p.flavor_name()
    )
}

fn shape_text_for(p: &Product) -> String {
    let (_, _, container) = p.types();
    format!("{} {container} with {} logo", SHAPES[p.shape], p.brand_name())
}

fn document(brand: usize) -> String {
    let items: Vec<Product> = products().into_iter().filter(|p| p.brand == brand).collect();
    let b = BRANDS[brand];
    let (tobacco_type, product_type, container) = TYPES[brand % TYPES.len()];
    let city = CITIES[brand];
    let names: Vec<&str> = items.iter().map(Product::flavor_name).collect();
    let mut s = format!(
        "{b} is a fictional {tobacco_type} brand that sells {product_type} products. \
         The {b} range includes {}, {}, {} and {}.\n\n",
        names[0], names[1], names[2], names[3]
    );
    for p in &items {
        let f = p.flavor_name();
        let other = BRANDS[(brand + 2) % BRANDS.len()];
        s.push_str(&format!(
            "{b} {f} is packaged in a {} {} {container}. \
             {b} {f} has a nicotine strength of {}. \
             The {f} flavor is always shown in {}. \
             Shoppers in {city} who like {b} {f} also try {other} {f}.\n\n",
            p.color_name(),
            SHAPES[p.shape],
            STRENGTHS[p.slot],
            p.color_name(),
        ));
    }
    s.push_str(&format!(
        "Retail notes: {b} products are stocked at convenience stores in {city}. \
         Store clerks report that {b} customers ask most often about {}. \
         Packaging for every {b} product lists the flavor name, the strength and a \
         health warning. This archive entry is synthetic and describes no real product.\n",
        names[0]
    ));
    s
}

fn list(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn cases() -> Vec<serde_json::Value> {
    let mut out = Vec::new();
    for brand in [0, 1, 2, 3] {
        let flavors: Vec<&str> = products()
            .into_iter()
            .filter(|p| p.brand == brand)
            .map(|p| p.flavor_name())
            .collect();
        out.push(json!({
            "id": format!("q{:02}", out.len() + 1),
            "question": format!("What flavors does {} offer?", BRANDS[brand]),
            "golden_answer": format!("{} offers {}.", BRANDS[brand], list(&flavors)),
            "tags": ["flavors-per-brand"],
        }));
    }
    for flavor in [1, 6, 5] {
        let (f, color, _) = FLAVORS[flavor];
        out.push(json!({
            "id": format!("q{:02}", out.len() + 1),
            "question": format!("What color is the packaging of {f} products?"),
            "golden_answer": format!("{f} products are packaged in {color}."),
            "tags": ["flavor-color"],
        }));
    }
    for flavor in [0, 7] {
        let f = FLAVORS[flavor].0;
        let sellers = brands_with_flavor(flavor);
        let brands: Vec<&str> = sellers.iter().map(|p| p.brand_name()).collect();
        let mut kinds: Vec<&str> = sellers.iter().map(|p| p.types().1).collect();
        kinds.sort_unstable();
        kinds.dedup();
        out.push(json!({
            "id": format!("q{:02}", out.len() + 1),
            "question": format!("Which product types offer {f}?"),
            "golden_answer": format!(
                "{f} is offered as {} products by {}.",
                list(&kinds),
                list(&brands)
            ),
            "tags": ["cross-product-type"],
        }));
    }
    for (brand, slot) in [(0, 0), (1, 0)] {
        let p = products()
            .into_iter()
            .find(|p| p.brand == brand && p.slot == slot)
            .expect("catalog product");
        let (tobacco_type, product_type, _) = p.types();
        out.push(json!({
            "id": format!("q{:02}", out.len() + 1),
            "question": "Which brand and flavor is the product in this image?",
            "query_image": format!("images/{}", p.file_name()),
            "golden_answer": format!(
                "{} {}, a {} {tobacco_type} {product_type}.",
                p.brand_name(),
                p.flavor_name(),
                p.color_name()
            ),
            "tags": ["image", "flavor-color"],
        }));
    }
    out
}

fn json_bytes(v: &impl serde::Serialize) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

/// Every fixture file, keyed by path relative to the fixture root.
pub fn fixture_files() -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut docs = Vec::new();
    for brand in 0..BRANDS.len() {
        let name = format!("docs/{}.txt", slug(BRANDS[brand]));
        files.insert(name.clone(), document(brand).into_bytes());
        docs.push(name);
    }

    let mut fixtures = FixtureMap::default();
    let mut manifest = String::new();
    for p in products() {
        let bytes = png_bytes(&render(&p));
        let id = ids::image_id(&bytes);
        let (tobacco_type, product_type, _) = p.types();
        manifest.push_str(
            &json!({
                "uri": p.file_name(),
                "tobacco_type": tobacco_type,
                "product_type": product_type,
                "brand": p.brand_name(),
            })
            .to_string(),
        );
        manifest.push('\n');
        fixtures.ocr.insert(id.clone(), ocr_for(&p));
        fixtures.captions.insert(id.clone(), caption_for(&p));
        fixtures.shapes.insert(id, shape_text_for(&p));
        files.insert(format!("images/{}", p.file_name()), bytes);
    }
    files.insert("images/manifest.jsonl".into(), manifest.into_bytes());
    files.insert("fixtures.json".into(), json_bytes(&fixtures));

    files.insert(
        "corpus.json".into(),
        json_bytes(&json!({"docs": docs, "images": "images/manifest.jsonl"})),
    );

    let mock = |kind: &str| json!({"kind": kind, "endpoint": "mock", "model_name": "mock"});
    files.insert(
        "hyperrag.json".into(),
        json_bytes(&json!({
            "providers": {
                "chat": mock("chat"),
                "embed_text": mock("embed_text"),
                "embed_image": mock("embed_image"),
                "ocr": mock("ocr"),
                "caption": mock("caption"),
                "shape_text": mock("caption"),
            },
            "mock_fixtures": "fixtures.json",
        })),
    );

    let mut lines = String::new();
    for c in cases() {
        lines.push_str(&c.to_string());
        lines.push('\n');
    }
    files.insert("cases.jsonl".into(), lines.into_bytes());
    files
}

/// Write the fixture tree under `dir`.
pub fn write_fixture(dir: &Path) -> io::Result<()> {
    for (rel, bytes) in fixture_files() {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
    }
    Ok(())
}
