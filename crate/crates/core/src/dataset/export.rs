//! On-disk dataset layout: `images/` (8-bit PNG), `concepts.csv` and
//! `schema.json`.

use std::fs;
use std::path::Path;

use image::{GrayImage, RgbImage};

use crate::dataset::generate::{Dataset, Sample};
use crate::dataset::render::Image;
use crate::dataset::schema::{ConceptSchema, ConceptVector};
use crate::error::{Error, Result};

fn image_name(row: usize) -> String {
    format!("{row:06}.png")
}

fn to_u8(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn export_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    let images = dir.join("images");
    fs::create_dir_all(&images)?;
    fs::write(dir.join("schema.json"), serde_json::to_vec_pretty(dataset.schema())?)?;

    let mut csv = csv::Writer::from_path(dir.join("concepts.csv"))?;
    csv.write_record(dataset.schema().names())?;
    for (row, sample) in dataset.samples().iter().enumerate() {
        csv.write_record(sample.concepts.as_slice().iter().map(usize::to_string))?;
        let img = &sample.image;
        let (w, h) = (img.width() as u32, img.height() as u32);
        let bytes: Vec<u8> = img.pixels().iter().copied().map(to_u8).collect();
        let path = images.join(image_name(row));
        match img.channels() {
            1 => GrayImage::from_raw(w, h, bytes).expect("buffer size").save(path)?,
            3 => RgbImage::from_raw(w, h, bytes).expect("buffer size").save(path)?,
            c => return Err(Error::Shape(format!("cannot export {c}-channel images"))),
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn import_dataset(dir: &Path) -> Result<Dataset> {
    let schema: ConceptSchema = serde_json::from_slice(&fs::read(dir.join("schema.json"))?)?;
    schema.validate()?;
    let mut reader = csv::Reader::from_path(dir.join("concepts.csv"))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != schema.names() {
        return Err(Error::InvalidSchema(format!(
            "concepts.csv header {header:?} does not match schema names {:?}",
            schema.names()
        )));
    }
    let mut samples = Vec::new();
    let mut resolution = 0;
    for (row, record) in reader.records().enumerate() {
        let indices = record?
            .iter()
            .map(|f| f.parse::<usize>().map_err(|e| Error::InvalidInput(format!("row {row}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let concepts = ConceptVector::new(indices);
        let index = schema.concepts_to_index(&concepts)?;
        let decoded = image::open(dir.join("images").join(image_name(row)))?;
        let (w, h) = (decoded.width() as usize, decoded.height() as usize);
        let bytes = match schema.channels() {
            1 => decoded.into_luma8().into_raw(),
            _ => decoded.into_rgb8().into_raw(),
        };
        let pixels = bytes.into_iter().map(|b| f32::from(b) / 255.0).collect();
        resolution = h;
        samples.push(Sample {
            index,
            image: Image::new(h, w, schema.channels(), pixels)?,
            concepts,
            label: None,
        });
    }
    Dataset::from_samples(schema, resolution, samples)
}
