//! Annotation CSV, image files and on-disk datasets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{ImageReader, RgbImage};
use tlunet_core::data::{rle_decode, Image, ImageRecord, MaskSet, RleString};

use crate::error::{fs, Error, Result};

/// One `(image, class)` row with a non-empty encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub image_id: String,
    /// 1-based class id as written in the file.
    pub class_id: usize,
    pub rle: RleString,
}

/// Parses `ImageId,ClassId,EncodedPixels` CSV text. Rows with an empty
/// encoding carry no defect and are skipped.
pub fn parse_annotations(text: &str, num_classes: usize) -> Result<Vec<Annotation>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(format!("annotations header: {e}")))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("annotations: missing `{name}` column")))
    };
    let (ci, cc, ce) = (column("ImageId")?, column("ClassId")?, column("EncodedPixels")?);

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse(format!("annotations line {line}: {e}"))
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let image_id = field(ci);
        if image_id.is_empty() {
            return Err(Error::Parse(format!("annotations line {line}: empty ImageId")));
        }
        let class_id: usize =
            field(cc).parse().map_err(|_| Error::Parse(format!("annotations line {line}: bad ClassId `{}`", field(cc))))?;
        if !(1..=num_classes).contains(&class_id) {
            return Err(tlunet_core::Error::Validation(format!(
                "annotations line {line}: class {class_id} outside 1..={num_classes}"
            ))
            .into());
        }
        let encoded = field(ce);
        if encoded.is_empty() {
            continue;
        }
        let rle = RleString::parse(encoded).map_err(|e| Error::Parse(format!("annotations line {line}: {e}")))?;
        out.push(Annotation { image_id: image_id.to_string(), class_id, rle });
    }
    Ok(out)
}

/// Loads an 8-bit grayscale or colour image as 3 channels.
pub fn load_image(path: &Path) -> Result<Image> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Image { path: path.to_path_buf(), source: e })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Image::new(h as usize, w as usize, rgb.into_raw())?)
}

pub fn save_png(path: &Path, image: &Image) -> Result<()> {
    let rgb = RgbImage::from_raw(image.width() as u32, image.height() as u32, image.data().to_vec())
        .expect("buffer matches dimensions");
    rgb.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Image { path: path.to_path_buf(), source: e })
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Every image in `images_dir` (sorted by file name) with masks from the
/// annotation file; images without rows get empty masks.
pub fn load_dataset(images_dir: &Path, annotations: &Path, num_classes: usize) -> Result<Vec<ImageRecord>> {
    let rows = parse_annotations(&fs::read_to_string(annotations)?, num_classes)?;
    let mut by_image: BTreeMap<String, Vec<Annotation>> = BTreeMap::new();
    for a in rows {
        by_image.entry(a.image_id.clone()).or_default().push(a);
    }

    let mut files: Vec<PathBuf> = std::fs::read_dir(images_dir)
        .map_err(|e| Error::io(images_dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(images_dir, err)))
        .collect::<Result<Vec<_>>>()?;
    files.retain(|p| p.is_file() && is_image(p));
    files.sort();

    let mut records = Vec::with_capacity(files.len());
    for path in files {
        let id = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let image = load_image(&path)?;
        let mut masks = MaskSet::empty(image.height(), image.width(), num_classes);
        for a in by_image.remove(&id).unwrap_or_default() {
            let m = rle_decode(&a.rle, image.height(), image.width())
                .map_err(|e| Error::Parse(format!("{id} class {}: {e}", a.class_id)))?;
            if !masks.mask(a.class_id - 1).is_empty() {
                return Err(Error::Parse(format!("{id}: class {} annotated twice", a.class_id)));
            }
            *masks.mask_mut(a.class_id - 1) = m;
        }
        records.push(ImageRecord::new(id, image, masks)?);
    }
    if let Some(missing) = by_image.keys().next() {
        return Err(Error::format(images_dir, format!("annotated image `{missing}` not found ({} missing)", by_image.len())));
    }
    if records.is_empty() {
        return Err(Error::format(images_dir, "no png/jpg images found"));
    }
    Ok(records)
}

/// Writes records as PNG files plus an annotation CSV in the loader's layout.
pub fn write_dataset(records: &[ImageRecord], images_dir: &Path, annotations: &Path) -> Result<()> {
    fs::create_dir_all(images_dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["ImageId", "ClassId", "EncodedPixels"]).expect("in-memory write");
    for r in records {
        save_png(&images_dir.join(r.image_id()), r.image())?;
        for (m, mask) in r.masks().masks().iter().enumerate() {
            if !mask.is_empty() {
                w.write_record([r.image_id(), &(m + 1).to_string(), &mask.to_rle().to_string()]).expect("in-memory write");
            }
        }
    }
    fs::write(annotations, w.into_inner().expect("in-memory flush"))
}
