//! Annotation and detection files (JSON).
//!
//! Boxes are stored flat as `{"x", "y", "w", "h", "label"}` objects. The
//! coordinates are read as signed integers so that negative values produce
//! a validation error instead of a parse error.

use std::path::Path;

use echofinder_core::{Annotation, BoundingBox, Label};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read_json, write_json};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
    pub label: Label,
}

impl BoxRecord {
    pub fn to_annotation(&self) -> Result<Annotation> {
        let field = |name: &str, v: i64, min: i64| {
            if v < min || v > u32::MAX as i64 {
                Err(Error::InvalidAnnotation(format!("{name} = {v} is out of range")))
            } else {
                Ok(v as u32)
            }
        };
        let bbox = BoundingBox::new(
            field("x", self.x, 0)?,
            field("y", self.y, 0)?,
            field("w", self.w, 1)?,
            field("h", self.h, 1)?,
        )
        .map_err(|e| Error::InvalidAnnotation(e.to_string()))?;
        Ok(Annotation { bbox, label: self.label })
    }
}

impl From<&Annotation> for BoxRecord {
    fn from(a: &Annotation) -> Self {
        Self {
            x: a.bbox.x.into(),
            y: a.bbox.y.into(),
            w: a.bbox.w.into(),
            h: a.bbox.h.into(),
            label: a.label,
        }
    }
}

/// Ground truth for one echogram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub echogram_id: String,
    pub annotations: Vec<BoxRecord>,
}

impl AnnotationFile {
    pub fn new(echogram_id: impl Into<String>, annotations: &[Annotation]) -> Self {
        Self {
            echogram_id: echogram_id.into(),
            annotations: annotations.iter().map(BoxRecord::from).collect(),
        }
    }

    /// Converts every record, rejecting malformed boxes.
    pub fn to_annotations(&self) -> Result<Vec<Annotation>> {
        self.annotations.iter().map(BoxRecord::to_annotation).collect()
    }

    /// Converts and additionally checks every box against the echogram size.
    pub fn validate(&self, width: usize, height: usize) -> Result<Vec<Annotation>> {
        let out = self.to_annotations()?;
        if let Some(a) = out.iter().find(|a| !a.bbox.fits_within(width, height)) {
            return Err(Error::InvalidAnnotation(format!(
                "box {:?} exceeds echogram {}x{} of {}",
                a.bbox, width, height, self.echogram_id
            )));
        }
        Ok(out)
    }

    /// Boxes labelled as schools.
    pub fn school_boxes(&self) -> Result<Vec<BoundingBox>> {
        Ok(self
            .to_annotations()?
            .into_iter()
            .filter(|a| a.label.is_positive())
            .map(|a| a.bbox)
            .collect())
    }
}

pub fn read_annotations(path: &Path) -> Result<AnnotationFile> {
    let file: AnnotationFile = read_json(path)?;
    file.to_annotations()?;
    Ok(file)
}

pub fn write_annotations(path: &Path, file: &AnnotationFile) -> Result<()> {
    write_json(path, file)
}

/// Output of `extract` and `detect`: boxes for several echograms. Boxes from
/// `extract` carry no label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFile {
    pub echograms: Vec<EchogramDetections>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchogramDetections {
    pub echogram_id: String,
    pub boxes: Vec<DetectionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl DetectionRecord {
    pub fn unlabeled(b: BoundingBox) -> Self {
        Self {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            label: None,
        }
    }

    pub fn bbox(&self) -> Result<BoundingBox> {
        BoundingBox::new(self.x, self.y, self.w, self.h).map_err(|e| Error::InvalidAnnotation(e.to_string()))
    }
}

impl From<&Annotation> for DetectionRecord {
    fn from(a: &Annotation) -> Self {
        Self {
            label: Some(a.label),
            ..Self::unlabeled(a.bbox)
        }
    }
}

impl EchogramDetections {
    /// Boxes to score against ground truth: positives, or every box when
    /// the file is unlabeled.
    pub fn scored_boxes(&self) -> Result<Vec<BoundingBox>> {
        self.boxes
            .iter()
            .filter(|d| d.label.map_or(true, Label::is_positive))
            .map(DetectionRecord::bbox)
            .collect()
    }
}

impl DetectionFile {
    pub fn find(&self, id: &str) -> Option<&EchogramDetections> {
        self.echograms.iter().find(|e| e.echogram_id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_round_trip() {
        let f = AnnotationFile::new("e", &[]);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<AnnotationFile>(&s).unwrap(), f);
    }

    #[test]
    fn one_annotation_round_trip() {
        let a = Annotation::school(BoundingBox::new(10, 20, 30, 40).unwrap());
        let f = AnnotationFile::new("e", &[a]);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains(r#""label":"herring-school""#));
        let back: AnnotationFile = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_annotations().unwrap(), vec![a]);
    }

    #[test]
    fn negative_width_rejected() {
        let s = r#"{"echogram_id":"e","annotations":[{"x":1,"y":1,"w":-3,"h":4,"label":"herring-school"}]}"#;
        let f: AnnotationFile = serde_json::from_str(s).unwrap();
        assert!(matches!(f.to_annotations(), Err(Error::InvalidAnnotation(_))));
    }

    #[test]
    fn unknown_field_rejected() {
        let s = r#"{"echogram_id":"e","annotations":[],"extra":1}"#;
        assert!(serde_json::from_str::<AnnotationFile>(s).is_err());
    }

    #[test]
    fn out_of_bounds_box() {
        let a = Annotation::school(BoundingBox::new(5, 5, 10, 10).unwrap());
        let f = AnnotationFile::new("e", &[a]);
        assert!(f.validate(15, 15).is_ok());
        assert!(f.validate(14, 15).is_err());
    }
}
