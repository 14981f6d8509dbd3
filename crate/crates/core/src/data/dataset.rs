use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vision::{decode_image, ChannelOrder, ImageFormat, ImageU8};

#[derive(Debug, Clone, PartialEq)]
pub enum SampleSource {
    Path(PathBuf),
    Inline(Arc<ImageU8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Unique identity; the file path for on-disk samples.
    pub id: String,
    pub source: SampleSource,
    pub label: usize,
}

/// Labelled samples plus the ordered class list. Label `i` names
/// `class_names[i]`; class names are kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    class_names: Vec<String>,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, class_names: Vec<String>, samples: Vec<Sample>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::Data("dataset has no classes".into()));
        }
        if class_names.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!("class names must be sorted and unique: {class_names:?}")));
        }
        let mut seen = HashSet::new();
        for s in &samples {
            if s.label >= class_names.len() {
                return Err(Error::Data(format!(
                    "sample {} has label {} but only {} classes exist",
                    s.id,
                    s.label,
                    class_names.len()
                )));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Data(format!("duplicate sample {}", s.id)));
            }
        }
        Ok(Dataset { name: name.into(), class_names, samples })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Sample indices per class, in dataset order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by = vec![Vec::new(); self.num_classes()];
        for (i, s) in self.samples.iter().enumerate() {
            by[s.label].push(i);
        }
        by
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.indices_by_class().iter().map(Vec::len).collect()
    }

    /// Decodes sample `index`; colour files are tagged `color_order`.
    pub fn load_image(&self, index: usize, color_order: ChannelOrder) -> Result<ImageU8> {
        let sample = self
            .samples
            .get(index)
            .ok_or_else(|| Error::Data(format!("sample index {index} out of range")))?;
        match &sample.source {
            SampleSource::Inline(img) => Ok((**img).clone()),
            SampleSource::Path(p) => load_file(p, color_order),
        }
    }

    /// Manifest CSV: header `path,label,class_name`, LF line endings.
    pub fn manifest_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Data(e.to_string());
        w.write_record(["path", "label", "class_name"]).map_err(csv_err)?;
        for s in &self.samples {
            let label = s.label.to_string();
            w.write_record([s.id.as_str(), label.as_str(), self.class_names[s.label].as_str()])
                .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    /// Reads a manifest back; paths are resolved relative to `base` when
    /// not absolute.
    pub fn from_manifest_csv(name: &str, text: &str, base: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "label", "class_name"] {
            return Err(Error::Data(format!("unexpected manifest header {headers:?}")));
        }
        let mut class_names: Vec<String> = Vec::new();
        let mut samples = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
            let label: usize = rec[1]
                .parse()
                .map_err(|_| Error::Data(format!("manifest row {}: bad label {:?}", line + 2, &rec[1])))?;
            if class_names.len() <= label {
                class_names.resize(label + 1, String::new());
            }
            if class_names[label].is_empty() {
                class_names[label] = rec[2].to_string();
            } else if class_names[label] != rec[2] {
                return Err(Error::Data(format!("label {label} names two classes")));
            }
            let p = PathBuf::from(&rec[0]);
            let path = if p.is_absolute() { p } else { base.join(p) };
            samples.push(Sample {
                id: rec[0].to_string(),
                source: SampleSource::Path(path),
                label,
            });
        }
        Dataset::new(name, class_names, samples)
    }
}

pub(crate) fn load_file(path: &Path, color_order: ChannelOrder) -> Result<ImageU8> {
    let fmt = ImageFormat::from_path(path)
        .ok_or_else(|| Error::Data(format!("{}: unsupported image extension", path.display())))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes, fmt, color_order).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        entries.push((name, entry.path()));
    }
    entries.sort();
    Ok(entries)
}

/// One subdirectory per class, sorted by name; files sorted by name within
/// each class. Every file is decoded once (in parallel) to validate it.
pub fn ingest_directory(root: &Path) -> Result<Dataset> {
    let entries = sorted_entries(root)?;
    let mut class_names = Vec::new();
    let mut samples = Vec::new();
    for (name, path) in entries {
        if !path.is_dir() {
            return Err(Error::Data(format!(
                "{} is not inside a class directory",
                path.display()
            )));
        }
        let files = sorted_entries(&path)?;
        if files.is_empty() {
            return Err(Error::Data(format!("class directory {} is empty", path.display())));
        }
        let label = class_names.len();
        for (_, file) in files {
            samples.push(Sample {
                id: file.to_string_lossy().into_owned(),
                source: SampleSource::Path(file),
                label,
            });
        }
        class_names.push(name);
    }
    samples.par_iter().try_for_each(|s| match &s.source {
        SampleSource::Path(p) => load_file(p, ChannelOrder::Rgb).map(|_| ()),
        SampleSource::Inline(_) => Ok(()),
    })?;
    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| root.display().to_string());
    Dataset::new(name, class_names, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::encode_ppm;

    fn write_img(path: &Path) {
        let img = ImageU8::filled(2, 2, ChannelOrder::Rgb, 9).unwrap();
        fs::write(path, encode_ppm(&img).unwrap()).unwrap();
    }

    #[test]
    fn two_class_layout() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["normal", "covid"] {
            fs::create_dir(dir.path().join(class)).unwrap();
            for f in ["b.ppm", "a.ppm"] {
                write_img(&dir.path().join(class).join(f));
            }
        }
        let d = ingest_directory(dir.path()).unwrap();
        assert_eq!(d.class_names(), &["covid", "normal"]);
        assert_eq!(d.labels(), vec![0, 0, 1, 1]);
        assert!(d.samples()[0].id.ends_with("covid/a.ppm"));
        assert!(d.samples()[1].id.ends_with("covid/b.ppm"));
    }

    #[test]
    fn four_classes_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["viral_pneumonia", "normal", "lung_opacity", "covid"] {
            fs::create_dir(dir.path().join(class)).unwrap();
            write_img(&dir.path().join(class).join("x.ppm"));
        }
        let d = ingest_directory(dir.path()).unwrap();
        assert_eq!(d.class_names(), &["covid", "lung_opacity", "normal", "viral_pneumonia"]);
    }

    #[test]
    fn loose_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("covid")).unwrap();
        write_img(&dir.path().join("covid").join("x.ppm"));
        write_img(&dir.path().join("stray.ppm"));
        assert!(ingest_directory(dir.path()).is_err());
    }

    #[test]
    fn empty_class_and_unreadable_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("a")).unwrap();
        assert!(ingest_directory(dir.path()).is_err());
        let bad = dir.path().join("a").join("broken.ppm");
        fs::write(&bad, b"P6\n9 9\n255\n").unwrap();
        let err = ingest_directory(dir.path()).unwrap_err().to_string();
        assert!(err.contains("broken.ppm"), "{err}");
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["x", "y"] {
            fs::create_dir(dir.path().join(class)).unwrap();
            write_img(&dir.path().join(class).join("1.ppm"));
        }
        let d = ingest_directory(dir.path()).unwrap();
        let csv = d.manifest_csv().unwrap();
        assert!(csv.starts_with("path,label,class_name\n"));
        assert!(!csv.contains('\r'));
        let back = Dataset::from_manifest_csv(d.name(), &csv, Path::new("/")).unwrap();
        assert_eq!(back.manifest_csv().unwrap(), csv);
        assert_eq!(ingest_directory(dir.path()).unwrap().manifest_csv().unwrap(), csv);
    }

    #[test]
    fn invariants_enforced() {
        let s = |id: &str, label| Sample {
            id: id.into(),
            source: SampleSource::Inline(Arc::new(ImageU8::filled(1, 1, ChannelOrder::Gray, 0).unwrap())),
            label,
        };
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(Dataset::new("d", names.clone(), vec![s("1", 0), s("1", 1)]).is_err());
        assert!(Dataset::new("d", names.clone(), vec![s("1", 2)]).is_err());
        assert!(Dataset::new("d", vec!["b".into(), "a".into()], vec![]).is_err());
    }
}
