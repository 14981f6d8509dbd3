use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{RngState, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Part> {
        match s {
            "train" => Some(Part::Train),
            "val" | "validation" => Some(Part::Val),
            "test" => Some(Part::Test),
            _ => None,
        }
    }
}

/// Disjoint train / validation / test index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn part(&self, part: Part) -> &[usize] {
        match part {
            Part::Train => &self.train,
            Part::Val => &self.validation,
            Part::Test => &self.test,
        }
    }

    /// Checks that the parts are disjoint and together cover `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.validation).chain(&self.test) {
            if i >= n {
                return Err(Error::Data(format!("split index {i} outside dataset of {n}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Data(format!("split index {i} appears twice")));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Data(format!("split does not cover index {i}")));
        }
        Ok(())
    }
}

/// Per class: shuffle with the `(seed, class)` stream, give each part
/// `floor(n · ratio)` samples, then hand out the remainder one at a time in
/// train → validation → test order.
pub fn stratified_split(d: &Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<SplitIndices> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|&x| !(x > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be positive and sum to 1, got {r:?}"
        )));
    }
    let mut out = SplitIndices::default();
    for (class, mut idx) in d.indices_by_class().into_iter().enumerate() {
        let n = idx.len();
        if n < 3 {
            return Err(Error::Data(format!(
                "class {} has {n} samples; a three-way split needs at least 3",
                d.class_names()[class]
            )));
        }
        RngState::stream(seed, Stream::Split, class as u64, 0).shuffle(&mut idx);
        let mut counts = r.map(|x| (n as f64 * x + 1e-9).floor() as usize);
        let mut rem = n - counts.iter().sum::<usize>();
        let mut p = 0;
        while rem > 0 {
            counts[p % 3] += 1;
            rem -= 1;
            p += 1;
        }
        let (a, rest) = idx.split_at(counts[0]);
        let (b, c) = rest.split_at(counts[1]);
        out.train.extend_from_slice(a);
        out.validation.extend_from_slice(b);
        out.test.extend_from_slice(c);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Stratified k-fold: each class is shuffled with its `(seed, class)`
/// stream and dealt round-robin into folds (continuing the deal across
/// classes so fold sizes differ by at most one). Returns `(train, val)`
/// pairs, fold `i` being the validation set of pair `i`.
pub fn kfold_split(d: &Dataset, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k-fold needs k ≥ 2, got {k}")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut deal = 0usize;
    for (class, mut idx) in d.indices_by_class().into_iter().enumerate() {
        if idx.len() < k {
            return Err(Error::Data(format!(
                "class {} has {} samples, fewer than k = {k}",
                d.class_names()[class],
                idx.len()
            )));
        }
        RngState::stream(seed, Stream::Fold, class as u64, 0).shuffle(&mut idx);
        for i in idx {
            folds[deal % k].push(i);
            deal += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok((0..k)
        .map(|v| {
            let mut train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != v)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            train.sort_unstable();
            (train, folds[v].clone())
        })
        .collect())
}

/// Split CSV: header `index,part`, rows sorted by index, LF endings.
pub fn write_split_csv(split: &SplitIndices) -> String {
    let mut rows: Vec<(usize, Part)> = split
        .train
        .iter()
        .map(|&i| (i, Part::Train))
        .chain(split.validation.iter().map(|&i| (i, Part::Val)))
        .chain(split.test.iter().map(|&i| (i, Part::Test)))
        .collect();
    rows.sort_unstable_by_key(|r| r.0);
    let mut out = String::from("index,part\n");
    for (i, p) in rows {
        out.push_str(&format!("{i},{}\n", p.as_str()));
    }
    out
}

pub fn read_split_csv(text: &str) -> Result<SplitIndices> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("index,part") {
        return Err(Error::Data("split file must start with header index,part".into()));
    }
    let mut split = SplitIndices::default();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Data(format!("split file line {}: {line:?}", n + 2));
        let (i, p) = line.split_once(',').ok_or_else(bad)?;
        let i: usize = i.trim().parse().map_err(|_| bad())?;
        match Part::parse(p.trim()).ok_or_else(bad)? {
            Part::Train => split.train.push(i),
            Part::Val => split.validation.push(i),
            Part::Test => split.test.push(i),
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Sample, SampleSource};
    use std::path::PathBuf;

    fn dataset(counts: &[usize]) -> Dataset {
        let names = (0..counts.len()).map(|c| format!("c{c}")).collect();
        let mut samples = Vec::new();
        for (label, &n) in counts.iter().enumerate() {
            for i in 0..n {
                samples.push(Sample {
                    id: format!("{label}/{i}"),
                    source: SampleSource::Path(PathBuf::from(format!("{label}/{i}.ppm"))),
                    label,
                });
            }
        }
        Dataset::new("t", names, samples).unwrap()
    }

    fn per_class(d: &Dataset, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; d.num_classes()];
        for &i in idx {
            c[d.samples()[i].label] += 1;
        }
        c
    }

    #[test]
    fn balanced_binary_80_10_10() {
        let d = dataset(&[1000, 1000]);
        let s = stratified_split(&d, (0.8, 0.1, 0.1), 1000).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (1600, 200, 200));
        assert_eq!(per_class(&d, &s.train), vec![800, 800]);
        assert_eq!(per_class(&d, &s.validation), vec![100, 100]);
        assert_eq!(per_class(&d, &s.test), vec![100, 100]);
        s.validate(d.len()).unwrap();
    }

    #[test]
    fn floor_then_remainder() {
        let d = dataset(&[100, 100, 100]);
        let s = stratified_split(&d, (0.98, 0.01, 0.01), 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (294, 3, 3));
        // 7 samples: floors 5/0/0, remainder 2 → train, val
        let d = dataset(&[7]);
        let s = stratified_split(&d, (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (6, 1, 0));
    }

    #[test]
    fn invalid_ratios_and_small_class() {
        let d = dataset(&[10]);
        assert!(stratified_split(&d, (1.0, 0.0, 0.0), 1).is_err());
        assert!(stratified_split(&d, (0.5, 0.3, 0.3), 1).is_err());
        let d = dataset(&[10, 2]);
        let err = stratified_split(&d, (0.8, 0.1, 0.1), 1).unwrap_err().to_string();
        assert!(err.contains("c1"), "{err}");
    }

    #[test]
    fn split_is_seeded() {
        let d = dataset(&[50, 30]);
        let a = stratified_split(&d, (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!(a, stratified_split(&d, (0.8, 0.1, 0.1), 7).unwrap());
        assert_ne!(a, stratified_split(&d, (0.8, 0.1, 0.1), 8).unwrap());
    }

    #[test]
    fn five_folds_of_ten() {
        let d = dataset(&[5, 5]);
        let folds = kfold_split(&d, 5, 1000).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = vec![0; 10];
        for (train, val) in &folds {
            assert_eq!(val.len(), 2);
            assert_eq!(train.len(), 8);
            assert!(train.iter().all(|i| !val.contains(i)));
            for &i in val {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(folds, kfold_split(&d, 5, 1000).unwrap());
    }

    #[test]
    fn kfold_rejects_small_class() {
        let d = dataset(&[5, 3]);
        assert!(kfold_split(&d, 4, 1).is_err());
        assert!(kfold_split(&d, 1, 1).is_err());
    }

    #[test]
    fn split_csv_round_trip() {
        let d = dataset(&[10, 10]);
        let s = stratified_split(&d, (0.8, 0.1, 0.1), 3).unwrap();
        let text = write_split_csv(&s);
        assert!(text.starts_with("index,part\n0,"));
        assert_eq!(read_split_csv(&text).unwrap(), s);
    }
}
