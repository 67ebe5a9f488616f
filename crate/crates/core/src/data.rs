//! Paired image-vector / tabular datasets.
//!
//! The "image" view is a dense feature vector. The tabular view mixes
//! categorical columns (integer codes) and continuous columns, and is turned
//! into a dense matrix by [`featurize_tabular`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// Below this a continuous column is treated as constant and featurized to 0.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TabularSchema {
    /// `(name, cardinality)`
    pub categorical: Vec<(String, usize)>,
    pub continuous: Vec<String>,
}

impl TabularSchema {
    pub fn new(categorical: Vec<(String, usize)>, continuous: Vec<String>) -> Result<Self> {
        let schema = TabularSchema {
            categorical,
            continuous,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// `cat_0..` with the given cardinalities and `num_0..` continuous columns.
    pub fn numbered(cardinalities: &[usize], continuous: usize) -> Result<Self> {
        TabularSchema::new(
            cardinalities
                .iter()
                .enumerate()
                .map(|(i, &c)| (format!("cat_{i}"), c))
                .collect(),
            (0..continuous).map(|i| format!("num_{i}")).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, card) in &self.categorical {
            if *card < 2 {
                return Err(Error::Config(format!(
                    "categorical column {name:?} has cardinality {card}; at least 2 required"
                )));
            }
        }
        let mut names: Vec<&str> = self
            .categorical
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(self.continuous.iter().map(String::as_str))
            .collect();
        let total = names.len();
        names.sort_unstable();
        names.dedup();
        if names.len() != total {
            return Err(Error::Config("duplicate tabular column names".into()));
        }
        if names.iter().any(|n| n.is_empty() || n.contains(',')) {
            return Err(Error::Config("tabular column names must be non-empty and comma-free".into()));
        }
        Ok(())
    }

    /// Width after one-hot encoding.
    pub fn featurized_dim(&self) -> usize {
        self.categorical.iter().map(|(_, c)| c).sum::<usize>() + self.continuous.len()
    }

    /// `key=value` schema text.
    pub fn to_text(&self, classes: usize) -> String {
        let mut s = String::new();
        for (name, card) in &self.categorical {
            let _ = writeln!(s, "categorical.{name}={card}");
        }
        for name in &self.continuous {
            let _ = writeln!(s, "continuous.{name}=1");
        }
        let _ = writeln!(s, "classes={classes}");
        s
    }

    /// Parses schema text; returns the schema and the optional `classes` entry.
    pub fn parse(text: &str) -> Result<(TabularSchema, Option<usize>)> {
        let mut categorical = Vec::new();
        let mut continuous = Vec::new();
        let mut classes = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| err(format!("expected an integer value in {line:?}")))?;
            let key = key.trim();
            if let Some(name) = key.strip_prefix("categorical.") {
                categorical.push((name.to_string(), value));
            } else if let Some(name) = key.strip_prefix("continuous.") {
                if value != 1 {
                    return Err(err(format!("continuous column {name:?} must have value 1")));
                }
                continuous.push(name.to_string());
            } else if key == "classes" {
                classes = Some(value);
            } else {
                return Err(err(format!("unknown schema key {key:?}")));
            }
        }
        Ok((TabularSchema::new(categorical, continuous)?, classes))
    }
}

/// Raw tabular columns: categorical codes and continuous values.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularRaw {
    /// `[N][#categorical]`
    pub categorical: Vec<Vec<usize>>,
    /// `[N × #continuous]`
    pub continuous: Matrix,
}

impl TabularRaw {
    pub fn len(&self) -> usize {
        self.categorical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categorical.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> TabularRaw {
        TabularRaw {
            categorical: idx.iter().map(|&i| self.categorical[i].clone()).collect(),
            continuous: self.continuous.select_rows(idx),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultimodalDataset {
    pub image: Matrix,
    pub tabular: TabularRaw,
    pub labels: Vec<usize>,
    pub schema: TabularSchema,
    pub classes: usize,
}

impl MultimodalDataset {
    pub fn new(
        image: Matrix,
        tabular: TabularRaw,
        labels: Vec<usize>,
        schema: TabularSchema,
        classes: usize,
    ) -> Result<Self> {
        let ds = MultimodalDataset {
            image,
            tabular,
            labels,
            schema,
            classes,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.image.rows() != n || self.tabular.len() != n || self.tabular.continuous.rows() != n {
            return Err(Error::Data(format!(
                "row counts disagree: image {}, tabular {}, labels {n}",
                self.image.rows(),
                self.tabular.len()
            )));
        }
        if let Some(&label) = self.labels.iter().find(|&&y| y >= self.classes) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: self.classes,
            });
        }
        if !self.image.is_finite() || !self.tabular.continuous.is_finite() {
            return Err(Error::Data("non-finite feature value".into()));
        }
        if self.tabular.continuous.cols() != self.schema.continuous.len() {
            return Err(Error::Data("continuous column count does not match schema".into()));
        }
        for row in &self.tabular.categorical {
            if row.len() != self.schema.categorical.len() {
                return Err(Error::Data("categorical column count does not match schema".into()));
            }
            for (&v, (name, card)) in row.iter().zip(&self.schema.categorical) {
                if v >= *card {
                    return Err(Error::UnknownCategory {
                        column: name.clone(),
                        value: v.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_dim(&self) -> usize {
        self.image.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> MultimodalDataset {
        MultimodalDataset {
            image: self.image.select_rows(idx),
            tabular: self.tabular.select(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            schema: self.schema.clone(),
            classes: self.classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Parameters of the synthetic generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub classes: usize,
    pub image_dim: usize,
    pub schema: TabularSchema,
    pub informativeness_image: f64,
    pub informativeness_tabular: f64,
    pub noise: f64,
    /// Width of the latent class prototypes.
    pub prototype_dim: usize,
    /// Class-mean spread per view, in units of the noise scale, at
    /// informativeness 1.
    pub separation: f64,
    /// Tabular continuous columns are copies of the image features. Used to
    /// build a dataset whose two views carry the same information.
    pub mirror_image: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 3000,
            classes: 4,
            image_dim: 64,
            schema: TabularSchema::numbered(&[3, 4, 2, 5], 6).expect("valid default schema"),
            informativeness_image: 0.9,
            informativeness_tabular: 0.6,
            noise: 1.0,
            prototype_dim: 8,
            separation: 3.0,
            mirror_image: false,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        if self.classes < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        if self.n < self.classes {
            return Err(Error::Config(format!(
                "n = {} must be at least the number of classes ({})",
                self.n, self.classes
            )));
        }
        for (name, v) in [
            ("informativeness_image", self.informativeness_image),
            ("informativeness_tabular", self.informativeness_tabular),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise = {} must be finite and >= 0", self.noise)));
        }
        if self.image_dim == 0 || self.prototype_dim == 0 {
            return Err(Error::Config("image_dim and prototype_dim must be positive".into()));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::Config("separation must be positive".into()));
        }
        if self.mirror_image && self.schema.continuous.len() != self.image_dim {
            return Err(Error::Config(
                "mirror_image needs exactly image_dim continuous columns".into(),
            ));
        }
        Ok(())
    }
}

/// Random `[rows × k]` projection with `E‖A·μ‖² = ‖μ‖²/k`.
fn projection(rows: usize, k: usize, rng: &mut RngStream) -> Matrix {
    let scale = 1.0 / ((rows * k) as f64).sqrt();
    Matrix::new(rows, k, (0..rows * k).map(|_| scale * rng.normal()).collect()).expect("sized")
}

/// Samples a paired dataset from per-class latent prototypes.
///
/// Each view is `informativeness · separation · A·μ_y + noise · N(0, I)` with
/// its own random projection `A`. Categorical columns take a per-class
/// preferred value with probability `informativeness_tabular` and are
/// uniform otherwise.
pub fn generate_synthetic(spec: &SyntheticSpec, rng: &RngStream) -> Result<MultimodalDataset> {
    spec.validate()?;
    let k = spec.prototype_dim;
    let mut proto_rng = rng.child(0);
    let prototypes: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..k).map(|_| proto_rng.normal()).collect())
        .collect();
    let a_image = projection(spec.image_dim, k, &mut rng.child(1));
    let n_cont = spec.schema.continuous.len();
    let a_tab = projection(n_cont, k, &mut rng.child(2));
    let mut pref_rng = rng.child(3);
    let preferred: Vec<Vec<usize>> = spec
        .schema
        .categorical
        .iter()
        .map(|(_, card)| (0..spec.classes).map(|_| pref_rng.below(*card)).collect())
        .collect();

    let mut label_rng = rng.child(4);
    let labels: Vec<usize> = (0..spec.n).map(|_| label_rng.below(spec.classes)).collect();

    let means = |a: &Matrix, strength: f64| -> Vec<Vec<f64>> {
        prototypes
            .iter()
            .map(|mu| {
                (0..a.rows())
                    .map(|r| strength * spec.separation * a.row(r).iter().zip(mu).map(|(x, y)| x * y).sum::<f64>())
                    .collect()
            })
            .collect()
    };
    let image_means = means(&a_image, spec.informativeness_image);
    let tab_means = means(&a_tab, spec.informativeness_tabular);

    // One child stream per sample keeps generation order-independent.
    let sample_rng = rng.child(5);
    let mut image = Matrix::zeros(spec.n, spec.image_dim);
    let mut continuous = Matrix::zeros(spec.n, n_cont);
    let mut categorical = Vec::with_capacity(spec.n);
    for (i, &y) in labels.iter().enumerate() {
        let mut r = sample_rng.child(i as u64);
        for (v, m) in image.row_mut(i).iter_mut().zip(&image_means[y]) {
            *v = m + spec.noise * r.normal();
        }
        if spec.mirror_image {
            let copy = image.row(i).to_vec();
            continuous.row_mut(i).copy_from_slice(&copy);
        } else {
            for (v, m) in continuous.row_mut(i).iter_mut().zip(&tab_means[y]) {
                *v = m + spec.noise * r.normal();
            }
        }
        let row = spec
            .schema
            .categorical
            .iter()
            .zip(&preferred)
            .map(|((_, card), pref)| {
                if r.uniform(0.0, 1.0) < spec.informativeness_tabular {
                    pref[y]
                } else {
                    r.below(*card)
                }
            })
            .collect();
        categorical.push(row);
    }

    MultimodalDataset::new(
        image,
        TabularRaw {
            categorical,
            continuous,
        },
        labels,
        spec.schema.clone(),
        spec.classes,
    )
}

/// Per-column mean and standard deviation of the continuous columns.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Population statistics over `raw`. Fit on the training split only.
    pub fn fit(raw: &TabularRaw) -> Result<Self> {
        let n = raw.continuous.rows();
        if n == 0 {
            return Err(Error::Empty("FeatureStats::fit"));
        }
        let mean: Vec<f64> = raw.continuous.column_sums().iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; mean.len()];
        for row in raw.continuous.iter_rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.iter().map(|v| (v / n as f64).sqrt()).collect();
        Ok(FeatureStats { mean, std })
    }
}

/// One-hot categoricals followed by z-scored continuous columns.
pub fn featurize_tabular(raw: &TabularRaw, schema: &TabularSchema, stats: &FeatureStats) -> Result<Matrix> {
    let n_cont = schema.continuous.len();
    if raw.continuous.cols() != n_cont || stats.mean.len() != n_cont || stats.std.len() != n_cont {
        return Err(Error::Data("continuous columns do not match schema/stats".into()));
    }
    let width = schema.featurized_dim();
    let mut out = Matrix::zeros(raw.len(), width);
    for (i, cats) in raw.categorical.iter().enumerate() {
        if cats.len() != schema.categorical.len() {
            return Err(Error::Data(format!(
                "row {i} has {} categorical values, schema has {}",
                cats.len(),
                schema.categorical.len()
            )));
        }
        let row = out.row_mut(i);
        let mut offset = 0;
        for (&v, (name, card)) in cats.iter().zip(&schema.categorical) {
            if v >= *card {
                return Err(Error::UnknownCategory {
                    column: name.clone(),
                    value: v.to_string(),
                });
            }
            row[offset + v] = 1.0;
            offset += card;
        }
        for (j, &x) in raw.continuous.row(i).iter().enumerate() {
            let sd = stats.std[j];
            row[offset + j] = if sd < STD_FLOOR { 0.0 } else { (x - stats.mean[j]) / sd };
        }
    }
    Ok(out)
}

fn csv_header(ds: &MultimodalDataset) -> Vec<String> {
    let mut cols = vec!["id".to_string(), "label".to_string()];
    cols.extend((0..ds.image_dim()).map(|j| format!("img_{j}")));
    cols.extend(ds.schema.categorical.iter().map(|(n, _)| n.clone()));
    cols.extend(ds.schema.continuous.iter().cloned());
    cols
}

/// Serializes the dataset as CSV text. Floats use the shortest
/// round-tripping representation.
pub fn to_csv_string(ds: &MultimodalDataset) -> String {
    let mut s = csv_header(ds).join(",");
    s.push('\n');
    for i in 0..ds.len() {
        let _ = write!(s, "{i},{}", ds.labels[i]);
        for v in ds.image.row(i) {
            let _ = write!(s, ",{v:?}");
        }
        for v in &ds.tabular.categorical[i] {
            let _ = write!(s, ",{v}");
        }
        for v in ds.tabular.continuous.row(i) {
            let _ = write!(s, ",{v:?}");
        }
        s.push('\n');
    }
    s
}

pub fn save_csv(ds: &MultimodalDataset, csv_path: &Path, schema_path: &Path) -> Result<()> {
    fs::write(csv_path, to_csv_string(ds))?;
    fs::write(schema_path, ds.schema.to_text(ds.classes))?;
    Ok(())
}

pub fn load_schema(path: &Path) -> Result<(TabularSchema, Option<usize>)> {
    TabularSchema::parse(&fs::read_to_string(path)?)
}

pub fn load_csv(path: &Path, schema: &TabularSchema, classes: Option<usize>) -> Result<MultimodalDataset> {
    parse_csv(&fs::read_to_string(path)?, schema, classes)
}

/// Parses dataset CSV text. When `classes` is `None` it is inferred as
/// `max(label) + 1`.
pub fn parse_csv(text: &str, schema: &TabularSchema, classes: Option<usize>) -> Result<MultimodalDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header row".into(),
    })?;
    let header: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if header.len() < 2 || header[0] != "id" || header[1] != "label" {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with id,label".into(),
        });
    }
    let n_img = header[2..].iter().take_while(|h| h.starts_with("img_")).count();
    for (j, h) in header[2..2 + n_img].iter().enumerate() {
        if *h != format!("img_{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected img_{j}, found {h}"),
            });
        }
    }
    let expected: Vec<&str> = schema
        .categorical
        .iter()
        .map(|(n, _)| n.as_str())
        .chain(schema.continuous.iter().map(String::as_str))
        .collect();
    let rest = &header[2 + n_img..];
    if rest != expected.as_slice() {
        let missing: Vec<&&str> = expected.iter().filter(|c| !rest.contains(c)).collect();
        return Err(Error::Data(format!(
            "header columns {rest:?} do not match schema {expected:?} (missing: {missing:?})"
        )));
    }
    let width = header.len();
    let n_cat = schema.categorical.len();

    let mut labels = Vec::new();
    let mut image = Vec::new();
    let mut categorical = Vec::new();
    let mut continuous = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let err = |message: String| Error::Parse { line: line_no, message };
        if fields.len() != width {
            return Err(err(format!("expected {width} fields, found {}", fields.len())));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("invalid number {s:?}")))
        };
        labels.push(
            fields[1]
                .trim()
                .parse::<usize>()
                .map_err(|_| err(format!("invalid label {:?}", fields[1])))?,
        );
        for f in &fields[2..2 + n_img] {
            image.push(parse_f(f)?);
        }
        let mut cats = Vec::with_capacity(n_cat);
        for (f, (name, card)) in fields[2 + n_img..2 + n_img + n_cat].iter().zip(&schema.categorical) {
            let v = f.trim().parse::<usize>().ok().filter(|v| v < card).ok_or_else(|| {
                Error::UnknownCategory {
                    column: name.clone(),
                    value: f.to_string(),
                }
            })?;
            cats.push(v);
        }
        categorical.push(cats);
        for f in &fields[2 + n_img + n_cat..] {
            continuous.push(parse_f(f)?);
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::Data("dataset has no rows; at least one is required".into()));
    }
    let classes = match classes {
        Some(c) => c,
        None => labels.iter().max().map_or(0, |m| m + 1).max(2),
    };
    MultimodalDataset::new(
        Matrix::new(n, n_img, image)?,
        TabularRaw {
            categorical,
            continuous: Matrix::new(n, schema.continuous.len(), continuous)?,
        },
        labels,
        schema.clone(),
        classes,
    )
}

/// Result of [`split`]. `stratified` is false when some class was too small
/// and the split fell back to a plain shuffle.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: MultimodalDataset,
    pub val: MultimodalDataset,
    pub test: MultimodalDataset,
    pub stratified: bool,
}

fn allocate(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let a = ((n as f64 * fractions[0]).round() as usize).min(n);
    let b = ((n as f64 * fractions[1]).round() as usize).min(n - a);
    let c = if fractions[2] > 0.0 { n - a - b } else { 0 };
    // Leftovers from rounding go to train when test is disabled.
    [a + (n - a - b - c), b, c]
}

/// Index-level split: three ascending index lists.
pub fn split_indices(labels: &[usize], classes: usize, fractions: [f64; 3], rng: &RngStream) -> Result<([Vec<usize>; 3], bool)> {
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::Config(format!("split fractions {fractions:?} must be in [0,1] and sum to 1")));
    }
    let active = fractions.iter().filter(|&&f| f > 0.0).count();
    let mut by_class = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let stratified = by_class.iter().all(|c| c.len() >= active);
    let groups = if stratified {
        by_class
    } else {
        vec![(0..labels.len()).collect()]
    };
    let mut out: [Vec<usize>; 3] = Default::default();
    for (g, mut idx) in groups.into_iter().enumerate() {
        rng.child(g as u64).shuffle(&mut idx);
        let counts = allocate(idx.len(), fractions);
        let mut start = 0;
        for (dst, count) in out.iter_mut().zip(counts) {
            dst.extend_from_slice(&idx[start..start + count]);
            start += count;
        }
    }
    for part in &mut out {
        part.sort_unstable();
    }
    Ok((out, stratified))
}

/// Seeded train/validation/test split, stratified by label where possible.
pub fn split(ds: &MultimodalDataset, fractions: [f64; 3], rng: &RngStream) -> Result<Splits> {
    let ([tr, va, te], stratified) = split_indices(&ds.labels, ds.classes, fractions, rng)?;
    Ok(Splits {
        train: ds.subset(&tr),
        val: ds.subset(&va),
        test: ds.subset(&te),
        stratified,
    })
}

/// Per-epoch shuffled mini-batches.
#[derive(Clone, Debug)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub drop_last: bool,
    rng: RngStream,
}

impl BatchPlan {
    pub fn new(batch_size: usize, drop_last: bool, rng: RngStream) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(BatchPlan {
            batch_size,
            drop_last,
            rng,
        })
    }

    /// Permutation of `0..n` for `epoch`; a pure function of (stream, epoch).
    pub fn permutation(&self, n: usize, epoch: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.rng.child(epoch as u64).shuffle(&mut p);
        p
    }

    pub fn batches(&self, n: usize, epoch: usize) -> Vec<Vec<usize>> {
        self.permutation(n, epoch)
            .chunks(self.batch_size)
            .filter(|c| !self.drop_last || c.len() == self.batch_size)
            .map(<[usize]>::to_vec)
            .collect()
    }
}

/// Featurized matrices for one split.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    pub image: Matrix,
    pub tabular: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl FeatureSet {
    pub fn from_dataset(ds: &MultimodalDataset, stats: &FeatureStats) -> Result<Self> {
        Ok(FeatureSet {
            image: ds.image.clone(),
            tabular: featurize_tabular(&ds.tabular, &ds.schema, stats)?,
            labels: ds.labels.clone(),
            classes: ds.classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batch(&self, idx: &[usize]) -> FeatureSet {
        FeatureSet {
            image: self.image.select_rows(idx),
            tabular: self.tabular.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    pub fn modality(&self, m: crate::model::Modality) -> &Matrix {
        match m {
            crate::model::Modality::Image => &self.image,
            crate::model::Modality::Tabular => &self.tabular,
        }
    }
}
