//! Long-format panel data with explicit missing-data semantics.
//!
//! Observations are keyed by (entity, time, variable). A cell that is blank
//! or non-numeric in the source file is simply absent; alignment of a set of
//! variables keeps exactly the (entity, time) keys where every requested
//! variable is present (pairwise complete-case deletion).

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metadata for one registered variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub description: String,
    pub unit: String,
}

impl VariableMeta {
    pub fn new(name: impl Into<String>, description: impl Into<String>, unit: impl Into<String>) -> Self {
        Self { name: name.into(), description: description.into(), unit: unit.into() }
    }
}

/// Column mapping for long-format CSV input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub entity: String,
    pub time: String,
    pub variable: String,
    pub value: String,
    /// Optional metadata columns; attached to the variable registry when present.
    pub description: String,
    pub unit: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            entity: "entity".into(),
            time: "year".into(),
            variable: "variable".into(),
            value: "value".into(),
            description: "description".into(),
            unit: "unit".into(),
        }
    }
}

/// A pair of columns restricted to their common complete cases.
#[derive(Debug, Clone)]
pub struct AlignedSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// (entity, time) provenance per row, in (entity, time) lexicographic order.
    pub keys: Vec<(String, i64)>,
}

impl AlignedSeries {
    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Several columns restricted to their common complete cases.
#[derive(Debug, Clone)]
pub struct AlignedTable {
    /// One column per requested variable, in request order.
    pub columns: Vec<Vec<f64>>,
    pub keys: Vec<(String, i64)>,
}

impl AlignedTable {
    pub fn n(&self) -> usize {
        self.keys.len()
    }
}

/// Immutable entity x time x variable observation store.
///
/// Entities are indexed in lexicographic order so that iteration over any
/// per-variable map yields rows in (entity, time) lexicographic order.
#[derive(Debug, Clone)]
pub struct PanelDataset {
    entities: Vec<String>,
    times: Vec<i64>,
    variables: BTreeMap<String, VariableMeta>,
    values: BTreeMap<String, BTreeMap<(u32, i64), f64>>,
}

impl PanelDataset {
    pub fn builder() -> PanelBuilder {
        PanelBuilder::default()
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn variable_names(&self) -> impl Iterator<Item = &str> {
        self.variables.keys().map(|s| s.as_str())
    }

    pub fn variables(&self) -> impl Iterator<Item = &VariableMeta> {
        self.variables.values()
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn meta(&self, name: &str) -> Option<&VariableMeta> {
        self.variables.get(name)
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.variables.contains_key(name)
    }

    /// Number of stored observations for one variable.
    pub fn presence_count(&self, name: &str) -> Result<usize> {
        self.column(name).map(|m| m.len())
    }

    pub fn value(&self, entity: &str, time: i64, variable: &str) -> Option<f64> {
        let idx = self.entities.binary_search_by(|e| e.as_str().cmp(entity)).ok()? as u32;
        self.values.get(variable)?.get(&(idx, time)).copied()
    }

    fn column(&self, name: &str) -> Result<&BTreeMap<(u32, i64), f64>> {
        self.values.get(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Restrict variables `a` and `b` to the (entity, time) keys where both
    /// are present, in (entity, time) lexicographic order.
    pub fn align_pair(&self, a: &str, b: &str) -> Result<AlignedSeries> {
        let table = self.align(&[a, b])?;
        let mut cols = table.columns.into_iter();
        let x = cols.next().unwrap_or_default();
        let y = cols.next().unwrap_or_default();
        if x.is_empty() {
            return Err(Error::EmptyOverlap { a: a.to_string(), b: b.to_string() });
        }
        Ok(AlignedSeries { x, y, keys: table.keys })
    }

    /// Complete-case alignment of an arbitrary set of variables.
    ///
    /// Unlike [`align_pair`](Self::align_pair) this does not treat an empty
    /// intersection as an error; callers that need non-empty output check
    /// `n()` themselves.
    pub fn align(&self, names: &[&str]) -> Result<AlignedTable> {
        let cols: Vec<&BTreeMap<(u32, i64), f64>> =
            names.iter().map(|n| self.column(n)).collect::<Result<_>>()?;
        let (smallest_pos, smallest) = cols
            .iter()
            .enumerate()
            .min_by_key(|(_, m)| m.len())
            .ok_or_else(|| Error::Schema("no variables requested for alignment".into()))?;
        let _ = smallest_pos;
        let mut keys = Vec::new();
        let mut columns = vec![Vec::new(); cols.len()];
        'keys: for key in smallest.keys() {
            let mut row = Vec::with_capacity(cols.len());
            for m in &cols {
                match m.get(key) {
                    Some(v) => row.push(*v),
                    None => continue 'keys,
                }
            }
            for (c, v) in columns.iter_mut().zip(row) {
                c.push(v);
            }
            keys.push((self.entities[key.0 as usize].clone(), key.1));
        }
        Ok(AlignedTable { columns, keys })
    }

    /// Per-entity paired series of `a` and `b` at the times where both are
    /// present, one (entity, times, a-values, b-values) tuple per entity.
    ///
    /// Entities with no overlap are omitted. Times are strictly increasing
    /// within each entity.
    pub fn entity_paired_series(&self, a: &str, b: &str) -> Result<Vec<EntityPairedSeries>> {
        let ca = self.column(a)?;
        let cb = self.column(b)?;
        let mut out: Vec<EntityPairedSeries> = Vec::new();
        let mut current: Option<u32> = None;
        for (key, va) in ca {
            let Some(vb) = cb.get(key) else { continue };
            if current != Some(key.0) {
                current = Some(key.0);
                out.push((self.entities[key.0 as usize].clone(), Vec::new(), Vec::new(), Vec::new()));
            }
            let slot = out.last_mut().expect("segment pushed above");
            slot.1.push(key.1);
            slot.2.push(*va);
            slot.3.push(*vb);
        }
        Ok(out)
    }
}

/// (entity, times, a-values, b-values) for one entity's overlap of a pair.
pub type EntityPairedSeries = (String, Vec<i64>, Vec<f64>, Vec<f64>);

/// Accumulates observations, then freezes into an immutable [`PanelDataset`].
#[derive(Debug, Default)]
pub struct PanelBuilder {
    variables: BTreeMap<String, VariableMeta>,
    // (entity, time, variable) -> value; entity kept as a name until freeze.
    rows: BTreeMap<(String, i64, String), f64>,
}

impl PanelBuilder {
    pub fn add_variable(&mut self, meta: VariableMeta) -> Result<()> {
        if meta.name.is_empty() {
            return Err(Error::Schema("variable name must be nonempty".into()));
        }
        self.variables.entry(meta.name.clone()).or_insert(meta);
        Ok(())
    }

    pub fn add_observation(&mut self, entity: &str, time: i64, variable: &str, value: f64) -> Result<()> {
        if !self.variables.contains_key(variable) {
            self.add_variable(VariableMeta::new(variable, "", ""))?;
        }
        match self.rows.entry((entity.to_string(), time, variable.to_string())) {
            Entry::Occupied(_) => Err(Error::DuplicateKey(format!("({entity}, {time}, {variable})"))),
            Entry::Vacant(slot) => {
                slot.insert(value);
                Ok(())
            }
        }
    }

    pub fn build(self) -> PanelDataset {
        let mut entities: Vec<String> = self.rows.keys().map(|k| k.0.clone()).collect();
        entities.sort();
        entities.dedup();
        let mut times: Vec<i64> = self.rows.keys().map(|k| k.1).collect();
        times.sort_unstable();
        times.dedup();

        let mut values: BTreeMap<String, BTreeMap<(u32, i64), f64>> = BTreeMap::new();
        for name in self.variables.keys() {
            values.insert(name.clone(), BTreeMap::new());
        }
        for ((entity, time, variable), value) in self.rows {
            let idx = entities.binary_search(&entity).expect("entity collected above") as u32;
            values.get_mut(&variable).expect("variable registered").insert((idx, time), value);
        }
        PanelDataset { entities, times, variables: self.variables, values }
    }
}

/// Load a long-format CSV file into a panel dataset.
///
/// Blank or non-numeric value cells are recorded as absent rather than
/// failing the load; rows whose time cell does not parse are skipped the
/// same way. Duplicate (entity, time, variable) keys that both carry a
/// value are a conflict.
pub fn load_panel(path: &Path, schema: &CsvSchema) -> Result<PanelDataset> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let entity_col = find(&schema.entity)
        .ok_or_else(|| Error::Schema(format!("missing required column '{}'", schema.entity)))?;
    let time_col = find(&schema.time)
        .ok_or_else(|| Error::Schema(format!("missing required column '{}'", schema.time)))?;
    let var_col = find(&schema.variable)
        .ok_or_else(|| Error::Schema(format!("missing required column '{}'", schema.variable)))?;
    let value_col = find(&schema.value)
        .ok_or_else(|| Error::Schema(format!("missing required column '{}'", schema.value)))?;
    let desc_col = find(&schema.description);
    let unit_col = find(&schema.unit);

    let mut builder = PanelDataset::builder();
    for record in reader.records() {
        let record = record?;
        let entity = record.get(entity_col).unwrap_or("").trim();
        let variable = record.get(var_col).unwrap_or("").trim();
        if entity.is_empty() || variable.is_empty() {
            continue;
        }
        let Ok(time) = record.get(time_col).unwrap_or("").trim().parse::<i64>() else {
            continue;
        };
        let description = desc_col.and_then(|c| record.get(c)).unwrap_or("").trim();
        let unit = unit_col.and_then(|c| record.get(c)).unwrap_or("").trim();
        builder.add_variable(VariableMeta::new(variable, description, unit))?;
        let raw = record.get(value_col).unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        let Ok(value) = raw.parse::<f64>() else {
            continue;
        };
        if !value.is_finite() {
            continue;
        }
        builder.add_observation(entity, time, variable, value)?;
    }
    Ok(builder.build())
}

/// Center to mean zero and scale to sample standard deviation one.
pub fn standardize(s: &[f64]) -> Result<Vec<f64>> {
    if s.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "standardize needs at least 2 values, got {}",
            s.len()
        )));
    }
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let ss = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let sd = (ss / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance("cannot standardize a constant vector".into()));
    }
    Ok(s.iter().map(|v| (v - mean) / sd).collect())
}

pub(crate) fn sample_mean(s: &[f64]) -> f64 {
    s.iter().sum::<f64>() / s.len() as f64
}

pub(crate) fn sample_sd(s: &[f64]) -> f64 {
    let m = sample_mean(s);
    (s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (s.len() as f64 - 1.0)).sqrt()
}

pub(crate) fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let mx = sample_mean(x);
    let my = sample_mean(y);
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Pearson correlation of an aligned pair.
pub fn pearson_correlation(s: &AlignedSeries) -> Result<f64> {
    let n = s.n();
    if n < 3 {
        return Err(Error::InsufficientData(format!("correlation needs n >= 3, got {n}")));
    }
    let sx = sample_sd(&s.x);
    let sy = sample_sd(&s.y);
    if sx == 0.0 || sy == 0.0 {
        return Err(Error::ZeroVariance("correlation of a constant column".into()));
    }
    let r = sample_cov(&s.x, &s.y) / (sx * sy);
    Ok(r.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().expect("temp file");
        f.write_all(content.as_bytes()).expect("write");
        f
    }

    #[test]
    fn load_small_file() {
        let f = write_csv(
            "entity,year,variable,value\n\
             AAA,2000,gdp,1.5\n\
             BBB,2000,gdp,2.5\n\
             AAA,2001,health,70\n",
        );
        let d = load_panel(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(d.n_variables(), 2);
        assert_eq!(d.entities(), &["AAA".to_string(), "BBB".to_string()]);
        assert_eq!(d.value("AAA", 2000, "gdp"), Some(1.5));
    }

    #[test]
    fn blank_cell_is_absent() {
        let f = write_csv(
            "entity,year,variable,value\n\
             AAA,2000,gdp,1.5\n\
             AAA,2001,gdp,\n\
             AAA,2002,gdp,2.0\n",
        );
        let d = load_panel(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(d.presence_count("gdp").unwrap(), 2);
        assert_eq!(d.value("AAA", 2001, "gdp"), None);
        assert_eq!(d.value("AAA", 2002, "gdp"), Some(2.0));
    }

    #[test]
    fn non_numeric_cell_is_absent() {
        let f = write_csv(
            "entity,year,variable,value\n\
             AAA,2000,gdp,n/a\n\
             AAA,2001,gdp,3.0\n",
        );
        let d = load_panel(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(d.presence_count("gdp").unwrap(), 1);
    }

    #[test]
    fn duplicate_key_is_conflict() {
        let f = write_csv(
            "entity,year,variable,value\n\
             AAA,2000,gdp,1.5\n\
             AAA,2000,gdp,1.6\n",
        );
        let err = load_panel(f.path(), &CsvSchema::default()).unwrap_err();
        match err {
            Error::DuplicateKey(key) => {
                assert!(key.contains("AAA") && key.contains("2000") && key.contains("gdp"), "{key}");
            }
            other => panic!("expected DuplicateKey, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_schema_error() {
        let f = write_csv("entity,year,value\nAAA,2000,1.5\n");
        let err = load_panel(f.path(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err:?}");
    }

    fn staggered_fixture() -> PanelDataset {
        // `a` present at 10 keys, `b` present at 7 of them plus 2 of its own.
        let mut b = PanelDataset::builder();
        for (i, year) in (2000..2010).enumerate() {
            b.add_observation("AAA", year, "a", i as f64 + 1.0).unwrap();
        }
        for year in [2000, 2001, 2003, 2004, 2006, 2008, 2009, 2015, 2016] {
            b.add_observation("AAA", year, "b", (year - 1999) as f64 * 2.0).unwrap();
        }
        b.build()
    }

    #[test]
    fn align_is_key_intersection() {
        // Hand-enumerated overlap: 2000, 2001, 2003, 2004, 2006, 2008, 2009.
        let d = staggered_fixture();
        let s = d.align_pair("a", "b").unwrap();
        assert_eq!(s.n(), 7);
        let years: Vec<i64> = s.keys.iter().map(|k| k.1).collect();
        assert_eq!(years, vec![2000, 2001, 2003, 2004, 2006, 2008, 2009]);
    }

    #[test]
    fn align_self_pair_matches_presence() {
        let d = staggered_fixture();
        let s = d.align_pair("a", "a").unwrap();
        assert_eq!(s.n(), d.presence_count("a").unwrap());
        assert_eq!(s.x, s.y);
    }

    #[test]
    fn align_smaller_subset() {
        let mut b = PanelDataset::builder();
        for year in 2000..2005 {
            b.add_observation("AAA", year, "a", year as f64).unwrap();
        }
        for year in [2001, 2002, 2004] {
            b.add_observation("AAA", year, "b", year as f64).unwrap();
        }
        let d = b.build();
        assert_eq!(d.align_pair("a", "b").unwrap().n(), 3);
    }

    #[test]
    fn align_unknown_variable() {
        let d = staggered_fixture();
        assert!(matches!(d.align_pair("a", "zzz"), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn align_empty_overlap() {
        let mut b = PanelDataset::builder();
        b.add_observation("AAA", 2000, "a", 1.0).unwrap();
        b.add_observation("AAA", 2001, "b", 2.0).unwrap();
        let d = b.build();
        assert!(matches!(d.align_pair("a", "b"), Err(Error::EmptyOverlap { .. })));
    }

    #[test]
    fn align_order_is_entity_then_time() {
        let mut b = PanelDataset::builder();
        for (entity, year) in [("BBB", 2001), ("AAA", 2005), ("AAA", 2001), ("BBB", 2000)] {
            b.add_observation(entity, year, "a", 1.0).unwrap();
            b.add_observation(entity, year, "b", 2.0).unwrap();
        }
        let d = b.build();
        let s = d.align_pair("a", "b").unwrap();
        let keys: Vec<(String, i64)> = s.keys.clone();
        assert_eq!(
            keys,
            vec![
                ("AAA".to_string(), 2001),
                ("AAA".to_string(), 2005),
                ("BBB".to_string(), 2000),
                ("BBB".to_string(), 2001),
            ]
        );
    }

    #[test]
    fn standardize_three_points() {
        // mean 2, sample sd 1 by the direct formula.
        let out = standardize(&[1.0, 2.0, 3.0]).unwrap();
        for (got, want) in out.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_is_idempotent() {
        let v = vec![4.0, -1.0, 7.5, 0.25, 3.0];
        let once = standardize(&v).unwrap();
        let twice = standardize(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_constant_vector() {
        assert!(matches!(standardize(&[5.0, 5.0, 5.0]), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn standardize_too_short() {
        assert!(matches!(standardize(&[1.0]), Err(Error::InsufficientData(_))));
    }

    fn series(x: Vec<f64>, y: Vec<f64>) -> AlignedSeries {
        let keys = (0..x.len()).map(|i| ("e".to_string(), i as i64)).collect();
        AlignedSeries { x, y, keys }
    }

    #[test]
    fn pearson_exact_linear() {
        let s = series(vec![-1.0, 0.0, 1.0], vec![-2.0, 0.0, 2.0]);
        assert!((pearson_correlation(&s).unwrap() - 1.0).abs() < 1e-12);
        let s = series(vec![-1.0, 0.0, 1.0], vec![2.0, 0.0, -2.0]);
        assert!((pearson_correlation(&s).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_computed() {
        // cov = 0.5, sd_x = sd_y = 1 by direct evaluation.
        let s = series(vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 3.0]);
        assert!((pearson_correlation(&s).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        let s = series(vec![1.0, 2.0], vec![2.0, 1.0]);
        assert!(matches!(pearson_correlation(&s), Err(Error::InsufficientData(_))));
        let s = series(vec![1.0, 1.0, 1.0], vec![2.0, 1.0, 3.0]);
        assert!(matches!(pearson_correlation(&s), Err(Error::ZeroVariance(_))));
    }
}
