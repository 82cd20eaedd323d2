//! CSV ingestion: schema-driven encoding and binning, the COMPAS recipe, and
//! empirical joint distributions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{JointDistribution, Role, Variable, VariableSchema};

/// Version written to and expected in schema spec files.
pub const SCHEMA_SPEC_VERSION: u32 = 1;

/// Cell contents treated as missing.
const MISSING_TOKENS: [&str; 2] = ["", "NA"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    DropRecord,
}

/// Which side of each cut point is closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Bins `(-inf, c0], (c0, c1], ..., (c_last, inf)`.
    Right,
    /// Bins `(-inf, c0), [c0, c1), ..., [c_last, inf)`.
    Left,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// Codes follow the declared level order.
    Categorical { levels: Vec<String> },
    /// Numeric values mapped by cut points; `k` cuts give `k + 1` levels.
    Binned { cuts: Vec<f64>, boundary: Boundary },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: Role,
    #[serde(flatten)]
    pub kind: ColumnKind,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
}

impl ColumnSpec {
    pub fn cardinality(&self) -> usize {
        match &self.kind {
            ColumnKind::Categorical { levels } => levels.len(),
            ColumnKind::Binned { cuts, .. } => cuts.len() + 1,
        }
    }

    /// Code for a raw (non-missing) cell; `None` if it is not a valid value.
    fn encode(&self, raw: &str) -> Option<usize> {
        match &self.kind {
            ColumnKind::Categorical { levels } => levels.iter().position(|l| l == raw),
            ColumnKind::Binned { cuts, boundary } => {
                let x: f64 = raw.parse().ok().filter(|x: &f64| x.is_finite())?;
                Some(match boundary {
                    Boundary::Right => cuts.iter().filter(|&&c| c < x).count(),
                    Boundary::Left => cuts.iter().filter(|&&c| c <= x).count(),
                })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            ColumnKind::Categorical { levels } => {
                for (i, l) in levels.iter().enumerate() {
                    if levels[..i].contains(l) {
                        return Err(Error::Schema(format!("column {:?} repeats level {l:?}", self.name)));
                    }
                }
            }
            ColumnKind::Binned { cuts, .. } => {
                if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Schema(format!(
                        "column {:?}: cut points must be finite and strictly increasing",
                        self.name
                    )));
                }
            }
        }
        if self.cardinality() < 2 {
            return Err(Error::Schema(format!("column {:?} has fewer than 2 levels", self.name)));
        }
        Ok(())
    }
}

/// Versioned description of how to encode a CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub schema_version: u32,
    pub columns: Vec<ColumnSpec>,
}

impl SchemaSpec {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let spec = SchemaSpec {
            schema_version: SCHEMA_SPEC_VERSION,
            columns,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SchemaSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Reads already integer-coded columns: levels `"0" .. "k-1"`.
    pub fn for_codes(schema: &VariableSchema) -> Self {
        let columns = schema
            .variables()
            .iter()
            .map(|v| ColumnSpec {
                name: v.name.clone(),
                role: v.role,
                kind: ColumnKind::Categorical {
                    levels: (0..v.cardinality).map(|k| k.to_string()).collect(),
                },
                missing_policy: MissingPolicy::DropRecord,
            })
            .collect();
        SchemaSpec {
            schema_version: SCHEMA_SPEC_VERSION,
            columns,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_SPEC_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {} (expected {SCHEMA_SPEC_VERSION})",
                self.schema_version
            )));
        }
        for c in &self.columns {
            c.validate()?;
        }
        self.variable_schema()?.validate_roles()
    }

    pub fn variable_schema(&self) -> Result<VariableSchema> {
        VariableSchema::new(
            self.columns
                .iter()
                .map(|c| Variable::new(c.name.clone(), c.cardinality(), c.role))
                .collect(),
        )
    }
}

/// Where a dataset came from and what was discarded on the way.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub rows_read: usize,
    pub rows_dropped: usize,
    /// Free-form notes on derived columns and filters.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Integer-coded records over a schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: VariableSchema,
    rows: Vec<Vec<usize>>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(schema: VariableSchema, rows: Vec<Vec<usize>>, provenance: Provenance) -> Result<Self> {
        let cards = schema.cardinalities();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cards.len() {
                return Err(Error::Schema(format!(
                    "record {r} has {} values, schema has {}",
                    row.len(),
                    cards.len()
                )));
            }
            if let Some(k) = (0..cards.len()).find(|&k| row[k] >= cards[k]) {
                return Err(Error::Schema(format!(
                    "record {r}: code {} out of range for {:?}",
                    row[k],
                    schema.get(k).name
                )));
            }
        }
        Ok(Dataset {
            schema,
            rows,
            provenance,
        })
    }

    pub fn schema(&self) -> &VariableSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Writes the integer codes with a header of variable names.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file)
    }

    pub fn write_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.schema.variables().iter().map(|v| v.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell)
}

/// Reads a CSV file with a header row and encodes the columns named in
/// `spec` (other columns are ignored). Records with a missing or
/// unparseable value in any schema column are dropped and counted; an
/// unknown categorical level is an error.
pub fn load_csv(path: impl AsRef<Path>, spec: &SchemaSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_reader(file, spec, &path.display().to_string())
}

/// [`load_csv`] over any reader; `source` is recorded in the provenance.
pub fn load_reader<R: std::io::Read>(input: R, spec: &SchemaSpec, source: &str) -> Result<Dataset> {
    spec.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let positions = spec
        .columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == c.name)
                .ok_or_else(|| Error::Schema(format!("{source}: missing column {:?}", c.name)))
        })
        .collect::<Result<Vec<usize>>>()?;

    let mut rows = Vec::new();
    let mut read = 0;
    let mut dropped = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        read += 1;
        let mut row = Vec::with_capacity(positions.len());
        let mut keep = true;
        for (col, &pos) in spec.columns.iter().zip(&positions) {
            let cell = record.get(pos).unwrap_or("").trim();
            if is_missing(cell) {
                keep = false;
                break;
            }
            match (col.encode(cell), &col.kind) {
                (Some(code), _) => row.push(code),
                (None, ColumnKind::Categorical { .. }) => {
                    return Err(Error::Level {
                        row: r + 1,
                        column: col.name.clone(),
                        value: cell.to_string(),
                    })
                }
                // unparseable number
                (None, ColumnKind::Binned { .. }) => {
                    keep = false;
                    break;
                }
            }
        }
        if keep {
            rows.push(row);
        } else {
            dropped += 1;
        }
    }
    Dataset::new(
        spec.variable_schema()?,
        rows,
        Provenance {
            source: source.to_string(),
            rows_read: read,
            rows_dropped: dropped,
            notes: Vec::new(),
        },
    )
}

/// Cell probabilities `(count + smoothing) / (m + smoothing * cells)`.
pub fn empirical_joint(data: &Dataset, smoothing: f64) -> Result<JointDistribution> {
    if data.is_empty() {
        return Err(Error::Argument("empirical joint of an empty dataset".into()));
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::Argument(format!("smoothing must be finite and >= 0, got {smoothing}")));
    }
    let counts = cell_counts(data)?;
    let m = data.len() as f64;
    let denom = m + smoothing * counts.len() as f64;
    let probs = counts.iter().map(|&c| (c as f64 + smoothing) / denom).collect();
    JointDistribution::new(data.schema.clone(), probs)
}

/// Integer record counts per cell, row-major over the schema.
pub fn cell_counts(data: &Dataset) -> Result<Vec<u64>> {
    let cells = data
        .schema
        .cell_count()
        .ok_or_else(|| Error::Size("joint table size overflows".into()))?;
    let strides = data.schema.strides();
    let mut counts = vec![0u64; cells];
    for row in &data.rows {
        let idx: usize = row.iter().zip(&strides).map(|(c, s)| c * s).sum();
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Record counts reported for the processed COMPAS data.
pub const COMPAS_TARGET_TOTAL: usize = 5334;
pub const COMPAS_TARGET_AFRICAN_AMERICAN: usize = 3247;
pub const COMPAS_TARGET_CAUCASIAN: usize = 2087;

/// Output column names of the COMPAS recipe, in order.
pub const COMPAS_COLUMNS: [&str; 7] = [
    "race",
    "age",
    "charge_degree",
    "gender",
    "prior_counts",
    "length_of_stay",
    "two_year_recid",
];

/// Schema of the encoded COMPAS dataset.
pub fn compas_schema() -> VariableSchema {
    let cards = [2, 3, 2, 2, 3, 3, 2];
    let roles = [
        Role::Protected,
        Role::Feature,
        Role::Feature,
        Role::Feature,
        Role::Feature,
        Role::Feature,
        Role::Label,
    ];
    let vars = COMPAS_COLUMNS
        .iter()
        .zip(cards)
        .zip(roles)
        .map(|((n, c), r)| Variable::new(*n, c, r))
        .collect();
    VariableSchema::new(vars).expect("static schema")
}

/// Counts gathered while applying the COMPAS recipe.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompasSummary {
    pub rows_read: usize,
    pub kept: usize,
    pub african_american: usize,
    pub caucasian: usize,
    /// Records whose race is neither group.
    pub excluded_race: usize,
    /// Records dropped for a missing or unusable value, by source column.
    pub dropped: BTreeMap<String, usize>,
    /// True when length of stay came from jail in/out dates.
    pub length_of_stay_derived: bool,
    /// True when the input was already encoded.
    pub already_encoded: bool,
}

impl CompasSummary {
    /// One line per count that differs from the reported target.
    pub fn diff_against_targets(&self) -> Vec<String> {
        [
            ("total", self.kept, COMPAS_TARGET_TOTAL),
            ("african_american", self.african_american, COMPAS_TARGET_AFRICAN_AMERICAN),
            ("caucasian", self.caucasian, COMPAS_TARGET_CAUCASIAN),
        ]
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(what, got, want)| {
            format!("{what}: got {got}, target {want} ({:+})", *got as i64 - *want as i64)
        })
        .collect()
    }
}

/// Bins applied to the raw COMPAS columns: priors `0 | 1-3 | >3` and length
/// of stay in days `<=7 | 8-90 | >90` (right-closed). Age is `<25 | 25-45 |
/// >45`, which mixes boundary sides and is coded in [`age_bin`].
const PRIORS_CUTS: [f64; 2] = [0.0, 3.0];
const STAY_CUTS: [f64; 2] = [7.0, 90.0];

fn age_bin(age: f64) -> usize {
    if age < 25.0 {
        0
    } else if age <= 45.0 {
        1
    } else {
        2
    }
}

fn bin_right(cuts: &[f64], x: f64) -> usize {
    cuts.iter().filter(|&&c| c < x).count()
}

/// Applies the COMPAS recipe to a raw ProPublica export (or re-reads an
/// already encoded file, which is then returned unchanged).
///
/// Only African-American (`race = 0`) and Caucasian (`race = 1`) records are
/// kept. Records missing any used value are dropped. Length of stay uses a
/// `length_of_stay` column when present and is otherwise derived from
/// `c_jail_out - c_jail_in` in whole days.
pub fn compas_preprocess(path: impl AsRef<Path>) -> Result<(Dataset, CompasSummary)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    compas_from_reader(file, &path.display().to_string())
}

pub fn compas_from_reader<R: std::io::Read>(mut input: R, source: &str) -> Result<(Dataset, CompasSummary)> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| Error::io(source, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Schema(format!("{source}: no header row")));
    }
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);

    if find("charge_degree").is_some() && find("c_charge_degree").is_none() {
        let spec = SchemaSpec::for_codes(&compas_schema());
        let data = load_reader(text.as_bytes(), &spec, source)?;
        return Ok(encoded_summary(data));
    }

    let need = |name: &str| find(name).ok_or_else(|| Error::Schema(format!("{source}: missing column {name:?}")));
    let race = need("race")?;
    let age = need("age")?;
    let charge = need("c_charge_degree")?;
    let sex = need("sex")?;
    let priors = need("priors_count")?;
    let label = need("two_year_recid")?;
    let stay = match find("length_of_stay") {
        Some(col) => Stay::Column(col),
        None => Stay::Dates(need("c_jail_in")?, need("c_jail_out")?),
    };

    let mut summary = CompasSummary {
        length_of_stay_derived: matches!(stay, Stay::Dates(..)),
        ..CompasSummary::default()
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        summary.rows_read += 1;
        let cell = |k: usize| record.get(k).unwrap_or("").trim();
        let race_code = match cell(race) {
            "African-American" => 0,
            "Caucasian" => 1,
            other if is_missing(other) => {
                *summary.dropped.entry("race".into()).or_default() += 1;
                continue;
            }
            _ => {
                summary.excluded_race += 1;
                continue;
            }
        };
        match encode_compas_record(&cell, age, charge, sex, priors, label, &stay) {
            Ok(mut codes) => {
                codes.insert(0, race_code);
                if race_code == 0 {
                    summary.african_american += 1;
                } else {
                    summary.caucasian += 1;
                }
                rows.push(codes);
            }
            Err(column) => *summary.dropped.entry(column.into()).or_default() += 1,
        }
    }
    summary.kept = rows.len();
    let mut notes = vec![
        "race: African-American=0, Caucasian=1, other races excluded".to_string(),
        "age bins: <25, 25-45, >45".to_string(),
        "prior_counts bins: 0, 1-3, >3".to_string(),
        "length_of_stay bins (days): <=7, 8-90, >90".to_string(),
    ];
    if summary.length_of_stay_derived {
        notes.push("length_of_stay derived as whole days of c_jail_out - c_jail_in".into());
    }
    let provenance = Provenance {
        source: source.to_string(),
        rows_read: summary.rows_read,
        rows_dropped: summary.rows_read - summary.kept,
        notes,
    };
    Ok((Dataset::new(compas_schema(), rows, provenance)?, summary))
}

fn encoded_summary(data: Dataset) -> (Dataset, CompasSummary) {
    let african_american = data.rows.iter().filter(|r| r[0] == 0).count();
    let summary = CompasSummary {
        rows_read: data.provenance.rows_read,
        kept: data.len(),
        african_american,
        caucasian: data.len() - african_american,
        excluded_race: 0,
        dropped: if data.provenance.rows_dropped > 0 {
            BTreeMap::from([("encoded".to_string(), data.provenance.rows_dropped)])
        } else {
            BTreeMap::new()
        },
        length_of_stay_derived: false,
        already_encoded: true,
    };
    (data, summary)
}

enum Stay {
    Column(usize),
    Dates(usize, usize),
}

/// Codes for age .. label (race excluded), or the name of the first column
/// that made the record unusable.
fn encode_compas_record<'a>(
    cell: &dyn Fn(usize) -> &'a str,
    age: usize,
    charge: usize,
    sex: usize,
    priors: usize,
    label: usize,
    stay: &Stay,
) -> std::result::Result<Vec<usize>, &'static str> {
    let number = |k: usize, name: &'static str| -> std::result::Result<f64, &'static str> {
        cell(k).parse::<f64>().ok().filter(|x| x.is_finite() && *x >= 0.0).ok_or(name)
    };
    let age_code = age_bin(number(age, "age")?);
    let charge_code = match cell(charge) {
        "M" => 0,
        "F" => 1,
        _ => return Err("c_charge_degree"),
    };
    let sex_code = match cell(sex) {
        "Male" => 0,
        "Female" => 1,
        _ => return Err("sex"),
    };
    let priors_code = bin_right(&PRIORS_CUTS, number(priors, "priors_count")?);
    let days = match stay {
        Stay::Column(k) => number(*k, "length_of_stay")?,
        Stay::Dates(jail_in, jail_out) => {
            let start = parse_timestamp(cell(*jail_in)).ok_or("c_jail_in")?;
            let end = parse_timestamp(cell(*jail_out)).ok_or("c_jail_out")?;
            let days = (end - start).num_days();
            if days < 0 {
                return Err("c_jail_out");
            }
            days as f64
        }
    };
    let stay_code = bin_right(&STAY_CUTS, days);
    let label_code = match cell(label) {
        "0" => 0,
        "1" => 1,
        _ => return Err("two_year_recid"),
    };
    Ok(vec![age_code, charge_code, sex_code, priors_code, stay_code, label_code])
}

fn parse_timestamp(s: &str) -> Option<chrono::NaiveDateTime> {
    use chrono::{NaiveDate, NaiveDateTime};
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
        .ok()
        .or_else(|| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SchemaSpec {
        SchemaSpec::from_json(
            r#"{
              "schema_version": 1,
              "columns": [
                {"name": "sex", "role": "protected", "kind": "categorical", "levels": ["Male", "Female"]},
                {"name": "age", "role": "feature", "kind": "binned", "cuts": [24, 45], "boundary": "right"},
                {"name": "y", "role": "label", "kind": "categorical", "levels": ["0", "1"]}
              ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn declared_level_order_and_bins() {
        let csv = "id,sex,age,y\n1,Male,23,0\n2,Female,25,1\n3,Female,45,0\n4,Male,46,1\n5,Male,24.5,0\n";
        let d = load_reader(csv.as_bytes(), &spec(), "t").unwrap();
        let codes: Vec<_> = d.rows().iter().map(|r| (r[0], r[1], r[2])).collect();
        assert_eq!(codes, vec![(0, 0, 0), (1, 1, 1), (1, 1, 0), (0, 2, 1), (0, 1, 0)]);
        assert_eq!(d.provenance().rows_read, 5);
        assert_eq!(d.provenance().rows_dropped, 0);
    }

    #[test]
    fn left_closed_bins() {
        let col = ColumnSpec {
            name: "x".into(),
            role: Role::Feature,
            kind: ColumnKind::Binned {
                cuts: vec![1.0, 2.0],
                boundary: Boundary::Left,
            },
            missing_policy: MissingPolicy::DropRecord,
        };
        assert_eq!(col.encode("0.5"), Some(0));
        assert_eq!(col.encode("1"), Some(1));
        assert_eq!(col.encode("2"), Some(2));
        assert_eq!(col.encode("abc"), None);
    }

    #[test]
    fn missing_cells_drop_the_record() {
        let csv = "sex,age,y\nMale,,0\nNA,30,1\nFemale,30,1\nMale,old,0\n";
        let d = load_reader(csv.as_bytes(), &spec(), "t").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.provenance().rows_read, 4);
        assert_eq!(d.provenance().rows_dropped, 3);
    }

    #[test]
    fn header_only_file_is_empty() {
        let d = load_reader("sex,age,y\n".as_bytes(), &spec(), "t").unwrap();
        assert!(d.is_empty());
        assert_eq!(d.provenance().rows_read, 0);
    }

    #[test]
    fn unknown_level_and_missing_column() {
        let err = load_reader("sex,age,y\nMale,30,0\nOther,30,1\n".as_bytes(), &spec(), "t").unwrap_err();
        match err {
            Error::Level { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "sex", "Other"));
            }
            other => panic!("{other}"),
        }
        let err = load_reader("sex,y\nMale,0\n".as_bytes(), &spec(), "t").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn spec_validation() {
        let bad_cuts = r#"{"schema_version": 1, "columns": [
            {"name": "a", "role": "protected", "kind": "binned", "cuts": [3, 1], "boundary": "right"}]}"#;
        assert!(SchemaSpec::from_json(bad_cuts).is_err());
        let bad_version = r#"{"schema_version": 2, "columns": []}"#;
        assert!(SchemaSpec::from_json(bad_version).is_err());
        let round = serde_json::to_string(&spec()).unwrap();
        assert_eq!(SchemaSpec::from_json(&round).unwrap(), spec());
    }

    fn tiny(rows: Vec<Vec<usize>>) -> Dataset {
        let schema = VariableSchema::new(vec![
            Variable::new("a", 2, Role::Protected),
            Variable::new("y", 2, Role::Label),
        ])
        .unwrap();
        Dataset::new(schema, rows, Provenance::default()).unwrap()
    }

    #[test]
    fn empirical_joint_examples() {
        let one = empirical_joint(&tiny(vec![vec![1, 0]]), 0.0).unwrap();
        assert_eq!(one.probs(), &[0.0, 0.0, 1.0, 0.0]);
        let two = empirical_joint(&tiny(vec![vec![0, 1], vec![1, 0]]), 0.0).unwrap();
        assert_eq!(two.probs(), &[0.0, 0.5, 0.5, 0.0]);
        let eps = 0.25;
        let s = empirical_joint(&tiny(vec![vec![0, 1], vec![1, 0]]), eps).unwrap();
        assert_eq!(s.probs()[0], eps / (2.0 + eps * 4.0));
        assert!(empirical_joint(&tiny(vec![]), 0.0).is_err());
    }

    #[test]
    fn dataset_rejects_out_of_range_codes() {
        let schema = compas_schema();
        assert!(Dataset::new(schema, vec![vec![0, 3, 0, 0, 0, 0, 0]], Provenance::default()).is_err());
    }

    const RAW: &str = "\
id,sex,age,race,priors_count,c_jail_in,c_jail_out,c_charge_degree,two_year_recid
1,Male,23,African-American,2,2013-08-13 06:03:42,2013-08-14 05:41:20,F,1
2,Female,45,Caucasian,0,2013-01-01 00:00:00,2013-01-09 00:00:00,M,0
3,Male,46,Hispanic,5,2013-01-01 00:00:00,2013-01-02 00:00:00,F,0
4,Male,30,Caucasian,4,,,F,1
5,Female,25,African-American,3,2013-01-01 10:00:00,2013-04-01 09:00:00,M,0
6,Male,60,Caucasian,1,2013-01-01 10:00:00,2013-04-02 11:00:00,M,1
";

    #[test]
    fn compas_recipe() {
        let (d, s) = compas_from_reader(RAW.as_bytes(), "raw").unwrap();
        assert_eq!(s.rows_read, 6);
        assert_eq!(s.excluded_race, 1);
        assert_eq!(s.dropped.get("c_jail_in"), Some(&1));
        assert_eq!((s.kept, s.african_american, s.caucasian), (4, 2, 2));
        assert!(s.length_of_stay_derived);
        let rows = d.rows();
        // race, age, charge, gender, priors, stay, label
        assert_eq!(rows[0], vec![0, 0, 1, 0, 1, 0, 1]);
        assert_eq!(rows[1], vec![1, 1, 0, 1, 0, 1, 0]);
        // 89 days 23 hours is 89 whole days
        assert_eq!(rows[2], vec![0, 1, 0, 1, 1, 1, 0]);
        assert_eq!(rows[3], vec![1, 2, 0, 0, 1, 2, 1]);
        assert_eq!(s.diff_against_targets().len(), 3);
    }

    #[test]
    fn compas_re_encoding_is_identity() {
        let (d, _) = compas_from_reader(RAW.as_bytes(), "raw").unwrap();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let (again, s) = compas_from_reader(buf.as_slice(), "encoded").unwrap();
        assert!(s.already_encoded);
        assert_eq!(again.rows(), d.rows());
        assert_eq!(again.schema(), d.schema());
    }

    #[test]
    fn age_bins_close_on_both_ends_of_the_middle() {
        let bins: Vec<_> = [0.0, 24.9, 25.0, 45.0, 45.1].into_iter().map(age_bin).collect();
        assert_eq!(bins, vec![0, 0, 1, 1, 2]);
    }

    #[test]
    fn compas_missing_column() {
        let err = compas_from_reader("id,sex,age\n1,Male,30\n".as_bytes(), "raw").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        assert!(compas_from_reader("".as_bytes(), "empty").is_err());
    }
}
