//! Rating file readers and the dense id mapping.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Interaction, InteractionMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    /// `user \t item \t rating \t timestamp`
    MovielensTab,
    /// `user::item::rating::timestamp`
    MovielensDoubleColon,
    /// header `user,item,rating[,timestamp]`
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "movielens-tab" => Ok(Format::MovielensTab),
            "movielens-double-colon" => Ok(Format::MovielensDoubleColon),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Inclusive bounds every rating must satisfy.
    pub rating_range: Option<(f64, f64)>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            rating_range: Some((1.0, 5.0)),
        }
    }
}

/// Dense index <-> raw identifier for one entity class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    raw: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    /// Dense ids follow numeric order when every raw id is an integer and
    /// lexicographic order otherwise.
    pub fn from_raw<'a>(ids: impl IntoIterator<Item = &'a str>) -> Self {
        let mut raw: Vec<String> = ids.into_iter().map(str::to_owned).collect();
        raw.sort();
        raw.dedup();
        if raw.iter().all(|r| r.parse::<i64>().is_ok()) {
            raw.sort_by_key(|r| r.parse::<i64>().expect("checked"));
        }
        Self::from_ordered(raw)
    }

    fn from_ordered(raw: Vec<String>) -> Self {
        let index = raw
            .iter()
            .enumerate()
            .map(|(i, r)| (r.clone(), i as u32))
            .collect();
        Self { raw, index }
    }

    /// Identity mapping `0..n`.
    pub fn identity(n: usize) -> Self {
        Self::from_ordered((0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn dense(&self, raw: &str) -> Option<u32> {
        self.index.get(raw).copied()
    }

    pub fn raw(&self, dense: usize) -> &str {
        &self.raw[dense]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("raw_id,dense_index\n");
        for (i, r) in self.raw.iter().enumerate() {
            out.push_str(&format!("{r},{i}\n"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut pairs: Vec<(u32, String)> = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parse_err = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: line + 2,
                msg: msg.to_owned(),
            };
            let raw = rec.get(0).ok_or_else(|| parse_err("missing raw_id"))?;
            let idx: u32 = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| parse_err("bad dense_index"))?;
            pairs.push((idx, raw.to_owned()));
        }
        pairs.sort();
        if pairs.iter().enumerate().any(|(i, (d, _))| *d as usize != i) {
            return Err(Error::Data(format!(
                "{}: dense indices are not 0..n",
                path.display()
            )));
        }
        Ok(Self::from_ordered(pairs.into_iter().map(|p| p.1).collect()))
    }

    pub fn fingerprint(&self) -> String {
        hex(&Sha256::digest(self.to_csv().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// An ingested matrix plus the id maps used to densify it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub matrix: InteractionMatrix,
    pub users: IdMap,
    pub items: IdMap,
}

impl Dataset {
    /// Hash over both id maps; checkpoints record it so evaluation data can
    /// be matched to the model.
    pub fn id_fingerprint(&self) -> String {
        id_fingerprint(&self.users, &self.items)
    }

    pub fn write_id_maps(&self, dir: &Path) -> Result<()> {
        self.users.write(&dir.join("users.csv"))?;
        self.items.write(&dir.join("items.csv"))
    }
}

pub fn id_fingerprint(users: &IdMap, items: &IdMap) -> String {
    let mut h = Sha256::new();
    h.update(users.fingerprint().as_bytes());
    h.update(items.fingerprint().as_bytes());
    hex(&h.finalize())
}

struct RawRecord {
    line: usize,
    user: String,
    item: String,
    value: f64,
    timestamp: Option<i64>,
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_fields(path: &Path, line: usize, fields: &[&str]) -> Result<RawRecord> {
    let err = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    if fields.len() < 3 || fields.len() > 4 {
        return Err(err(format!("expected 3 or 4 fields, found {}", fields.len())));
    }
    let user = fields[0].trim();
    let item = fields[1].trim();
    if user.is_empty() || item.is_empty() {
        return Err(err("empty user or item id".into()));
    }
    let value: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| err(format!("bad rating `{}`", fields[2].trim())))?;
    let timestamp = match fields.get(3).map(|s| s.trim()) {
        None | Some("") => None,
        Some(t) => Some(
            t.parse::<i64>()
                .or_else(|_| t.parse::<f64>().map(|f| f as i64))
                .map_err(|_| err(format!("bad timestamp `{t}`")))?,
        ),
    };
    Ok(RawRecord {
        line,
        user: user.to_owned(),
        item: item.to_owned(),
        value,
        timestamp,
    })
}

fn read_records(path: &Path, format: Format) -> Result<Vec<RawRecord>> {
    let mut records = Vec::new();
    match format {
        Format::MovielensTab | Format::MovielensDoubleColon => {
            for (i, line) in open(path)?.lines().enumerate() {
                let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = match format {
                    Format::MovielensTab => line.split('\t').collect(),
                    _ => line.split("::").collect(),
                };
                records.push(parse_fields(path, i + 1, &fields)?);
            }
        }
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(open(path)?);
            let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
            let expected = ["user", "item", "rating", "timestamp"];
            if header.len() < 3
                || header.len() > 4
                || header.iter().zip(expected).any(|(h, e)| h != e)
            {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: format!("expected header user,item,rating[,timestamp], got {header:?}"),
                });
            }
            for (i, rec) in reader.records().enumerate() {
                let rec = rec?;
                let fields: Vec<&str> = rec.iter().collect();
                records.push(parse_fields(path, i + 2, &fields)?);
            }
        }
    }
    Ok(records)
}

/// Reads a rating file and remaps ids to dense 0-based indices.
///
/// Duplicate `(user, item)` pairs keep the record with the latest timestamp
/// (the later line when timestamps tie or are absent).
pub fn ingest(path: &Path, format: Format, options: IngestOptions) -> Result<Dataset> {
    let records = read_records(path, format)?;
    if records.is_empty() {
        return Err(Error::Data(format!("{}: no interactions", path.display())));
    }
    if let Some((lo, hi)) = options.rating_range {
        if let Some(r) = records.iter().find(|r| !(r.value >= lo && r.value <= hi)) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: r.line,
                msg: format!("rating {} outside [{lo}, {hi}]", r.value),
            });
        }
    }
    if let Some(r) = records.iter().find(|r| !(r.value > 0.0)) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: r.line,
            msg: format!("rating {} is not positive", r.value),
        });
    }

    let users = IdMap::from_raw(records.iter().map(|r| r.user.as_str()));
    let items = IdMap::from_raw(records.iter().map(|r| r.item.as_str()));

    let mut latest: HashMap<(u32, u32), (usize, Interaction)> = HashMap::new();
    let mut duplicates = 0usize;
    for r in &records {
        let e = Interaction {
            user: users.dense(&r.user).expect("mapped"),
            item: items.dense(&r.item).expect("mapped"),
            value: r.value,
            timestamp: r.timestamp,
        };
        let key = (e.user, e.item);
        match latest.get(&key) {
            Some((_, prev)) => {
                duplicates += 1;
                if e.timestamp.unwrap_or(i64::MIN) >= prev.timestamp.unwrap_or(i64::MIN) {
                    latest.insert(key, (r.line, e));
                }
            }
            None => {
                latest.insert(key, (r.line, e));
            }
        }
    }
    if duplicates > 0 {
        warn!(
            "{}: {duplicates} duplicate (user, item) records, kept the latest",
            path.display()
        );
    }
    let entries = latest.into_values().map(|(_, e)| e).collect();
    let matrix = InteractionMatrix::from_entries(users.len(), items.len(), entries)?;
    Ok(Dataset {
        matrix,
        users,
        items,
    })
}

/// Writes entries as `user \t item \t value \t timestamp` using dense ids.
pub fn write_entries(path: &Path, matrix: &InteractionMatrix) -> Result<()> {
    let ctx = || path.display().to_string();
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(ctx(), e))?);
    for e in matrix.entries() {
        let ts = e.timestamp.map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{}\t{}\t{}\t{}", e.user, e.item, e.value, ts).map_err(|e| Error::io(ctx(), e))?;
    }
    out.flush().map_err(|e| Error::io(ctx(), e))
}

/// Reads a dense-id entry file written by [`write_entries`].
pub fn read_entries(path: &Path, users: usize, items: usize) -> Result<InteractionMatrix> {
    let mut entries = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let r = parse_fields(path, i + 1, &fields)?;
        let parse_idx = |s: &str| {
            s.parse::<u32>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("`{s}` is not a dense index"),
            })
        };
        entries.push(Interaction {
            user: parse_idx(&r.user)?,
            item: parse_idx(&r.item)?,
            value: r.value,
            timestamp: r.timestamp,
        });
    }
    InteractionMatrix::from_entries(users, items, entries)
}

/// Paths of a split directory.
pub struct SplitFiles {
    pub train: PathBuf,
    pub validation: PathBuf,
    pub test: PathBuf,
    pub users: PathBuf,
    pub items: PathBuf,
    pub manifest: PathBuf,
}

impl SplitFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            train: dir.join("train.tsv"),
            validation: dir.join("validation.tsv"),
            test: dir.join("test.tsv"),
            users: dir.join("users.csv"),
            items: dir.join("items.csv"),
            manifest: dir.join("split.json"),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn toy_matrix_from_tab_file() {
        let f = file("1\t1\t1\t10\n1\t2\t1\t11\n1\t3\t1\t12\n2\t1\t1\t13\n2\t2\t1\t14\n3\t4\t1\t15\n");
        let ds = ingest(f.path(), Format::MovielensTab, IngestOptions::default()).unwrap();
        assert_eq!(ds.matrix.num_users(), 3);
        assert_eq!(ds.matrix.num_items(), 4);
        assert_eq!(ds.matrix.nnz(), 6);
    }

    #[test]
    fn single_record() {
        let f = file("0::0::5::42\n");
        let ds = ingest(f.path(), Format::MovielensDoubleColon, IngestOptions::default()).unwrap();
        assert_eq!((ds.matrix.num_users(), ds.matrix.num_items(), ds.matrix.nnz()), (1, 1, 1));
        assert_eq!(ds.matrix.entries()[0].timestamp, Some(42));
    }

    #[test]
    fn empty_file_has_no_interactions() {
        let f = file("");
        let err = ingest(f.path(), Format::MovielensTab, IngestOptions::default()).unwrap_err();
        assert!(err.to_string().contains("no interactions"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = file("1\t1\t4\t1\n1\t2\tfour\t2\n");
        match ingest(f.path(), Format::MovielensTab, IngestOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_rating_rejected() {
        let f = file("1\t1\t7\t1\n");
        assert!(ingest(f.path(), Format::MovielensTab, IngestOptions::default()).is_err());
        let ok = ingest(f.path(), Format::MovielensTab, IngestOptions { rating_range: None });
        assert!(ok.is_ok());
    }

    #[test]
    fn duplicates_keep_latest_timestamp() {
        let f = file("user,item,rating,timestamp\na,x,2,50\na,x,4,10\nb,x,3,1\n");
        let ds = ingest(f.path(), Format::Csv, IngestOptions::default()).unwrap();
        assert_eq!(ds.matrix.nnz(), 2);
        let a = ds.users.dense("a").unwrap() as usize;
        let x = ds.items.dense("x").unwrap() as usize;
        assert_eq!(ds.matrix.get(a, x), Some(2.0));
    }

    #[test]
    fn csv_without_timestamp_and_bad_header() {
        let f = file("user,item,rating\n7,3,5\n7,4,1\n");
        let ds = ingest(f.path(), Format::Csv, IngestOptions::default()).unwrap();
        assert_eq!(ds.matrix.nnz(), 2);
        assert!(!ds.matrix.has_timestamps());
        let bad = file("u,i,r\n1,2,3\n");
        assert!(matches!(
            ingest(bad.path(), Format::Csv, IngestOptions::default()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn numeric_ids_are_ordered_numerically() {
        let f = file("10\t2\t3\t1\n9\t11\t3\t1\n");
        let ds = ingest(f.path(), Format::MovielensTab, IngestOptions::default()).unwrap();
        assert_eq!(ds.users.dense("9"), Some(0));
        assert_eq!(ds.users.dense("10"), Some(1));
        assert_eq!(ds.items.dense("2"), Some(0));
    }

    #[test]
    fn id_map_sidecar_round_trip() {
        let ids = IdMap::from_raw(["b", "a", "c"]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ids.csv");
        ids.write(&p).unwrap();
        let back = IdMap::read(&p).unwrap();
        assert_eq!(back, ids);
        assert_eq!(back.fingerprint(), ids.fingerprint());
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "raw_id,dense_index\na,0\nb,1\nc,2\n");
    }

    #[test]
    fn entry_file_round_trip() {
        let m = InteractionMatrix::from_entries(
            2,
            3,
            vec![Interaction::new(0, 2, 4.0).at(9), Interaction::new(1, 0, 1.0)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        write_entries(&p, &m).unwrap();
        assert_eq!(read_entries(&p, 2, 3).unwrap(), m);
    }
}
