//! Dataset ingestion: row CSV or serialized cell distributions.

use std::path::Path;

use fairpost_core::{build_cells, CellDistribution, GroupMask, GroupSystem, Row};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// A loaded dataset and the digest of its raw bytes.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dist: CellDistribution,
    pub sha256: String,
    pub rows: Option<usize>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads `path`: `.json` files hold a cell distribution, anything else is row CSV.
pub fn load(path: &Path, grid_m: u32) -> CliResult<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let sha256 = sha256_hex(&bytes);
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let dist: CellDistribution = serde_json::from_slice(&bytes).map_err(|e| {
            CliError::input(format!(
                "{}: line {}, column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        Ok(Dataset {
            dist,
            sha256,
            rows: None,
        })
    } else {
        let (rows, groups) = parse_csv(&bytes).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let n = rows.len();
        let dist = build_cells(&rows, grid_m, groups)?;
        Ok(Dataset {
            dist,
            sha256,
            rows: Some(n),
        })
    }
}

/// Parses `id,score[,y],g_<name>...`. The all-group `I` is placed first and synthesized when absent.
pub fn parse_csv(bytes: &[u8]) -> CliResult<(Vec<Row>, GroupSystem)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);
    let header = reader.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols[0] != "id" || cols[1] != "score" {
        return Err(CliError::input("line 1: header must start with `id,score`"));
    }
    let has_y = cols.get(2) == Some(&"y");
    let first_group = if has_y { 3 } else { 2 };
    let mut names = Vec::new();
    for (j, c) in cols.iter().enumerate().skip(first_group) {
        let Some(name) = c.strip_prefix("g_") else {
            return Err(CliError::input(format!(
                "line 1, column {}: group columns must be named g_<name>, found {c:?}",
                j + 1
            )));
        };
        if name.is_empty() {
            return Err(CliError::input(format!("line 1, column {}: empty group name", j + 1)));
        }
        names.push(name.to_string());
    }
    let all_pos = names.iter().position(|n| n == "I");
    let mut ordered = vec!["I".to_string()];
    ordered.extend(names.iter().filter(|n| n.as_str() != "I").cloned());
    let groups = GroupSystem::new(ordered, Some(0)).map_err(|e| CliError::input(format!("line 1: {e}")))?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| CliError::input(format!("row {row_no}: {e}")))?;
        let line = record.position().map_or(row_no as u64 + 1, |p| p.line());
        let at =
            |col: usize, msg: String| CliError::input(format!("row {row_no} (line {line}, column {}): {msg}", col + 1));
        if record.len() != cols.len() {
            return Err(CliError::input(format!(
                "row {row_no} (line {line}): expected {} fields, found {}",
                cols.len(),
                record.len()
            )));
        }
        let score: f64 = record[1]
            .parse()
            .map_err(|_| at(1, format!("invalid score {:?}", &record[1])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(at(1, format!("score {score} outside [0, 1]")));
        }
        let label = if has_y {
            match &record[2] {
                "0" | "0.0" => Some(0.0),
                "1" | "1.0" => Some(1.0),
                other => return Err(at(2, format!("label must be 0 or 1, found {other:?}"))),
            }
        } else {
            None
        };
        let mut bits = Vec::with_capacity(names.len());
        for (k, j) in (first_group..cols.len()).enumerate() {
            let b = match &record[j] {
                "0" => false,
                "1" => true,
                other => return Err(at(j, format!("group indicator must be 0 or 1, found {other:?}"))),
            };
            if Some(k) == all_pos && !b {
                return Err(at(j, "the all-group column g_I must be 1 on every row".into()));
            }
            bits.push(b);
        }
        let mut mask = vec![true];
        mask.extend(
            bits.iter()
                .enumerate()
                .filter(|(k, _)| Some(*k) != all_pos)
                .map(|(_, &b)| b),
        );
        rows.push(Row {
            score,
            groups: GroupMask::from_bools(&mask),
            label,
        });
    }
    if rows.is_empty() {
        return Err(CliError::input("empty dataset"));
    }
    Ok((rows, groups))
}

/// Writes rows in the dataset CSV schema.
pub fn write_csv(path: &Path, rows: &[Row], groups: &GroupSystem) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let labelled = rows.first().is_some_and(|r| r.label.is_some());
    let mut header = vec!["id".to_string(), "score".to_string()];
    if labelled {
        header.push("y".into());
    }
    header.extend(groups.names().iter().map(|n| format!("g_{n}")));
    w.write_record(&header)?;
    for (i, r) in rows.iter().enumerate() {
        let mut rec = vec![i.to_string(), r.score.to_string()];
        if let Some(y) = r.label {
            rec.push(format!("{}", y as u8));
        }
        rec.extend(
            r.groups
                .iter()
                .map(|b| if b { "1".to_string() } else { "0".to_string() }),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesizes_all_group() {
        let (rows, groups) = parse_csv(b"id,score,y,g_a\n1,0.37,1,1\n2,0.37,0,1\n").unwrap();
        assert_eq!(groups.names(), ["I", "a"]);
        assert_eq!(rows[0].groups.to_string(), "11");
        let dist = build_cells(&rows, 10, groups).unwrap();
        assert_eq!(dist.len(), 1);
        assert_eq!(dist.cells()[0].score, 0.4);
        assert_eq!(dist.cells()[0].label_mean, Some(0.5));
    }

    #[test]
    fn moves_explicit_all_group_first() {
        let (rows, groups) = parse_csv(b"id,score,g_a,g_I\n1,0.5,0,1\r\n2,0.1,1,1\r\n").unwrap();
        assert_eq!(groups.names(), ["I", "a"]);
        assert_eq!(rows[1].groups.to_string(), "11");
        assert!(rows[0].label.is_none());
    }

    #[test]
    fn errors_name_the_row() {
        let err = parse_csv(b"id,score,g_a\n1,0.5,1\n2,abc,0\n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        let err = parse_csv(b"id,score,g_a\n1,1.5,1\n").unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        let err = parse_csv(b"id,score,g_a\n1,0.5\n").unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        assert!(parse_csv(b"score,id\n").is_err());
        assert!(parse_csv(b"id,score,g_a\n").is_err());
    }
}
