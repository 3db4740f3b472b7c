//! Rating-file loaders and the removal of users and items without training
//! entries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::observations::{Observation, ObservedEntries};
use crate::{Error, Result};

pub const MOVIELENS_SHAPE: (usize, usize) = (943, 1682);
pub const FILMTRUST_SHAPE: (usize, usize) = (1508, 2071);
pub const MOVIELENS_URL: &str = "https://files.grouplens.org/datasets/movielens/ml-100k.zip";
pub const FILMTRUST_URL: &str = "https://guoguibing.github.io/librec/datasets/filmtrust.zip";

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_id(token: &str, path: &Path, line: usize) -> Result<usize> {
    match token.parse::<usize>() {
        Ok(id) if id >= 1 => Ok(id - 1),
        _ => Err(parse_error(path, line, format!("invalid 1-based id `{token}`"))),
    }
}

/// Collects `(row, col, value)` triples, keeping the last of duplicates, into
/// entries of shape `max(declared, max id + 1)`.
fn assemble(path: &Path, declared: (usize, usize), triples: Vec<(usize, usize, f64)>) -> Result<ObservedEntries> {
    if triples.is_empty() {
        return Err(parse_error(path, 0, "no ratings found"));
    }
    let mut map = BTreeMap::new();
    let mut duplicates = 0usize;
    for (i, j, v) in triples {
        if map.insert((i, j), v).is_some() {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("{}: {duplicates} duplicate ratings, keeping the last of each", path.display());
    }
    let rows = declared.0.max(map.keys().map(|k| k.0 + 1).max().unwrap_or(0));
    let cols = declared.1.max(map.keys().map(|k| k.1 + 1).max().unwrap_or(0));
    ObservedEntries::new(rows, cols, map.into_iter().map(|((i, j), v)| (i, j, v)), None)
}

/// Parses tab-separated `user item rating timestamp` lines with 1-based ids
/// and integer ratings in `1..=5`.
pub fn parse_movielens<R: BufRead>(reader: R, path: &Path) -> Result<ObservedEntries> {
    let mut triples = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(parse_error(path, lineno, "expected user, item, rating, timestamp"));
        }
        let i = parse_id(fields[0].trim(), path, lineno)?;
        let j = parse_id(fields[1].trim(), path, lineno)?;
        let rating: u8 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("invalid rating `{}`", fields[2])))?;
        if !(1..=5).contains(&rating) {
            return Err(parse_error(path, lineno, format!("rating {rating} outside 1..=5")));
        }
        triples.push((i, j, rating as f64));
    }
    assemble(path, MOVIELENS_SHAPE, triples)
}

pub fn load_movielens(path: &Path) -> Result<ObservedEntries> {
    parse_movielens(BufReader::new(File::open(path)?), path)
}

/// Parses whitespace-separated `user item rating` lines with ratings on the
/// grid `{0.5, 1.0, …, 4.0}`; `double_ratings` maps them to `{1, …, 8}`.
pub fn parse_filmtrust<R: BufRead>(reader: R, path: &Path, double_ratings: bool) -> Result<ObservedEntries> {
    let mut triples = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(parse_error(path, lineno, "expected user, item, rating"));
        }
        let i = parse_id(fields[0], path, lineno)?;
        let j = parse_id(fields[1], path, lineno)?;
        let rating: f64 = fields[2]
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("invalid rating `{}`", fields[2])))?;
        let doubled = 2.0 * rating;
        if !(1.0..=8.0).contains(&doubled) || (doubled - doubled.round()).abs() > 1e-9 {
            return Err(parse_error(path, lineno, format!("rating {rating} not on the 0.5..4.0 grid")));
        }
        triples.push((i, j, if double_ratings { doubled.round() } else { rating }));
    }
    assemble(path, FILMTRUST_SHAPE, triples)
}

pub fn load_filmtrust(path: &Path, double_ratings: bool) -> Result<ObservedEntries> {
    parse_filmtrust(BufReader::new(File::open(path)?), path, double_ratings)
}

/// Sets with empty rows and columns removed.
#[derive(Clone, Debug)]
pub struct Pruned {
    pub train: ObservedEntries,
    pub val: ObservedEntries,
    pub test: ObservedEntries,
    /// Original index of every kept row, in order.
    pub kept_rows: Vec<usize>,
    pub kept_cols: Vec<usize>,
}

/// Removes every row and column without training entries from all three
/// sets and renumbers the rest densely.
pub fn prune_empty(train: &ObservedEntries, val: &ObservedEntries, test: &ObservedEntries) -> Result<Pruned> {
    if val.shape() != train.shape() || test.shape() != train.shape() {
        return Err(Error::ShapeMismatch {
            expected: train.shape(),
            actual: if val.shape() != train.shape() { val.shape() } else { test.shape() },
        });
    }
    let (rows, cols) = train.shape();
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    for e in train.entries() {
        row_used[e.row] = true;
        col_used[e.col] = true;
    }
    let remap = |used: &[bool]| {
        let mut next = 0;
        let map: Vec<Option<usize>> = used
            .iter()
            .map(|&u| {
                u.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        let kept: Vec<usize> = used.iter().enumerate().filter(|(_, &u)| u).map(|(i, _)| i).collect();
        (map, kept)
    };
    let (row_map, kept_rows) = remap(&row_used);
    let (col_map, kept_cols) = remap(&col_used);
    if kept_rows.is_empty() || kept_cols.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let apply = |obs: &ObservedEntries| {
        let entries: Vec<Observation> = obs
            .entries()
            .iter()
            .filter_map(|e| {
                Some(Observation {
                    row: row_map[e.row]?,
                    col: col_map[e.col]?,
                    value: e.value,
                })
            })
            .collect();
        let spec = obs.spec().cloned().filter(|s| s.required_shape().is_none());
        ObservedEntries::from_parts(kept_rows.len(), kept_cols.len(), entries, spec)
    };
    Ok(Pruned {
        train: apply(train),
        val: apply(val),
        test: apply(test),
        kept_rows,
        kept_cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> &'static Path {
        Path::new("<memory>")
    }

    #[test]
    fn movielens_line() {
        let obs = parse_movielens(&b"1\t1\t5\t874965758\n"[..], path()).unwrap();
        assert_eq!(obs.shape(), MOVIELENS_SHAPE);
        assert_eq!(obs.entries(), &[Observation { row: 0, col: 0, value: 5.0 }]);
    }

    #[test]
    fn movielens_errors() {
        assert!(parse_movielens(&b""[..], path()).is_err());
        let err = parse_movielens(&b"1\t1\t5\t0\n2\tx\t3\t0\n"[..], path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_movielens(&b"1\t1\t6\t0\n"[..], path()).is_err());
    }

    #[test]
    fn movielens_duplicates_keep_last() {
        let obs = parse_movielens(&b"1\t2\t5\t0\n1\t2\t3\t1\n"[..], path()).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs.entries()[0].value, 3.0);
    }

    #[test]
    fn movielens_grows_to_max_id() {
        let obs = parse_movielens(&b"1000\t1\t4\t0\n"[..], path()).unwrap();
        assert_eq!(obs.shape(), (1000, 1682));
    }

    #[test]
    fn filmtrust_doubling() {
        let obs = parse_filmtrust(&b"1 1 2.0\n"[..], path(), true).unwrap();
        assert_eq!(obs.entries()[0].value, 4.0);
        let raw = parse_filmtrust(&b"1 1 3.5\n"[..], path(), false).unwrap();
        assert_eq!(raw.entries()[0].value, 3.5);
        assert!(parse_filmtrust(&b"1 1 4.5\n"[..], path(), true).is_err());
        assert!(parse_filmtrust(&b"1 1 1.25\n"[..], path(), true).is_err());
    }

    #[test]
    fn prune_removes_rows_without_training() {
        let train = ObservedEntries::new(3, 3, [(0, 0, 1.0), (2, 2, 2.0)], None).unwrap();
        let val = ObservedEntries::new(3, 3, [(1, 0, 3.0), (2, 0, 4.0)], None).unwrap();
        let test = ObservedEntries::new(3, 3, [(0, 1, 5.0)], None).unwrap();
        let p = prune_empty(&train, &val, &test).unwrap();
        assert_eq!(p.kept_rows, vec![0, 2]);
        assert_eq!(p.kept_cols, vec![0, 2]);
        assert_eq!(p.train.shape(), (2, 2));
        assert_eq!(p.val.entries(), &[Observation { row: 1, col: 0, value: 4.0 }]);
        assert!(p.test.is_empty());
    }

    #[test]
    fn prune_identity_when_nothing_empty() {
        let train = ObservedEntries::new(2, 2, [(0, 0, 1.0), (1, 1, 2.0)], None).unwrap();
        let empty = ObservedEntries::new(2, 2, [], None).unwrap();
        let p = prune_empty(&train, &empty, &empty).unwrap();
        assert_eq!(p.train, train);
        assert_eq!(p.kept_rows, vec![0, 1]);
    }
}
