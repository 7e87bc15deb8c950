//! Rating-table ingestion, the canonical CSV format, synthetic data and
//! train/test splits.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{IdMap, Rating, RatingsDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column layout of a delimiter-separated rating table. Extra columns are
/// ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub delimiter: String,
    pub has_header: bool,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl Schema {
    /// `userId,movieId,rating,timestamp` with a header, half-star scale.
    pub fn movielens() -> Self {
        Schema {
            delimiter: ",".into(),
            has_header: true,
            user_col: 0,
            item_col: 1,
            rating_col: 2,
            r_min: 0.5,
            r_max: 5.0,
        }
    }

    /// `userID,itemID,rating,...` with a header, 1-5 scale; the contextual
    /// columns that follow are ignored.
    pub fn comoda() -> Self {
        Schema {
            r_min: 1.0,
            ..Self::movielens()
        }
    }

    /// Tab-separated `user item rating timestamp`, no header (the older
    /// 100k MovieLens release).
    pub fn movielens_tab() -> Self {
        Schema {
            delimiter: "\t".into(),
            has_header: false,
            r_min: 1.0,
            ..Self::movielens()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "movielens" => Ok(Self::movielens()),
            "comoda" => Ok(Self::comoda()),
            "movielens_tab" | "ml100k" => Ok(Self::movielens_tab()),
            other => Err(Error::Config(format!(
                "unknown dataset preset `{other}` (expected movielens, comoda, movielens_tab or canonical)"
            ))),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

fn parse_field<V: FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<V> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {what} `{}`", field.trim())))
}

/// Loads a rating table. External IDs get dense indices in order of first
/// appearance. A repeated (user, item) pair overwrites the earlier rating
/// and is counted in [`RatingsDataset::duplicate_count`].
pub fn load_ratings_table<T: Scalar>(path: impl AsRef<Path>, schema: &Schema) -> Result<RatingsDataset<T>> {
    let path = path.as_ref();
    if schema.delimiter.is_empty() {
        return Err(Error::Config("empty delimiter".into()));
    }
    let reader = open(path)?;
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut obs: Vec<Rating<T>> = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut duplicates = 0;
    let needed = schema.user_col.max(schema.item_col).max(schema.rating_col) + 1;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 && schema.has_header {
            continue;
        }
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter.as_str()).collect();
        if fields.len() < needed {
            return Err(parse_err(
                path,
                lineno,
                format!("expected at least {needed} columns, found {}", fields.len()),
            ));
        }
        let rating: f64 = parse_field(path, lineno, fields[schema.rating_col], "rating")?;
        if !(rating >= schema.r_min && rating <= schema.r_max) {
            return Err(parse_err(
                path,
                lineno,
                format!("rating {rating} outside [{}, {}]", schema.r_min, schema.r_max),
            ));
        }
        let user = users.intern(fields[schema.user_col].trim());
        let item = items.intern(fields[schema.item_col].trim());
        let value = T::of(rating);
        match seen.get(&(user, item)) {
            Some(&pos) => {
                obs[pos].value = value;
                duplicates += 1;
            }
            None => {
                seen.insert((user, item), obs.len());
                obs.push(Rating { user, item, value });
            }
        }
    }
    if obs.is_empty() {
        return Err(parse_err(path, 0, "no ratings found"));
    }
    let mut data = RatingsDataset::with_id_maps(users, items, obs, T::of(schema.r_min), T::of(schema.r_max))?;
    data.set_duplicate_count(duplicates);
    Ok(data)
}

const CANONICAL_META: &str = "M,N,r_min,r_max";
const CANONICAL_COLUMNS: &str = "user_index,item_index,rating";

/// Writes the canonical format: a `M,N,r_min,r_max` line and its values,
/// then `user_index,item_index,rating` rows.
pub fn write_canonical<T: Scalar, W: Write>(data: &RatingsDataset<T>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CANONICAL_META}")?;
    writeln!(w, "{},{},{},{}", data.num_users(), data.num_items(), data.r_min(), data.r_max())?;
    writeln!(w, "{CANONICAL_COLUMNS}")?;
    for r in data.observations() {
        writeln!(w, "{},{},{}", r.user, r.item, r.value)?;
    }
    Ok(())
}

pub fn save_canonical<T: Scalar>(data: &RatingsDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_canonical(data, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_canonical<T: Scalar>(path: impl AsRef<Path>) -> Result<RatingsDataset<T>> {
    let path = path.as_ref();
    let mut lines = open(path)?.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l.trim_end_matches('\r').to_owned())),
            Some((i, Err(e))) => Err(parse_err(path, i + 1, e.to_string())),
            None => Err(parse_err(path, 0, format!("missing {expect}"))),
        }
    };
    let (l1, meta) = next("header")?;
    if meta.trim() != CANONICAL_META {
        return Err(parse_err(path, l1, format!("expected `{CANONICAL_META}`")));
    }
    let (l2, dims) = next("dimensions")?;
    let dims: Vec<&str> = dims.split(',').collect();
    if dims.len() != 4 {
        return Err(parse_err(path, l2, "expected M,N,r_min,r_max values"));
    }
    let m: usize = parse_field(path, l2, dims[0], "M")?;
    let n: usize = parse_field(path, l2, dims[1], "N")?;
    let r_min: T = parse_field(path, l2, dims[2], "r_min")?;
    let r_max: T = parse_field(path, l2, dims[3], "r_max")?;
    let (l3, cols) = next("column header")?;
    if cols.trim() != CANONICAL_COLUMNS {
        return Err(parse_err(path, l3, format!("expected `{CANONICAL_COLUMNS}`")));
    }
    let mut obs = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if f.len() != 3 {
            return Err(parse_err(path, lineno, "expected user_index,item_index,rating"));
        }
        let user: usize = parse_field(path, lineno, f[0], "user index")?;
        let item: usize = parse_field(path, lineno, f[1], "item index")?;
        let value: T = parse_field(path, lineno, f[2], "rating")?;
        if user >= m || item >= n || !(value >= r_min && value <= r_max) {
            return Err(parse_err(path, lineno, "observation outside declared dimensions or bounds"));
        }
        obs.push(Rating { user, item, value });
    }
    RatingsDataset::new(m, n, obs, r_min, r_max)
}

/// Loads either the canonical format (`preset = "canonical"`) or a raw
/// table described by a preset schema.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>, preset: &str) -> Result<RatingsDataset<T>> {
    if preset.trim().eq_ignore_ascii_case("canonical") {
        load_canonical(path)
    } else {
        load_ratings_table(path, &Schema::preset(preset)?)
    }
}

/// Low-rank synthetic ratings: Gaussian factors, Gaussian noise, linear
/// rescale of the full matrix into [1, 5], then each cell kept with
/// probability `density`. Deterministic in its arguments.
pub fn synthetic<T: Scalar>(
    num_users: usize,
    num_items: usize,
    k_true: usize,
    density: f64,
    noise_std: f64,
    seed: u64,
) -> Result<RatingsDataset<T>> {
    if num_users == 0 || num_items == 0 || k_true == 0 {
        return Err(Error::contract("synthetic data needs M, N, k_true >= 1"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::contract(format!("density {density} outside (0, 1]")));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::contract(format!("noise_std {noise_std} must be nonnegative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let u: Vec<f64> = (0..num_users * k_true).map(|_| normal()).collect();
    let v: Vec<f64> = (0..num_items * k_true).map(|_| normal()).collect();
    let mut full = Vec::with_capacity(num_users * num_items);
    for i in 0..num_users {
        let ui = &u[i * k_true..(i + 1) * k_true];
        for j in 0..num_items {
            let vj = &v[j * k_true..(j + 1) * k_true];
            let x: f64 = ui.iter().zip(vj).map(|(a, b)| a * b).sum();
            full.push(x + noise_std * normal());
        }
    }
    let lo = full.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut obs = Vec::new();
    for (cell, &x) in full.iter().enumerate() {
        let keep = rng.random::<f64>() < density;
        if keep {
            let r = if hi > lo { 1.0 + 4.0 * (x - lo) / (hi - lo) } else { 3.0 };
            obs.push(Rating {
                user: cell / num_items,
                item: cell % num_items,
                value: T::of(r.clamp(1.0, 5.0)),
            });
        }
    }
    RatingsDataset::new(num_users, num_items, obs, T::of(1.0), T::of(5.0))
}

#[derive(Clone, Debug)]
pub struct SplitPair<T> {
    pub train: RatingsDataset<T>,
    pub test: RatingsDataset<T>,
    pub ratio: f64,
    pub seed: u64,
}

pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

/// Seeded shuffle of the observations; the first ⌈ratio·n⌉ go to train.
/// Both halves keep the source's ID maps, dimensions and load order.
pub fn split<T: Scalar>(data: &RatingsDataset<T>, ratio: f64, seed: u64) -> Result<SplitPair<T>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::contract(format!("split ratio {ratio} outside (0, 1)")));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::contract("split needs at least 2 observations"));
    }
    let n_train = (ratio * n as f64).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::contract(format!(
            "split ratio {ratio} leaves an empty side for {n} observations"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_pos = order[..n_train].to_vec();
    let mut test_pos = order[n_train..].to_vec();
    train_pos.sort_unstable();
    test_pos.sort_unstable();
    let pick = |pos: &[usize]| pos.iter().map(|&p| data.observations()[p]).collect::<Vec<_>>();
    Ok(SplitPair {
        train: data.sibling(pick(&train_pos))?,
        test: data.sibling(pick(&test_pos))?,
        ratio,
        seed,
    })
}
