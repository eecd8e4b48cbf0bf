//! Canonical dataset snapshots: a directory of TSV files plus a manifest.
//!
//! Layout under the snapshot directory:
//!
//! - `interactions.tsv`: user, item, rating, timestamp (canonical order)
//! - `catalog.tsv`: item id, `|`-joined genre names
//! - `users.tsv`: user id, gender, age code
//! - `manifest.json`: counts, frozen genre order, data config hash
//!
//! Writes are deterministic: identical datasets and config hashes produce
//! byte-identical snapshots.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Gender, Interaction, ItemCatalog, UserId, UserRecord};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Snapshot metadata; `data_config_hash` ties the snapshot to the
/// preprocessing configuration that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub genres: Vec<String>,
    pub data_config_hash: String,
}

pub fn write_snapshot(dataset: &Dataset, dir: &Path, data_config_hash: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut interactions = String::from("user_id\titem_id\trating\ttimestamp\n");
    for it in &dataset.interactions {
        interactions.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            it.user_id, it.item_id, it.rating, it.timestamp
        ));
    }
    write_file(dir, "interactions.tsv", &interactions)?;

    let mut catalog = String::from("item_id\tgenres\n");
    for item in dataset.catalog.item_ids() {
        let names = dataset.catalog.genre_names(item).expect("own item");
        catalog.push_str(&format!("{}\t{}\n", item, names.join("|")));
    }
    write_file(dir, "catalog.tsv", &catalog)?;

    let mut users = String::from("user_id\tgender\tage_code\n");
    for u in dataset.users.values() {
        let g = match u.gender {
            Gender::M => "M",
            Gender::F => "F",
        };
        users.push_str(&format!("{}\t{}\t{}\n", u.user_id, g, u.age_code));
    }
    write_file(dir, "users.tsv", &users)?;

    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        users: dataset.users.len(),
        items: dataset.catalog.len(),
        interactions: dataset.interactions.len(),
        genres: dataset.catalog.genres().to_vec(),
        data_config_hash: data_config_hash.to_string(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    write_file(dir, "manifest.json", &format!("{json}\n"))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_snapshot(dir: &Path) -> Result<(Dataset, Manifest)> {
    let manifest = load_manifest(dir)?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(Error::Report(format!(
            "unsupported snapshot version {}",
            manifest.format_version
        )));
    }

    let path = dir.join("interactions.tsv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut interactions = Vec::new();
    for (no, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::malformed(&path, no + 1, "expected 4 tab fields"));
        }
        interactions.push(Interaction {
            user_id: parse_field(&path, no + 1, f[0])?,
            item_id: parse_field(&path, no + 1, f[1])?,
            rating: parse_field(&path, no + 1, f[2])?,
            timestamp: parse_field(&path, no + 1, f[3])?,
        });
    }

    let path = dir.join("catalog.tsv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut item_genres = Vec::new();
    for (no, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 2 {
            return Err(Error::malformed(&path, no + 1, "expected 2 tab fields"));
        }
        let item_id = parse_field(&path, no + 1, f[0])?;
        let genres: Vec<String> = f[1].split('|').map(str::to_string).collect();
        item_genres.push((item_id, genres));
    }
    let catalog = ItemCatalog::with_frozen_genres(manifest.genres.clone(), item_genres)
        .map_err(|e| Error::malformed(&path, 0, e))?;

    let path = dir.join("users.tsv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut users: BTreeMap<UserId, UserRecord> = BTreeMap::new();
    for (no, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::malformed(&path, no + 1, "expected 3 tab fields"));
        }
        let user_id = parse_field(&path, no + 1, f[0])?;
        let gender = match f[1] {
            "M" => Gender::M,
            "F" => Gender::F,
            other => {
                return Err(Error::malformed(
                    &path,
                    no + 1,
                    format!("bad gender {other:?}"),
                ))
            }
        };
        let age_code = parse_field(&path, no + 1, f[2])?;
        users.insert(
            user_id,
            UserRecord {
                user_id,
                gender,
                age_code,
            },
        );
    }

    let dataset = Dataset {
        interactions,
        catalog,
        users,
    };
    if dataset.interactions.len() != manifest.interactions
        || dataset.catalog.len() != manifest.items
        || dataset.users.len() != manifest.users
    {
        return Err(Error::Report(
            "snapshot contents disagree with manifest counts".into(),
        ));
    }
    Ok((dataset, manifest))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::malformed(path, line, format!("bad field {s:?}")))
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Error::io(&path, e))
}
