//! World directories: `world.meta` (the generating spec as key=value text)
//! plus the dense feedback matrices `r_c.csv` and `r_t.csv`, one row per user.
//!
//! The matrices are redundant with the spec; loading regenerates the world
//! and rejects a directory whose matrices disagree with it.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use dubrec_core::world::generate_world;
use dubrec_core::{SyntheticWorld, WorldSpec};
use ini::Ini;

use crate::error::{CliError, Result};

pub const WORLD_FORMAT: &str = "dubrec-world-1";

pub fn spec_to_ini(spec: &WorldSpec) -> Ini {
    let mut ini = Ini::new();
    ini.with_general_section()
        .set("format", WORLD_FORMAT)
        .set("n_users", spec.n_users.to_string())
        .set("n_items", spec.n_items.to_string())
        .set("rank_true", spec.rank_true.to_string())
        .set("popularity_skew", spec.popularity_skew.to_string())
        .set("positivity_boost", spec.positivity_boost.to_string())
        .set("impressions_c", spec.impressions_c.to_string())
        .set("impressions_t", spec.impressions_t.to_string())
        .set("seed", spec.seed.to_string())
        .set("factor_scale", spec.factor_scale.to_string())
        .set("item_bias_scale", spec.item_bias_scale.to_string())
        .set("preference_offset", spec.preference_offset.to_string())
        .set("label_shift", spec.label_shift.to_string());
    ini
}

fn field<T: FromStr>(ini: &Ini, key: &str) -> Result<T> {
    let raw = ini
        .general_section()
        .get(key)
        .ok_or_else(|| CliError::Data(format!("world.meta lacks `{key}`")))?;
    raw.parse()
        .map_err(|_| CliError::Data(format!("world.meta: bad value {raw:?} for `{key}`")))
}

pub fn spec_from_ini(ini: &Ini) -> Result<WorldSpec> {
    let format: String = field(ini, "format")?;
    if format != WORLD_FORMAT {
        return Err(CliError::Data(format!("unsupported world format {format:?}")));
    }
    Ok(WorldSpec {
        n_users: field(ini, "n_users")?,
        n_items: field(ini, "n_items")?,
        rank_true: field(ini, "rank_true")?,
        popularity_skew: field(ini, "popularity_skew")?,
        positivity_boost: field(ini, "positivity_boost")?,
        impressions_c: field(ini, "impressions_c")?,
        impressions_t: field(ini, "impressions_t")?,
        seed: field(ini, "seed")?,
        factor_scale: field(ini, "factor_scale")?,
        item_bias_scale: field(ini, "item_bias_scale")?,
        preference_offset: field(ini, "preference_offset")?,
        label_shift: field(ini, "label_shift")?,
    })
}

fn write_matrix(path: &Path, cells: &[u8], n_items: usize) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    for row in cells.chunks(n_items) {
        w.write_record(row.iter().map(|v| if *v == 1 { "1" } else { "0" }))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_matrix(path: &Path, n_users: usize, n_items: usize) -> Result<Vec<u8>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::with_capacity(n_users * n_items);
    for (row, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != n_items {
            return Err(CliError::Data(format!(
                "{}:{}: expected {n_items} columns, found {}",
                path.display(),
                row + 1,
                record.len()
            )));
        }
        for v in record.iter() {
            out.push(match v {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(CliError::Data(format!(
                        "{}:{}: cell {other:?} is not 0 or 1",
                        path.display(),
                        row + 1
                    )))
                }
            });
        }
    }
    if out.len() != n_users * n_items {
        return Err(CliError::Data(format!(
            "{}: expected {n_users} rows, found {}",
            path.display(),
            out.len() / n_items.max(1)
        )));
    }
    Ok(out)
}

pub fn save_world(dir: &Path, world: &SyntheticWorld) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let meta = dir.join("world.meta");
    spec_to_ini(world.spec())
        .write_to_file(&meta)
        .map_err(|e| CliError::io(&meta, e))?;
    let n_i = world.n_items() as usize;
    write_matrix(&dir.join("r_c.csv"), world.r_c_matrix(), n_i)?;
    write_matrix(&dir.join("r_t.csv"), world.r_t_matrix(), n_i)
}

/// Regenerates the world described by `world.meta` and checks that both
/// stored matrices match it cell for cell.
pub fn load_world(dir: &Path) -> Result<SyntheticWorld> {
    let meta = dir.join("world.meta");
    let ini = Ini::load_from_file(&meta).map_err(|e| CliError::Data(format!("{}: {e}", meta.display())))?;
    let spec = spec_from_ini(&ini)?;
    let world = generate_world(&spec)?;
    let (n_u, n_i) = (spec.n_users as usize, spec.n_items as usize);
    for (name, expected) in [("r_c.csv", world.r_c_matrix()), ("r_t.csv", world.r_t_matrix())] {
        let stored = read_matrix(&dir.join(name), n_u, n_i)?;
        if let Some(k) = stored.iter().zip(expected).position(|(a, b)| a != b) {
            return Err(CliError::Data(format!(
                "{name} disagrees with the regenerated world at user {}, item {}",
                k / n_i,
                k % n_i
            )));
        }
    }
    Ok(world)
}
