//! Model checkpoints: a directory holding `meta` (key=value text) and one
//! little-endian `f64` file per parameter block. Round trips are bitwise.

use std::fs;
use std::path::Path;

use dubrec_core::FactorModel;
use ini::Ini;

use crate::error::{CliError, Result};

pub const MODEL_FORMAT: &str = "dubrec-model-1";

const BLOCKS: [&str; 5] = [
    "user_factors.f64",
    "item_factors.f64",
    "user_bias.f64",
    "item_bias.f64",
    "global_bias.f64",
];

fn block_lengths(n_users: u32, n_items: u32, rank: usize) -> [usize; 5] {
    let (u, i) = (n_users as usize, n_items as usize);
    [u * rank, i * rank, u, i, 1]
}

pub fn save_model(dir: &Path, model: &FactorModel, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut ini = Ini::new();
    ini.with_general_section()
        .set("format", MODEL_FORMAT)
        .set("n_users", model.n_users().to_string())
        .set("n_items", model.n_items().to_string())
        .set("rank", model.rank().to_string())
        .set("seed", seed.to_string())
        .set("clamp_eps", model.clamp_eps().to_string());
    let meta = dir.join("meta");
    ini.write_to_file(&meta).map_err(|e| CliError::io(&meta, e))?;
    let mut rest = model.params();
    for (name, len) in BLOCKS.iter().zip(block_lengths(model.n_users(), model.n_items(), model.rank())) {
        let (block, tail) = rest.split_at(len);
        rest = tail;
        let bytes: Vec<u8> = block.iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

/// Loads a checkpoint; returns the model and the seed it was trained with.
pub fn load_model(dir: &Path) -> Result<(FactorModel, u64)> {
    let meta = dir.join("meta");
    let ini = Ini::load_from_file(&meta).map_err(|e| CliError::Data(format!("{}: {e}", meta.display())))?;
    let get = |key: &str| -> Result<String> {
        ini.general_section()
            .get(key)
            .map(str::to_owned)
            .ok_or_else(|| CliError::Data(format!("{}: missing `{key}`", meta.display())))
    };
    let parse_err = |key: &str| CliError::Data(format!("{}: bad `{key}`", meta.display()));
    if get("format")? != MODEL_FORMAT {
        return Err(CliError::Data(format!("{}: unsupported checkpoint format", meta.display())));
    }
    let n_users: u32 = get("n_users")?.parse().map_err(|_| parse_err("n_users"))?;
    let n_items: u32 = get("n_items")?.parse().map_err(|_| parse_err("n_items"))?;
    let rank: usize = get("rank")?.parse().map_err(|_| parse_err("rank"))?;
    let seed: u64 = get("seed")?.parse().map_err(|_| parse_err("seed"))?;
    let clamp_eps: f64 = get("clamp_eps")?.parse().map_err(|_| parse_err("clamp_eps"))?;
    let mut params = Vec::with_capacity(FactorModel::param_len(n_users, n_items, rank));
    for (name, len) in BLOCKS.iter().zip(block_lengths(n_users, n_items, rank)) {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if bytes.len() != len * 8 {
            return Err(CliError::Data(format!(
                "{}: expected {} bytes, found {}",
                path.display(),
                len * 8,
                bytes.len()
            )));
        }
        params.extend(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))),
        );
    }
    let model = FactorModel::from_params(n_users, n_items, rank, params)?.with_clamp_eps(clamp_eps)?;
    Ok((model, seed))
}
