//! File helpers that attach paths to errors and write outputs atomically.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rollaid::{CostTable, IsrModel, TransactionLog};

use crate::error::{CliError, CliResult};

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::File {
            path: path.to_owned(),
            source,
        })
}

fn tag<T>(path: &Path, r: rollaid::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::Input {
        path: path.to_owned(),
        source,
    })
}

pub fn read_log(path: &Path) -> CliResult<TransactionLog> {
    tag(path, rollaid::load_transactions(open(path)?))
}

pub fn read_costs(path: &Path) -> CliResult<CostTable> {
    tag(path, rollaid::load_costs(open(path)?))
}

pub fn read_model(path: &Path) -> CliResult<IsrModel> {
    tag(path, rollaid::load_model(open(path)?))
}

pub fn read_snapshot(path: &Path) -> CliResult<rollaid::FleetSnapshot> {
    tag(path, rollaid::load_snapshot(open(path)?))
}

/// Writes through a sibling temporary file and renames it into place, so a
/// reader (or a service reload) never sees a half-written file.
pub fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> rollaid::Result<()>,
) -> CliResult<()> {
    let mut tmp = PathBuf::from(path);
    tmp.as_mut_os_string().push(".tmp");
    let file = File::create(&tmp).map_err(|source| CliError::File {
        path: tmp.clone(),
        source,
    })?;
    let mut sink = BufWriter::new(file);
    tag(path, body(&mut sink))?;
    sink.flush()?;
    drop(sink);
    fs::rename(&tmp, path).map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })
}
