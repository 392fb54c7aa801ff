use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use bitforensics::ingest::{discover_manifests, load_bit, load_ground_truth, BitManifest};
use bitforensics::{BitDetections, Error};
use rayon::ThreadPool;
use serde::Serialize;

use crate::{CliError, CliResult, Inputs, OutOpts};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "BITFORENSICS_THREADS";

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

pub fn emit(out: &OutOpts, text: &str) -> CliResult<()> {
    match &out.out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Invalid(format!("stdout: {e}")))
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Comment lines opening every CSV report.
pub fn csv_preamble<T: Serialize>(config: &T) -> String {
    format!(
        "# schema_version={SCHEMA_VERSION}\n# config={}\n",
        serde_json::to_string(config).expect("config serializes")
    )
}

pub fn csv_text(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("write to Vec");
    }
    String::from_utf8(w.into_inner().expect("flush Vec")).expect("utf-8 cells")
}

/// Every requested manifest, sorted by bit id.
pub fn load_manifests(inputs: &Inputs) -> CliResult<Vec<BitManifest>> {
    let mut paths = inputs.manifests.clone();
    if let Some(dir) = &inputs.dataset {
        paths.extend(discover_manifests(dir)?);
    }
    if paths.is_empty() {
        return Err(CliError::Usage(
            "no input: pass --manifest or --dataset".into(),
        ));
    }
    let mut manifests = paths
        .iter()
        .map(|p| BitManifest::from_path(p))
        .collect::<Result<Vec<_>, _>>()?;
    manifests.sort_by(|a, b| a.bit_id.cmp(&b.bit_id));
    let mut seen = HashSet::new();
    for m in &manifests {
        if !seen.insert(m.bit_id.as_str()) {
            return Err(Error::Manifest(format!("bit `{}` given twice", m.bit_id)).into());
        }
    }
    Ok(manifests)
}

pub fn detections(m: &BitManifest, use_gt: bool) -> CliResult<BitDetections> {
    Ok(if use_gt {
        load_ground_truth(m)?.into_detections(m.num_main_blades)?
    } else {
        load_bit(m)?
    })
}

/// Worker pool, capped by `BITFORENSICS_THREADS` when set.
pub fn pool() -> CliResult<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            CliError::Usage(format!("{THREADS_ENV}={v} is not a positive integer"))
        })?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Invalid(e.to_string()))
}

/// Apply `f` to every manifest on the pool; results keep input order.
pub fn per_bit<T, F>(manifests: &[BitManifest], f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(&BitManifest) -> CliResult<T> + Sync,
{
    use rayon::prelude::*;
    pool()?.install(|| manifests.par_iter().map(&f).collect())
}
