//! Line-delimited JSON result logs: one header object, then one record per
//! processed frame.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracker::{FrameOutput, TrackerConfig};

pub const RESULT_FORMAT: &str = "lmcf-results";
pub const RESULT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ResultLog {
    pub sequence: String,
    pub config: TrackerConfig,
    pub records: Vec<FrameOutput>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    sequence: String,
    config: TrackerConfig,
}

#[derive(Deserialize)]
struct VersionProbe {
    format: Option<String>,
    version: Option<u32>,
}

impl ResultLog {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = Vec::new();
        write_to(self, &mut out)?;
        Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
    }
}

fn write_to(log: &ResultLog, mut w: impl Write) -> Result<()> {
    let header = Header {
        format: RESULT_FORMAT.into(),
        version: RESULT_VERSION,
        sequence: log.sequence.clone(),
        config: log.config,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for r in &log.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results(log: &ResultLog, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_to(log, BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_results(path: &Path) -> Result<ResultLog> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| err(1, "empty result log".into()))?;
    let first = first?;
    let probe: VersionProbe = serde_json::from_str(&first).map_err(|e| err(1, e.to_string()))?;
    if probe.format.as_deref() != Some(RESULT_FORMAT) {
        return Err(err(1, format!("not a {RESULT_FORMAT} header")));
    }
    match probe.version {
        Some(RESULT_VERSION) => {}
        Some(found) => {
            return Err(Error::UnsupportedVersion {
                found,
                expected: RESULT_VERSION,
            })
        }
        None => return Err(err(1, "header has no version".into())),
    }
    let header: Header = serde_json::from_str(&first).map_err(|e| err(1, e.to_string()))?;
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<FrameOutput>(&line).map_err(|e| err(i + 1, e.to_string()))?);
    }
    Ok(ResultLog {
        sequence: header.sequence,
        config: header.config,
        records,
    })
}
