use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, CorpusSplit, DialogSample, Label, SplitRole};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// On-disk split formats. JSONL is canonical; the TSV formats mirror the
/// `[CONTEXT] [RESPONSE] [LABEL]` and `[CONTEXT] [RESPONSE]*x` layouts and
/// are read-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Jsonl,
    TsvBinary,
    TsvRanking,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "tsv-binary" => Ok(Format::TsvBinary),
            "tsv-ranking" => Ok(Format::TsvRanking),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonLabel {
    Index(usize),
    Tag(String),
}

#[derive(Serialize, Deserialize)]
struct JsonlRecord {
    context: String,
    candidates: Vec<String>,
    label: JsonLabel,
}

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::MalformedLine {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Load a split. `seed` is used only by the ranking format, which stores the
/// ground truth first and shuffles candidate order on load.
pub fn load_split(path: &Path, format: Format, role: SplitRole, seed: u64) -> Result<CorpusSplit> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    let mut rng = stream_rng(seed, "tsv-ranking-shuffle");
    let mut expected_x: Option<usize> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.is_empty() {
            continue;
        }
        let sample = match format {
            Format::Jsonl => {
                let rec: JsonlRecord = serde_json::from_str(&line)
                    .map_err(|e| malformed(path, lineno, e.to_string()))?;
                let candidates: Vec<Vec<String>> =
                    rec.candidates.iter().map(|c| tokenize(c)).collect();
                let label = match rec.label {
                    JsonLabel::Index(i) => {
                        if i >= candidates.len() {
                            return Err(malformed(
                                path,
                                lineno,
                                format!("label {i} out of range for {} candidates", candidates.len()),
                            ));
                        }
                        Label::GroundTruth(i)
                    }
                    JsonLabel::Tag(t) if t == "NOTA" => Label::IsNota,
                    JsonLabel::Tag(t) => {
                        return Err(malformed(path, lineno, format!("unknown label {t:?}")))
                    }
                };
                DialogSample {
                    context: tokenize(&rec.context),
                    candidates,
                    label,
                }
            }
            Format::TsvBinary => {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 3 {
                    return Err(malformed(path, lineno, "expected context\\tresponse\\tlabel"));
                }
                let label = match fields[2] {
                    "1" => Label::GroundTruth(0),
                    // Negative pairs carry no ground truth in the candidate list.
                    "0" => Label::IsNota,
                    other => {
                        return Err(malformed(path, lineno, format!("label must be 0/1, got {other:?}")))
                    }
                };
                DialogSample {
                    context: tokenize(fields[0]),
                    candidates: vec![tokenize(fields[1])],
                    label,
                }
            }
            Format::TsvRanking => {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() < 3 {
                    return Err(malformed(path, lineno, "expected context and at least 2 candidates"));
                }
                let x = fields.len() - 1;
                if let Some(e) = expected_x {
                    if x != e {
                        return Err(malformed(
                            path,
                            lineno,
                            format!("inconsistent candidate count: expected {e}, got {x}"),
                        ));
                    }
                } else {
                    expected_x = Some(x);
                }
                let candidates: Vec<Vec<String>> =
                    fields[1..].iter().map(|c| tokenize(c)).collect();
                // Ground truth is stored first; shuffle so position carries
                // no information.
                let mut order: Vec<usize> = (0..x).collect();
                order.shuffle(&mut rng);
                let label = Label::GroundTruth(order.iter().position(|&i| i == 0).unwrap());
                let candidates = order.into_iter().map(|i| candidates[i].clone()).collect();
                DialogSample {
                    context: tokenize(fields[0]),
                    candidates,
                    label,
                }
            }
        };
        samples.push(sample);
    }
    Ok(CorpusSplit::new(samples, role))
}

/// Save a split as JSONL. The TSV formats are read-only.
pub fn save_split(split: &CorpusSplit, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Jsonl => {}
        other => {
            return Err(Error::Unsupported(format!(
                "{other:?} is read-only; save splits as jsonl"
            )))
        }
    }
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    for sample in &split.samples {
        let rec = JsonlRecord {
            context: sample.context.join(" "),
            candidates: sample.candidates.iter().map(|c| c.join(" ")).collect(),
            label: match sample.label {
                Label::GroundTruth(i) => JsonLabel::Index(i),
                Label::IsNota => JsonLabel::Tag("NOTA".to_string()),
            },
        };
        serde_json::to_writer(&mut writer, &rec).map_err(|e| Error::Json {
            path: path.display().to_string(),
            source: e,
        })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
