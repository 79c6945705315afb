use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::header::split_header_body;
use super::mbox::{parse_mbox, parse_text_file, MboxReport};
use super::{EmailSample, IngestError, Label, RawEmail, Source};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub label: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    pub file: String,
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileReport {
    pub path: String,
    pub messages: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mbox: Option<MboxReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub phishing: usize,
    pub legitimate: usize,
}

/// Summary of one ingestion run, written as the `--report` JSON.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub total: usize,
    pub with_header: usize,
    pub per_source: BTreeMap<String, ClassCounts>,
    pub files: Vec<FileReport>,
    pub warnings: Vec<ParseWarning>,
}

impl IngestReport {
    fn record(&mut self, sample: &EmailSample) {
        self.total += 1;
        if sample.has_header {
            self.with_header += 1;
        }
        let counts = self
            .per_source
            .entry(sample.source.name().to_string())
            .or_default();
        match sample.label {
            Label::Phishing => counts.phishing += 1,
            Label::Legitimate => counts.legitimate += 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, IngestError> {
    let csv_err = |source| IngestError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "label", "source"] {
        return Err(IngestError::Manifest {
            path: path.display().to_string(),
            line: 1,
            message: format!(
                "expected header `path,label,source`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    reader
        .deserialize()
        .map(|row| row.map_err(csv_err))
        .collect()
}

fn parse_file(
    path: &Path,
    display: &str,
    label: Label,
    source: Source,
    report: &mut IngestReport,
    out: &mut Vec<EmailSample>,
) -> Result<(), IngestError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let is_mbox = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("mbox"));
    let (raws, mbox): (Vec<RawEmail>, Option<MboxReport>) = if is_mbox {
        let parsed = parse_mbox(&bytes, display);
        if parsed.report.no_separator {
            report.warnings.push(ParseWarning {
                file: display.to_string(),
                index: 0,
                message: "no `From ` separator line; whole file taken as one message".into(),
            });
        }
        if parsed.report.preamble_bytes > 0 {
            report.warnings.push(ParseWarning {
                file: display.to_string(),
                index: 0,
                message: format!(
                    "{} bytes before the first separator ignored",
                    parsed.report.preamble_bytes
                ),
            });
        }
        (parsed.emails, Some(parsed.report))
    } else {
        (parse_text_file(&bytes, display).into_iter().collect(), None)
    };

    report.files.push(FileReport {
        path: display.to_string(),
        messages: raws.len(),
        mbox,
    });
    for raw in &raws {
        let parsed = split_header_body(raw);
        for message in &parsed.warnings {
            report.warnings.push(ParseWarning {
                file: display.to_string(),
                index: raw.origin_index,
                message: message.clone(),
            });
        }
        let sample = parsed.labeled(label, source);
        report.record(&sample);
        out.push(sample);
    }
    Ok(())
}

/// Ingest every file listed in a `path,label,source` manifest. Paths are
/// relative to the manifest's directory.
pub fn ingest_manifest(manifest: &Path) -> Result<(Vec<EmailSample>, IngestReport), IngestError> {
    let rows = read_manifest(manifest)?;
    let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut report = IngestReport::default();
    let mut samples = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let bad = |message: String| IngestError::Manifest {
            path: manifest.display().to_string(),
            line: i + 2,
            message,
        };
        let label: Label = row.label.parse().map_err(bad)?;
        let source: Source = row.source.parse().map_err(bad)?;
        parse_file(
            &base.join(&row.path),
            &row.path,
            label,
            source,
            &mut report,
            &mut samples,
        )?;
    }
    Ok((samples, report))
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        if entry.file_type().map_err(io_err(dir))?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// Directory convention: `<root>/phishing/*` and `<root>/legitimate/*`,
/// every file tagged with `source`.
pub fn ingest_dir(
    root: &Path,
    source: Source,
) -> Result<(Vec<EmailSample>, IngestReport), IngestError> {
    let mut report = IngestReport::default();
    let mut samples = Vec::new();
    for label in [Label::Phishing, Label::Legitimate] {
        let dir = root.join(label.to_string());
        if !dir.is_dir() {
            continue;
        }
        for file in sorted_files(&dir)? {
            let display = file
                .strip_prefix(root)
                .unwrap_or(&file)
                .display()
                .to_string();
            parse_file(&file, &display, label, source, &mut report, &mut samples)?;
        }
    }
    Ok((samples, report))
}

/// JSON-lines, one sample per line.
pub fn write_dataset(path: &Path, samples: &[EmailSample]) -> Result<(), IngestError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        let line = serde_json::to_string(s).expect("EmailSample serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_dataset(path: &Path) -> Result<Vec<EmailSample>, IngestError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = serde_json::from_str(&line).map_err(|source| IngestError::Dataset {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_and_dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("a.mbox"),
            "From x\nSubject: one\n\nbody one\nFrom y\nSubject: two\n\nbody two\n",
        )
        .unwrap();
        fs::write(dir.path().join("b.txt"), "no header here").unwrap();
        fs::write(
            dir.path().join("m.csv"),
            "path,label,source\na.mbox,phishing,Nazario\nb.txt,legitimate,enron\n",
        )
        .unwrap();

        let (samples, report) = ingest_manifest(&dir.path().join("m.csv")).unwrap();
        assert_eq!(samples.len(), 3);
        assert_eq!(
            report.per_source["Nazario"],
            ClassCounts {
                phishing: 2,
                legitimate: 0
            }
        );
        assert_eq!(
            report.per_source["Enron"],
            ClassCounts {
                phishing: 0,
                legitimate: 1
            }
        );
        assert_eq!(report.with_header, 2);

        let out = dir.path().join("d.jsonl");
        write_dataset(&out, &samples).unwrap();
        assert_eq!(read_dataset(&out).unwrap(), samples);
    }

    #[test]
    fn bad_label_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("m.csv"),
            "path,label,source\nx.txt,spam,Enron\n",
        )
        .unwrap();
        let err = ingest_manifest(&dir.path().join("m.csv")).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("m.csv"), "file,label,source\n").unwrap();
        assert!(matches!(
            ingest_manifest(&dir.path().join("m.csv")),
            Err(IngestError::Manifest { .. })
        ));
    }

    #[test]
    fn directory_convention() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("phishing")).unwrap();
        fs::create_dir_all(dir.path().join("legitimate")).unwrap();
        fs::write(dir.path().join("phishing/1.txt"), "Subject: win\n\nclick").unwrap();
        fs::write(
            dir.path().join("legitimate/1.txt"),
            "Subject: lunch\n\nnoon",
        )
        .unwrap();
        let (samples, _) = ingest_dir(dir.path(), Source::Iwspa).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].label, Label::Phishing);
        assert_eq!(samples[1].header_subject, "lunch");
    }
}
