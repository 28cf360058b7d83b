use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::corpus::{CleanExample, LabelMap, Language, RawRecord};

fn tsv_reader<R: Read>(input: R, has_header: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(has_header)
        .quoting(false)
        .flexible(true)
        .from_reader(input)
}

/// Reads `id<TAB>text<TAB>label` rows. Labels must belong to `labels`.
pub fn parse_raw_tsv<R: Read>(
    input: R,
    language: Language,
    has_header: bool,
    labels: &LabelMap,
) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, row) in tsv_reader(input, has_header).records().enumerate() {
        let line = i + 1 + usize::from(has_header);
        let row = row.map_err(|e| Error::parse(format!("raw tsv line {line}"), e.to_string()))?;
        if row.len() != 3 {
            return Err(Error::parse(
                format!("raw tsv line {line}"),
                format!("expected 3 columns, found {}", row.len()),
            ));
        }
        let body = row[1].to_string();
        if body.trim().is_empty() {
            return Err(Error::parse(format!("raw tsv line {line}"), "empty text"));
        }
        labels
            .bit(&row[2])
            .map_err(|e| Error::parse(format!("raw tsv line {line}"), e.to_string()))?;
        out.push(RawRecord {
            id: row[0].to_string(),
            body,
            label: row[2].trim().to_string(),
            language,
        });
    }
    Ok(out)
}

pub fn read_raw_tsv(
    path: &Path,
    language: Language,
    has_header: bool,
    labels: &LabelMap,
) -> Result<Vec<RawRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_raw_tsv(file, language, has_header, labels)
}

/// Writes `id<TAB>space-joined tokens<TAB>{0,1}<TAB>{hindi,bengali}`.
pub fn write_clean_tsv<W: Write>(out: &mut W, examples: &[CleanExample]) -> std::io::Result<()> {
    for ex in examples {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            ex.id,
            ex.tokens.join(" "),
            ex.label,
            ex.language
        )?;
    }
    Ok(())
}

pub fn save_clean_tsv(path: &Path, examples: &[CleanExample]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_clean_tsv(&mut w, examples)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn parse_clean_tsv<R: Read>(input: R) -> Result<Vec<CleanExample>> {
    let mut out = Vec::new();
    for (i, row) in tsv_reader(input, false).records().enumerate() {
        let ctx = || format!("cleaned tsv line {}", i + 1);
        let row = row.map_err(|e| Error::parse(ctx(), e.to_string()))?;
        if row.len() != 4 {
            return Err(Error::parse(
                ctx(),
                format!("expected 4 columns, found {}", row.len()),
            ));
        }
        let tokens: Vec<String> = row[1]
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        if tokens.is_empty() {
            return Err(Error::parse(ctx(), "empty token sequence"));
        }
        let label = match &row[2] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::parse(
                    ctx(),
                    format!("label {other:?} is not 0 or 1"),
                ))
            }
        };
        out.push(CleanExample {
            id: row[0].to_string(),
            tokens,
            label,
            language: row[3].parse()?,
        });
    }
    Ok(out)
}

pub fn read_clean_tsv(path: &Path) -> Result<Vec<CleanExample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_clean_tsv(file)
}
