use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use parquet::basic::Compression;
use parquet::data_type::{ByteArray, ByteArrayType, Int64Type};
use parquet::file::properties::{EnabledStatistics, WriterProperties};
use parquet::file::reader::{FileReader, SerializedFileReader};
use parquet::file::writer::SerializedFileWriter;
use parquet::record::RowAccessor;
use parquet::schema::parser::parse_message_type;

use super::{DatasetError, LabeledRecord};

/// Column names in schema order.
pub const COLUMNS: [&str; 12] = [
    "tool",
    "warning_type",
    "warning_msg",
    "parent_sha",
    "parent_date",
    "commit_sha",
    "commit_date",
    "repo",
    "filename",
    "positions",
    "filepath",
    "label",
];

const ROW_GROUP_SIZE: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Parquet,
    Jsonl,
}

impl DatasetFormat {
    pub fn extension(self) -> &'static str {
        match self {
            DatasetFormat::Parquet => "parquet",
            DatasetFormat::Jsonl => "jsonl",
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parquet" => Ok(DatasetFormat::Parquet),
            "jsonl" => Ok(DatasetFormat::Jsonl),
            other => Err(format!(
                "unknown dataset format {other:?} (expected parquet or jsonl)"
            )),
        }
    }
}

fn schema() -> parquet::schema::types::Type {
    let mut text = String::from("message nascar {\n");
    for c in &COLUMNS[..11] {
        text.push_str(&format!("  REQUIRED BYTE_ARRAY {c} (UTF8);\n"));
    }
    text.push_str("  REQUIRED INT64 label;\n}\n");
    parse_message_type(&text).expect("static schema")
}

fn string_column(r: &LabeledRecord, i: usize) -> &str {
    match i {
        0 => &r.tool,
        1 => &r.warning_type,
        2 => &r.warning_msg,
        3 => &r.parent_sha,
        4 => &r.parent_date,
        5 => &r.commit_sha,
        6 => &r.commit_date,
        7 => &r.repo,
        8 => &r.filename,
        9 => &r.positions,
        10 => &r.filepath,
        _ => unreachable!("label is not a string column"),
    }
}

/// Write all records to `path`, replacing any existing file.
pub fn write_dataset(
    records: &[LabeledRecord],
    path: &Path,
    format: DatasetFormat,
) -> Result<(), DatasetError> {
    let tmp = path.with_extension(format!("{}.tmp", format.extension()));
    match format {
        DatasetFormat::Parquet => write_parquet(records, File::create(&tmp)?)?,
        DatasetFormat::Jsonl => {
            let mut out = BufWriter::new(File::create(&tmp)?);
            for r in records {
                serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_parquet(records: &[LabeledRecord], file: File) -> Result<(), DatasetError> {
    let props = WriterProperties::builder()
        .set_created_by("nascar".to_string())
        .set_compression(Compression::UNCOMPRESSED)
        .set_statistics_enabled(EnabledStatistics::None)
        .build();
    let mut writer = SerializedFileWriter::new(file, Arc::new(schema()), Arc::new(props))?;
    for chunk in records.chunks(ROW_GROUP_SIZE) {
        let mut group = writer.next_row_group()?;
        for i in 0..COLUMNS.len() {
            let mut col = group.next_column()?.expect("schema has 12 columns");
            if i < 11 {
                let values: Vec<ByteArray> = chunk
                    .iter()
                    .map(|r| ByteArray::from(string_column(r, i)))
                    .collect();
                col.typed::<ByteArrayType>()
                    .write_batch(&values, None, None)?;
            } else {
                let values: Vec<i64> = chunk.iter().map(|r| r.label).collect();
                col.typed::<Int64Type>().write_batch(&values, None, None)?;
            }
            col.close()?;
        }
        group.close()?;
    }
    writer.close()?;
    Ok(())
}

/// Read a dataset written by [`write_dataset`]; the format is detected from
/// the file's magic bytes.
pub fn read_dataset(path: &Path) -> Result<Vec<LabeledRecord>, DatasetError> {
    let mut magic = [0u8; 4];
    let n = File::open(path)?.read(&mut magic)?;
    if n == 4 && &magic == b"PAR1" {
        read_parquet(path)
    } else {
        read_jsonl(path)
    }
}

fn read_jsonl(path: &Path) -> Result<Vec<LabeledRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| DatasetError::Json {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

fn read_parquet(path: &Path) -> Result<Vec<LabeledRecord>, DatasetError> {
    let reader = SerializedFileReader::new(File::open(path)?)?;
    let fields = reader
        .metadata()
        .file_metadata()
        .schema_descr()
        .root_schema()
        .get_fields()
        .to_vec();
    let names: Vec<&str> = fields.iter().map(|f| f.name()).collect();
    if names != COLUMNS {
        return Err(DatasetError::Schema {
            column: names.join(","),
            reason: format!("expected columns {}", COLUMNS.join(",")),
        });
    }
    let mut out = Vec::with_capacity(reader.metadata().file_metadata().num_rows() as usize);
    for row in reader.get_row_iter(None)? {
        let row = row?;
        let s = |i: usize| {
            row.get_string(i)
                .cloned()
                .map_err(|e| DatasetError::Schema {
                    column: COLUMNS[i].to_string(),
                    reason: e.to_string(),
                })
        };
        out.push(LabeledRecord {
            tool: s(0)?,
            warning_type: s(1)?,
            warning_msg: s(2)?,
            parent_sha: s(3)?,
            parent_date: s(4)?,
            commit_sha: s(5)?,
            commit_date: s(6)?,
            repo: s(7)?,
            filename: s(8)?,
            positions: s(9)?,
            filepath: s(10)?,
            label: row.get_long(11).map_err(|e| DatasetError::Schema {
                column: "label".into(),
                reason: e.to_string(),
            })?,
        });
    }
    Ok(out)
}
