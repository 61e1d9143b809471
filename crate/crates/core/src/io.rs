//! CSV/JSON helpers shared by the exporters. Numbers are written in
//! scientific notation with 17 significant digits so that they round-trip.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes an optional `# ...` metadata line, a header row and the rows.
pub fn write_table<W, I, R>(
    mut out: W,
    header: Option<&str>,
    columns: &[&str],
    rows: I,
) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    if let Some(h) = header {
        writeln!(out, "# {h}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|&x| format_number(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
