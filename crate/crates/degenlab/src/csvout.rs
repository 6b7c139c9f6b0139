//! CSV emission helpers. Floats are written with 17 significant digits so
//! round-tripping through the files is lossless and repeated runs produce
//! byte-identical bodies.

use std::fs;
use std::io;
use std::path::Path;

pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)
}
