//! Artifact writers. JSON is pretty-printed with a trailing newline; CSV has a
//! header row, comma separators, and LF line endings. Floats use the shortest
//! representation that round-trips, so equal values give equal bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::env::Environment;
use crate::error::Result;
use crate::vec2::Vec2;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Opens `path` for writing and hands a buffered writer to `body`.
pub fn write_with<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

/// Field values on the grid `h·(i, j)`, `|h·i|, |h·j| ≤ half_width`:
/// rows `x,value` in 1-D and `x,y,value` in 2-D.
pub fn write_env_snapshot<W: Write>(env: &Environment, half_width: f64, h: f64, out: W) -> Result<()> {
    let n = (half_width / h).floor() as i64;
    let mut w = csv::Writer::from_writer(out);
    if env.dim() == 1 {
        w.write_record(["x", "value"])?;
        for i in -n..=n {
            let y = Vec2::on_axis(h * i as f64);
            w.write_record([y.x.to_string(), env.value(y).to_string()])?;
        }
    } else {
        w.write_record(["x", "y", "value"])?;
        for j in -n..=n {
            for i in -n..=n {
                let y = Vec2::new(h * i as f64, h * j as f64);
                w.write_record([y.x.to_string(), y.y.to_string(), env.value(y).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
