//! Output files: a `#` header line, then RFC 4180 CSV or plain text.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn header(command: &str, seed: u64, config_hash: &str) -> String {
    format!("# eomc {VERSION} command={command} seed={seed} config_sha256={config_hash}\n")
}

/// Shortest round-trip decimal, switching to exponent form for very large or
/// small magnitudes. Never locale dependent.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e7).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> CliResult<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(columns).map_err(csv_err)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(csv_err)
    }

    pub fn finish(self) -> CliResult<String> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Input(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| CliError::Input(format!("csv: {e}")))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Input(format!("csv: {e}"))
}

/// Writes `contents` to `dir/name`, creating `dir`; replaces any previous
/// file atomically.
pub fn write(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_forms() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.5), "1.5");
        assert_eq!(num(-105.25), "-105.25");
        assert_eq!(num(2.5e-5), "2.5e-5");
        assert_eq!(num(1.049e-17), "1.049e-17");
        for x in [0.1, 3.0e-9, 12345.678, -7.2e12] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_shape() {
        let mut t = Table::new(&["a", "b"]).unwrap();
        t.row([num(1.0), "x".to_owned()]).unwrap();
        assert_eq!(t.finish().unwrap(), "a,b\n1,x\n");
    }
}
