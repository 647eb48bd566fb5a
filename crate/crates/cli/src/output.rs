use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Fixed formatting with 12 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

/// CSV text with `#` metadata lines before the header.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(command: &str, metadata: &[(&str, String)], header: &[String]) -> Self {
        let mut text = String::new();
        writeln!(text, "# heatpump {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(text, "# command: {command}").unwrap();
        for (key, value) in metadata {
            writeln!(text, "# {key}: {value}").unwrap();
        }
        writeln!(text, "{}", header.join(",")).unwrap();
        Self {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(12.0), "1.20000000000e1");
        assert_eq!(num(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(num(0.0), "0.00000000000e0");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn csv_layout() {
        let mut csv = Csv::new("test", &[("engine", "gaussian".into())], &["a".into(), "b".into()]);
        csv.row(vec![num(1.0), num(2.0)]);
        let text = csv.into_string();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# heatpump "));
        assert_eq!(lines[1], "# command: test");
        assert_eq!(lines[2], "# engine: gaussian");
        assert_eq!(lines[3], "a,b");
        assert_eq!(lines[4], "1.00000000000e0,2.00000000000e0");
    }
}
