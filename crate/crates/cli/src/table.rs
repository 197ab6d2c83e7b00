//! CSV tables with a provenance footer.
//!
//! Body: RFC-4180, LF line endings, header row first, `.` decimal point,
//! floats in shortest round-trip form. Footer: `# key=value` lines giving
//! the command, seed, crate version and config hash.

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

/// A value rendered into one CSV cell.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        if self.is_nan() {
            "nan".into()
        } else if self.is_infinite() {
            if *self > 0.0 { "inf" } else { "-inf" }.into()
        } else {
            format!("{self:?}")
        }
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {
        $(impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        })*
    };
}

display_cell!(usize, u64, u32, i64, bool, str, String);

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

impl<T: Cell> Cell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map(Cell::cell).unwrap_or_default()
    }
}

/// `row![a, b, c]` renders each argument with [`Cell`].
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => {
        vec![$($crate::table::Cell::cell(&$x)),*]
    };
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[&'static str] {
        self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self, provenance: &Provenance) -> CliResult<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Numerical(format!("csv encoding: {e}"));
        w.write_record(self.columns).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r).map_err(fail)?;
        }
        let mut out = w
            .into_inner()
            .map_err(|e| CliError::Numerical(format!("csv encoding: {e}")))?;
        out.extend_from_slice(provenance.footer().as_bytes());
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn footer(&self) -> String {
        format!(
            "# command={}\n# seed={}\n# version={}\n# config_sha256={}\n",
            self.command, self.seed, VERSION, self.config_hash
        )
    }
}

/// Splits rendered output into the CSV body and the footer lines.
pub fn split_footer(text: &str) -> (&str, Vec<&str>) {
    let cut = text.find("\n# ").map(|i| i + 1).unwrap_or(text.len());
    let (body, footer) = text.split_at(cut);
    (body, footer.lines().collect())
}
