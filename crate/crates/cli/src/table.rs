//! CSV output with round-trip-exact reals.

use std::io::Write;

/// 17 significant digits: parses back to the same `f64`. Infinities and NaN
/// come out as `inf`, `-inf` and `NaN`, which `str::parse::<f64>` accepts.
pub fn real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub struct Table<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> Table<W> {
    pub fn new(sink: W, header: &[&str]) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(header)?;
        Ok(Table { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> csv::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}
