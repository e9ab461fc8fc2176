use std::io::{Read, Write};

use crate::error::{IctmError, Result};
use crate::optimizer::IterationRecord;

pub const LOG_HEADER: &str =
    "k,J,J_tau,volume_fraction,flipped_nodes,correction_depth,wall_time_ms";

/// CSV iteration log that flushes after every row.
pub struct LogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> LogWriter<W> {
    pub fn new(writer: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(writer),
        }
    }

    pub fn write(&mut self, record: &IterationRecord) -> Result<()> {
        self.inner.serialize(record)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_iteration_log<W: Write>(records: &[IterationRecord], writer: W) -> Result<()> {
    if records.is_empty() {
        return Err(IctmError::Parse(
            "refusing to write an empty iteration log".into(),
        ));
    }
    let mut log = LogWriter::new(writer);
    for r in records {
        log.write(r)?;
    }
    Ok(())
}

pub fn read_iteration_log<R: Read>(reader: R) -> Result<Vec<IterationRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<&str> = rdr.headers()?.iter().collect();
    if header.join(",") != LOG_HEADER {
        return Err(IctmError::Parse(format!(
            "unexpected log header {:?}",
            header.join(",")
        )));
    }
    rdr.deserialize()
        .map(|r| r.map_err(IctmError::from))
        .collect()
}
