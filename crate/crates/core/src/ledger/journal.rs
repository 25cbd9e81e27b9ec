use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::{LedgerError, LedgerTransaction};

/// Append-only newline-delimited transaction file.
///
/// Writers hold an exclusive advisory lock for the whole
/// ingest-execute-append cycle, so a partial trailing line is only ever
/// visible to lock-free readers.
pub(super) struct Journal {
    file: File,
    offset: u64,
}

impl Journal {
    pub(super) fn open(path: &Path) -> Result<Self, LedgerError> {
        let file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        Ok(Self { file, offset: 0 })
    }

    pub(super) fn lock(&self) -> Result<(), LedgerError> {
        self.file.lock().map_err(Into::into)
    }

    pub(super) fn unlock(&self) -> Result<(), LedgerError> {
        self.file.unlock().map_err(Into::into)
    }

    /// Parse complete records past the current offset. `first_seq` is the
    /// sequence number expected for the first new record. With `exclusive`
    /// set, a trailing partial line is corruption rather than a write in
    /// progress.
    ///
    /// Returns the records and the offset just past them; the caller moves
    /// the offset with [`Journal::advance_to`] once they are applied.
    pub(super) fn read_new(
        &mut self,
        exclusive: bool,
        first_seq: u64,
    ) -> Result<(Vec<LedgerTransaction>, u64), LedgerError> {
        self.file.seek(SeekFrom::Start(self.offset))?;
        let mut buf = Vec::new();
        self.file.read_to_end(&mut buf)?;
        let complete = buf.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if exclusive && complete < buf.len() {
            return Err(LedgerError::ChainBroken {
                seq: first_seq + buf[..complete].iter().filter(|&&b| b == b'\n').count() as u64,
                reason: "truncated record".into(),
            });
        }
        let text = std::str::from_utf8(&buf[..complete]).map_err(|e| LedgerError::ChainBroken {
            seq: first_seq,
            reason: format!("invalid UTF-8: {e}"),
        })?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let tx = LedgerTransaction::from_json(line).map_err(|reason| LedgerError::ChainBroken {
                seq: first_seq + i as u64,
                reason,
            })?;
            records.push(tx);
        }
        Ok((records, self.offset + complete as u64))
    }

    pub(super) fn advance_to(&mut self, offset: u64) {
        self.offset = offset;
    }

    /// Append one record; returns the new file length.
    pub(super) fn append(&mut self, tx: &LedgerTransaction) -> Result<u64, LedgerError> {
        let mut line = tx.to_json();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.offset += line.len() as u64;
        Ok(self.offset)
    }
}
