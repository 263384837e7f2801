use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::Value;

/// Structured run log: one JSON object per line, no timestamps, so
/// identical runs write identical logs.
pub struct EventLog {
    out: BufWriter<File>,
}

impl EventLog {
    pub fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self { out: BufWriter::new(f) })
    }

    pub fn emit(&mut self, event: &str, mut fields: Value) -> Result<()> {
        if let Value::Object(map) = &mut fields {
            map.insert("event".into(), Value::String(event.into()));
        }
        serde_json::to_writer(&mut self.out, &fields)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
