use std::io::Write;

use crate::error::Result;

/// One exported transition: a step index, state columns, action and reward.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub index: u64,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
}

/// Comma-separated episode trace with a header row.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub header: Vec<String>,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(header: Vec<String>) -> Self {
        Trace {
            header,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for r in &self.records {
            write!(w, "{}", r.index)?;
            for v in r.state.iter().chain(&r.action) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", r.reward)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }
}
