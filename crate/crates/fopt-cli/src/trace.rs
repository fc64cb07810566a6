//! Per-step CSV trace. One row per applied step, LF line endings, `.`
//! decimal separator (Rust float formatting is locale-independent).
//!
//! The `wall_ns` column is the only nondeterministic field: two runs with
//! identical settings produce byte-identical traces everywhere else.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const TRACE_HEADER: &str = "step,loss,grad_rms,update_rms,eps_hat,wall_ns";

pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(TRACE_HEADER.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(TraceWriter { out })
    }

    pub fn row(
        &mut self,
        step: u64,
        loss: f64,
        grad_rms: f64,
        update_rms: f64,
        eps_hat: f64,
        wall_ns: u128,
    ) -> io::Result<()> {
        writeln!(
            self.out,
            "{step},{loss},{grad_rms},{update_rms},{eps_hat},{wall_ns}"
        )
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}
