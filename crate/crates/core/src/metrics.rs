//! Evaluation-time quantities and CSV output.
//!
//! Loss and FW-gap are measured at the network average of the agents'
//! iterates. Their sample evaluations are charged to `eval_ifo_cum`, never to
//! the algorithmic IFO counter.

use std::io::{self, Write};

use crate::constraint::{ConstraintError, ConstraintSet};

pub const CSV_HEADER: &str = "k,gamma,loss,fw_gap,consensus_err,ifo_cum,lo_cum,comm_rounds_cum,eval_ifo_cum";

/// `max_{u in set} <grad, x_bar - u> = <grad, x_bar> - <grad, lmo(grad)>`.
pub fn fw_gap(x_bar: &[f64], grad: &[f64], set: &dyn ConstraintSet) -> Result<f64, ConstraintError> {
    let u = set.lmo(grad)?;
    let inner: f64 = grad.iter().zip(x_bar).map(|(g, x)| g * x).sum();
    Ok(inner - u.dot(grad))
}

/// Closed form over the l1 ball: `<grad, x_bar> + R ||grad||_inf`.
pub fn fw_gap_l1(x_bar: &[f64], grad: &[f64], radius: f64) -> f64 {
    let inner: f64 = grad.iter().zip(x_bar).map(|(g, x)| g * x).sum();
    inner + radius * grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
}

pub fn average(iterates: &[&[f64]]) -> Vec<f64> {
    let dim = iterates.first().map_or(0, |x| x.len());
    let mut avg = vec![0.0; dim];
    for x in iterates {
        avg.iter_mut().zip(*x).for_each(|(a, v)| *a += v);
    }
    let inv = 1.0 / iterates.len().max(1) as f64;
    avg.iter_mut().for_each(|a| *a *= inv);
    avg
}

/// `max_i ||x_i - x_bar||_2`.
pub fn consensus_error(iterates: &[&[f64]]) -> f64 {
    let avg = average(iterates);
    iterates
        .iter()
        .map(|x| x.iter().zip(&avg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub gamma: f64,
    pub loss: f64,
    pub fw_gap: f64,
    pub consensus_err: f64,
    pub ifo_cum: u64,
    pub lo_cum: u64,
    pub comm_rounds_cum: u64,
    pub eval_ifo_cum: u64,
}

/// Logged records plus `key=value` metadata echoed into the CSV preamble.
#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub solver: String,
    pub iters: usize,
    pub metadata: Vec<(String, String)>,
    pub records: Vec<IterationRecord>,
    /// Agents' iterates after the last round.
    pub final_iterates: Vec<Vec<f64>>,
}

impl RunLog {
    pub fn push_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.last().map(|r| r.loss)
    }

    pub fn record_at(&self, k: usize) -> Option<&IterationRecord> {
        self.records.iter().find(|r| r.k == k)
    }

    /// Minimum logged FW-gap over `k in [K/2 + 1, K]`.
    pub fn min_fw_gap_second_half(&self) -> Option<f64> {
        let lo = self.iters / 2 + 1;
        self.records
            .iter()
            .filter(|r| r.k >= lo && r.k <= self.iters)
            .map(|r| r.fw_gap)
            .reduce(f64::min)
    }
}

/// 17 significant digits; parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the `# key=value` preamble, header, rows and summary footer.
pub fn emit_csv<W: Write>(log: &RunLog, mut sink: W) -> io::Result<()> {
    for (k, v) in &log.metadata {
        writeln!(sink, "# {k}={v}")?;
    }
    writeln!(sink, "{CSV_HEADER}")?;
    for r in &log.records {
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            format_float(r.gamma),
            format_float(r.loss),
            format_float(r.fw_gap),
            format_float(r.consensus_err),
            r.ifo_cum,
            r.lo_cum,
            r.comm_rounds_cum,
            r.eval_ifo_cum
        )?;
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), format_float);
    writeln!(sink, "# min_fw_gap_second_half={}", opt(log.min_fw_gap_second_half()))?;
    writeln!(sink, "# final_loss={}", opt(log.final_loss()))?;
    sink.flush()
}
