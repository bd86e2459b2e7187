//! Report rows shared by `run`, `sweep`, and `compare`.

use serde::Serialize;

use expmul_core::AccuracyReport;

pub const CSV_HEADER: &str =
    "kernel,dtype,d,N,max_abs_err,max_rel_err,mean_abs_err,cosine_min,flushed,seconds";

/// One comparison against the double-precision reference.
#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub kernel: &'static str,
    pub dtype: &'static str,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub mean_abs_err: f64,
    pub cosine_min: f64,
    pub flushed: u64,
    pub seconds: f64,
}

impl ReportRow {
    pub fn new(
        kernel: &'static str,
        dtype: &'static str,
        d: usize,
        n: usize,
        report: &AccuracyReport,
        seconds: f64,
    ) -> Self {
        Self {
            kernel,
            dtype,
            d,
            n,
            max_abs_err: report.max_abs_err,
            max_rel_err: report.max_rel_err,
            mean_abs_err: report.mean_abs_err,
            cosine_min: report.cosine_similarity_min,
            flushed: report.flushed_count,
            seconds,
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:e},{:e},{:e},{},{},{:.6}",
            self.kernel,
            self.dtype,
            self.d,
            self.n,
            self.max_abs_err,
            self.max_rel_err,
            self.mean_abs_err,
            self.cosine_min,
            self.flushed,
            self.seconds
        )
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
