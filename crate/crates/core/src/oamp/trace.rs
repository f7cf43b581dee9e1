use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TRACE_CSV_HEADER: &str = "iter,v_pri,v_post,v_orth,t_star,psnr,residual";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iter: usize,
    pub v_pri: f64,
    pub v_post: f64,
    pub v_orth: f64,
    pub t_star: f64,
    pub psnr: Option<f64>,
    /// `‖A·x_pri − y‖²/M` after the update.
    pub residual: f64,
    /// Empirical variance of `s_in − s` when the truth is known.
    pub input_error_var: Option<f64>,
    /// Empirical kurtosis of `s_in − s` when the truth is known.
    pub input_error_kurtosis: Option<f64>,
    /// Cumulative predictor evaluations.
    pub nfe: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub iter: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Converged { iter: usize },
    MaxIters,
    /// The linear estimate was exact; nothing left for the denoiser.
    ExactLinear { iter: usize },
    NoInformation { iter: usize },
    Error { iter: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub faults: Vec<Fault>,
    pub termination: Termination,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn psnr_series(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.psnr).collect()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.iter,
                r.v_pri,
                r.v_post,
                r.v_orth,
                r.t_star,
                opt(r.psnr),
                r.residual
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }
}
