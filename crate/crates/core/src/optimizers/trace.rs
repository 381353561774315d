use serde::{Deserialize, Serialize};

/// One trace point: the state at a snapshot (or monitored iterate).
///
/// `ifo` counts oracle calls charged by the algorithm itself, cumulative
/// over the run; gradient evaluations made only for reporting are marked
/// `probe` and their cost is kept out of the axis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub stage: usize,
    pub outer: usize,
    pub ifo: u64,
    /// Step size of the outer loop that starts at this point (or the last
    /// one used, for end-of-run records).
    pub eta: f64,
    pub mu: f64,
    pub rho: Option<f64>,
    /// `‖∇f‖²` of the unregularized objective.
    pub grad_f_sq: f64,
    /// `‖∇f̃‖²` when running on a surrogate.
    pub grad_surr_sq: Option<f64>,
    pub clamped: bool,
    pub degenerate_step: bool,
    pub probe: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Non-fatal events (cap reached, ρ ≥ 1 retries, ...).
    pub flags: Vec<String>,
}

impl Trace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn final_grad_f_sq(&self) -> Option<f64> {
        self.records.last().map(|r| r.grad_f_sq)
    }

    /// Last record with `ifo ≤ budget`.
    pub fn at_budget(&self, budget: u64) -> Option<&TraceRecord> {
        self.records.iter().rev().find(|r| r.ifo <= budget)
    }

    /// Axis never moves backwards, and work records strictly advance it.
    pub fn ifo_is_monotone(&self) -> bool {
        let mut last_work: Option<u64> = None;
        let mut last_any = 0u64;
        for r in &self.records {
            if r.ifo < last_any {
                return false;
            }
            if !r.probe {
                if last_work.is_some_and(|w| r.ifo <= w) {
                    return false;
                }
                last_work = Some(r.ifo);
            }
            last_any = r.ifo;
        }
        true
    }

    pub fn extend(&mut self, other: Trace) {
        self.records.extend(other.records);
        self.flags.extend(other.flags);
    }
}

/// Why a run ended.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Ran the configured number of loops or iterations.
    #[default]
    Completed,
    /// Gradient tolerance met.
    Tolerance,
    /// The next unit of work would exceed the IFO budget.
    Budget,
}

/// Outcome of any optimizer run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub x_out: Vec<f64>,
    pub trace: Trace,
    /// Counter delta over the run, probes included.
    pub ifo_total: u64,
    /// Part of `ifo_total` spent on reporting-only probes.
    pub probe_ifo: u64,
    /// Full gradient of the run's objective at `x_out`, when known.
    pub final_grad: Option<Vec<f64>>,
    pub last_eta: f64,
    /// Outer loops (SARAH) or iterations (baselines) executed.
    pub loops_run: usize,
    pub stop: StopReason,
}
