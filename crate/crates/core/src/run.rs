//! Batch driver for the advection scenario.

use std::path::{Path, PathBuf};

use crate::advection::{mise, sample_measurements, truth};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::filter::{init_state, step, FilterState};
use crate::kernels::HyperParams;
use crate::trace::{
    CsvTrace, HYPER_COLUMNS, HYPER_TRACE, INNOVATION_COLUMNS, INNOVATION_TRACE, MISE_COLUMNS, MISE_TRACE,
    STATE_COLUMNS, STATE_TRACE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Per-step record of a run; index 0 is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mise: Vec<f64>,
    pub theta: Vec<HyperParams>,
    pub covariance_psd: Vec<bool>,
    pub final_state: FilterState,
}

/// Exit code for a finished run.
pub fn exit_code(result: &Result<RunSummary>) -> i32 {
    match result {
        Ok(_) => EXIT_OK,
        Err(Error::Step { .. } | Error::Factorization { .. }) => EXIT_NUMERICAL,
        Err(_) => EXIT_CONFIG,
    }
}

struct Traces {
    state: Option<CsvTrace>,
    hyper: Option<CsvTrace>,
    mise: Option<CsvTrace>,
    innovation: Option<CsvTrace>,
}

impl Traces {
    fn open(cfg: &RunConfig) -> Result<Self> {
        let e = cfg.emit;
        if e.state_trace || e.hyper_trace || e.mise_trace || e.innovation_trace {
            std::fs::create_dir_all(&cfg.output_dir)
                .map_err(|err| Error::config("output.dir", format!("{}: {err}", cfg.output_dir.display())))?;
        }
        let open = |on: bool, name: &str, cols: &[&str]| -> Result<Option<CsvTrace>> {
            if on {
                CsvTrace::create(&cfg.output_dir.join(name), cols)
                    .map(Some)
                    .map_err(|err| Error::config("output.dir", err.to_string()))
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            state: open(e.state_trace, STATE_TRACE, STATE_COLUMNS)?,
            hyper: open(e.hyper_trace, HYPER_TRACE, HYPER_COLUMNS)?,
            mise: open(e.mise_trace, MISE_TRACE, MISE_COLUMNS)?,
            innovation: open(e.innovation_trace, INNOVATION_TRACE, INNOVATION_COLUMNS)?,
        })
    }

    fn record(&mut self, cfg: &RunConfig, st: &FilterState, mise_value: f64) -> Result<()> {
        let k = st.t;
        let t = k as f64 * cfg.filter.dt;
        if let Some(w) = &mut self.state {
            for (i, &x) in cfg.filter.test_grid.iter().enumerate() {
                w.row(
                    k,
                    &[t, x, st.estimate.mean[i], st.estimate.cov[(i, i)], truth(t, x, &cfg.scenario)],
                )?;
            }
        }
        if let Some(w) = &mut self.hyper {
            let th = &st.theta;
            w.row(
                k,
                &[
                    th.sigma2_se.sqrt(),
                    th.length_scale,
                    th.sigma2_q.sqrt(),
                    th.sigma2_r.sqrt(),
                    st.diagnostics.nlml,
                ],
            )?;
        }
        if let Some(w) = &mut self.mise {
            w.row(k, &[t, mise_value])?;
        }
        if k > 0 {
            if let Some(w) = &mut self.innovation {
                w.row(k, &[st.diagnostics.innovation_norm, st.diagnostics.predictive_loglik])?;
            }
        }
        self.flush()
    }

    fn flush(&mut self) -> Result<()> {
        for w in [&mut self.state, &mut self.hyper, &mut self.mise, &mut self.innovation]
            .into_iter()
            .flatten()
        {
            w.flush()?;
        }
        Ok(())
    }
}

/// Runs the initial regression and `horizon` filter steps, appending to
/// the enabled traces after every step. On failure the rows written so
/// far are flushed and kept.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let mut traces = Traces::open(cfg)?;
    let s = &cfg.scenario;
    let grid = &cfg.filter.test_grid;
    let mise_of = |st: &FilterState| {
        let m: Vec<f64> = st.estimate.mean.iter().cloned().collect();
        mise(&m, grid, st.t as f64 * cfg.filter.dt, s)
    };

    let mut state = init_state(|x| s.initial_estimate(x), s.n_init_samples, &cfg.theta0, &cfg.filter)?;
    let mut summary = RunSummary {
        mise: vec![mise_of(&state)],
        theta: vec![state.theta],
        covariance_psd: vec![state.diagnostics.covariance_psd],
        final_state: state.clone(),
    };
    traces.record(cfg, &state, summary.mise[0])?;

    for k in 1..=s.horizon {
        let batch = sample_measurements(k, s);
        state = match step(&state, &batch, &cfg.filter) {
            Ok(next) => next,
            Err(e) => {
                traces.flush()?;
                return Err(e);
            }
        };
        let m = mise_of(&state);
        summary.mise.push(m);
        summary.theta.push(state.theta);
        summary.covariance_psd.push(state.diagnostics.covariance_psd);
        traces.record(cfg, &state, m)?;
        log::debug!("step {k}: mise {m:.3e}, sigma_r {:.4}", state.theta.sigma2_r.sqrt());
    }
    summary.final_state = state;
    Ok(summary)
}

/// Output directory for run `index` of `count` under `base`: `base`
/// itself for a single run, `base/run-<index>` otherwise.
pub fn run_dir(base: &Path, index: usize, count: usize) -> PathBuf {
    if count <= 1 {
        base.to_path_buf()
    } else {
        base.join(format!("run-{index}"))
    }
}

/// Runs every config on its own thread. Results keep the input order.
pub fn run_many(cfgs: &[RunConfig]) -> Vec<Result<RunSummary>> {
    if cfgs.len() == 1 {
        return vec![run(&cfgs[0])];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs.iter().map(|c| scope.spawn(move || run(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Contract("run thread panicked".into()))))
            .collect()
    })
}
