//! Run driver that samples the monitored norms along a trajectory.

use super::rhs::Dynamics;
use super::stepper::{run, step_count, Scheme, Stepper};
use crate::error::Result;
use crate::model::Model;
use crate::monitor::{sample, EnergyTrace};
use crate::state::CoupledState;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub scheme: Scheme,
    pub dynamics: Dynamics,
    /// Sample every `stride` steps; the last step is always sampled.
    pub stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { scheme: Scheme::Ars222, dynamics: Dynamics::default(), stride: 5 }
    }
}

/// Evolves `s0` to `model.params.t_final` and returns the sampled trace and the final state.
pub fn simulate(model: &Model, s0: &CoupledState, opts: RunOptions) -> Result<(EnergyTrace, CoupledState)> {
    let stepper = Stepper::<CoupledState>::new(model, opts.scheme, opts.dynamics)?;
    let p = &model.params;
    let last = step_count(p.dt, p.t_final);
    let stride = opts.stride.max(1);
    let mut trace = EnergyTrace::new(p);
    let end = run(&stepper, s0, p.t_final, |k, s| {
        if k % stride == 0 || k == last {
            trace.push(sample(model, s))?;
        }
        Ok(())
    })?;
    Ok((trace, end))
}
