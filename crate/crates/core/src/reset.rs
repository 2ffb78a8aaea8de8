//! Reconstruction of the "monitor with reset" baseline: a classic monitor that
//! forgets the partial signal after every conclusive verdict and starts over
//! on the next sample.

use std::sync::Arc;

use crate::classic::{check_contiguous, ClamState, MonitorError, RobustnessInterval, Verdict};
use crate::engine::WindowKernel;
use crate::plan::Plan;
use crate::trace::PrefixView;

/// One step of the reset monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResmStep {
    pub interval: RobustnessInterval,
    /// Episode this sample belongs to; the first episode is 0.
    pub episode: usize,
    /// Whether this sample's verdict ended the episode.
    pub reset: bool,
}

#[derive(Debug, Clone)]
pub struct ResetState {
    plan: Arc<Plan>,
    kernel: WindowKernel,
    inner: ClamState,
    resets: Vec<usize>,
    episode: usize,
    origin: usize,
    next: usize,
    reset_on_satisfaction: bool,
}

impl ResetState {
    /// Resets on both violation and satisfaction verdicts.
    pub fn new(plan: Arc<Plan>) -> Self {
        Self::with_kernel(plan, WindowKernel::default())
    }

    pub fn with_kernel(plan: Arc<Plan>, kernel: WindowKernel) -> Self {
        ResetState {
            inner: ClamState::with_kernel(Arc::clone(&plan), kernel),
            plan,
            kernel,
            resets: Vec::new(),
            episode: 0,
            origin: 0,
            next: 0,
            reset_on_satisfaction: true,
        }
    }

    /// Chooses whether a satisfaction verdict also triggers a reset.
    pub fn reset_on_satisfaction(mut self, enabled: bool) -> Self {
        self.reset_on_satisfaction = enabled;
        self
    }

    pub fn next_index(&self) -> usize {
        self.next
    }

    /// Sample indices at which a reset happened, increasing.
    pub fn resets(&self) -> &[usize] {
        &self.resets
    }

    /// First sample of the current episode.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn step(&mut self, view: &PrefixView<'_>) -> Result<ResmStep, MonitorError> {
        check_contiguous(self.next, view)?;
        Ok(self.step_values(view.current()))
    }

    pub fn step_values(&mut self, sample: &[f64]) -> ResmStep {
        let b = self.next;
        self.next += 1;
        let interval = self.inner.step_values(sample);
        let episode = self.episode;
        let reset = match interval.verdict() {
            Verdict::False => true,
            Verdict::True => self.reset_on_satisfaction,
            Verdict::Unknown => false,
        };
        if reset {
            self.resets.push(b);
            self.episode += 1;
            self.origin = b + 1;
            self.inner = ClamState::with_kernel(Arc::clone(&self.plan), self.kernel);
        }
        ResmStep {
            interval,
            episode,
            reset,
        }
    }
}
