//! Quantitative causation monitor: violation and satisfaction causation
//! distances of the current sample, and what can be derived from them.

use std::sync::Arc;

use crate::classic::{check_contiguous, MonitorError, RobustnessInterval};
use crate::engine::{Engine, WindowKernel, Q};
use crate::epoch::CausationVerdict;
use crate::plan::Plan;
use crate::trace::PrefixView;

/// One step of the quantitative causation monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausationOutput {
    pub instant: usize,
    pub vio_distance: f64,
    pub sat_distance: f64,
    pub derived_verdict: CausationVerdict,
    /// Set when a distance is exactly zero and the sign rules do not apply.
    pub boundary: bool,
    /// Minimum of `vio_distance` over all steps so far.
    pub running_upper: f64,
    /// Maximum of `sat_distance` over all steps so far.
    pub running_lower: f64,
}

/// Boolean causation verdict from the signs of the two distances. The flag
/// is set when a zero distance made the result fall back to irrelevant.
pub fn derive_bcaum(vio_distance: f64, sat_distance: f64) -> (CausationVerdict, bool) {
    if vio_distance < 0.0 {
        (CausationVerdict::Violation, false)
    } else if sat_distance > 0.0 {
        (CausationVerdict::Satisfaction, false)
    } else {
        let boundary = vio_distance == 0.0 || sat_distance == 0.0;
        (CausationVerdict::Irrelevant, boundary)
    }
}

/// Rebuilds the classic monitor's intervals from a contiguous run of outputs.
pub fn reconstruct_clam(outputs: &[CausationOutput]) -> Vec<RobustnessInterval> {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    outputs
        .iter()
        .map(|o| {
            upper = upper.min(o.vio_distance);
            lower = lower.max(o.sat_distance);
            RobustnessInterval::new(lower, upper)
        })
        .collect()
}

/// Streaming quantitative causation monitor at anchor 0.
#[derive(Debug, Clone)]
pub struct QcaumState {
    engine: Engine,
    running_upper: f64,
    running_lower: f64,
}

impl QcaumState {
    pub fn new(plan: Arc<Plan>) -> Self {
        Self::with_kernel(plan, WindowKernel::default())
    }

    pub fn with_kernel(plan: Arc<Plan>, kernel: WindowKernel) -> Self {
        QcaumState {
            engine: Engine::new(plan, kernel, true),
            running_upper: f64::INFINITY,
            running_lower: f64::NEG_INFINITY,
        }
    }

    pub fn next_index(&self) -> usize {
        self.engine.next_index()
    }

    pub fn step(&mut self, view: &PrefixView<'_>) -> Result<CausationOutput, MonitorError> {
        check_contiguous(self.engine.next_index(), view)?;
        Ok(self.step_values(view.current()))
    }

    pub fn step_values(&mut self, sample: &[f64]) -> CausationOutput {
        self.engine.step(sample);
        let root = self.engine.plan().root();
        let vio = self.engine.get(root, Q::Vio, 0);
        let sat = self.engine.get(root, Q::Sat, 0);
        self.running_upper = self.running_upper.min(vio);
        self.running_lower = self.running_lower.max(sat);
        let (derived_verdict, boundary) = derive_bcaum(vio, sat);
        CausationOutput {
            instant: self.engine.b(),
            vio_distance: vio,
            sat_distance: sat,
            derived_verdict,
            boundary,
            running_upper: self.running_upper,
            running_lower: self.running_lower,
        }
    }

    /// Interval of the shared classic table at anchor 0.
    pub fn interval(&self) -> RobustnessInterval {
        let root = self.engine.plan().root();
        RobustnessInterval::new(self.engine.lo(root, 0), self.engine.up(root, 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::trace::{DomainBounds, Trace};

    fn run(spec: &str, xs: &[f64], bounds: &DomainBounds) -> Vec<CausationOutput> {
        let f = parse_formula(spec, &["x"]).unwrap();
        let t = Trace::from_columns(1.0, &[("x", xs.to_vec())]).unwrap();
        let plan = Plan::compile(&f, 1.0, t.variables(), bounds, 0).unwrap();
        let mut m = QcaumState::new(Arc::new(plan));
        (0..xs.len())
            .map(|b| m.step(&t.view(b).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn always_distances_follow_current_sample() {
        let out = run("alw_[0,2] (x > 0)", &[1.0, 2.0, -1.0], &DomainBounds::new());
        let vio: Vec<f64> = out.iter().map(|o| o.vio_distance).collect();
        assert_eq!(vio, vec![1.0, 2.0, -1.0]);
        let rec = reconstruct_clam(&out);
        let up: Vec<f64> = rec.iter().map(|i| i.upper).collect();
        assert_eq!(up, vec![1.0, 1.0, -1.0]);
        assert_eq!(out[2].derived_verdict, CausationVerdict::Violation);
    }

    #[test]
    fn atom_distance_is_prior_once_past() {
        let b = DomainBounds::new().with("x", -5.0, 5.0);
        let out = run("x > 0", &[2.0, -3.0], &b);
        assert_eq!((out[0].vio_distance, out[0].sat_distance), (2.0, 2.0));
        assert_eq!((out[1].vio_distance, out[1].sat_distance), (5.0, -5.0));
        assert_eq!(reconstruct_clam(&out)[1], RobustnessInterval::point(2.0));
    }

    #[test]
    fn sign_rules() {
        use CausationVerdict::*;
        assert_eq!(derive_bcaum(-3.0, -7.0), (Violation, false));
        assert_eq!(derive_bcaum(5.0, -2.0), (Irrelevant, false));
        assert_eq!(
            derive_bcaum(f64::INFINITY, f64::NEG_INFINITY),
            (Irrelevant, false)
        );
        assert_eq!(derive_bcaum(0.0, -1.0), (Irrelevant, true));
        assert_eq!(derive_bcaum(2.0, 1.0), (Satisfaction, false));
    }
}
