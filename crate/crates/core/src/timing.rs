//! Stage timing.
//!
//! [`Clock::Wall`] measures monotonic wall time. [`Clock::Work`] replaces the
//! measurement with a caller-supplied operation count (one nanosecond per
//! unit), which makes reports byte-reproducible across runs and machines.

use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    Wall,
    Work,
}

impl Clock {
    pub fn parse(s: &str) -> Option<Clock> {
        match s {
            "wall" => Some(Clock::Wall),
            "work" => Some(Clock::Work),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Clock::Wall => "wall",
            Clock::Work => "work",
        }
    }

    /// Run `f`, returning its output and the elapsed seconds under this clock.
    pub fn measure<T>(&self, work_units: f64, f: impl FnOnce() -> T) -> (T, f64) {
        match self {
            Clock::Wall => {
                let start = Instant::now();
                let out = f();
                (out, start.elapsed().as_nanos() as f64 * 1e-9)
            }
            Clock::Work => (f(), work_units.max(0.0) * 1e-9),
        }
    }
}

/// Wall-clock components feeding the speedup formulas, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimingLedger {
    /// Executing the operator on every candidate dataset of the lake.
    pub t_op: f64,
    /// Executing the operator on the selected subset only.
    pub t_sim_op: f64,
    /// One-time lake vectorization.
    pub t_vec: f64,
    /// Query embedding plus similarity search.
    pub t_sim: f64,
    /// Surrogate fit and prediction.
    pub t_pred: f64,
    pub n_operators_amortized: usize,
}

impl TimingLedger {
    pub fn is_valid(&self) -> bool {
        [self.t_op, self.t_sim_op, self.t_vec, self.t_sim, self.t_pred]
            .iter()
            .all(|t| t.is_finite() && *t >= 0.0)
    }

    /// Component-wise mean of several ledgers.
    pub fn mean(ledgers: &[TimingLedger]) -> TimingLedger {
        let n = ledgers.len().max(1) as f64;
        let mut out = TimingLedger {
            n_operators_amortized: ledgers.len().max(1),
            ..Default::default()
        };
        for l in ledgers {
            out.t_op += l.t_op / n;
            out.t_sim_op += l.t_sim_op / n;
            out.t_vec += l.t_vec / n;
            out.t_sim += l.t_sim / n;
            out.t_pred += l.t_pred / n;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn work_clock_is_deterministic() {
        let (v, t) = Clock::Work.measure(2500.0, || 3);
        assert_eq!(v, 3);
        assert_eq!(t, 2.5e-6);
    }

    #[test]
    fn wall_clock_is_nonnegative() {
        let (_, t) = Clock::Wall.measure(0.0, || (0..1000).sum::<u64>());
        assert!(t >= 0.0);
    }
}
