//! Compensated (Neumaier) summation.
//!
//! Ensemble accumulators add many thousands of trajectories; the running
//! compensation keeps merged results independent of the merge tree to well
//! below 1e-12 relative.

use core::ops::AddAssign;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub const ZERO: NeumaierSum = NeumaierSum {
        sum: 0.0,
        comp: 0.0,
    };

    #[inline]
    pub fn from_parts(sum: f64, comp: f64) -> Self {
        Self { sum, comp }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Merge another partial sum into this one.
    #[inline]
    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    #[inline]
    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }
}

impl AddAssign<f64> for NeumaierSum {
    #[inline]
    fn add_assign(&mut self, x: f64) {
        self.add(x);
    }
}
