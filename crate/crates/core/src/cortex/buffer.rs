use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ring of per-step current accumulators. Slot `(now + d) % depth` collects
/// everything arriving `d` steps from now; `depth > max delay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeBuffer {
    slots: Vec<Vec<f64>>,
    now: usize,
}

impl SpikeBuffer {
    pub fn new(neurons: usize, max_delay: usize) -> Self {
        SpikeBuffer {
            slots: vec![vec![0.0; neurons]; max_delay + 1],
            now: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    /// Schedules `current` onto `target`, `delay` steps ahead.
    #[inline]
    pub fn add(&mut self, delay: usize, target: usize, current: f64) -> Result<()> {
        if delay == 0 || delay >= self.slots.len() {
            return Err(Error::Usage(format!(
                "delay {delay} outside 1..{}",
                self.slots.len()
            )));
        }
        let slot = (self.now + delay) % self.slots.len();
        self.slots[slot][target] += current;
        Ok(())
    }

    /// Adds the arrivals of the current step into `out` and clears the slot.
    pub fn drain_into(&mut self, out: &mut [f64]) {
        let slot = &mut self.slots[self.now];
        for (o, s) in out.iter_mut().zip(slot.iter_mut()) {
            *o += *s;
            *s = 0.0;
        }
    }

    pub fn advance(&mut self) {
        self.now = (self.now + 1) % self.slots.len();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn current_arrives_after_exactly_delay_steps() {
        let mut b = SpikeBuffer::new(2, 5);
        for step in 0..8 {
            let mut out = [0.0; 2];
            b.drain_into(&mut out);
            assert_eq!(out[1], if step == 4 { 0.5 } else { 0.0 }, "step {step}");
            if step == 1 {
                b.add(3, 1, 0.5).unwrap();
            }
            b.advance();
        }
    }

    #[test]
    fn delay_bounds_are_checked() {
        let mut b = SpikeBuffer::new(1, 3);
        assert!(b.add(0, 0, 1.0).is_err());
        assert!(b.add(4, 0, 1.0).is_err());
        assert!(b.add(3, 0, 1.0).is_ok());
    }
}
