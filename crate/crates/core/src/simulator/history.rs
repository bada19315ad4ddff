//! Ring buffer of past spatial snapshots for delayed lookups.

/// Snapshots `u(t_k)` at `t_k = k·h` for the most recent `capacity` steps.
/// Lookups before `t = 0` return the initial snapshot, which encodes a
/// history that is constant in time.
#[derive(Debug, Clone)]
pub struct History {
    width: usize,
    capacity: usize,
    data: Vec<f64>,
    initial: Vec<f64>,
    /// Index of the newest stored step.
    newest: usize,
}

impl History {
    /// Buffer able to look back `max_delay` with steps of `h`.
    pub fn new(initial: &[f64], h: f64, max_delay: f64) -> Self {
        let width = initial.len();
        let capacity = (max_delay / h).ceil() as usize + 3;
        let mut data = vec![0.0; width * capacity];
        data[..width].copy_from_slice(initial);
        History {
            width,
            capacity,
            data,
            initial: initial.to_vec(),
            newest: 0,
        }
    }

    pub fn newest(&self) -> usize {
        self.newest
    }

    fn slot(&self, k: usize) -> &[f64] {
        let i = k % self.capacity;
        &self.data[i * self.width..(i + 1) * self.width]
    }

    /// Stores the snapshot of step `newest + 1`.
    pub fn push(&mut self, u: &[f64]) {
        self.newest += 1;
        let i = self.newest % self.capacity;
        self.data[i * self.width..(i + 1) * self.width].copy_from_slice(u);
    }

    /// Writes `u(s·h)` into `out`, for fractional step position `s`.
    /// Positions past the newest step interpolate toward `ahead`, the state
    /// at step `newest + 1`, which must then be given.
    pub fn lookup(&self, s: f64, ahead: Option<&[f64]>, out: &mut [f64]) {
        if s <= 0.0 {
            out.copy_from_slice(&self.initial);
            return;
        }
        let k = s.floor() as usize;
        let frac = s - k as f64;
        debug_assert!(k >= self.oldest(), "lookup beyond ring buffer");
        if k > self.newest || (k == self.newest && frac > 0.0) {
            let next = ahead.expect("lookup past newest step needs the stage state");
            let base = self.slot(self.newest);
            let frac = s - self.newest as f64;
            for j in 0..self.width {
                out[j] = base[j] + frac * (next[j] - base[j]);
            }
            return;
        }
        let a = self.slot(k);
        if frac == 0.0 {
            out.copy_from_slice(a);
            return;
        }
        let b = self.slot(k + 1);
        for j in 0..self.width {
            out[j] = a[j] + frac * (b[j] - a[j]);
        }
    }

    fn oldest(&self) -> usize {
        (self.newest + 1).saturating_sub(self.capacity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_linear_histories_exactly() {
        let h = 0.1;
        let mut hist = History::new(&[0.0, 1.0], h, 0.35);
        for k in 1..=20 {
            let t = k as f64 * h;
            hist.push(&[t, 1.0 + 2.0 * t]);
        }
        let mut out = [0.0; 2];
        for s in [16.0, 16.5, 17.25, 19.9, 20.0] {
            hist.lookup(s, None, &mut out);
            let t = s * h;
            assert!((out[0] - t).abs() < 1e-12);
            assert!((out[1] - 1.0 - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_times_return_initial_data() {
        let mut hist = History::new(&[3.0], 0.5, 2.0);
        hist.push(&[4.0]);
        let mut out = [0.0];
        hist.lookup(-1.7, None, &mut out);
        assert_eq!(out[0], 3.0);
    }

    #[test]
    fn lookups_ahead_use_the_stage_state() {
        let mut hist = History::new(&[0.0], 1.0, 1.0);
        hist.push(&[1.0]);
        let mut out = [0.0];
        hist.lookup(1.25, Some(&[2.0]), &mut out);
        assert!((out[0] - 1.25).abs() < 1e-15);
        hist.lookup(2.0, Some(&[2.0]), &mut out);
        assert_eq!(out[0], 2.0);
    }
}
