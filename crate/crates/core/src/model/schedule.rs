/// Linear warm-up over `warmup` epochs, then constant.
pub fn lr_frame(epoch: usize, peak: f64, warmup: usize) -> f64 {
    if warmup > 0 && epoch < warmup {
        peak * (epoch + 1) as f64 / warmup as f64
    } else {
        peak
    }
}

/// Linear warm-up to `peak`, then linear decay reaching zero at `t_max`.
pub fn lr_sequence(epoch: usize, peak: f64, warmup: usize, t_max: usize) -> f64 {
    if warmup > 0 && epoch < warmup {
        return peak * (epoch + 1) as f64 / warmup as f64;
    }
    let span = t_max.saturating_sub(warmup).max(1) as f64;
    let left = t_max.saturating_sub(epoch) as f64;
    peak * (left / span).clamp(0.0, 1.0)
}

/// Patience-based stopping on relative validation improvement.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub warmup: usize,
    pub delta: f64,
    pub patience: usize,
    best: Option<f64>,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(warmup: usize, delta: f64, patience: usize) -> Self {
        Self { warmup, delta, patience, best: None, bad_epochs: 0 }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// Records the loss after 1-based `epoch`; true means stop now.
    /// Only a relative improvement larger than `delta` resets patience.
    pub fn update(&mut self, epoch: usize, loss: f64) -> bool {
        let improved = match self.best {
            None => true,
            Some(b) => loss < b && (b - loss) / b.abs().max(1e-12) > self.delta,
        };
        if improved {
            self.best = Some(loss);
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        epoch >= self.warmup && self.bad_epochs >= self.patience
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_schedule() {
        assert!((lr_frame(0, 8e-5, 20) - 4e-6).abs() < 1e-18);
        assert_eq!(lr_frame(19, 8e-5, 20), 8e-5);
        assert_eq!(lr_frame(100, 8e-5, 20), 8e-5);
    }

    #[test]
    fn sequence_schedule_peaks_then_decays() {
        assert_eq!(lr_sequence(19, 1e-4, 20, 150), 1e-4);
        assert!(lr_sequence(20, 1e-4, 20, 150) <= 1e-4);
        assert!(lr_sequence(85, 1e-4, 20, 150) < lr_sequence(50, 1e-4, 20, 150));
        assert_eq!(lr_sequence(150, 1e-4, 20, 150), 0.0);
    }

    #[test]
    fn stops_after_patience_past_warmup() {
        let mut es = EarlyStopping::new(3, 0.002, 2);
        assert!(!es.update(1, 10.0));
        assert!(!es.update(2, 10.0));
        assert!(!es.update(3, 9.0));
        assert!(!es.update(4, 8.999));
        assert!(es.update(5, 9.5));
        assert_eq!(es.best(), Some(9.0));
    }

    #[test]
    fn no_stop_before_warmup() {
        let mut es = EarlyStopping::new(10, 0.002, 1);
        es.update(1, 1.0);
        for e in 2..10 {
            assert!(!es.update(e, 2.0));
        }
        assert!(es.update(10, 2.0));
    }
}
