//! Cutting fixed-length trials around events.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{EpochedData, Event, Recording, Trial};

/// First sample of the window for an event, before bounds checking.
pub fn window_start(event: &Event, p: usize) -> i64 {
    event.sample_index as i64 + event.offset - (p / 2) as i64
}

/// Cuts `[t + offset − ⌊p/2⌋, … + p)` for every event; windows that leave
/// the recording are dropped.
pub fn epoch(recording: &Recording, events: &[Event], p: usize) -> Result<EpochedData> {
    if p < 2 {
        return Err(Error::InvalidConfig(alloc::format!("epoch length must be at least 2, got {p}")));
    }
    let n = recording.n_samples() as i64;
    let n_ch = recording.n_channels();
    let mut trials = Vec::new();
    for ev in events {
        let start = window_start(ev, p);
        if start < 0 || start + p as i64 > n {
            continue;
        }
        let start = start as usize;
        let mut data = Vec::with_capacity(n_ch * p);
        for c in 0..n_ch {
            data.extend_from_slice(&recording.channel(c)[start..start + p]);
        }
        trials.push(Trial {
            data,
            label: ev.label.clone(),
            key: ev.sample_index as u64,
        });
    }
    if trials.is_empty() {
        return Err(Error::NoTrialsSurvive { p });
    }
    Ok(EpochedData {
        trials,
        epoch_len: p,
        n_channels: n_ch,
        sampling_rate_hz: recording.sampling_rate_hz,
    })
}

impl EpochedData {
    /// Concatenates the trials back to back into one recording with an event
    /// at each trial's centre, so epoched output can use the recording format.
    pub fn to_recording(&self, channel_mask: &[bool]) -> Result<Recording> {
        let p = self.epoch_len;
        let total = p * self.trials.len();
        let mut data = alloc::vec![0.0; self.n_channels * total];
        for (k, trial) in self.trials.iter().enumerate() {
            for c in 0..self.n_channels {
                data[c * total + k * p..c * total + (k + 1) * p].copy_from_slice(&trial.data[c * p..(c + 1) * p]);
            }
        }
        let mut rec = Recording::new(self.n_channels, total, data, self.sampling_rate_hz)?;
        rec.channel_mask = channel_mask.to_vec();
        rec.events = self
            .trials
            .iter()
            .enumerate()
            .map(|(k, t)| Event::new(k * p + p / 2, t.label.clone()))
            .collect();
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ramp(n: usize) -> Recording {
        let rows = vec![(0..n).map(|v| v as f64).collect::<Vec<_>>(), vec![1.0; n]];
        Recording::from_rows(&rows, 1000.0).unwrap()
    }

    #[test]
    fn centered_window() {
        let rec = ramp(2000);
        let ep = epoch(&rec, &[Event::new(1000, "A")], 500).unwrap();
        assert_eq!(ep.trials.len(), 1);
        let ch0 = ep.trial_channel(0, 0);
        assert_eq!(ch0.len(), 500);
        assert_eq!(ch0[0], 750.0);
        assert_eq!(ch0[499], 1249.0);
        assert_eq!(ep.trials[0].key, 1000);
    }

    #[test]
    fn out_of_bounds_trials_are_dropped() {
        let rec = ramp(2000);
        let ep = epoch(&rec, &[Event::new(100, "A"), Event::new(1000, "B"), Event::new(1800, "C")], 500).unwrap();
        assert_eq!(ep.trials.len(), 1);
        assert_eq!(ep.trials[0].label, "B");
        assert_eq!(
            epoch(&rec, &[Event::new(100, "A")], 500),
            Err(Error::NoTrialsSurvive { p: 500 })
        );
    }

    #[test]
    fn odd_length_and_offset() {
        let rec = ramp(100);
        let ev = Event {
            offset: 10,
            ..Event::new(40, "X")
        };
        let ep = epoch(&rec, &[ev], 5).unwrap();
        assert_eq!(ep.trial_channel(0, 0), &[48.0, 49.0, 50.0, 51.0, 52.0]);
    }

    #[test]
    fn concatenation_round_trips() {
        let rec = ramp(3000);
        let ep = epoch(&rec, &[Event::new(600, "A"), Event::new(2000, "B")], 400).unwrap();
        let cat = ep.to_recording(&[true, true]).unwrap();
        assert_eq!(cat.n_samples(), 800);
        assert_eq!(cat.channel(0)[400], 1800.0);
        assert_eq!(cat.events[1], Event::new(600, "B"));
        let again = epoch(&cat, &cat.events, 400).unwrap();
        assert_eq!(again.trials[1].data, ep.trials[1].data);
    }
}
