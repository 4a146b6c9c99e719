//! Bounded, time-varying communication delays.
//!
//! A receiver reads a sender's *state* as it was `τ` ticks ago; there is no
//! message queue. Delays are drawn per `(edge, tick)` from a counter-based
//! stream so any sample can be reproduced from `(seed, edge, tick)` alone.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub tick: u64,
    pub from: usize,
    pub to: usize,
    pub tau: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayDistribution {
    Constant {
        tau: u32,
    },
    /// Uniform over the integers `lo..=hi`.
    UniformInteger {
        lo: u32,
        hi: u32,
    },
    /// Explicit `(tick, from, to) → τ` table; anything not listed uses `default_tau`.
    DeterministicSchedule {
        #[serde(default)]
        default_tau: u32,
        entries: Vec<ScheduleEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub distribution: DelayDistribution,
    #[serde(default)]
    pub seed: u64,
    /// Draw independently for every edge; otherwise all edges share one draw per tick.
    #[serde(default = "default_true")]
    pub per_edge: bool,
    /// Redraw every tick; otherwise each edge keeps a single draw for the whole run.
    #[serde(default = "default_true")]
    pub per_tick: bool,
}

fn default_true() -> bool {
    true
}

impl DelayModel {
    pub fn constant(tau: u32) -> Self {
        Self::new(DelayDistribution::Constant { tau }, 0)
    }

    pub fn uniform(lo: u32, hi: u32, seed: u64) -> Result<Self> {
        if lo > hi {
            return Err(Error::Config(vec![format!("uniform delay bounds inverted: lo = {lo} > hi = {hi}")]));
        }
        Ok(Self::new(DelayDistribution::UniformInteger { lo, hi }, seed))
    }

    pub fn schedule(mut entries: Vec<ScheduleEntry>, default_tau: u32) -> Self {
        entries.sort();
        Self::new(DelayDistribution::DeterministicSchedule { default_tau, entries }, 0)
    }

    pub fn new(distribution: DelayDistribution, seed: u64) -> Self {
        Self {
            distribution,
            seed,
            per_edge: true,
            per_tick: true,
        }
    }

    /// Upper bound on every sampled delay.
    pub fn tau_max(&self) -> u32 {
        match &self.distribution {
            DelayDistribution::Constant { tau } => *tau,
            DelayDistribution::UniformInteger { hi, .. } => *hi,
            DelayDistribution::DeterministicSchedule { default_tau, entries } => {
                entries.iter().map(|e| e.tau).fold(*default_tau, u32::max)
            }
        }
    }

    /// Mean delay `τ̄` of the distribution; for schedules, the mean over listed entries.
    pub fn mean_tau(&self) -> f64 {
        match &self.distribution {
            DelayDistribution::Constant { tau } => *tau as f64,
            DelayDistribution::UniformInteger { lo, hi } => (*lo as f64 + *hi as f64) / 2.0,
            DelayDistribution::DeterministicSchedule { default_tau, entries } => {
                if entries.is_empty() {
                    *default_tau as f64
                } else {
                    entries.iter().map(|e| e.tau as f64).sum::<f64>() / entries.len() as f64
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tau_max() == 0
    }

    fn stream_id(&self, from: usize, to: usize) -> u64 {
        if self.per_edge {
            ((from as u64) << 32) | to as u64
        } else {
            0
        }
    }

    fn position(&self, tick: u64) -> u64 {
        if self.per_tick {
            tick
        } else {
            0
        }
    }
}

#[inline]
fn map_to_range(word: u64, lo: u32, hi: u32) -> u32 {
    let span = (hi - lo) as u128 + 1;
    lo + ((word as u128 * span) >> 64) as u32
}

fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Delay on edge `from → to` at `tick`; a pure function of the model.
pub fn sample_delay(m: &DelayModel, from: usize, to: usize, tick: u64) -> u32 {
    match &m.distribution {
        DelayDistribution::Constant { tau } => *tau,
        DelayDistribution::UniformInteger { lo, hi } => {
            let mut rng = seeded_stream(m.seed, m.stream_id(from, to));
            rng.set_word_pos(2 * m.position(tick) as u128);
            map_to_range(rng.next_u64(), *lo, *hi)
        }
        DelayDistribution::DeterministicSchedule { default_tau, entries } => entries
            .iter()
            .find(|e| (e.tick, e.from, e.to) == (tick, from, to))
            .map_or(*default_tau, |e| e.tau),
    }
}

/// Sequential sampler over a fixed edge list; returns the same values as
/// [`sample_delay`] but draws in O(1) per edge when ticks advance by one.
#[derive(Debug, Clone)]
pub struct DelaySampler {
    model: DelayModel,
    edges: Vec<(usize, usize)>,
    streams: Vec<ChaCha8Rng>,
    schedule: BTreeMap<(u64, usize, usize), u32>,
    next_tick: u64,
    last: Option<u64>,
    current: Vec<u32>,
}

impl DelaySampler {
    pub fn new(model: &DelayModel, edges: Vec<(usize, usize)>) -> Self {
        let mut model = model.clone();
        let mut schedule = BTreeMap::new();
        if let DelayDistribution::DeterministicSchedule { entries, .. } = &mut model.distribution {
            entries.sort();
            schedule = entries.iter().map(|e| ((e.tick, e.from, e.to), e.tau)).collect();
        }
        let streams = edges
            .iter()
            .map(|&(from, to)| seeded_stream(model.seed, model.stream_id(from, to)))
            .collect();
        let current = vec![0; edges.len()];
        Self {
            model,
            edges,
            streams,
            schedule,
            next_tick: 0,
            last: None,
            current,
        }
    }

    pub fn model(&self) -> &DelayModel {
        &self.model
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Delays for every edge (in construction order) at `tick`.
    pub fn delays_at(&mut self, tick: u64) -> &[u32] {
        if self.last == Some(tick) {
            return &self.current;
        }
        self.last = Some(tick);
        match self.model.distribution {
            DelayDistribution::Constant { tau } => self.current.fill(tau),
            DelayDistribution::UniformInteger { lo, hi } => {
                let pos = self.model.position(tick);
                let sequential = self.model.per_tick && tick == self.next_tick;
                for (rng, slot) in self.streams.iter_mut().zip(self.current.iter_mut()) {
                    if !sequential {
                        rng.set_word_pos(2 * pos as u128);
                    }
                    *slot = map_to_range(rng.next_u64(), lo, hi);
                }
                self.next_tick = tick + 1;
            }
            DelayDistribution::DeterministicSchedule { default_tau, .. } => {
                for (&(from, to), slot) in self.edges.iter().zip(self.current.iter_mut()) {
                    *slot = self.schedule.get(&(tick, from, to)).copied().unwrap_or(default_tau);
                }
            }
        }
        &self.current
    }
}

/// Writes sampled delays for `ticks` over `edges` as `tick,from,to,tau` CSV.
pub fn dump_schedule<W: Write>(
    model: &DelayModel,
    edges: &[(usize, usize)],
    ticks: std::ops::Range<u64>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut sampler = DelaySampler::new(model, edges.to_vec());
    for tick in ticks {
        let delays = sampler.delays_at(tick).to_vec();
        for (&(from, to), tau) in edges.iter().zip(delays) {
            w.serialize(ScheduleEntry { tick, from, to, tau })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a `tick,from,to,tau` CSV into a deterministic schedule model.
pub fn load_schedule<R: Read>(input: R, default_tau: u32) -> Result<DelayModel> {
    let mut r = csv::Reader::from_reader(input);
    let mut entries: Vec<ScheduleEntry> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    entries.sort();
    Ok(DelayModel::schedule(entries, default_tau))
}

/// Ring buffer of one node's last `tau_max + 1` published states.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    width: usize,
    capacity: usize,
    frames: Vec<f64>,
    latest: Option<u64>,
    prehistory: Vec<f64>,
}

impl HistoryBuffer {
    /// `prehistory` is returned for reads that land before tick 0.
    pub fn new(tau_max: u32, prehistory: Vec<f64>) -> Self {
        let width = prehistory.len();
        let capacity = tau_max as usize + 1;
        Self {
            width,
            capacity,
            frames: vec![0.0; width * capacity],
            latest: None,
            prehistory,
        }
    }

    pub fn tau_max(&self) -> u32 {
        (self.capacity - 1) as u32
    }

    pub fn latest_tick(&self) -> Option<u64> {
        self.latest
    }

    /// Publishes the state for `tick`; ticks must be published in order without gaps.
    pub fn publish(&mut self, tick: u64, value: &[f64]) -> Result<()> {
        let expected = self.latest.map_or(0, |t| t + 1);
        if tick != expected {
            return Err(Error::Numeric(format!("history publish out of order: got tick {tick}, expected {expected}")));
        }
        if value.len() != self.width {
            return Err(Error::Numeric(format!("history width {} != {}", value.len(), self.width)));
        }
        self.write(tick, value);
        Ok(())
    }

    #[inline]
    pub(crate) fn write(&mut self, tick: u64, value: &[f64]) {
        let slot = (tick % self.capacity as u64) as usize * self.width;
        self.frames[slot..slot + self.width].copy_from_slice(value);
        self.latest = Some(tick);
    }

    /// State published at `tick − delay` (pre-history if that is before tick 0).
    pub fn stale_read(&self, tick: u64, delay: u32) -> Result<&[f64]> {
        if delay as usize >= self.capacity {
            return Err(Error::DelayExceedsBound { delay, tau_max: self.tau_max() });
        }
        match self.latest {
            Some(latest) if tick <= latest => Ok(self.read(tick, delay)),
            _ if tick < delay as u64 => Ok(&self.prehistory),
            _ => Err(Error::Numeric(format!("tick {tick} has not been published yet"))),
        }
    }

    /// Unchecked variant of [`stale_read`](Self::stale_read) for the simulation hot path.
    #[inline]
    pub(crate) fn read(&self, tick: u64, delay: u32) -> &[f64] {
        debug_assert!((delay as usize) < self.capacity);
        if tick < delay as u64 {
            return &self.prehistory;
        }
        let slot = ((tick - delay as u64) % self.capacity as u64) as usize * self.width;
        &self.frames[slot..slot + self.width]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_delays() {
        let zero = DelayModel::constant(0);
        let five = DelayModel::constant(5);
        for t in 0..50 {
            assert_eq!(sample_delay(&zero, 0, 1, t), 0);
            assert_eq!(sample_delay(&five, 3, 1, t), 5);
        }
        assert_eq!(five.mean_tau(), 5.0);
    }

    #[test]
    fn uniform_delays_replay_and_mean() {
        let m = DelayModel::uniform(0, 157, 99).unwrap();
        assert_eq!(m.mean_tau(), 78.5);
        let draws: Vec<u32> = (0..100_000).map(|t| sample_delay(&m, 2, 5, t)).collect();
        let again: Vec<u32> = (0..100_000).map(|t| sample_delay(&m, 2, 5, t)).collect();
        assert_eq!(draws, again);
        assert!(draws.iter().all(|&d| d <= 157));
        let mean = draws.iter().map(|&d| d as f64).sum::<f64>() / draws.len() as f64;
        assert!((mean - 78.5).abs() < 0.01 * 78.5, "mean {mean}");
        assert_eq!(draws.iter().copied().min(), Some(0));
        assert_eq!(draws.iter().copied().max(), Some(157));
    }

    #[test]
    fn sequential_sampler_matches_random_access() {
        let m = DelayModel::uniform(3, 40, 5).unwrap();
        let edges = vec![(0, 1), (1, 2), (2, 0), (1, 1)];
        let mut s = DelaySampler::new(&m, edges.clone());
        for t in 0..300 {
            let got = s.delays_at(t).to_vec();
            for (k, &(from, to)) in edges.iter().enumerate() {
                assert_eq!(got[k], sample_delay(&m, from, to, t));
            }
        }
        // Jumping back re-seeks.
        let got = s.delays_at(17).to_vec();
        assert_eq!(got[1], sample_delay(&m, 1, 2, 17));
    }

    #[test]
    fn shared_and_frozen_delays() {
        let mut m = DelayModel::uniform(0, 1000, 1).unwrap();
        m.per_edge = false;
        for t in 0..20 {
            assert_eq!(sample_delay(&m, 0, 1, t), sample_delay(&m, 4, 2, t));
        }
        let mut frozen = DelayModel::uniform(0, 1000, 1).unwrap();
        frozen.per_tick = false;
        let first = sample_delay(&frozen, 0, 1, 0);
        assert!((0..20).all(|t| sample_delay(&frozen, 0, 1, t) == first));
        let mut s = DelaySampler::new(&frozen, vec![(0, 1)]);
        assert!((0..20).all(|t| s.delays_at(t)[0] == first));
    }

    #[test]
    fn schedule_roundtrip_through_csv() {
        let m = DelayModel::uniform(0, 9, 3).unwrap();
        let edges = vec![(0, 1), (1, 0)];
        let mut buf = Vec::new();
        dump_schedule(&m, &edges, 0..25, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("tick,from,to,tau\n"));
        let loaded = load_schedule(buf.as_slice(), 0).unwrap();
        for t in 0..25 {
            for &(from, to) in &edges {
                assert_eq!(sample_delay(&loaded, from, to, t), sample_delay(&m, from, to, t));
            }
        }
        let mut s = DelaySampler::new(&loaded, edges.clone());
        assert_eq!(s.delays_at(3)[1], sample_delay(&m, 1, 0, 3));
        assert_eq!(sample_delay(&loaded, 0, 1, 1000), 0);
        assert!(loaded.tau_max() <= 9);
    }

    #[test]
    fn history_reads() {
        let mut buf = HistoryBuffer::new(5, vec![0.0]);
        assert_eq!(buf.stale_read(3, 5).unwrap(), &[0.0]);
        buf.publish(0, &[10.0]).unwrap();
        buf.publish(1, &[20.0]).unwrap();
        buf.publish(2, &[30.0]).unwrap();
        assert_eq!(buf.stale_read(2, 0).unwrap(), &[30.0]);
        assert_eq!(buf.stale_read(2, 1).unwrap(), &[20.0]);
        assert_eq!(buf.stale_read(2, 2).unwrap(), &[10.0]);
        assert_eq!(buf.stale_read(2, 3).unwrap(), &[0.0]);
        assert!(matches!(buf.stale_read(2, 6), Err(Error::DelayExceedsBound { delay: 6, tau_max: 5 })));
        assert!(buf.publish(4, &[1.0]).is_err());
    }

    #[test]
    fn history_wraps_around() {
        let mut buf = HistoryBuffer::new(3, vec![-1.0, -1.0]);
        for t in 0..100u64 {
            buf.publish(t, &[t as f64, 2.0 * t as f64]).unwrap();
            for d in 0..=3u32 {
                let expect = if (t as i64) - (d as i64) < 0 {
                    vec![-1.0, -1.0]
                } else {
                    let s = (t - d as u64) as f64;
                    vec![s, 2.0 * s]
                };
                assert_eq!(buf.stale_read(t, d).unwrap(), expect.as_slice());
            }
        }
    }
}
