use std::collections::VecDeque;
use std::ops::RangeInclusive;

use super::config::PrefetchConfig;

#[derive(Debug, Clone, Copy)]
struct Tracker {
    page: u64,
    last_line: u64,
    streak: u32,
    stamp: u64,
}

/// Next-line streamer trained on L2 demand-miss line addresses.
///
/// A miss continues a tracked stream when it lies in the stream's page and
/// at most `degree + 1` lines above the stream's last line. Once a stream has
/// seen `trigger` such events, each further one requests the next `degree`
/// lines, clipped to the page. Unmatched misses claim the least recently used
/// tracker. The first demand use of a prefetched line also advances a
/// matching stream (but never allocates one), which keeps an armed stream
/// running ahead of the demand accesses.
#[derive(Debug, Clone)]
pub struct StreamPrefetcher {
    cfg: PrefetchConfig,
    lines_per_page: u64,
    trackers: Vec<Tracker>,
    clock: u64,
}

impl StreamPrefetcher {
    pub fn new(cfg: PrefetchConfig, line_bytes: u64) -> Self {
        StreamPrefetcher {
            cfg,
            lines_per_page: cfg.page_bytes / line_bytes,
            trackers: Vec::with_capacity(cfg.trackers as usize),
            clock: 0,
        }
    }

    /// Records an L2 demand miss and returns the lines the stream wants
    /// fetched, if any.
    pub fn on_miss(&mut self, line: u64) -> Option<RangeInclusive<u64>> {
        self.observe(line, true)
    }

    /// Records the first demand hit on a prefetched line.
    pub fn on_prefetch_hit(&mut self, line: u64) -> Option<RangeInclusive<u64>> {
        self.observe(line, false)
    }

    fn observe(&mut self, line: u64, allocate: bool) -> Option<RangeInclusive<u64>> {
        self.clock += 1;
        let page = line / self.lines_per_page;
        let reach = u64::from(self.cfg.degree) + 1;
        let now = self.clock;

        let matched = self
            .trackers
            .iter_mut()
            .find(|t| t.page == page && line > t.last_line && line <= t.last_line + reach);
        let tracker = match matched {
            Some(t) => {
                t.streak += 1;
                t.last_line = line;
                t.stamp = now;
                *t
            }
            None if !allocate => return None,
            None => {
                let fresh = Tracker {
                    page,
                    last_line: line,
                    streak: 1,
                    stamp: now,
                };
                if self.trackers.len() < self.cfg.trackers as usize {
                    self.trackers.push(fresh);
                } else if let Some(victim) = self.trackers.iter_mut().min_by_key(|t| t.stamp) {
                    *victim = fresh;
                }
                fresh
            }
        };

        if tracker.streak < self.cfg.trigger {
            return None;
        }
        let page_last = (page + 1) * self.lines_per_page - 1;
        let first = line + 1;
        let last = (line + u64::from(self.cfg.degree)).min(page_last);
        (first <= last).then_some(first..=last)
    }
}

/// Sliding window over the most recent demand accesses, recording which of
/// them were served by DRAM.
#[derive(Debug, Clone)]
pub struct CongestionWindow {
    window: usize,
    threshold: f64,
    recent: VecDeque<bool>,
    dram: usize,
}

impl CongestionWindow {
    pub fn new(window: u32, threshold: f64) -> Self {
        CongestionWindow {
            window: window as usize,
            threshold,
            recent: VecDeque::with_capacity(window as usize),
            dram: 0,
        }
    }

    #[inline]
    pub fn record(&mut self, served_by_dram: bool) {
        if self.recent.len() == self.window && self.recent.pop_front() == Some(true) {
            self.dram -= 1;
        }
        self.recent.push_back(served_by_dram);
        self.dram += usize::from(served_by_dram);
    }

    /// DRAM-served fraction of the window; unfilled slots count as on-chip.
    pub fn dram_fraction(&self) -> f64 {
        self.dram as f64 / self.window as f64
    }

    #[inline]
    pub fn congested(&self) -> bool {
        self.dram_fraction() > self.threshold
    }
}
