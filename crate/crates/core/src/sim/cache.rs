/// One set-associative, true-LRU cache level addressed by line number.
#[derive(Debug, Clone)]
pub struct SetAssocCache {
    sets: usize,
    ways: usize,
    slots: Vec<Slot>,
    clock: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Slot {
    line: u64,
    stamp: u64, // 0 = invalid
    dirty: bool,
    prefetched: bool,
}

/// A line pushed out by an insertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evicted {
    pub line: u64,
    pub dirty: bool,
}

/// State of a line found by [`SetAssocCache::access`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hit {
    /// The line was brought in by a prefetch and this is its first demand use.
    pub first_prefetch_use: bool,
}

impl SetAssocCache {
    pub fn new(sets: usize, ways: usize) -> Self {
        assert!(
            sets > 0 && ways > 0,
            "cache needs at least one set and one way"
        );
        SetAssocCache {
            sets,
            ways,
            slots: vec![Slot::default(); sets * ways],
            clock: 0,
        }
    }

    pub fn fully_associative(lines: usize) -> Self {
        Self::new(1, lines)
    }

    pub fn capacity_lines(&self) -> usize {
        self.sets * self.ways
    }

    #[inline]
    fn set_of(&self, line: u64) -> std::ops::Range<usize> {
        let s = (line % self.sets as u64) as usize;
        s * self.ways..(s + 1) * self.ways
    }

    #[inline]
    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    /// Demand lookup. On a hit the line becomes most recently used, and is
    /// marked dirty when `write` is set.
    #[inline]
    pub fn access(&mut self, line: u64, write: bool) -> Option<Hit> {
        let range = self.set_of(line);
        let now = self.tick();
        let slot = self.slots[range]
            .iter_mut()
            .find(|s| s.stamp != 0 && s.line == line)?;
        slot.stamp = now;
        slot.dirty |= write;
        let first_prefetch_use = slot.prefetched;
        slot.prefetched = false;
        Some(Hit { first_prefetch_use })
    }

    /// Presence check that leaves LRU order untouched.
    #[inline]
    pub fn contains(&self, line: u64) -> bool {
        self.slots[self.set_of(line)]
            .iter()
            .any(|s| s.stamp != 0 && s.line == line)
    }

    /// Marks a resident line dirty without touching LRU order. Returns false
    /// if the line is absent.
    pub fn mark_dirty(&mut self, line: u64) -> bool {
        let range = self.set_of(line);
        match self.slots[range]
            .iter_mut()
            .find(|s| s.stamp != 0 && s.line == line)
        {
            Some(s) => {
                s.dirty = true;
                true
            }
            None => false,
        }
    }

    /// Installs `line` as most recently used, evicting the set's LRU line if
    /// the set is full. The caller guarantees the line is not resident.
    #[inline]
    pub fn insert(&mut self, line: u64, dirty: bool, prefetched: bool) -> Option<Evicted> {
        debug_assert!(!self.contains(line), "line {line:#x} inserted twice");
        let range = self.set_of(line);
        let now = self.tick();
        let set = &mut self.slots[range];
        let victim = set
            .iter_mut()
            .min_by_key(|s| s.stamp)
            .expect("sets are never empty");
        let evicted = (victim.stamp != 0).then_some(Evicted {
            line: victim.line,
            dirty: victim.dirty,
        });
        *victim = Slot {
            line,
            stamp: now,
            dirty,
            prefetched,
        };
        evicted
    }

    pub fn resident_lines(&self) -> usize {
        self.slots.iter().filter(|s| s.stamp != 0).count()
    }
}
