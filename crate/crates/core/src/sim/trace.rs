//! Memory access traces of one CSR SpMV pass.
//!
//! Access model, for a block of rows `[r0, r1)`:
//! `rowptr[r0]` is read once; then for each row `i`, `rowptr[i + 1]` is read
//! (the start pointer is carried from the previous row), each nonzero `k`
//! reads `colidx[k]`, `values[k]` and `x[colidx[k]]` in that order, and the
//! row ends with one write of `y[i]`. A full pass therefore produces
//! `3m + (n + 1) + n` events.

use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum AccessKind {
    Read = 0,
    Write = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Stream {
    RowPtr = 0,
    ColIdx = 1,
    Values = 2,
    X = 3,
    Y = 4,
}

impl Stream {
    pub const ALL: [Stream; 5] = [
        Stream::RowPtr,
        Stream::ColIdx,
        Stream::Values,
        Stream::X,
        Stream::Y,
    ];

    fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(usize::from(v)).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Access {
    pub addr: u64,
    pub kind: AccessKind,
    pub stream: Stream,
}

impl Access {
    #[inline]
    pub fn read(addr: u64, stream: Stream) -> Self {
        Access {
            addr,
            kind: AccessKind::Read,
            stream,
        }
    }
}

/// Base addresses of the five arrays in a flat virtual address space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub rowptr: u64,
    pub colidx: u64,
    pub values: u64,
    pub x: u64,
    pub y: u64,
}

pub const INDEX_BYTES: u64 = 4;
pub const VALUE_BYTES: u64 = 8;
const LAYOUT_BASE: u64 = 1 << 32;

impl ArrayLayout {
    /// Places the arrays back to back, each starting on an `align`-byte
    /// boundary, in the order rowptr, colidx, values, x, y.
    pub fn packed(a: &CsrMatrix, align: u64) -> Self {
        assert!(align.is_power_of_two(), "alignment must be a power of two");
        let up = |v: u64| v.div_ceil(align) * align;
        let sizes = region_sizes(a);
        let mut next = LAYOUT_BASE;
        let mut bases = [0u64; 5];
        for (base, size) in bases.iter_mut().zip(sizes) {
            *base = next;
            next = up(next + size.max(1));
        }
        ArrayLayout {
            rowptr: bases[0],
            colidx: bases[1],
            values: bases[2],
            x: bases[3],
            y: bases[4],
        }
    }

    /// Page-aligned packing.
    pub fn for_matrix(a: &CsrMatrix) -> Self {
        Self::packed(a, 4096)
    }

    fn bases(&self) -> [u64; 5] {
        [self.rowptr, self.colidx, self.values, self.x, self.y]
    }

    /// Regions must be line-aligned and pairwise disjoint.
    pub fn validate(&self, a: &CsrMatrix, line_bytes: u64) -> Result<()> {
        let bases = self.bases();
        let sizes = region_sizes(a);
        let mut regions: Vec<(u64, u64, Stream)> = Vec::with_capacity(5);
        for ((base, size), stream) in bases.into_iter().zip(sizes).zip(Stream::ALL) {
            if base % line_bytes != 0 {
                return Err(Error::Layout(format!(
                    "{stream:?} base {base:#x} is not aligned to {line_bytes}-byte lines"
                )));
            }
            let end = base
                .checked_add(size)
                .ok_or_else(|| Error::Layout(format!("{stream:?} region overflows")))?;
            regions.push((base, end, stream));
        }
        regions.sort_unstable_by_key(|r| r.0);
        for w in regions.windows(2) {
            if w[0].1 > w[1].0 {
                return Err(Error::Layout(format!(
                    "{:?} and {:?} regions overlap",
                    w[0].2, w[1].2
                )));
            }
        }
        Ok(())
    }
}

fn region_sizes(a: &CsrMatrix) -> [u64; 5] {
    let n = a.nrows() as u64;
    let m = a.nnz() as u64;
    [
        (n + 1) * INDEX_BYTES,
        m * INDEX_BYTES,
        m * VALUE_BYTES,
        a.ncols() as u64 * VALUE_BYTES,
        n * VALUE_BYTES,
    ]
}

/// Number of events a pass over `rows` produces.
pub fn event_count(a: &CsrMatrix, rows: Range<usize>) -> u64 {
    if rows.is_empty() {
        return 0;
    }
    let nnz = u64::from(a.rowptr()[rows.end] - a.rowptr()[rows.start]);
    3 * nnz + 1 + 2 * rows.len() as u64
}

#[derive(Clone, Copy)]
enum Phase {
    Start,
    RowEnd,
    Col,
    Val,
    X,
    Y,
    Done,
}

/// Lazily generated access stream for a block of rows.
pub struct SpmvAccesses<'a> {
    a: &'a CsrMatrix,
    layout: ArrayLayout,
    row: usize,
    end: usize,
    k: usize,
    phase: Phase,
}

impl<'a> SpmvAccesses<'a> {
    pub fn new(a: &'a CsrMatrix, layout: ArrayLayout, rows: Range<usize>) -> Self {
        assert!(rows.end <= a.nrows(), "row range past end of matrix");
        let phase = if rows.is_empty() {
            Phase::Done
        } else {
            Phase::Start
        };
        SpmvAccesses {
            a,
            layout,
            row: rows.start,
            end: rows.end,
            k: 0,
            phase,
        }
    }
}

impl Iterator for SpmvAccesses<'_> {
    type Item = Access;

    #[inline]
    fn next(&mut self) -> Option<Access> {
        let l = &self.layout;
        let rowptr = self.a.rowptr();
        loop {
            match self.phase {
                Phase::Start => {
                    self.phase = Phase::RowEnd;
                    self.k = rowptr[self.row] as usize;
                    return Some(Access::read(
                        l.rowptr + self.row as u64 * INDEX_BYTES,
                        Stream::RowPtr,
                    ));
                }
                Phase::RowEnd => {
                    self.phase = Phase::Col;
                    return Some(Access::read(
                        l.rowptr + (self.row as u64 + 1) * INDEX_BYTES,
                        Stream::RowPtr,
                    ));
                }
                Phase::Col => {
                    if self.k == rowptr[self.row + 1] as usize {
                        self.phase = Phase::Y;
                        continue;
                    }
                    self.phase = Phase::Val;
                    return Some(Access::read(
                        l.colidx + self.k as u64 * INDEX_BYTES,
                        Stream::ColIdx,
                    ));
                }
                Phase::Val => {
                    self.phase = Phase::X;
                    return Some(Access::read(
                        l.values + self.k as u64 * VALUE_BYTES,
                        Stream::Values,
                    ));
                }
                Phase::X => {
                    let col = u64::from(self.a.colidx()[self.k]);
                    self.k += 1;
                    self.phase = Phase::Col;
                    return Some(Access::read(l.x + col * VALUE_BYTES, Stream::X));
                }
                Phase::Y => {
                    let addr = l.y + self.row as u64 * VALUE_BYTES;
                    self.row += 1;
                    self.phase = if self.row == self.end {
                        Phase::Done
                    } else {
                        Phase::RowEnd
                    };
                    return Some(Access {
                        addr,
                        kind: AccessKind::Write,
                        stream: Stream::Y,
                    });
                }
                Phase::Done => return None,
            }
        }
    }
}

/// An ordered, materialized access stream plus the shape of the rows that
/// produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccessTrace {
    pub events: Vec<Access>,
    pub nnz: u64,
    pub nrows: u64,
}

impl AccessTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// A trace of raw addresses with no matrix behind it.
    pub fn from_events(events: Vec<Access>) -> Self {
        AccessTrace {
            events,
            nnz: 0,
            nrows: 0,
        }
    }
}

pub fn trace_spmv(a: &CsrMatrix, layout: &ArrayLayout) -> Result<AccessTrace> {
    trace_spmv_rows(a, layout, 0..a.nrows())
}

pub fn trace_spmv_rows(
    a: &CsrMatrix,
    layout: &ArrayLayout,
    rows: Range<usize>,
) -> Result<AccessTrace> {
    layout.validate(a, 64)?;
    if rows.start > rows.end || rows.end > a.nrows() {
        return Err(Error::InvalidArgument(format!(
            "row range {rows:?} outside {} rows",
            a.nrows()
        )));
    }
    let mut events = Vec::with_capacity(event_count(a, rows.clone()) as usize);
    events.extend(SpmvAccesses::new(a, *layout, rows.clone()));
    let nnz = if rows.is_empty() {
        0
    } else {
        u64::from(a.rowptr()[rows.end] - a.rowptr()[rows.start])
    };
    Ok(AccessTrace {
        events,
        nnz,
        nrows: rows.len() as u64,
    })
}

pub const TRACE_MAGIC: &[u8; 8] = b"SPMVTRC\0";
pub const TRACE_VERSION: u32 = 1;
const RECORD_BYTES: usize = 10;

/// Trace dump: magic, version `u32`, nnz `u64`, nrows `u64`, event count
/// `u64`, then one 10-byte record per event (address `u64`, kind `u8`,
/// stream `u8`). Little-endian throughout.
pub fn write_trace<W: Write>(t: &AccessTrace, mut w: W) -> Result<()> {
    w.write_all(TRACE_MAGIC)?;
    w.write_all(&TRACE_VERSION.to_le_bytes())?;
    for v in [t.nnz, t.nrows, t.events.len() as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(RECORD_BYTES * 4096);
    for chunk in t.events.chunks(4096) {
        buf.clear();
        for e in chunk {
            buf.extend_from_slice(&e.addr.to_le_bytes());
            buf.push(e.kind as u8);
            buf.push(e.stream as u8);
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(mut r: R) -> Result<AccessTrace> {
    let mut header = [0u8; 36];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("truncated trace header".into()))?;
    if &header[..8] != TRACE_MAGIC {
        return Err(Error::Format("bad magic: not a trace file".into()));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != TRACE_VERSION {
        return Err(Error::Format(format!(
            "unsupported trace version {version}"
        )));
    }
    let field = |lo: usize| u64::from_le_bytes(header[lo..lo + 8].try_into().unwrap());
    let (nnz, nrows, count) = (field(12), field(20), field(28));
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() as u64 != count * RECORD_BYTES as u64 {
        return Err(Error::Format(format!(
            "trace declares {count} events but holds {} bytes",
            body.len()
        )));
    }
    let events = body
        .chunks_exact(RECORD_BYTES)
        .map(|rec| {
            let addr = u64::from_le_bytes(rec[..8].try_into().unwrap());
            let kind = match rec[8] {
                0 => AccessKind::Read,
                1 => AccessKind::Write,
                k => return Err(Error::Format(format!("bad access kind {k}"))),
            };
            let stream = Stream::from_u8(rec[9])
                .ok_or_else(|| Error::Format(format!("bad stream tag {}", rec[9])))?;
            Ok(Access { addr, kind, stream })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AccessTrace { events, nnz, nrows })
}
