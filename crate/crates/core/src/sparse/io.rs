//! Matrix file formats.
//!
//! Binary container (all little-endian):
//!
//! | offset | size        | field                  |
//! |--------|-------------|------------------------|
//! | 0      | 8           | magic `SPMVCSR\0`      |
//! | 8      | 4           | version (`1`)          |
//! | 12     | 8           | nrows `n`              |
//! | 20     | 8           | ncols                  |
//! | 28     | 8           | nnz `m`                |
//! | 36     | 4 (n+1)     | rowptr, `u32`          |
//! |        | 4 m         | colidx, `u32`          |
//! |        | 8 m         | values, `f64`          |
//!
//! Text interop uses Matrix Market coordinate format.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::gen::TripletMatrix;

pub const CSR_MAGIC: &[u8; 8] = b"SPMVCSR\0";
pub const CSR_VERSION: u32 = 1;
const HEADER_LEN: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Binary,
    MatrixMarket,
}

impl MatrixFormat {
    /// `.mtx` selects Matrix Market; anything else is the binary container.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("mtx") => MatrixFormat::MatrixMarket,
            _ => MatrixFormat::Binary,
        }
    }
}

pub fn write_binary<W: Write>(a: &CsrMatrix, mut w: W) -> Result<()> {
    w.write_all(CSR_MAGIC)?;
    w.write_all(&CSR_VERSION.to_le_bytes())?;
    for v in [a.nrows() as u64, a.ncols() as u64, a.nnz() as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(64 * 1024);
    for chunk in a.rowptr().chunks(8192).chain(a.colidx().chunks(8192)) {
        buf.clear();
        buf.extend(chunk.iter().flat_map(|v| v.to_le_bytes()));
        w.write_all(&buf)?;
    }
    for chunk in a.values().chunks(8192) {
        buf.clear();
        buf.extend(chunk.iter().flat_map(|v| v.to_le_bytes()));
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_binary_bytes(a: &CsrMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (a.nrows() + 1) + 12 * a.nnz());
    write_binary(a, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32s<R: Read>(r: &mut R, count: usize, what: &str) -> Result<Vec<u32>> {
    let mut bytes = vec![0u8; count * 4];
    read_exact_or_truncated(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<CsrMatrix> {
    let mut header = [0u8; HEADER_LEN];
    read_exact_or_truncated(&mut r, &mut header, "header")?;
    if &header[..8] != CSR_MAGIC {
        return Err(Error::Format("bad magic: not a binary CSR file".into()));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != CSR_VERSION {
        return Err(Error::Format(format!("unsupported CSR version {version}")));
    }
    let field = |lo: usize| u64::from_le_bytes(header[lo..lo + 8].try_into().unwrap());
    let (n, ncols, m) = (field(12), field(20), field(28));
    if m > u64::from(u32::MAX) || n >= u64::from(u32::MAX) || ncols > 1 << 32 {
        return Err(Error::Format(format!(
            "header sizes out of range: n={n} ncols={ncols} m={m}"
        )));
    }
    let (n, ncols, m) = (n as usize, ncols as usize, m as usize);

    let rowptr = read_u32s(&mut r, n + 1, "rowptr")?;
    let colidx = read_u32s(&mut r, m, "colidx")?;
    let mut bytes = vec![0u8; m * 8];
    read_exact_or_truncated(&mut r, &mut bytes, "values")?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after values".into()));
    }
    CsrMatrix::new(n, ncols, rowptr, colidx, values)
        .map_err(|e| Error::Format(format!("invalid CSR payload: {e}")))
}

pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        for k in a.row_range(i) {
            writeln!(w, "{} {} {}", i + 1, a.colidx()[k] + 1, a.values()[k])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Parses `coordinate` Matrix Market files with `real`, `integer` or
/// `pattern` fields and `general`, `symmetric` or `skew-symmetric` symmetry.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, msg: &str| Error::Format(format!("line {}: {msg}", line + 1));

    let (_, banner) = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))?;
    let banner = banner?;
    let tokens: Vec<String> = banner
        .split_whitespace()
        .map(|s| s.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(bad(0, "missing %%MatrixMarket matrix banner"));
    }
    if tokens[2] != "coordinate" {
        return Err(bad(0, "only coordinate format is supported"));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(bad(0, &format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(bad(0, &format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut t = TripletMatrix::default();
    let mut seen = 0usize;
    for (no, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| bad(no, &format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|_| bad(no, &format!("bad {what}")))
        };
        match size {
            None => {
                let dims = (next_usize("rows")?, next_usize("cols")?, next_usize("nnz")?);
                if symmetry != Symmetry::General && dims.0 != dims.1 {
                    return Err(bad(no, "symmetric matrix must be square"));
                }
                t = TripletMatrix::new(dims.0, dims.1);
                size = Some(dims);
            }
            Some((nrows, ncols, nnz)) => {
                let i = next_usize("row index")?;
                let j = next_usize("column index")?;
                let v = if pattern {
                    1.0
                } else {
                    it.next()
                        .ok_or_else(|| bad(no, "missing value"))?
                        .parse::<f64>()
                        .map_err(|_| bad(no, "bad value"))?
                };
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(bad(no, &format!("index ({i}, {j}) out of range")));
                }
                seen += 1;
                if seen > nnz {
                    return Err(bad(no, "more entries than declared"));
                }
                let (row, col) = ((i - 1) as u32, (j - 1) as u32);
                t.push(row, col, v);
                if row != col {
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => t.push(col, row, v),
                        Symmetry::SkewSymmetric => t.push(col, row, -v),
                    }
                }
            }
        }
    }
    let (_, _, nnz) = size.ok_or_else(|| Error::Format("missing size line".into()))?;
    if seen != nnz {
        return Err(Error::Format(format!(
            "declared {nnz} entries, found {seen}"
        )));
    }
    CsrMatrix::from_triplets(&t).map_err(|e| Error::Format(e.to_string()))
}

pub fn load_matrix(path: &Path) -> Result<CsrMatrix> {
    let file = File::open(path)?;
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => read_binary(BufReader::new(file)),
        MatrixFormat::MatrixMarket => read_matrix_market(BufReader::new(file)),
    }
}

/// Writes through a sibling temporary file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        fill(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn save_matrix(a: &CsrMatrix, path: &Path) -> Result<()> {
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => write_atomic(path, |w| write_binary(a, w)),
        MatrixFormat::MatrixMarket => write_atomic(path, |w| write_matrix_market(a, w)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_fd9, gen_rmat, GenSpec};

    fn two_by_two() -> CsrMatrix {
        CsrMatrix::new(2, 2, vec![0, 1, 2], vec![0, 1], vec![5.0, 3.0]).unwrap()
    }

    #[test]
    fn binary_roundtrip_fd9() {
        let a = CsrMatrix::from_triplets(&gen_fd9(&GenSpec::fd9(4)).unwrap()).unwrap();
        let bytes = to_binary_bytes(&a);
        assert_eq!(&bytes[..8], CSR_MAGIC);
        assert_eq!(bytes.len(), 36 + 4 * 17 + 12 * 144);
        assert_eq!(read_binary(bytes.as_slice()).unwrap(), a);
    }

    #[test]
    fn binary_header_layout() {
        let bytes = to_binary_bytes(&two_by_two());
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[28..36].try_into().unwrap()), 2);
        assert_eq!(&bytes[36..48], &[0, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(f64::from_le_bytes(bytes[56..64].try_into().unwrap()), 5.0);
    }

    #[test]
    fn binary_truncated_and_corrupt() {
        let bytes = to_binary_bytes(&two_by_two());
        for cut in [0, 10, 36, 40, bytes.len() - 1] {
            assert!(
                matches!(read_binary(&bytes[..cut]), Err(Error::Format(_))),
                "cut at {cut}"
            );
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_binary(bad.as_slice()), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[48] = 7; // colidx[0] = 7 >= ncols
        assert!(matches!(read_binary(bad.as_slice()), Err(Error::Format(_))));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(
            read_binary(long.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn matrix_market_roundtrip() {
        let a = two_by_two();
        let mut text = Vec::new();
        write_matrix_market(&a, &mut text).unwrap();
        let s = String::from_utf8(text.clone()).unwrap();
        assert!(
            s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 5\n2 2 3\n")
        );
        assert_eq!(read_matrix_market(text.as_slice()).unwrap(), a);

        let r = CsrMatrix::from_triplets(&gen_rmat(&GenSpec::rmat(6, 2)).unwrap()).unwrap();
        let mut text = Vec::new();
        write_matrix_market(&r, &mut text).unwrap();
        assert_eq!(read_matrix_market(text.as_slice()).unwrap(), r);
    }

    #[test]
    fn matrix_market_variants() {
        let sym = "%%MatrixMarket matrix coordinate pattern symmetric\n% c\n3 3 2\n2 1\n3 3\n";
        let a = read_matrix_market(sym.as_bytes()).unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.to_dense()[0][1], 1.0);
        let skew = "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 4.5\n";
        let a = read_matrix_market(skew.as_bytes()).unwrap();
        assert_eq!(a.to_dense(), vec![vec![0.0, -4.5], vec![4.5, 0.0]]);
    }

    #[test]
    fn matrix_market_errors() {
        let cases = [
            "",
            "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n1 1 2\n",
        ];
        for c in cases {
            assert!(
                matches!(read_matrix_market(c.as_bytes()), Err(Error::Format(_))),
                "{c:?}"
            );
        }
    }

    #[test]
    fn atomic_save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let a = CsrMatrix::from_triplets(&gen_fd9(&GenSpec::fd9(4)).unwrap()).unwrap();
        for name in ["m.csr", "m.mtx"] {
            let path = dir.path().join(name);
            save_matrix(&a, &path).unwrap();
            assert_eq!(load_matrix(&path).unwrap(), a);
        }
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
