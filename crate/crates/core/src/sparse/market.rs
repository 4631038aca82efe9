use std::io::{BufRead, Write};

use super::{CsrMatrix, TripletBuilder};
use crate::error::{Error, Result};

/// Writes a Matrix Market coordinate file. With `symmetric`, only the lower
/// triangle is stored and the header says `symmetric`.
pub fn write_matrix_market<W: Write>(m: &CsrMatrix, symmetric: bool, mut w: W) -> Result<()> {
    let kind = if symmetric { "symmetric" } else { "general" };
    writeln!(w, "%%MatrixMarket matrix coordinate real {kind}")?;
    let entries: Vec<_> = m.triplets().filter(|&(i, j, _)| !symmetric || j <= i).collect();
    writeln!(w, "{} {} {}", m.n_rows(), m.n_cols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut lines = r.lines().enumerate();
    let err = |line: usize, reason: &str| Error::MatrixMarket {
        line: line + 1,
        reason: reason.to_string(),
    };
    let (_, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
    let header = header?.to_lowercase();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(err(0, "expected `%%MatrixMarket matrix coordinate ...` header"));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(err(0, "only real matrices are supported"));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        _ => return Err(err(0, "only general and symmetric storage are supported")),
    };

    let mut builder: Option<TripletBuilder> = None;
    let mut expected = 0usize;
    let mut seen = 0usize;
    for (ln, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match builder.as_mut() {
            None => {
                if parts.len() != 3 {
                    return Err(err(ln, "size line needs `rows cols nnz`"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| err(ln, "bad integer"));
                let (r, c) = (p(parts[0])?, p(parts[1])?);
                expected = p(parts[2])?;
                builder = Some(TripletBuilder::new(r, c));
            }
            Some(b) => {
                if parts.len() != 3 {
                    return Err(err(ln, "entry line needs `i j value`"));
                }
                let i: usize = parts[0].parse().map_err(|_| err(ln, "bad row index"))?;
                let j: usize = parts[1].parse().map_err(|_| err(ln, "bad column index"))?;
                let v: f64 = parts[2].parse().map_err(|_| err(ln, "bad value"))?;
                if i == 0 || j == 0 || i > b.n_rows_hint() || j > b.n_cols_hint() {
                    return Err(err(ln, "index out of range"));
                }
                b.push(i - 1, j - 1, v);
                if symmetric && i != j {
                    b.push(j - 1, i - 1, v);
                }
                seen += 1;
            }
        }
    }
    let builder = builder.ok_or_else(|| err(0, "missing size line"))?;
    if seen != expected {
        return Err(err(0, &format!("expected {expected} entries, found {seen}")));
    }
    Ok(builder.build())
}

impl TripletBuilder {
    fn n_rows_hint(&self) -> usize {
        self.dims().0
    }

    fn n_cols_hint(&self) -> usize {
        self.dims().1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_general_and_symmetric() {
        let mut b = TripletBuilder::new(3, 3);
        b.push(0, 0, 2.0);
        b.push(1, 0, -1.0);
        b.push(0, 1, -1.0);
        b.push(2, 2, 0.125);
        let m = b.build();
        for symmetric in [false, true] {
            let mut buf = Vec::new();
            write_matrix_market(&m, symmetric, &mut buf).unwrap();
            let back = read_matrix_market(buf.as_slice()).unwrap();
            let a: Vec<_> = m.triplets().collect();
            let b: Vec<_> = back.triplets().collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_bad_header() {
        let src = "%%MatrixMarket matrix array real general\n1 1\n1.0\n";
        assert!(read_matrix_market(src.as_bytes()).is_err());
    }

    #[test]
    fn rejects_count_mismatch() {
        let src = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(read_matrix_market(src.as_bytes()).is_err());
    }
}
