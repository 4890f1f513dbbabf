//! Plain-text set and variety files, CSV count tables.
//!
//! Set files start with `p=<p> n=<n> [m=<m>] kind=<linear|grid>`, followed by
//! either `points:` and one base-`p` digit string per line (coordinate 0
//! first; grid points as x-digits, a space, y-digits) or, for `p = 2` linear
//! sets, `mask:` and hex rows of 64 membership bits, bit `j` of row `r` being
//! index `64 r + j`. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gf::{canonical_basis, BilinearForm, FieldParams, Vector};
use crate::phi::{CountTable, CountValues, GridSet};
use crate::pipeline::BilinearVariety;
use crate::setlab::DenseSet;

const DIGITS: &[u8] = b"0123456789abcdefg";
const DIGIT_NOTE: &str = "# digits: base p, coordinate 0 first";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetFile {
    Linear(DenseSet),
    Grid(GridSet),
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn digits(v: &[u32]) -> String {
    v.iter().map(|&d| DIGITS[d as usize] as char).collect()
}

fn parse_digits(s: &str, f: &FieldParams, line: usize) -> Result<Vector> {
    if s.len() != f.n {
        return Err(parse_err(line, format!("expected {} digits, got {:?}", f.n, s)));
    }
    s.bytes()
        .map(|b| {
            DIGITS
                .iter()
                .position(|&d| d == b)
                .map(|d| d as u32)
                .filter(|&d| d < f.p)
                .ok_or_else(|| parse_err(line, format!("bad digit {:?}", b as char)))
        })
        .collect()
}

/// Non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn parse_header(line: usize, text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for tok in text.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| parse_err(line, format!("bad header token {tok:?}")))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

fn header_num<T: std::str::FromStr>(h: &BTreeMap<String, String>, key: &str, line: usize) -> Result<T> {
    h.get(key)
        .ok_or_else(|| parse_err(line, format!("missing {key}=")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad value for {key}")))
}

pub fn write_linear(a: &DenseSet) -> String {
    let f = a.ambient();
    let mut out = format!("p={} n={} kind=linear\n{DIGIT_NOTE}\n", f.p, f.n);
    if f.p == 2 {
        out.push_str("mask:\n");
        let size = f.size();
        let width = if size >= 64 { 16 } else { size.div_ceil(4) };
        for row in 0..size.div_ceil(64) {
            let mut word = 0u64;
            for j in 0..64.min(size - 64 * row) {
                if a.contains(64 * row + j) {
                    word |= 1 << j;
                }
            }
            let _ = writeln!(out, "{word:0width$x}");
        }
    } else {
        out.push_str("points:\n");
        for idx in a.iter() {
            out.push_str(&digits(&f.vector(idx)));
            out.push('\n');
        }
    }
    out
}

pub fn write_grid(a: &GridSet) -> String {
    let (xs, ys) = (a.x_params(), a.y_params());
    let mut out = format!("p={} n={} m={} kind=grid\n{DIGIT_NOTE}\npoints:\n", xs.p, ys.n, xs.n);
    for (x, y) in a.iter() {
        let _ = writeln!(out, "{} {}", digits(&xs.vector(x)), digits(&ys.vector(y)));
    }
    out
}

pub fn write_set(s: &SetFile) -> String {
    match s {
        SetFile::Linear(a) => write_linear(a),
        SetFile::Grid(g) => write_grid(g),
    }
}

pub fn read_set(text: &str) -> Result<SetFile> {
    let lines = content_lines(text);
    let (hl, header) = *lines.first().ok_or_else(|| parse_err(1, "empty file"))?;
    let h = parse_header(hl, header)?;
    let p: u32 = header_num(&h, "p", hl)?;
    let n: usize = header_num(&h, "n", hl)?;
    let kind = h.get("kind").map(String::as_str).ok_or_else(|| parse_err(hl, "missing kind="))?;
    let (bl, body) = *lines.get(1).ok_or_else(|| parse_err(hl + 1, "missing points: or mask:"))?;
    let rows = &lines[2..];
    match kind {
        "linear" => {
            let f = FieldParams::new(p, n)?;
            let mut a = DenseSet::empty(f);
            match body {
                "points:" => {
                    for &(l, row) in rows {
                        a.insert(f.index(&parse_digits(row, &f, l)?));
                    }
                }
                "mask:" if p == 2 => {
                    let size = f.size();
                    if rows.len() != size.div_ceil(64) {
                        return Err(parse_err(bl, format!("expected {} mask rows", size.div_ceil(64))));
                    }
                    for (r, &(l, row)) in rows.iter().enumerate() {
                        let word = u64::from_str_radix(row, 16).map_err(|_| parse_err(l, "bad hex row"))?;
                        for j in 0..64 {
                            if word >> j & 1 == 1 {
                                let idx = 64 * r + j;
                                if idx >= size {
                                    return Err(parse_err(l, "mask bit beyond the ambient"));
                                }
                                a.insert(idx);
                            }
                        }
                    }
                }
                other => return Err(parse_err(bl, format!("expected points: or mask:, got {other:?}"))),
            }
            Ok(SetFile::Linear(a))
        }
        "grid" => {
            let m: usize = header_num(&h, "m", hl)?;
            if body != "points:" {
                return Err(parse_err(bl, "grid sets use points:"));
            }
            let mut g = GridSet::empty(p, m, n)?;
            let (xs, ys) = (g.x_params(), g.y_params());
            for &(l, row) in rows {
                let (x, y) = row.split_once(' ').ok_or_else(|| parse_err(l, "expected x-digits y-digits"))?;
                let x = xs.index(&parse_digits(x, &xs, l)?);
                let y = ys.index(&parse_digits(y.trim(), &ys, l)?);
                g.insert(x, y);
            }
            Ok(SetFile::Grid(g))
        }
        other => Err(parse_err(hl, format!("unknown kind {other:?}"))),
    }
}

pub fn read_grid(text: &str) -> Result<GridSet> {
    match read_set(text)? {
        SetFile::Grid(g) => Ok(g),
        SetFile::Linear(_) => Err(parse_err(1, "expected kind=grid")),
    }
}

pub fn read_linear(text: &str) -> Result<DenseSet> {
    match read_set(text)? {
        SetFile::Linear(a) => Ok(a),
        SetFile::Grid(_) => Err(parse_err(1, "expected kind=linear")),
    }
}

pub fn write_variety(b: &BilinearVariety) -> String {
    let mut out = format!(
        "p={} n={} m={} kind=variety\n{DIGIT_NOTE}; each form is m rows of n digits, b(x, y) = x^T M y\n",
        b.p(),
        b.n(),
        b.m()
    );
    let _ = writeln!(out, "V: {}", b.v().dim());
    for row in b.v().basis() {
        out.push_str(&digits(row));
        out.push('\n');
    }
    let _ = writeln!(out, "W: {}", b.w().dim());
    for row in b.w().basis() {
        out.push_str(&digits(row));
        out.push('\n');
    }
    let _ = writeln!(out, "forms: {}", b.forms().len());
    for form in b.forms() {
        out.push_str("M:\n");
        for row in form.matrix() {
            out.push_str(&digits(row));
            out.push('\n');
        }
    }
    out
}

pub fn read_variety(text: &str) -> Result<BilinearVariety> {
    let lines = content_lines(text);
    let (hl, header) = *lines.first().ok_or_else(|| parse_err(1, "empty file"))?;
    let h = parse_header(hl, header)?;
    if h.get("kind").map(String::as_str) != Some("variety") {
        return Err(parse_err(hl, "expected kind=variety"));
    }
    let p: u32 = header_num(&h, "p", hl)?;
    let n: usize = header_num(&h, "n", hl)?;
    let m: usize = header_num(&h, "m", hl)?;
    let (xs, ys) = (FieldParams::linear(p, m)?, FieldParams::linear(p, n)?);
    let take = |start: usize, count: usize, f: &FieldParams| -> Result<Vec<Vector>> {
        (start..start + count)
            .map(|i| {
                let &(l, row) = lines.get(i).ok_or_else(|| parse_err(hl, "file ends early"))?;
                parse_digits(row, f, l)
            })
            .collect()
    };
    let next_count = |label: &str, cursor: &mut usize| -> Result<usize> {
        let &(l, text) = lines.get(*cursor).ok_or_else(|| parse_err(hl, format!("missing {label}")))?;
        *cursor += 1;
        let rest = text.strip_prefix(label).ok_or_else(|| parse_err(l, format!("expected {label}")))?;
        rest.trim().parse().map_err(|_| parse_err(l, format!("bad count after {label}")))
    };
    let mut cursor = 1;
    let kv = next_count("V:", &mut cursor)?;
    let v_rows = take(cursor, kv, &xs)?;
    cursor += kv;
    let kw = next_count("W:", &mut cursor)?;
    let w_rows = take(cursor, kw, &ys)?;
    cursor += kw;
    let kf = next_count("forms:", &mut cursor)?;
    let mut forms = Vec::with_capacity(kf);
    for _ in 0..kf {
        let &(l, text) = lines.get(cursor).ok_or_else(|| parse_err(hl, "missing M:"))?;
        if text != "M:" {
            return Err(parse_err(l, "expected M:"));
        }
        cursor += 1;
        forms.push(BilinearForm::new(p, n, take(cursor, m, &ys)?)?);
        cursor += m;
    }
    if let Some(&(l, _)) = lines.get(cursor) {
        return Err(parse_err(l, "trailing content"));
    }
    let v = canonical_basis(xs, &v_rows)?;
    let w = canonical_basis(ys, &w_rows)?;
    if v.dim() != kv || w.dim() != kw {
        return Err(parse_err(hl, "basis rows are linearly dependent"));
    }
    BilinearVariety::new(v, w, forms)
}

/// `x_index,y_index,count_or_density` for every point with a positive count.
pub fn write_count_csv(t: &CountTable) -> String {
    let mut out = String::from("x_index,y_index,count_or_density\n");
    let xs = t.x_params();
    let size = xs.size();
    let mut emit = |idx: usize, value: String| {
        let _ = writeln!(out, "{},{},{}", idx % size, idx / size, value);
    };
    match t.values() {
        CountValues::Exact(v) => {
            for (i, c) in v.iter().enumerate() {
                if c.bits() > 0 {
                    emit(i, c.to_string());
                }
            }
        }
        CountValues::Normalized(v) => {
            for (i, &c) in v.iter().enumerate() {
                if c > 0.0 {
                    emit(i, format!("{c:e}"));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::{count_table, ArithmeticMode};

    #[test]
    fn linear_round_trip_both_encodings() {
        let mut rng = crate::rng::stream(1, "io");
        for (p, n) in [(2, 3), (2, 7), (3, 3), (5, 2)] {
            let a = DenseSet::random(&mut rng, FieldParams::new(p, n).unwrap(), 0.4);
            let text = write_linear(&a);
            assert_eq!(read_linear(&text).unwrap(), a);
            assert_eq!(write_linear(&read_linear(&text).unwrap()), text);
        }
        let b = DenseSet::from_indices(FieldParams::new(3, 2).unwrap(), [1, 5]);
        let text = "p=3 n=2 kind=linear\npoints:\n10\n21\n";
        assert_eq!(read_linear(text).unwrap(), b);
    }

    #[test]
    fn grid_round_trip() {
        let mut rng = crate::rng::stream(2, "io");
        let joint = DenseSet::random(&mut rng, FieldParams::new(3, 3).unwrap(), 0.5);
        let g = GridSet::from_joint(2, joint).unwrap();
        let text = write_grid(&g);
        assert_eq!(read_grid(&text).unwrap(), g);
        assert_eq!(write_grid(&read_grid(&text).unwrap()), text);
    }

    #[test]
    fn variety_round_trip() {
        let f = FieldParams::linear(2, 3).unwrap();
        let v = canonical_basis(f, &[vec![1, 1, 0], vec![0, 0, 1]]).unwrap();
        let w = canonical_basis(f.with_dim(2), &[vec![1, 1]]).unwrap();
        let b = BilinearForm::new(2, 2, vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let var = BilinearVariety::new(v, w, vec![b]).unwrap();
        let text = write_variety(&var);
        let back = read_variety(&text).unwrap();
        assert_eq!(back, var);
        assert_eq!(write_variety(&back), text);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(read_set("").is_err());
        assert!(read_set("p=2 n=2 kind=linear\npoints:\n102\n").is_err());
        assert!(read_set("p=2 n=2 kind=linear\npoints:\n12\n").is_err());
        assert!(read_set("p=4 n=2 kind=linear\npoints:\n").is_err());
        assert!(read_set("p=2 n=2 kind=linear\nmask:\nz\n").is_err());
        assert!(read_variety("p=2 n=2 m=2 kind=variety\nV: 1\n10\nW: 0\nforms: 1\nM:\n10\n").is_err());
    }

    #[test]
    fn csv_lists_positive_counts() {
        let g = GridSet::full(2, 1, 1).unwrap();
        let t = count_table(&g, &"h".parse().unwrap(), ArithmeticMode::Exact).unwrap();
        assert_eq!(write_count_csv(&t), "x_index,y_index,count_or_density\n0,0,2\n1,0,2\n0,1,2\n1,1,2\n");
    }
}
