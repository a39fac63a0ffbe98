//! Word-vector persistence (word2vec text and binary formats) and cosine
//! queries.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VectorsError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error at {location}: {msg}")]
    Parse { location: String, msg: String },
    #[error("query vector has zero norm")]
    ZeroQuery,
    #[error("word index {0} out of range")]
    BadIndex(u32),
}

pub type Result<T> = std::result::Result<T, VectorsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Binary,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Format::Text),
            "binary" | "bin" => Ok(Format::Binary),
            other => Err(format!("unknown vector format {other:?} (expected text or binary)")),
        }
    }
}

/// Labelled `V x D` embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    words: Vec<String>,
    index: HashMap<String, u32>,
    matrix: Vec<f32>,
    dim: usize,
    normalized: bool,
    zero_rows: Vec<u32>,
}

impl EmbeddingSet {
    pub fn new(words: Vec<String>, matrix: Vec<f32>, dim: usize) -> Self {
        assert!(dim > 0);
        assert_eq!(words.len() * dim, matrix.len(), "matrix does not match word list");
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            // first occurrence wins for duplicated labels
            index.entry(w.clone()).or_insert(i as u32);
        }
        EmbeddingSet {
            words,
            index,
            matrix,
            dim,
            normalized: false,
            zero_rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, i: u32) -> &str {
        &self.words[i as usize]
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn row(&self, i: u32) -> &[f32] {
        let s = i as usize * self.dim;
        &self.matrix[s..s + self.dim]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Rows that had zero norm at normalization time (left as zero).
    pub fn zero_rows(&self) -> &[u32] {
        &self.zero_rows
    }

    /// Scales every nonzero row to unit length. Idempotent.
    pub fn normalize(&mut self) {
        if self.normalized {
            return;
        }
        self.zero_rows.clear();
        for (i, row) in self.matrix.chunks_exact_mut(self.dim).enumerate() {
            let norm = row.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in row.iter_mut() {
                    *x = (f64::from(*x) / norm) as f32;
                }
            } else {
                self.zero_rows.push(i as u32);
            }
        }
        self.normalized = true;
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// Keeps only the first `n` rows (the most frequent words when the set
    /// was saved in vocabulary order).
    pub fn truncate(&mut self, n: usize) {
        if n >= self.words.len() {
            return;
        }
        for w in self.words.drain(n..) {
            self.index.remove(&w);
        }
        self.matrix.truncate(n * self.dim);
        self.zero_rows.retain(|&r| (r as usize) < n);
    }

    fn row_norm(&self, i: u32) -> f32 {
        if self.normalized {
            if self.zero_rows.binary_search(&i).is_ok() {
                0.0
            } else {
                1.0
            }
        } else {
            dot(self.row(i), self.row(i)).sqrt()
        }
    }

    /// Cosine similarity between two rows (0 when either row is zero).
    pub fn cosine(&self, a: u32, b: u32) -> f32 {
        let n = self.row_norm(a) * self.row_norm(b);
        if n == 0.0 {
            0.0
        } else {
            dot(self.row(a), self.row(b)) / n
        }
    }

    /// The `k` rows most cosine-similar to `query`, skipping `exclude`.
    /// Ordered by descending cosine, ties by ascending index.
    pub fn nearest(&self, query: &[f32], exclude: &[u32], k: usize) -> Result<Vec<(u32, f32)>> {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        let qn = dot(query, query).sqrt();
        if !(qn > 0.0) {
            return Err(VectorsError::ZeroQuery);
        }
        let mut best: Vec<(u32, f32)> = Vec::with_capacity(k + 1);
        for i in 0..self.len() as u32 {
            if exclude.contains(&i) {
                continue;
            }
            let rn = self.row_norm(i);
            let cos = if rn == 0.0 {
                0.0
            } else {
                dot(query, self.row(i)) / (qn * rn)
            };
            if best.len() == k && !ranks_before((i, cos), best[k - 1]) {
                continue;
            }
            let at = best.partition_point(|&b| ranks_before(b, (i, cos)));
            best.insert(at, (i, cos));
            best.truncate(k);
        }
        Ok(best)
    }

    /// Index of the word closest to `v_b - v_a + v_c` over unit-normalized
    /// rows, excluding the three question words. `None` when every word is
    /// excluded or the query vanishes.
    pub fn analogy_query(&self, a: u32, b: u32, c: u32) -> Result<Option<u32>> {
        for i in [a, b, c] {
            if i as usize >= self.len() {
                return Err(VectorsError::BadIndex(i));
            }
        }
        let unit = |i: u32| {
            let n = self.row_norm(i);
            let r = self.row(i);
            move |d: usize| if n == 0.0 { 0.0 } else { r[d] / n }
        };
        let (ua, ub, uc) = (unit(a), unit(b), unit(c));
        let query: Vec<f32> = (0..self.dim).map(|d| ub(d) - ua(d) + uc(d)).collect();
        match self.nearest(&query, &[a, b, c], 1) {
            Ok(best) => Ok(best.first().map(|&(i, _)| i)),
            Err(VectorsError::ZeroQuery) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn save<W: Write>(&self, format: Format, mut sink: W) -> Result<()> {
        writeln!(sink, "{} {}", self.len(), self.dim)?;
        for (w, row) in self.words.iter().zip(self.matrix.chunks_exact(self.dim)) {
            match format {
                Format::Text => {
                    sink.write_all(w.as_bytes())?;
                    for &x in row {
                        write!(sink, " {}", format_sig6(x))?;
                    }
                    sink.write_all(b"\n")?;
                }
                Format::Binary => {
                    sink.write_all(w.as_bytes())?;
                    sink.write_all(b" ")?;
                    for &x in row {
                        sink.write_all(&x.to_le_bytes())?;
                    }
                    sink.write_all(b"\n")?;
                }
            }
        }
        sink.flush()?;
        Ok(())
    }

    pub fn load<R: BufRead>(source: R, format: Format) -> Result<Self> {
        match format {
            Format::Text => load_text(source),
            Format::Binary => load_binary(source),
        }
    }
}

/// `(index, cos)` pairs ordered by descending cosine, then ascending index.
#[inline]
fn ranks_before(a: (u32, f32), b: (u32, f32)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    // eight independent lanes so the loop vectorizes
    let mut acc = [0.0f32; 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let tail: f32 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for l in 0..8 {
            acc[l] += ca[l] * cb[l];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// Shortest decimal with six significant digits, like C's `%g`.
pub fn format_sig6(x: f32) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_owned() } else { x.to_string() };
    }
    let exp = f64::from(x.abs()).log10().floor() as i32;
    let s = if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.5e}", x)
    };
    trim_zeros(s)
}

fn trim_zeros(s: String) -> String {
    let (mantissa, exp) = match s.find('e') {
        Some(p) => (&s[..p], &s[p..]),
        None => (&s[..], ""),
    };
    if !mantissa.contains('.') {
        return s;
    }
    let m = mantissa.trim_end_matches('0').trim_end_matches('.');
    format!("{m}{exp}")
}

fn parse_header(line: &str, location: &str) -> Result<(usize, usize)> {
    let bad = |msg: &str| VectorsError::Parse {
        location: location.to_owned(),
        msg: msg.to_owned(),
    };
    let mut it = line.split_whitespace();
    let v = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("header must be \"V D\""))?;
    let d: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("header must be \"V D\""))?;
    if it.next().is_some() {
        return Err(bad("header must be \"V D\""));
    }
    if d == 0 {
        return Err(bad("dimension must be positive"));
    }
    Ok((v, d))
}

fn load_text<R: BufRead>(source: R) -> Result<EmbeddingSet> {
    let mut lines = source.lines();
    let header = lines.next().transpose()?.ok_or_else(|| VectorsError::Parse {
        location: "line 1".into(),
        msg: "missing header".into(),
    })?;
    let (v, d) = parse_header(&header, "line 1")?;
    let mut words = Vec::with_capacity(v);
    let mut matrix = Vec::with_capacity(v * d);
    let mut lineno = 1;
    for line in lines {
        let line = line?;
        lineno += 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| VectorsError::Parse {
            location: format!("line {lineno}"),
            msg,
        };
        if words.len() == v {
            return Err(bad(format!("more than the {v} rows announced in the header")));
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line has a field");
        let before = matrix.len();
        for f in fields {
            let x: f32 = f.parse().map_err(|_| bad(format!("bad number {f:?}")))?;
            matrix.push(x);
        }
        if matrix.len() - before != d {
            return Err(bad(format!("expected {d} values, found {}", matrix.len() - before)));
        }
        words.push(word.to_owned());
    }
    if words.len() != v {
        return Err(VectorsError::Parse {
            location: format!("line {lineno}"),
            msg: format!("file ends after {} of {v} rows", words.len()),
        });
    }
    Ok(EmbeddingSet::new(words, matrix, d))
}

fn load_binary<R: BufRead>(mut source: R) -> Result<EmbeddingSet> {
    let mut header = Vec::new();
    source.read_until(b'\n', &mut header)?;
    let header = String::from_utf8(header).map_err(|_| VectorsError::Parse {
        location: "byte 0".into(),
        msg: "header is not UTF-8".into(),
    })?;
    let (v, d) = parse_header(&header, "byte 0")?;
    let mut offset = header.len() as u64;
    let mut words = Vec::with_capacity(v);
    let mut matrix = Vec::with_capacity(v * d);
    let mut payload = vec![0u8; 4 * d];
    let truncated = |offset: u64, what: &str| VectorsError::Parse {
        location: format!("byte {offset}"),
        msg: format!("truncated file: expected {what}"),
    };
    for _ in 0..v {
        // rows may or may not be separated by a newline
        offset += skip_ascii_whitespace(&mut source)?;
        let mut word = Vec::new();
        let n = source.read_until(b' ', &mut word)?;
        if n == 0 || word.last() != Some(&b' ') {
            return Err(truncated(offset, "a word followed by a space"));
        }
        word.pop();
        let word_start = offset;
        offset += n as u64;
        let word = String::from_utf8(word).map_err(|_| VectorsError::Parse {
            location: format!("byte {word_start}"),
            msg: "word is not UTF-8".into(),
        })?;
        source
            .read_exact(&mut payload)
            .map_err(|_| truncated(offset, &format!("{d} little-endian f32 values")))?;
        offset += payload.len() as u64;
        matrix.extend(
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        );
        words.push(word);
    }
    skip_ascii_whitespace(&mut source)?;
    if !source.fill_buf()?.is_empty() {
        return Err(VectorsError::Parse {
            location: format!("byte {offset}"),
            msg: format!("trailing data after the {v} rows announced in the header"),
        });
    }
    Ok(EmbeddingSet::new(words, matrix, d))
}

fn skip_ascii_whitespace<R: BufRead>(source: &mut R) -> io::Result<u64> {
    let mut skipped = 0;
    loop {
        let buf = source.fill_buf()?;
        if buf.is_empty() {
            return Ok(skipped);
        }
        let n = buf.iter().take_while(|b| b.is_ascii_whitespace()).count();
        let all = n == buf.len();
        source.consume(n);
        skipped += n as u64;
        if !all {
            return Ok(skipped);
        }
    }
}
