//! Token streaming, vocabulary construction and frequent-word subsampling.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Cursor, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid UTF-8 in corpus at byte offset {offset}")]
    Encoding { offset: u64 },
    #[error("vocabulary is empty (no token reaches min_count = {min_count})")]
    EmptyVocabulary { min_count: u64 },
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("vocabulary file line {line}: {msg}")]
    VocabFormat { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// Streams whitespace-separated, lowercased tokens from a byte source.
///
/// Tokens are maximal runs of non-whitespace. ASCII whitespace delimits runs
/// at the byte level; runs that decode to text containing other Unicode
/// whitespace are split further.
pub struct TokenStream<R> {
    source: R,
    position: u64,
    limit: Option<u64>,
    buf: Vec<u8>,
    pending: Vec<String>,
}

impl<R: BufRead> TokenStream<R> {
    pub fn new(source: R) -> Self {
        Self::starting_at(source, 0)
    }

    /// A stream whose reported byte offsets start at `position`.
    pub fn starting_at(source: R, position: u64) -> Self {
        TokenStream {
            source,
            position,
            limit: None,
            buf: Vec::with_capacity(64),
            pending: Vec::new(),
        }
    }

    /// Stop before byte offset `end` (absolute, in the same frame as `position`).
    fn with_end(mut self, end: u64) -> Self {
        self.limit = Some(end);
        self
    }

    /// Current byte offset in the source.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_token(&mut self) -> Result<Option<String>> {
        loop {
            if let Some(tok) = self.pending.pop() {
                return Ok(Some(tok));
            }
            let start = match self.read_run()? {
                Some(start) => start,
                None => return Ok(None),
            };
            let text = std::str::from_utf8(&self.buf).map_err(|e| CorpusError::Encoding {
                offset: start + e.valid_up_to() as u64,
            })?;
            if text.is_ascii() {
                let mut tok = text.to_owned();
                tok.make_ascii_lowercase();
                return Ok(Some(tok));
            }
            // stored reversed so pop() yields source order
            self.pending = text
                .split(char::is_whitespace)
                .filter(|s| !s.is_empty())
                .map(str::to_lowercase)
                .rev()
                .collect();
        }
    }

    /// Reads the next run of non-ASCII-whitespace bytes into `buf`, returning
    /// its starting offset.
    fn read_run(&mut self) -> Result<Option<u64>> {
        self.buf.clear();
        let mut start = None;
        loop {
            let available = match self.source.fill_buf() {
                Ok(b) => b,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            };
            if available.is_empty() {
                break;
            }
            let mut window = available;
            if let Some(end) = self.limit {
                let left = end.saturating_sub(self.position) as usize;
                if left == 0 {
                    break;
                }
                window = &window[..window.len().min(left)];
            }
            let mut consumed = 0;
            let mut finished = false;
            for &b in window {
                if b.is_ascii_whitespace() {
                    if start.is_some() {
                        finished = true;
                        break;
                    }
                    consumed += 1;
                } else {
                    if start.is_none() {
                        start = Some(self.position + consumed as u64);
                    }
                    self.buf.push(b);
                    consumed += 1;
                }
            }
            self.source.consume(consumed);
            self.position += consumed as u64;
            if finished {
                break;
            }
        }
        Ok(start)
    }
}

impl<R: BufRead> Iterator for TokenStream<R> {
    type Item = Result<String>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_token().transpose()
    }
}

/// Tokenizes an in-memory byte buffer.
pub fn tokenize(source: &[u8]) -> Result<Vec<String>> {
    TokenStream::new(source).collect()
}

/// Where training text comes from. Both variants can be opened repeatedly
/// (once per epoch) and split into byte segments for parallel workers.
#[derive(Debug, Clone)]
pub enum Corpus {
    File(PathBuf),
    Memory(Arc<[u8]>),
}

impl Corpus {
    pub fn from_path(path: impl AsRef<Path>) -> Self {
        Corpus::File(path.as_ref().to_path_buf())
    }

    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        Corpus::Memory(Arc::from(bytes.into()))
    }

    pub fn len(&self) -> Result<u64> {
        Ok(match self {
            Corpus::File(p) => std::fs::metadata(p)?.len(),
            Corpus::Memory(b) => b.len() as u64,
        })
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }

    fn reader_at(&self, offset: u64) -> Result<Box<dyn BufRead + Send + '_>> {
        Ok(match self {
            Corpus::File(p) => {
                let mut f = File::open(p)?;
                f.seek(SeekFrom::Start(offset))?;
                Box::new(BufReader::with_capacity(1 << 16, f))
            }
            Corpus::Memory(b) => {
                let mut c = Cursor::new(&b[..]);
                c.set_position(offset);
                Box::new(c)
            }
        })
    }

    /// Token stream over the whole corpus.
    pub fn stream(&self) -> Result<TokenStream<Box<dyn BufRead + Send + '_>>> {
        self.stream_segment(0..self.len()?)
    }

    /// Token stream over one byte segment produced by [`Corpus::segments`].
    pub fn stream_segment(&self, range: Range<u64>) -> Result<TokenStream<Box<dyn BufRead + Send + '_>>> {
        let reader = self.reader_at(range.start)?;
        Ok(TokenStream::starting_at(reader, range.start).with_end(range.end))
    }

    /// Splits the corpus into `n` contiguous byte ranges whose token sets
    /// partition the corpus tokens. Every boundary sits on an ASCII
    /// whitespace byte (or the end of the source), so no token straddles two
    /// segments. Some ranges may be empty.
    pub fn segments(&self, n: usize) -> Result<Vec<Range<u64>>> {
        let len = self.len()?;
        let n = n.max(1) as u64;
        let mut cuts = Vec::with_capacity(n as usize + 1);
        cuts.push(0);
        for i in 1..n {
            let nominal = len * i / n;
            let prev = *cuts.last().unwrap();
            let cut = if nominal <= prev {
                prev
            } else {
                self.next_whitespace(nominal)?
            };
            cuts.push(cut.max(prev));
        }
        cuts.push(len);
        Ok(cuts.windows(2).map(|w| w[0]..w[1]).collect())
    }

    fn next_whitespace(&self, from: u64) -> Result<u64> {
        let mut reader = self.reader_at(from)?;
        let mut pos = from;
        let mut byte = [0u8; 1];
        loop {
            match reader.read(&mut byte)? {
                0 => return Ok(pos),
                _ if byte[0].is_ascii_whitespace() => return Ok(pos),
                _ => pos += 1,
            }
        }
    }
}

/// Token/index map with corpus frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index_of: HashMap<String, u32>,
    counts: Vec<u64>,
    total_tokens: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from (token, count) pairs, applying the ordering
    /// invariant (descending count, ties lexicographic).
    pub fn from_counts(pairs: impl IntoIterator<Item = (String, u64)>) -> Self {
        let mut pairs: Vec<(String, u64)> = pairs.into_iter().collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let total_tokens = pairs.iter().map(|(_, c)| c).sum();
        let index_of = pairs
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i as u32))
            .collect();
        let (words, counts) = pairs.into_iter().unzip();
        Vocabulary {
            words,
            index_of,
            counts,
            total_tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index_of.get(word).copied()
    }

    pub fn word(&self, index: u32) -> &str {
        &self.words[index as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, index: u32) -> u64 {
        self.counts[index as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Occurrences of retained words in the corpus.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Writes `#total<TAB>N` followed by one `token<TAB>count` line per word.
    pub fn save<W: Write>(&self, mut sink: W) -> io::Result<()> {
        writeln!(sink, "#total\t{}", self.total_tokens)?;
        for (w, c) in self.words.iter().zip(&self.counts) {
            writeln!(sink, "{w}\t{c}")?;
        }
        sink.flush()
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut total = None;
        let mut pairs = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let bad = |msg: &str| CorpusError::VocabFormat {
                line: lineno,
                msg: msg.to_owned(),
            };
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('\t').ok_or_else(|| bad("expected token<TAB>count"))?;
            let value: u64 = value.trim().parse().map_err(|_| bad("count is not an integer"))?;
            if lineno == 1 && key == "#total" {
                total = Some(value);
            } else if !seen.insert(key.to_owned()) {
                return Err(bad("duplicate token"));
            } else {
                pairs.push((key.to_owned(), value));
            }
        }
        let vocab = Vocabulary::from_counts(pairs);
        if let Some(t) = total {
            if t != vocab.total_tokens {
                return Err(CorpusError::VocabFormat {
                    line: 1,
                    msg: format!("#total {t} disagrees with summed counts {}", vocab.total_tokens),
                });
            }
        }
        if vocab.is_empty() {
            return Err(CorpusError::EmptyVocabulary { min_count: 0 });
        }
        Ok(vocab)
    }
}

/// Raw occurrence counts for a token stream.
#[derive(Debug, Default, Clone)]
pub struct TokenCounts {
    counts: HashMap<String, u64>,
    raw_tokens: u64,
}

impl TokenCounts {
    pub fn add(&mut self, token: String) {
        self.raw_tokens += 1;
        *self.counts.entry(token).or_insert(0) += 1;
    }

    pub fn raw_tokens(&self) -> u64 {
        self.raw_tokens
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn into_vocabulary(self, min_count: u64) -> Result<Vocabulary> {
        if min_count < 1 {
            return Err(CorpusError::InvalidMinCount);
        }
        let vocab = Vocabulary::from_counts(self.counts.into_iter().filter(|(_, c)| *c >= min_count));
        if vocab.is_empty() {
            return Err(CorpusError::EmptyVocabulary { min_count });
        }
        Ok(vocab)
    }

    pub fn from_stream<R: BufRead>(stream: TokenStream<R>) -> Result<Self> {
        let mut counts = TokenCounts::default();
        for tok in stream {
            counts.add(tok?);
        }
        Ok(counts)
    }
}

pub fn build_vocabulary<S: AsRef<str>>(tokens: &[S], min_count: u64) -> Result<Vocabulary> {
    let mut counts = TokenCounts::default();
    for t in tokens {
        counts.add(t.as_ref().to_owned());
    }
    counts.into_vocabulary(min_count)
}

/// Counts the whole corpus and keeps the words occurring at least `min_count` times.
/// Also returns the raw token count (before filtering).
pub fn build_vocabulary_from_corpus(corpus: &Corpus, min_count: u64) -> Result<(Vocabulary, u64)> {
    let counts = TokenCounts::from_stream(corpus.stream()?)?;
    let raw = counts.raw_tokens();
    Ok((counts.into_vocabulary(min_count)?, raw))
}

/// Probability of keeping one occurrence of a word with frequency
/// `count / total` when subsampling with threshold `t`.
pub fn keep_probability(count: u64, total: u64, t: f64) -> f64 {
    if t <= 0.0 || count == 0 || total == 0 {
        return 1.0;
    }
    let f = count as f64 / total as f64;
    (((f / t).sqrt() + 1.0) * t / f).min(1.0)
}
