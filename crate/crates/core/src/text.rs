//! Character-offset helpers.
//!
//! Every offset that crosses a module boundary (entity mentions, QA spans,
//! dataset answers) counts Unicode scalar values, not bytes.

/// Number of characters in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte offset of the `char_idx`-th character, or `s.len()` when
/// `char_idx == char_len(s)`. `None` past the end.
pub fn byte_offset(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut seen = 0;
    for (byte, _) in s.char_indices() {
        if seen == char_idx {
            return Some(byte);
        }
        seen += 1;
    }
    (seen == char_idx).then_some(s.len())
}

/// Slice `s` by character range `[start, end)`.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = byte_offset(s, start)?;
    let b1 = b0 + byte_offset(&s[b0..], end - start)?;
    Some(&s[b0..b1])
}

/// Precomputed char→byte table for repeated lookups into one string.
#[derive(Debug, Clone)]
pub struct CharMap<'a> {
    text: &'a str,
    // byte offset of every char, plus text.len() as a sentinel
    starts: Vec<usize>,
}

impl<'a> CharMap<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut starts: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        starts.push(text.len());
        Self { text, starts }
    }

    pub fn len_chars(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn slice(&self, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.len_chars() {
            return None;
        }
        Some(&self.text[self.starts[start]..self.starts[end]])
    }

    /// Char index of a byte offset that lies on a char boundary.
    pub fn char_index_of_byte(&self, byte: usize) -> Option<usize> {
        self.starts.binary_search(&byte).ok()
    }
}

/// Whitespace-delimited word count.
pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// True when the character ranges `[a0, a1)` and `[b0, b1)` intersect.
pub fn ranges_overlap(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Keep at most `max_units` whitespace-delimited units of `s`, returning a
/// prefix of the original string (so character offsets into the prefix are
/// valid offsets into `s`) and whether anything was cut.
pub fn truncate_units(s: &str, max_units: usize) -> (&str, bool) {
    let mut count = 0;
    let mut in_word = false;
    for (i, c) in s.char_indices() {
        if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            if count == max_units {
                return (s[..i].trim_end(), true);
            }
            count += 1;
        }
    }
    (s, false)
}
