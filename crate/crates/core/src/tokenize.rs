//! Rule tokenizer over NFC-normalized text.
//!
//! Text is split on whitespace; each chunk then sheds punctuation from both
//! ends, one character at a time, emitting every shed character as its own
//! token. Punctuation in the interior of a chunk (`ging's`, `z.B`) stays put.
//! Offsets count Unicode scalar values in the normalized text.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Characters split off the edges of whitespace-delimited chunks.
pub const PUNCTUATION: &[char] =
    &['.', ',', ';', ':', '!', '?', '(', ')', '"', '\'', '„', '“', '”', '–', '—', '-', '…'];

pub fn is_punct_char(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub lower: String,
    pub char_start: usize,
    pub char_end: usize,
    pub is_punct: bool,
    pub is_filler: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
}

impl Token {
    fn new(index: usize, chars: &[char], char_start: usize, is_punct: bool) -> Self {
        let surface: String = chars.iter().collect();
        Token {
            index,
            lower: case_fold(&surface),
            surface,
            char_start,
            char_end: char_start + chars.len(),
            is_punct,
            is_filler: false,
            lemma: None,
            pos: None,
        }
    }

    /// Case-folded lemma, or the case-folded surface when no lemma is attached.
    pub fn lemma_key(&self) -> &str {
        self.lemma.as_deref().unwrap_or(&self.lower)
    }
}

pub fn case_fold(s: &str) -> String {
    s.to_lowercase()
}

pub fn normalize(text: &str) -> String {
    text.nfc().collect()
}

/// Tokenize `raw_text`. Offsets refer to `normalize(raw_text)`.
pub fn tokenize(raw_text: &str) -> Vec<Token> {
    let chars: Vec<char> = normalize(raw_text).chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let chunk_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, chunk_start, i, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    while lo < end && is_punct_char(chars[lo]) {
        out.push(Token::new(out.len(), &chars[lo..lo + 1], lo, true));
        lo += 1;
    }
    let mut hi = end;
    while hi > lo && is_punct_char(chars[hi - 1]) {
        hi -= 1;
    }
    if lo < hi {
        out.push(Token::new(out.len(), &chars[lo..hi], lo, false));
    }
    for p in hi..end {
        out.push(Token::new(out.len(), &chars[p..p + 1], p, true));
    }
}
