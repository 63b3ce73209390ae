//! Narratives, lexicons and sidecar token layers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenize::{case_fold, normalize, tokenize, Token};

/// Fillers treated as unambiguous disfluencies when no lexicon is given.
pub const DEFAULT_FILLERS: &[&str] = &["ähm", "äh", "mhm"];

/// Coarse POS tags counted as content words when no lexicon is given.
pub const DEFAULT_CONTENT_POS: &[&str] = &["NOUN", "VERB", "ADJ", "ADV"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record in {source_name} at line {line}: {reason}")]
    MalformedRecord { source_name: String, line: usize, reason: String },
    #[error("duplicate narrative id {0:?}")]
    DuplicateNarrativeId(String),
    #[error("narrative {id:?}: {field} = {value} is outside 1..=10")]
    AffectScoreOutOfRange { id: String, field: &'static str, value: i64 },
    #[error("narrative {id:?}: sidecar has {found} token layers, narrative has {expected} tokens")]
    TokenCountMismatch { id: String, expected: usize, found: usize },
    #[error("sidecar references unknown narrative {0:?}")]
    UnknownNarrativeId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Narrative {
    pub id: String,
    pub speaker_id: String,
    pub prompt_polarity: Polarity,
    /// NFC-normalized transcript; token offsets index into it.
    pub raw_text: String,
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence_pre: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence_post: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arousal_pre: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arousal_post: Option<u8>,
}

impl Narrative {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// One line of the narratives file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NarrativeRecord {
    pub id: String,
    pub speaker_id: String,
    pub prompt_polarity: Polarity,
    pub raw_text: String,
    #[serde(default)]
    pub valence_pre: Option<i64>,
    #[serde(default)]
    pub valence_post: Option<i64>,
    #[serde(default)]
    pub arousal_pre: Option<i64>,
    #[serde(default)]
    pub arousal_post: Option<i64>,
}

impl NarrativeRecord {
    pub fn into_narrative(self) -> Result<Narrative, CorpusError> {
        let check = |field: &'static str, v: Option<i64>| -> Result<Option<u8>, CorpusError> {
            match v {
                None => Ok(None),
                Some(v @ 1..=10) => Ok(Some(v as u8)),
                Some(value) => Err(CorpusError::AffectScoreOutOfRange { id: self.id.clone(), field, value }),
            }
        };
        let valence_pre = check("valence_pre", self.valence_pre)?;
        let valence_post = check("valence_post", self.valence_post)?;
        let arousal_pre = check("arousal_pre", self.arousal_pre)?;
        let arousal_post = check("arousal_post", self.arousal_post)?;
        let raw_text = normalize(&self.raw_text);
        let tokens = tokenize(&raw_text);
        Ok(Narrative {
            id: self.id,
            speaker_id: self.speaker_id,
            prompt_polarity: self.prompt_polarity,
            raw_text,
            tokens,
            valence_pre,
            valence_post,
            arousal_pre,
            arousal_post,
        })
    }
}

/// Per-token linguistic layer from a sidecar record.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TokenLayer {
    #[serde(default)]
    pub lemma: Option<String>,
    #[serde(default)]
    pub pos: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub narrative_id: String,
    pub layers: Vec<TokenLayer>,
}

/// Lexicon files by role. Any role left unset keeps its default.
#[derive(Debug, Clone, Default)]
pub struct LexiconPaths {
    pub fillers: Option<PathBuf>,
    pub sentiment: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub content_pos: Option<PathBuf>,
}

impl LexiconPaths {
    /// Assign a path from a `kind=path` argument.
    pub fn set(&mut self, spec: &str) -> Result<(), String> {
        let (kind, path) = spec.split_once('=').ok_or_else(|| format!("expected KIND=PATH, got {spec:?}"))?;
        let path = PathBuf::from(path);
        match kind {
            "fillers" => self.fillers = Some(path),
            "sentiment" => self.sentiment = Some(path),
            "lemmas" => self.lemmas = Some(path),
            "content-pos" | "content_pos" => self.content_pos = Some(path),
            other => {
                return Err(format!(
                    "unknown lexicon kind {other:?} (expected fillers, sentiment, lemmas, content-pos)"
                ))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub narratives: BTreeMap<String, Narrative>,
    pub filler_lexicon: BTreeSet<String>,
    pub sentiment_lexicon: HashMap<String, f64>,
    pub lemma_fallback: HashMap<String, String>,
    pub content_pos_tags: BTreeSet<String>,
}

impl Default for Corpus {
    fn default() -> Self {
        Corpus {
            narratives: BTreeMap::new(),
            filler_lexicon: DEFAULT_FILLERS.iter().map(|s| s.to_string()).collect(),
            sentiment_lexicon: HashMap::new(),
            lemma_fallback: HashMap::new(),
            content_pos_tags: DEFAULT_CONTENT_POS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Corpus {
    pub fn narrative(&self, id: &str) -> Option<&Narrative> {
        self.narratives.get(id)
    }

    /// Insert tokenized narratives, rejecting duplicate ids.
    pub fn add_narratives(&mut self, records: impl IntoIterator<Item = NarrativeRecord>) -> Result<(), CorpusError> {
        for record in records {
            let narrative = record.into_narrative()?;
            if self.narratives.contains_key(&narrative.id) {
                return Err(CorpusError::DuplicateNarrativeId(narrative.id));
            }
            self.narratives.insert(narrative.id.clone(), narrative);
        }
        Ok(())
    }

    pub fn is_content_pos(&self, pos: &str) -> bool {
        self.content_pos_tags.contains(&pos.to_uppercase())
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path).map(BufReader::new).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Non-blank lines with their 1-based line numbers.
fn lines(path: &Path) -> Result<Vec<(usize, String)>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedRecord { source_name: path.display().to_string(), line, reason: reason.into() }
}

pub fn read_narrative_records(path: &Path) -> Result<Vec<NarrativeRecord>, CorpusError> {
    lines(path)?
        .into_iter()
        .map(|(n, line)| serde_json::from_str::<NarrativeRecord>(&line).map_err(|e| malformed(path, n, e.to_string())))
        .collect()
}

pub fn read_sidecar(path: &Path) -> Result<Vec<SidecarRecord>, CorpusError> {
    lines(path)?
        .into_iter()
        .map(|(n, line)| serde_json::from_str::<SidecarRecord>(&line).map_err(|e| malformed(path, n, e.to_string())))
        .collect()
}

/// Lexicon lines, skipping `#` comments, split on tabs.
fn lexicon_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>, CorpusError> {
    Ok(lines(path)?
        .into_iter()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .map(|(n, l)| (n, l.split('\t').map(|f| f.trim().to_string()).collect()))
        .collect())
}

fn lexicon_key(path: &Path, line: usize, raw: &str) -> Result<String, CorpusError> {
    let key = case_fold(&normalize(raw));
    if key.is_empty() || key.chars().any(char::is_whitespace) {
        return Err(malformed(path, line, format!("invalid lexicon term {raw:?}")));
    }
    Ok(key)
}

pub fn read_word_list(path: &Path) -> Result<BTreeSet<String>, CorpusError> {
    lexicon_rows(path)?.into_iter().map(|(n, row)| lexicon_key(path, n, &row[0])).collect()
}

pub fn read_sentiment_lexicon(path: &Path) -> Result<HashMap<String, f64>, CorpusError> {
    let mut map = HashMap::new();
    for (n, row) in lexicon_rows(path)? {
        let [term, polarity] = row.as_slice() else {
            return Err(malformed(path, n, "expected term<TAB>polarity"));
        };
        let value: f64 = polarity.parse().map_err(|_| malformed(path, n, format!("invalid polarity {polarity:?}")))?;
        if !(-1.0..=1.0).contains(&value) {
            return Err(malformed(path, n, format!("polarity {value} outside [-1, 1]")));
        }
        map.insert(lexicon_key(path, n, term)?, value);
    }
    Ok(map)
}

pub fn read_lemma_fallback(path: &Path) -> Result<HashMap<String, String>, CorpusError> {
    let mut map = HashMap::new();
    for (n, row) in lexicon_rows(path)? {
        let [surface, lemma] = row.as_slice() else {
            return Err(malformed(path, n, "expected surface<TAB>lemma"));
        };
        map.insert(lexicon_key(path, n, surface)?, lexicon_key(path, n, lemma)?);
    }
    Ok(map)
}

fn read_pos_tags(path: &Path) -> Result<BTreeSet<String>, CorpusError> {
    lexicon_rows(path)?
        .into_iter()
        .map(|(n, row)| {
            let tag = row[0].to_uppercase();
            if tag.is_empty() || tag.chars().any(char::is_whitespace) {
                Err(malformed(path, n, "invalid POS tag"))
            } else {
                Ok(tag)
            }
        })
        .collect()
}

/// Load narratives and lexicons, tokenize, and flag fillers.
pub fn load_corpus(narratives_path: &Path, lexicons: &LexiconPaths) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    if let Some(p) = &lexicons.fillers {
        corpus.filler_lexicon = read_word_list(p)?;
    }
    if let Some(p) = &lexicons.sentiment {
        corpus.sentiment_lexicon = read_sentiment_lexicon(p)?;
    }
    if let Some(p) = &lexicons.lemmas {
        corpus.lemma_fallback = read_lemma_fallback(p)?;
    }
    if let Some(p) = &lexicons.content_pos {
        corpus.content_pos_tags = read_pos_tags(p)?;
    }
    corpus.add_narratives(read_narrative_records(narratives_path)?)?;
    Ok(mark_fillers(corpus))
}

/// Attach lemma/POS layers from a sidecar file.
pub fn attach_token_layers(corpus: Corpus, sidecar_path: &Path) -> Result<Corpus, CorpusError> {
    let records = read_sidecar(sidecar_path)?;
    attach_layers(corpus, records)
}

/// Attach lemma/POS layers. Narratives without a sidecar record, and tokens
/// whose layer has no lemma, take the fallback lemma or the case-folded surface.
pub fn attach_layers(
    mut corpus: Corpus,
    records: impl IntoIterator<Item = SidecarRecord>,
) -> Result<Corpus, CorpusError> {
    let mut by_id: HashMap<String, Vec<TokenLayer>> = HashMap::new();
    for record in records {
        let Some(narrative) = corpus.narratives.get(&record.narrative_id) else {
            return Err(CorpusError::UnknownNarrativeId(record.narrative_id));
        };
        if record.layers.len() != narrative.tokens.len() {
            return Err(CorpusError::TokenCountMismatch {
                id: record.narrative_id,
                expected: narrative.tokens.len(),
                found: record.layers.len(),
            });
        }
        by_id.insert(record.narrative_id, record.layers);
    }
    let fallback = &corpus.lemma_fallback;
    for narrative in corpus.narratives.values_mut() {
        let layers = by_id.remove(&narrative.id);
        for (i, token) in narrative.tokens.iter_mut().enumerate() {
            let layer = layers.as_ref().map(|l| &l[i]);
            let lemma = layer
                .and_then(|l| l.lemma.as_deref())
                .filter(|l| !l.trim().is_empty())
                .map(|l| case_fold(&normalize(l.trim())))
                .or_else(|| fallback.get(&token.lower).cloned())
                .unwrap_or_else(|| token.lower.clone());
            token.lemma = Some(lemma);
            if let Some(pos) = layer.and_then(|l| l.pos.as_deref()) {
                token.pos = Some(pos.to_uppercase());
            }
        }
    }
    Ok(corpus)
}

/// Flag tokens whose case-folded surface is in the filler lexicon.
pub fn mark_fillers(mut corpus: Corpus) -> Corpus {
    let lexicon = &corpus.filler_lexicon;
    for narrative in corpus.narratives.values_mut() {
        for token in &mut narrative.tokens {
            token.is_filler = !token.is_punct && lexicon.contains(&token.lower);
        }
    }
    corpus
}
