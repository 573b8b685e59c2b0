//! Deterministic rule backend: trigger phrases for paragraph classification,
//! verb-pattern extraction for practice tuples, and synonym/token-overlap
//! matching for keyword mapping. Bit-identical output for identical input,
//! which is what the golden fixtures and the end-to-end determinism suite
//! rely on.
//!
//! The lexicon ships as a data file (`data/rule_lexicon.json`) so tests and
//! deployments can extend trigger and synonym lists without code changes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Arc, LazyLock};
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::taxonomy::{
    data_item_from_keyword, normalize_keyword, purpose_from_keyword, DataItemId, PracticeClass,
    PurposeId,
};

use super::{
    item_wire_keyword, BackendError, BackendRequest, BackendResponse, PracticeTuple, TaskPayload,
    TextBackend, Vocabulary,
};

/// Errors raised while loading or validating a rule lexicon file.
#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("failed to read lexicon file: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid lexicon: {0}")]
    Invalid(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleLexiconFile {
    class_triggers: BTreeMap<String, Vec<String>>,
    item_synonyms: BTreeMap<String, String>,
    purpose_synonyms: BTreeMap<String, String>,
    noise_items: Vec<String>,
}

/// Trigger phrases per practice class plus per-vocabulary synonym tables.
/// All phrases are stored normalized; no phrase maps to two ids.
#[derive(Debug, Clone)]
pub struct RuleLexicon {
    triggers: [Vec<String>; PracticeClass::COUNT],
    item_synonyms: BTreeMap<String, String>,
    purpose_synonyms: BTreeMap<String, String>,
    noise_items: BTreeSet<String>,
    item_token_bags: Vec<BTreeSet<String>>,
    purpose_token_bags: Vec<BTreeSet<String>>,
}

static BUNDLED_LEXICON: LazyLock<RuleLexicon> = LazyLock::new(|| {
    RuleLexicon::from_json(include_str!("../../data/rule_lexicon.json"))
        .expect("bundled rule lexicon must be valid")
});

impl RuleLexicon {
    pub fn bundled() -> &'static RuleLexicon {
        &BUNDLED_LEXICON
    }

    pub fn from_path(path: &Path) -> Result<RuleLexicon, LexiconError> {
        RuleLexicon::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(json: &str) -> Result<RuleLexicon, LexiconError> {
        let file: RuleLexiconFile = serde_json::from_str(json)?;
        let mut triggers: [Vec<String>; PracticeClass::COUNT] = Default::default();
        for (key, phrases) in &file.class_triggers {
            let index: usize = key.parse().map_err(|_| {
                LexiconError::Invalid(format!("class trigger key `{key}` is not an index"))
            })?;
            if index >= PracticeClass::COUNT {
                return Err(LexiconError::Invalid(format!(
                    "class trigger key `{key}` is out of range"
                )));
            }
            triggers[index] = phrases
                .iter()
                .map(|p| p.trim().to_ascii_lowercase())
                .filter(|p| !p.is_empty())
                .collect();
        }
        let item_synonyms = validate_synonyms(&file.item_synonyms, Vocabulary::DataItems)?;
        let purpose_synonyms = validate_synonyms(&file.purpose_synonyms, Vocabulary::Purposes)?;
        let noise_items = file
            .noise_items
            .iter()
            .map(|n| normalize_keyword(n))
            .collect();
        let item_token_bags = build_token_bags(
            DataItemId::all().map(|d| d.keyword()).collect::<Vec<_>>(),
            &item_synonyms,
        );
        let purpose_token_bags = build_token_bags(
            PurposeId::all().map(|p| p.keyword()).collect::<Vec<_>>(),
            &purpose_synonyms,
        );
        Ok(RuleLexicon {
            triggers,
            item_synonyms,
            purpose_synonyms,
            noise_items,
            item_token_bags,
            purpose_token_bags,
        })
    }

    pub fn triggers_for(&self, class: PracticeClass) -> &[String] {
        &self.triggers[class.index()]
    }
}

/// Every synonym phrase must resolve to exactly one canonical keyword; a
/// phrase that is itself a canonical keyword of a *different* id would make
/// lookup ambiguous and is rejected.
fn validate_synonyms(
    raw: &BTreeMap<String, String>,
    vocabulary: Vocabulary,
) -> Result<BTreeMap<String, String>, LexiconError> {
    let mut out = BTreeMap::new();
    for (phrase, target) in raw {
        let phrase_norm = normalize_keyword(phrase);
        let target_norm = normalize_keyword(target);
        if phrase_norm.is_empty() {
            return Err(LexiconError::Invalid("empty synonym phrase".to_string()));
        }
        if !vocabulary.contains(&target_norm) {
            return Err(LexiconError::Invalid(format!(
                "synonym `{phrase}` targets `{target}`, which is not in the vocabulary"
            )));
        }
        if vocabulary.contains(&phrase_norm) {
            let canonical = vocabulary.canonicalize(&phrase_norm).unwrap();
            if normalize_keyword(&canonical) != target_norm {
                return Err(LexiconError::Invalid(format!(
                    "synonym `{phrase}` shadows canonical keyword `{canonical}` \
                     with a different target `{target}`"
                )));
            }
        }
        if out.insert(phrase_norm, target_norm).is_some() {
            return Err(LexiconError::Invalid(format!(
                "synonym `{phrase}` appears twice after normalization"
            )));
        }
    }
    Ok(out)
}

const TOKEN_STOPLIST: &[&str] = &[
    "the", "and", "for", "with", "your", "our", "you", "about", "data", "information", "info",
    "personal", "other",
];

fn content_tokens(text: &str) -> BTreeSet<String> {
    normalize_keyword(text)
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| t.len() >= 3 && !TOKEN_STOPLIST.contains(t))
        .map(|t| t.to_string())
        .collect()
}

fn build_token_bags(
    canonicals: Vec<&'static str>,
    synonyms: &BTreeMap<String, String>,
) -> Vec<BTreeSet<String>> {
    canonicals
        .iter()
        .map(|canonical| {
            let mut bag = content_tokens(canonical);
            for (phrase, target) in synonyms {
                if target == &normalize_keyword(canonical) {
                    bag.extend(content_tokens(phrase));
                }
            }
            bag
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Does `needle` occur at `pos` of `haystack` on word-ish boundaries?
fn boundary_ok(haystack: &str, pos: usize, needle: &str) -> bool {
    let bytes = haystack.as_bytes();
    let first_alnum = needle.chars().next().is_some_and(|c| c.is_ascii_alphanumeric());
    let last_alnum = needle.chars().last().is_some_and(|c| c.is_ascii_alphanumeric());
    if first_alnum && pos > 0 && (bytes[pos - 1] as char).is_ascii_alphanumeric() {
        return false;
    }
    let end = pos + needle.len();
    if last_alnum && end < bytes.len() && (bytes[end] as char).is_ascii_alphanumeric() {
        return false;
    }
    true
}

fn trigger_occurrences(lower: &str, trigger: &str) -> Vec<usize> {
    lower
        .match_indices(trigger)
        .filter(|(pos, _)| boundary_ok(lower, *pos, trigger))
        .map(|(pos, _)| pos)
        .collect()
}

/// Pick the practice class whose triggers match the paragraph most strongly
/// (longer phrases weigh more, ties go to the lower class index) and return
/// it with a verbatim excerpt. No trigger at all falls back to the
/// introductory/generic class with an empty rationale.
pub fn rule_classify(text: &str, lexicon: &RuleLexicon) -> (PracticeClass, String) {
    let lower = text.to_ascii_lowercase();
    let mut best_class = PracticeClass::INTRODUCTORY;
    let mut best_score = 0usize;
    let mut best_match: Option<(usize, usize)> = None; // (start, end) of earliest trigger hit
    for class in PracticeClass::all() {
        let mut score = 0usize;
        let mut earliest: Option<(usize, usize)> = None;
        for trigger in lexicon.triggers_for(class) {
            for pos in trigger_occurrences(&lower, trigger) {
                score += trigger.chars().count();
                let span = (pos, pos + trigger.len());
                if earliest.map_or(true, |e| span.0 < e.0) {
                    earliest = Some(span);
                }
            }
        }
        if score > best_score {
            best_score = score;
            best_class = class;
            best_match = earliest;
        }
    }
    let rationale = best_match
        .map(|(_, match_end)| clip_rationale(text, match_end))
        .unwrap_or_default();
    (best_class, rationale)
}

/// First sentence of `text` containing any trigger of `class`, trimmed.
pub fn trigger_sentence(text: &str, class: PracticeClass, lexicon: &RuleLexicon) -> Option<String> {
    let lower = text.to_ascii_lowercase();
    let mut earliest: Option<usize> = None;
    for trigger in lexicon.triggers_for(class) {
        if let Some(pos) = trigger_occurrences(&lower, trigger).first() {
            if earliest.map_or(true, |e| *pos < e) {
                earliest = Some(*pos);
            }
        }
    }
    earliest.map(|pos| {
        let (start, end) = sentence_bounds(text, pos);
        text[start..end].trim().to_string()
    })
}

const SENTENCE_DELIMITERS: &[char] = &['.', '!', '?', '\n'];

/// Bounds of the sentence containing byte position `pos`, excluding the
/// terminal delimiter.
fn sentence_bounds(text: &str, pos: usize) -> (usize, usize) {
    let start = text[..pos]
        .rfind(SENTENCE_DELIMITERS)
        .map(|i| i + 1)
        .unwrap_or(0);
    let end = text[pos..]
        .find(SENTENCE_DELIMITERS)
        .map(|i| pos + i)
        .unwrap_or(text.len());
    (start, end)
}

const CLAUSE_CONNECTORS: &[&str] = &[
    " to ", " with ", " for ", " in order to ", " so that ", " when ", " if ", " because ",
];

/// Excerpt for a trigger hit ending at `match_end`: from the start of the
/// containing sentence up to the first clause connector after the trigger,
/// or the whole sentence when none follows.
fn clip_rationale(text: &str, match_end: usize) -> String {
    let (start, end) = sentence_bounds(text, match_end.saturating_sub(1));
    let sentence = &text[start..end];
    let lower = sentence.to_ascii_lowercase();
    let search_from = match_end.saturating_sub(start).min(lower.len());
    let mut clip = sentence.len();
    for connector in CLAUSE_CONNECTORS {
        if let Some(found) = lower[search_from..].find(connector) {
            clip = clip.min(search_from + found);
        }
    }
    sentence[..clip].trim().to_string()
}

// ---------------------------------------------------------------------------
// Heading extraction
// ---------------------------------------------------------------------------

static NUMBERED_HEADING_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\d{1,3}[.)]\s+\S").expect("static regex"));

fn looks_like_heading(line: &str) -> bool {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.chars().count() > 80 {
        return false;
    }
    if trimmed.ends_with(['.', '!', '?', ',', ';']) && !NUMBERED_HEADING_RE.is_match(trimmed) {
        return false;
    }
    if NUMBERED_HEADING_RE.is_match(trimmed) {
        return true;
    }
    let alpha: Vec<char> = trimmed.chars().filter(|c| c.is_alphabetic()).collect();
    if alpha.len() >= 2 && alpha.iter().all(|c| c.is_uppercase()) {
        return true;
    }
    let words: Vec<&str> = trimmed
        .split_whitespace()
        .filter(|w| w.chars().any(|c| c.is_alphabetic()))
        .collect();
    if words.is_empty() || words.len() > 10 {
        return false;
    }
    let capitalized = words
        .iter()
        .filter(|w| w.chars().next().is_some_and(|c| c.is_uppercase()))
        .count();
    capitalized * 10 >= words.len() * 7
}

/// Candidate heading lines, in document order.
pub fn rule_headings(text: &str) -> Vec<String> {
    text.lines()
        .filter(|line| looks_like_heading(line))
        .map(|line| line.trim().to_string())
        .collect()
}

// ---------------------------------------------------------------------------
// Five-element decoding
// ---------------------------------------------------------------------------

static DATA_VERB_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(collects|collected|collecting|collect|gathers|gathered|gather|obtains|obtained|obtain|receives|received|receive|uses|used|use|processes|processed|process|accesses|accessed|access|stores|stored|store|retains|retained|retain|keeps|kept|keep|shares|shared|sharing|share|discloses|disclosed|disclose|sells|sold|sell)\b",
    )
    .expect("static regex")
});

static SHARE_VERB_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(shares|shared|sharing|share|discloses|disclosed|disclose|sells|sold|sell)\b")
        .expect("static regex")
});

static RETENTION_VERB_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(stores|stored|store|retains|retained|retain|keeps|kept|keep|holds|held|hold)\b")
        .expect("static regex")
});

fn lemma(verb: &str) -> &'static str {
    match verb {
        "collects" | "collected" | "collecting" | "collect" => "collect",
        "gathers" | "gathered" | "gather" => "gather",
        "obtains" | "obtained" | "obtain" => "obtain",
        "receives" | "received" | "receive" => "receive",
        "uses" | "used" | "use" => "use",
        "processes" | "processed" | "process" => "process",
        "accesses" | "accessed" | "access" => "access",
        "stores" | "stored" | "store" => "store",
        "retains" | "retained" | "retain" => "retain",
        "keeps" | "kept" | "keep" => "keep",
        "holds" | "held" | "hold" => "hold",
        "shares" | "shared" | "sharing" | "share" => "share",
        "discloses" | "disclosed" | "disclose" => "disclose",
        "sells" | "sold" | "sell" => "sell",
        _ => "process",
    }
}

#[derive(PartialEq)]
enum VerbKind {
    Collect,
    Share,
    Retention,
}

fn verb_kind(lemma: &str) -> VerbKind {
    match lemma {
        "share" | "disclose" | "sell" => VerbKind::Share,
        "store" | "retain" | "keep" | "hold" => VerbKind::Retention,
        _ => VerbKind::Collect,
    }
}

const DATA_DETERMINERS: &[&str] = &[
    "your", "our", "the", "a", "an", "certain", "some", "any", "such", "additional", "various",
    "also", "this", "these", "that", "those", "or", "and", "may", "will", "it",
];

const DATA_STOPS: &[&str] = &[
    " to ", " for ", " with ", " from ", " when ", " in order", " so that", " where ", " we ",
    " our ", " you ", " if ", " through ", " via ",
];

const PHRASE_END: &[char] = &['.', ';', ':', '!', '?'];

fn earliest_stop(lower: &str, stops: &[&str]) -> usize {
    let mut cut = lower.len();
    for stop in stops {
        if let Some(found) = lower.find(stop) {
            cut = cut.min(found);
        }
    }
    if let Some(found) = lower.find(PHRASE_END) {
        cut = cut.min(found);
    }
    cut
}

fn trim_phrase(raw: &str) -> String {
    let mut out = raw.trim().trim_end_matches([',', ';']).trim().to_string();
    for tail in [" and", " or", ","] {
        while out.to_ascii_lowercase().ends_with(tail) {
            out.truncate(out.len() - tail.len());
            out = out.trim_end().to_string();
        }
    }
    out
}

fn is_empty_or_pronoun(phrase: &str) -> bool {
    let normalized = normalize_keyword(phrase);
    matches!(
        normalized.as_str(),
        "" | "it" | "them" | "this" | "that" | "these" | "those" | "such"
    )
}

/// Extract up to one practice tuple from a single sentence.
fn decode_sentence(sentence: &str) -> Option<PracticeTuple> {
    let lower = sentence.to_ascii_lowercase();
    let verb = DATA_VERB_RE.find(&lower)?;
    let first_lemma = lemma(verb.as_str());
    let kind = verb_kind(first_lemma);

    // Data: noun phrase after the verb, determiners skipped; a leading
    // generic like "information such as" extends into the concrete list.
    let mut cursor = verb.end();
    loop {
        let rest = &lower[cursor..];
        let trimmed = rest.trim_start();
        cursor += rest.len() - trimmed.len();
        let word = trimmed
            .split(|c: char| !c.is_ascii_alphanumeric())
            .next()
            .unwrap_or("");
        if !word.is_empty() && DATA_DETERMINERS.contains(&word) {
            cursor += word.len();
            continue;
        }
        let mut advanced = false;
        for generic_lead in [
            "personal information such as ",
            "information such as ",
            "data such as ",
            "information including ",
            "data including ",
            "information like ",
        ] {
            if trimmed.starts_with(generic_lead) {
                cursor += generic_lead.len();
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    let data_region = &lower[cursor..];
    let data_end = cursor + earliest_stop(data_region, DATA_STOPS);
    let data = trim_phrase(&sentence[cursor..data_end]);
    if is_empty_or_pronoun(&data) {
        return None;
    }

    // Purpose: the first infinitive or "for" clause after the data phrase.
    // Share-type verbs keep "to X" for recipients; retention-type verbs keep
    // "for X" for the retention field.
    let after_data = &lower[data_end.min(lower.len())..];
    let purpose_markers: &[&str] = match kind {
        VerbKind::Collect => &[" in order to ", " to ", " for "],
        VerbKind::Share => &[" in order to ", " for "],
        VerbKind::Retention => &[" in order to ", " to "],
    };
    let mut purpose = String::new();
    let mut purpose_hit: Option<(usize, usize)> = None;
    for marker in purpose_markers {
        if let Some(found) = after_data.find(marker) {
            if purpose_hit.map_or(true, |(start, _)| found < start) {
                purpose_hit = Some((found, found + marker.len()));
            }
        }
    }
    if let Some((_, content_start)) = purpose_hit {
        let abs = data_end + content_start;
        let region = &lower[abs..];
        let stop = earliest_stop(region, &[" and ", " with ", " so ", ","]);
        let mut captured = sentence[abs..abs + stop].trim().to_string();
        for lead in ["the purpose of ", "the purposes of ", "purposes of "] {
            if captured.to_ascii_lowercase().starts_with(lead) {
                captured = captured[lead.len()..].to_string();
            }
        }
        purpose = trim_phrase(&captured);
    }

    // Processing: a sharing verb anywhere in the sentence dominates the
    // description of the operation; otherwise the first verb's lemma.
    let share_match = SHARE_VERB_RE.find(&lower);
    let processing = share_match
        .map(|m| lemma(m.as_str()).to_string())
        .unwrap_or_else(|| first_lemma.to_string());

    // Recipients: "with X" / "to X" after the sharing verb.
    let mut recipients = String::new();
    if let Some(share) = share_match {
        let after_share = &lower[share.end()..];
        let mut marker_hit: Option<(usize, usize)> = None;
        for marker in [" with ", " to "] {
            if let Some(found) = after_share.find(marker) {
                if marker_hit.map_or(true, |(start, _)| found < start) {
                    marker_hit = Some((found, found + marker.len()));
                }
            }
        }
        if let Some((_, content_start)) = marker_hit {
            let abs = share.end() + content_start;
            let region = &lower[abs..];
            let stop = earliest_stop(region, &[" when ", " if ", ","]);
            recipients = trim_phrase(&sentence[abs..abs + stop]);
        }
    }

    // Retention: "for <duration>" or "until <event>" near a retention verb,
    // or the stock "as long as necessary" phrase anywhere.
    let mut retention = String::new();
    if let Some(ret) = RETENTION_VERB_RE.find(&lower) {
        let after = &lower[ret.end()..];
        if let Some(found) = after.find(" for ") {
            let abs = ret.end() + found + " for ".len();
            let region = &lower[abs..];
            let stop = earliest_stop(region, &[" to ", " and ", ","]);
            retention = trim_phrase(&sentence[abs..abs + stop]);
        } else if let Some(found) = after.find(" until ") {
            let abs = ret.end() + found + 1;
            let region = &lower[abs..];
            let stop = earliest_stop(region, &[",", " and "]);
            retention = trim_phrase(&sentence[abs..abs + stop]);
        }
    }
    if retention.is_empty() {
        if let Some(found) = lower.find("as long as necessary") {
            retention = sentence[found..found + "as long as necessary".len()].to_string();
        }
    }

    Some(PracticeTuple {
        data,
        purpose,
        processing,
        retention,
        recipients,
    })
}

/// Decode practice tuples from a paragraph, one tuple per sentence at most.
pub fn rule_decode(text: &str) -> Vec<PracticeTuple> {
    split_sentences(text)
        .into_iter()
        .filter_map(decode_sentence)
        .collect()
}

fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut start = 0usize;
    for (i, c) in text.char_indices() {
        if SENTENCE_DELIMITERS.contains(&c) {
            if i > start {
                sentences.push(&text[start..i]);
            }
            start = i + c.len_utf8();
        }
    }
    if start < text.len() {
        sentences.push(&text[start..]);
    }
    sentences
        .into_iter()
        .filter(|s| !s.trim().is_empty())
        .collect()
}

// ---------------------------------------------------------------------------
// Keyword mapping / verification
// ---------------------------------------------------------------------------

fn cleaned_input(raw: &str) -> String {
    normalize_keyword(raw.trim_matches(['-', '*', '•', '"', '\'', ' ', '\t']))
}

/// Map one free-text item to a data-item keyword. Total and in-vocabulary:
/// noise maps to `N/A`, exact canonical and synonym matches win, token
/// overlap decides the rest, and anything unrecognizable lands in
/// `generic information`.
pub fn rule_map_item(raw: &str, lexicon: &RuleLexicon) -> String {
    let cleaned = cleaned_input(raw);
    if cleaned.is_empty()
        || lexicon.noise_items.contains(&cleaned)
        || !cleaned.chars().any(|c| c.is_ascii_alphanumeric())
    {
        return "N/A".to_string();
    }
    if let Some(id) = data_item_from_keyword(&cleaned) {
        return item_wire_keyword(id);
    }
    if let Some(target) = lexicon.item_synonyms.get(&cleaned) {
        return target.clone();
    }
    let tokens = content_tokens(&cleaned);
    if let Some(index) = best_overlap(&tokens, &lexicon.item_token_bags) {
        return item_wire_keyword(DataItemId::new(index).expect("bag index in range"));
    }
    DataItemId::GENERIC.keyword().to_string()
}

/// Map one free-text purpose phrase to a purpose keyword; falls back to
/// `other`.
pub fn rule_map_purpose(raw: &str, lexicon: &RuleLexicon) -> String {
    let cleaned = cleaned_input(raw);
    if cleaned.is_empty() {
        return PurposeId::OTHER.keyword().to_string();
    }
    if let Some(id) = purpose_from_keyword(&cleaned) {
        return id.keyword().to_string();
    }
    if let Some(target) = lexicon.purpose_synonyms.get(&cleaned) {
        return target.clone();
    }
    let tokens = content_tokens(&cleaned);
    if let Some(index) = best_overlap(&tokens, &lexicon.purpose_token_bags) {
        return PurposeId::new(index).expect("bag index in range").keyword().to_string();
    }
    PurposeId::OTHER.keyword().to_string()
}

fn best_overlap(tokens: &BTreeSet<String>, bags: &[BTreeSet<String>]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None; // (score, index)
    for (index, bag) in bags.iter().enumerate() {
        let score = bag.intersection(tokens).count();
        if score > 0 && best.map_or(true, |(s, _)| score > s) {
            best = Some((score, index));
        }
    }
    best.map(|(_, index)| index)
}

/// The verifier's rule implementation: same synonym/overlap/fallback chain,
/// total over arbitrary input.
pub fn rule_verify_keyword(raw: &str, vocabulary: Vocabulary, lexicon: &RuleLexicon) -> String {
    match vocabulary {
        Vocabulary::DataItems => rule_map_item(raw, lexicon),
        Vocabulary::Purposes => rule_map_purpose(raw, lexicon),
    }
}

// ---------------------------------------------------------------------------
// Backend implementation
// ---------------------------------------------------------------------------

/// [`TextBackend`] over the rule lexicon. Raw text is produced in each
/// task's output grammar and re-parsed through the shared parser, so rule
/// responses obey exactly the same contract as remote ones.
pub struct RuleBackend {
    lexicon: Arc<RuleLexicon>,
}

impl RuleBackend {
    pub fn new(lexicon: Arc<RuleLexicon>) -> Self {
        RuleBackend { lexicon }
    }

    pub fn bundled() -> Self {
        RuleBackend::new(Arc::new(RuleLexicon::bundled().clone()))
    }

    pub fn lexicon(&self) -> &RuleLexicon {
        &self.lexicon
    }

    fn raw_for(&self, payload: &TaskPayload) -> String {
        match payload {
            TaskPayload::Headings { text } => rule_headings(text).join("\n"),
            TaskPayload::Classify { text } => {
                let (class, rationale) = rule_classify(text, &self.lexicon);
                if rationale.contains('\'') {
                    format!(
                        "Matching category = \"{}\"\nReasoning = \"{}\"",
                        class.label(),
                        rationale
                    )
                } else {
                    format!(
                        "Matching category = '{}'\nReasoning = '{}'",
                        class.label(),
                        rationale
                    )
                }
            }
            TaskPayload::Decode { text } => {
                serde_json::to_string(&rule_decode(text)).expect("tuple serialization")
            }
            TaskPayload::MapItems { items } => {
                let keywords: Vec<String> = items
                    .iter()
                    .map(|item| rule_map_item(item, &self.lexicon))
                    .collect();
                serde_json::to_string(&keywords).expect("keyword serialization")
            }
            TaskPayload::MapPurposes { purposes } => {
                let keywords: Vec<String> = purposes
                    .iter()
                    .map(|purpose| rule_map_purpose(purpose, &self.lexicon))
                    .collect();
                serde_json::to_string(&keywords).expect("keyword serialization")
            }
            TaskPayload::VerifyItem { item } => rule_map_item(item, &self.lexicon),
            TaskPayload::VerifyPurpose { purpose } => rule_map_purpose(purpose, &self.lexicon),
        }
    }
}

impl TextBackend for RuleBackend {
    fn id(&self) -> &str {
        "rule"
    }

    fn run(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let started = Instant::now();
        let raw = self.raw_for(&request.payload);
        Ok(BackendResponse::from_raw(
            request.payload.task(),
            raw,
            started.elapsed(),
            self.id(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon() -> &'static RuleLexicon {
        RuleLexicon::bundled()
    }

    #[test]
    fn classify_collection_sentence() {
        let (class, rationale) =
            rule_classify("We collect your email address to create your account.", lexicon());
        assert_eq!(class, PracticeClass::FIRST_PARTY_COLLECTION);
        assert_eq!(rationale, "We collect your email address");
    }

    #[test]
    fn classify_sharing_sentence() {
        let (class, rationale) = rule_classify(
            "We may share device identifiers with advertising partners.",
            lexicon(),
        );
        assert_eq!(class, PracticeClass::THIRD_PARTY_SHARING);
        assert!(!rationale.is_empty());
        assert!("We may share device identifiers with advertising partners.".contains(&rationale));
    }

    #[test]
    fn classify_contact_sentence() {
        let (class, _) = rule_classify("Contact privacy@example.com with questions.", lexicon());
        assert_eq!(class, PracticeClass::CONTACT);
    }

    #[test]
    fn classify_without_trigger_defaults_to_generic_with_empty_rationale() {
        let (class, rationale) = rule_classify("Lorem ipsum dolor sit amet.", lexicon());
        assert_eq!(class, PracticeClass::INTRODUCTORY);
        assert!(rationale.is_empty());
    }

    #[test]
    fn decode_collect_and_share_sentence() {
        let tuples = rule_decode(
            "We collect your location to show nearby offers and share it with partners.",
        );
        assert_eq!(
            tuples,
            vec![PracticeTuple {
                data: "location".into(),
                purpose: "show nearby offers".into(),
                processing: "share".into(),
                retention: String::new(),
                recipients: "partners".into(),
            }]
        );
    }

    #[test]
    fn decode_without_data_yields_nothing() {
        assert!(rule_decode("This policy may change at any time.").is_empty());
    }

    #[test]
    fn decode_share_clause_sets_processing_share() {
        let tuples = rule_decode("We share identifiers with ad partners.");
        assert_eq!(tuples.len(), 1);
        assert_eq!(tuples[0].processing, "share");
        assert_eq!(tuples[0].data, "identifiers");
        assert_eq!(tuples[0].recipients, "ad partners");
    }

    #[test]
    fn decode_retention_sentence() {
        let tuples = rule_decode("We retain your payment information for 30 days.");
        assert_eq!(tuples.len(), 1);
        assert_eq!(tuples[0].data, "payment information");
        assert_eq!(tuples[0].retention, "30 days");
        assert!(tuples[0].purpose.is_empty());
    }

    #[test]
    fn decode_generic_lead_extends_to_concrete_list() {
        let tuples =
            rule_decode("We collect personal information such as your name and email address.");
        assert_eq!(tuples.len(), 1);
        assert_eq!(tuples[0].data, "name and email address");
    }

    #[test]
    fn map_item_examples() {
        assert_eq!(rule_map_item("GPS coordinates", lexicon()), "location");
        assert_eq!(rule_map_item("etc.", lexicon()), "N/A");
        assert_eq!(rule_map_item("location", lexicon()), "location");
        assert_eq!(rule_map_item("cookies", lexicon()), "generic information");
    }

    #[test]
    fn verify_examples() {
        assert_eq!(
            rule_verify_keyword("IP address", Vocabulary::DataItems, lexicon()),
            "device identifier"
        );
        assert_eq!(
            rule_verify_keyword("bank card number", Vocabulary::DataItems, lexicon()),
            "financial"
        );
        assert_eq!(
            rule_verify_keyword("zzqx", Vocabulary::DataItems, lexicon()),
            "generic information"
        );
        assert_eq!(
            rule_verify_keyword("growth hacking", Vocabulary::Purposes, lexicon()),
            "other"
        );
    }

    #[test]
    fn headings_found_in_numbered_and_caps_lines() {
        let text = "Preamble text here.\n1. Information We Collect\nbody line.\nSHARING\nmore body.";
        let headings = rule_headings(text);
        assert_eq!(headings, vec!["1. Information We Collect", "SHARING"]);
    }

    #[test]
    fn rule_backend_is_deterministic() {
        let backend = RuleBackend::bundled();
        let request = BackendRequest::new(TaskPayload::Classify {
            text: "We collect your location.".into(),
        });
        let first = backend.run(&request).unwrap();
        let second = backend.run(&request).unwrap();
        assert_eq!(first.raw_text, second.raw_text);
        assert_eq!(first.parsed, second.parsed);
    }

    #[test]
    fn lexicon_rejects_out_of_vocabulary_synonym_target() {
        let json = r#"{
            "class_triggers": {},
            "item_synonyms": {"foo": "not a keyword"},
            "purpose_synonyms": {},
            "noise_items": []
        }"#;
        assert!(matches!(
            RuleLexicon::from_json(json),
            Err(LexiconError::Invalid(_))
        ));
    }

    #[test]
    fn lexicon_rejects_shadowed_canonical() {
        let json = r#"{
            "class_triggers": {},
            "item_synonyms": {"location": "device identifier"},
            "purpose_synonyms": {},
            "noise_items": []
        }"#;
        assert!(matches!(
            RuleLexicon::from_json(json),
            Err(LexiconError::Invalid(_))
        ));
    }
}
