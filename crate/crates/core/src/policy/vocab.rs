use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::frontend::{tokenize, ArithOp, CmpOp, Keyword, TokenKind};

pub type TokenId = u32;

pub const BOS: TokenId = 0;
pub const EOS: TokenId = 1;
pub const UNK: TokenId = 2;
const SPECIALS: [&str; 3] = ["<bos>", "<eos>", "<unk>"];
const PUNCT: [&str; 6] = ["(", ")", "{", "}", ";", "="];

pub fn copy_token(slot: usize) -> String {
    format!("<copy{slot}>")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TokenClass {
    Special,
    /// The i-th number mentioned in the context followed by the question.
    Copy(usize),
    Keyword,
    Punct,
    Op,
    Ident,
    Literal(f64),
}

impl TokenClass {
    pub fn is_numeric(self) -> bool {
        matches!(self, TokenClass::Copy(_) | TokenClass::Literal(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VocabConfig {
    /// Number of COPY slots; numbers beyond this in a text are not copyable.
    pub copy_slots: usize,
    /// Most frequent identifiers kept from the training programs.
    pub max_identifiers: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self { copy_slots: 16, max_identifiers: 64 }
    }
}

/// Token statistics of a dataset encoded under a vocabulary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct VocabReport {
    pub size: usize,
    pub tokens: usize,
    pub unk_tokens: usize,
    pub unk_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    classes: Vec<TokenClass>,
    index: HashMap<String, TokenId>,
    copy_slots: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VocabError {
    #[error("vocabulary must start with the special and copy tokens")]
    MissingReserved,
    #[error("duplicate vocabulary entry `{0}`")]
    Duplicate(String),
    #[error("`{0}` is not a DSL token")]
    NotAToken(String),
}

/// A number found in context or question text, with the nearest words on
/// either side (lowercased), which usually name its unit or role.
#[derive(Debug, Clone, PartialEq)]
pub struct TextNumber {
    pub lexeme: String,
    pub value: f64,
    pub left: Option<String>,
    pub right: Option<String>,
}

/// Context and question prepared for a particular vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedContext {
    pub numbers: Vec<TextNumber>,
    /// Hashes of question content words, sorted and deduplicated.
    pub words: Vec<u64>,
    /// Which tokens may be generated here.
    pub allowed: Vec<bool>,
    /// Which numeric tokens denote a value mentioned in the text.
    pub in_text: Vec<bool>,
}

/// Numbers in reading order: digit runs with an optional fractional part.
pub fn extract_numbers(text: &str) -> Vec<TextNumber> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if !b[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
            i += 1;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
        }
        let lexeme = &text[start..i];
        out.push(TextNumber {
            lexeme: lexeme.to_owned(),
            value: lexeme.parse().unwrap(),
            left: text[..start].split(|c: char| !c.is_ascii_alphabetic()).rev().find(|w| !w.is_empty()).map(str::to_ascii_lowercase),
            right: text[i..].split(|c: char| !c.is_ascii_alphabetic()).find(|w| !w.is_empty()).map(str::to_ascii_lowercase),
        });
    }
    out
}

const STOPWORDS: &[&str] = &[
    "the", "and", "for", "are", "was", "were", "will", "would", "what", "how", "many", "much", "with", "from", "that",
    "this", "there", "into", "than", "then", "have", "has", "been", "our", "its", "does", "can", "after", "per", "is",
    "of", "we", "if", "to", "in", "be", "by", "at", "a", "an", "it", "do", "on", "or", "as",
];

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Lowercased alphabetic words of the question minus stopwords.
pub fn content_words(text: &str) -> Vec<String> {
    let mut words: Vec<String> = text
        .split(|c: char| !c.is_ascii_alphabetic())
        .filter(|w| w.len() >= 3)
        .map(|w| w.to_ascii_lowercase())
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect();
    words.sort();
    words.dedup();
    words
}

impl Vocabulary {
    /// Reserved tokens, COPY slots and every fixed DSL token.
    pub fn base(copy_slots: usize) -> Self {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend((0..copy_slots).map(copy_token));
        tokens.extend(Keyword::ALL.iter().map(|k| k.as_str().to_owned()));
        tokens.extend(PUNCT.iter().map(|s| s.to_string()));
        tokens.extend(ArithOp::ALL.iter().map(|o| o.as_str().to_owned()));
        tokens.extend(CmpOp::ALL.iter().map(|o| o.as_str().to_owned()));
        Self::from_tokens(tokens, copy_slots).expect("base vocabulary is well formed")
    }

    /// Only the reserved tokens: the single generatable token is EOS.
    pub fn minimal() -> Self {
        Self::from_tokens(SPECIALS.iter().map(|s| s.to_string()).collect(), 0).unwrap()
    }

    pub fn from_tokens(tokens: Vec<String>, copy_slots: usize) -> Result<Self, VocabError> {
        let reserved = SPECIALS.len() + copy_slots;
        if tokens.len() < reserved
            || tokens[..3] != SPECIALS
            || (0..copy_slots).any(|i| tokens[3 + i] != copy_token(i))
        {
            return Err(VocabError::MissingReserved);
        }
        let mut classes = Vec::with_capacity(tokens.len());
        classes.extend(std::iter::repeat(TokenClass::Special).take(3));
        classes.extend((0..copy_slots).map(TokenClass::Copy));
        for t in &tokens[reserved..] {
            classes.push(classify(t).ok_or_else(|| VocabError::NotAToken(t.clone()))?);
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(VocabError::Duplicate(t.clone()));
            }
        }
        Ok(Self { tokens, classes, index, copy_slots })
    }

    /// Builds a vocabulary from training triples `(context, question, program)`:
    /// the base tokens, the most frequent identifiers, and literals that do not
    /// appear in their example's text.
    pub fn build<'a>(examples: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>, cfg: VocabConfig) -> Self {
        let mut idents: HashMap<String, usize> = HashMap::new();
        let mut literals: BTreeMap<String, usize> = BTreeMap::new();
        for (context, question, program) in examples {
            let Ok(toks) = tokenize(program) else { continue };
            let numbers = text_numbers(context, question, cfg.copy_slots);
            for t in toks {
                match t.kind {
                    TokenKind::Ident => *idents.entry(t.lexeme).or_default() += 1,
                    TokenKind::Int | TokenKind::Real if copy_slot_for(&numbers, &t.lexeme).is_none() => {
                        *literals.entry(t.lexeme).or_default() += 1
                    }
                    _ => {}
                }
            }
        }
        let mut idents: Vec<(String, usize)> = idents.into_iter().collect();
        idents.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut vocab = Self::base(cfg.copy_slots);
        let mut tokens = std::mem::take(&mut vocab.tokens);
        tokens.extend(idents.into_iter().take(cfg.max_identifiers).map(|(name, _)| name));
        tokens.extend(literals.into_keys());
        Self::from_tokens(tokens, cfg.copy_slots).expect("harvested tokens are valid")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn copy_slots(&self) -> usize {
        self.copy_slots
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn class(&self, id: TokenId) -> TokenClass {
        self.classes[id as usize]
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn encode_context(&self, context: &str, question: &str) -> EncodedContext {
        let numbers = text_numbers(context, question, self.copy_slots);
        let words = {
            let mut w: Vec<u64> = content_words(question).iter().map(|w| fnv1a(w.as_bytes())).collect();
            w.sort_unstable();
            w.dedup();
            w
        };
        let allowed = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| match c {
                TokenClass::Special => i as TokenId == EOS,
                TokenClass::Copy(slot) => *slot < numbers.len(),
                _ => true,
            })
            .collect();
        let in_text = self
            .classes
            .iter()
            .map(|c| match c {
                TokenClass::Copy(slot) => *slot < numbers.len(),
                TokenClass::Literal(v) => numbers.iter().any(|n| n.value == *v),
                _ => false,
            })
            .collect();
        EncodedContext { numbers, words, allowed, in_text }
    }

    /// Token ids of a program followed by EOS, and how many lexemes fell back
    /// to UNK. Numbers mentioned in the text become COPY slots.
    pub fn encode_program(&self, ctx: &EncodedContext, source: &str) -> Option<(Vec<TokenId>, usize)> {
        let toks = tokenize(source).ok()?;
        let mut unk = 0;
        let mut ids: Vec<TokenId> = toks
            .iter()
            .map(|t| {
                if matches!(t.kind, TokenKind::Int | TokenKind::Real) {
                    if let Some(slot) = copy_slot_for(&ctx.numbers, &t.lexeme) {
                        return (SPECIALS.len() + slot) as TokenId;
                    }
                }
                self.id(&t.lexeme).unwrap_or_else(|| {
                    unk += 1;
                    UNK
                })
            })
            .collect();
        ids.push(EOS);
        Some((ids, unk))
    }

    /// Surface lexemes of a generated sequence, stopping at EOS.
    pub fn lexemes(&self, ctx: &EncodedContext, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .map(|&id| match self.class(id) {
                TokenClass::Copy(slot) => {
                    ctx.numbers.get(slot).map_or_else(|| self.token(id).to_owned(), |n| n.lexeme.clone())
                }
                _ => self.token(id).to_owned(),
            })
            .collect()
    }

    pub fn report<'a>(&self, examples: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> VocabReport {
        let mut report = VocabReport { size: self.len(), ..VocabReport::default() };
        for (context, question, program) in examples {
            let ctx = self.encode_context(context, question);
            if let Some((ids, unk)) = self.encode_program(&ctx, program) {
                report.tokens += ids.len() - 1;
                report.unk_tokens += unk;
            }
        }
        report.unk_rate = if report.tokens == 0 { 0.0 } else { report.unk_tokens as f64 / report.tokens as f64 };
        report
    }
}

/// Joins lexemes into source text. A `-` in operand position is attached to
/// the following number so it reads as a negative literal.
pub fn render_source(lexemes: &[String]) -> String {
    let mut out = String::new();
    for (i, lex) in lexemes.iter().enumerate() {
        let glued = i > 0 && lexemes[i - 1] == "-" && is_unary_minus(lexemes, i - 1);
        if i > 0 && !glued {
            out.push(' ');
        }
        out.push_str(lex);
    }
    out
}

fn is_unary_minus(lexemes: &[String], at: usize) -> bool {
    let next_is_number = lexemes.get(at + 1).is_some_and(|l| l.starts_with(|c: char| c.is_ascii_digit()));
    let prev_is_operand = at > 0 && {
        let p = lexemes[at - 1].as_str();
        p == ")" || p.starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_') && p != "return"
    };
    next_is_number && !prev_is_operand
}

fn text_numbers(context: &str, question: &str, limit: usize) -> Vec<TextNumber> {
    let mut n = extract_numbers(context);
    n.extend(extract_numbers(question));
    n.truncate(limit);
    n
}

/// First slot with the same lexeme, else the first with the same value.
fn copy_slot_for(numbers: &[TextNumber], lexeme: &str) -> Option<usize> {
    numbers.iter().position(|n| n.lexeme == lexeme).or_else(|| {
        let v: f64 = lexeme.parse().ok()?;
        numbers.iter().position(|n| n.value == v)
    })
}

fn classify(token: &str) -> Option<TokenClass> {
    let toks = tokenize(token).ok()?;
    let [t] = toks.as_slice() else { return None };
    Some(match t.kind {
        TokenKind::Keyword(_) => TokenClass::Keyword,
        TokenKind::Ident => TokenClass::Ident,
        TokenKind::Int | TokenKind::Real => TokenClass::Literal(token.parse().ok()?),
        TokenKind::Cmp(_) | TokenKind::Arith(_) => TokenClass::Op,
        _ => TokenClass::Punct,
    })
}
