//! Deterministic synthetic treebanks and prediction perturbations, used by
//! property tests and benchmarks.
//!
//! Every perturbation preserves the surface character sequence, so the result
//! is always a scorable prediction for the original file.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conllu::{Feats, MultiwordToken, Sentence, TokenLine, TreebankFile, Word, UNDERSCORE};

const UPOS: &[&str] = &[
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "AUX", "CCONJ", "SCONJ", "PART", "NUM", "PUNCT", "PROPN",
];
const XPOS: &[&str] = &["subst", "fin", "adj", "adv", "ppron3", "prep", "praet", "conj", "qub", "interp", "num"];
const DEPRELS: &[&str] = &[
    "nsubj", "obj", "iobj", "obl", "obl:arg", "advmod", "amod", "nmod", "nmod:poss", "conj", "flat", "xcomp",
    "ccomp", "acl", "acl:relcl", "advcl", "aux", "aux:pass", "aux:clitic", "cop", "mark", "det", "case", "cc",
    "punct", "fixed", "compound", "parataxis", "discourse", "dep",
];
const FEATS: &[&str] = &[
    "Case=Nom", "Case=Acc", "Case=Gen", "Number=Sing", "Number=Plur", "Gender=Fem", "Gender=Masc", "Aspect=Imp",
    "Aspect=Perf", "Person=1", "Person=3", "Degree=Pos", "Mood=Ind", "Tense=Past", "Polarity=Neg", "PronType=Prs",
    "VerbForm=Fin", "Variant=Short", "Animacy=Hum", "NumForm=Word",
];
const STEMS: &[&str] = &[
    "dom", "kot", "pies", "rzeka", "miasto", "czyta", "pisze", "dobry", "nowy", "szybko", "tam", "który", "się",
    "na", "w", "z", "do", "i", "że", "nie", "jest", "był", "książka", "droga", "ludzie", "czas", "świat", "praca",
];
const MWT_PARTS: &[(&str, &str)] = &[("spali", "byśmy"), ("poszedł", "em"), ("gdy", "by"), ("czy", "ś"), ("był", "bym")];

/// Treebank with `sentences` sentences, paragraphs of 1-3 sentences and
/// documents of 2-4 paragraphs alternating two document types.
pub fn random_treebank(seed: u64, sentences: usize) -> TreebankFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sentences);
    let (mut doc, mut par, mut left_in_par, mut pars_left) = (0usize, 0usize, 0usize, 0usize);
    for s in 0..sentences {
        let mut comments = Vec::new();
        if left_in_par == 0 {
            if pars_left == 0 {
                doc += 1;
                pars_left = rng.gen_range(2..=4);
                comments.push(format!("# newdoc id = d{doc}"));
                comments.push(format!("# doc_type = {}", if doc % 2 == 0 { "publ" } else { "lit" }));
            }
            par += 1;
            pars_left -= 1;
            left_in_par = rng.gen_range(1..=3);
            comments.push(format!("# newpar id = p{par}"));
        }
        left_in_par -= 1;
        comments.push(format!("# sent_id = s{}", s + 1));
        let len = rng.gen_range(1..=18);
        out.push(random_sentence(&mut rng, comments, len));
    }
    TreebankFile::new(format!("synthetic-{seed}"), out)
}

fn random_sentence(rng: &mut ChaCha8Rng, comments: Vec<String>, len: usize) -> Sentence {
    let mut sent = ASent {
        comments,
        ..ASent::default()
    };
    let mut key = 0;
    let mut word = |rng: &mut ChaCha8Rng, form: String| {
        key += 1;
        AW {
            key,
            lemma: form.to_lowercase(),
            form,
            upos: pick(rng, UPOS),
            xpos: pick(rng, XPOS),
            feats: random_feats(rng),
            head: Some(None),
            deprel: pick(rng, DEPRELS),
            misc: UNDERSCORE.into(),
        }
    };
    while sent.word_count() < len {
        if rng.gen_bool(0.08) {
            let (a, b) = *MWT_PARTS.choose(rng).expect("non-empty");
            let mut form = format!("{a}{b}");
            if sent.toks.is_empty() {
                form = capitalise(&form);
            }
            let first = if sent.toks.is_empty() { capitalise(a) } else { a.to_string() };
            let words = vec![word(rng, first), word(rng, b.to_string())];
            sent.toks.push(ATok::Mwt { form, words });
        } else {
            let mut form = pick(rng, STEMS);
            if sent.toks.is_empty() {
                form = capitalise(&form);
            }
            if rng.gen_bool(0.02) {
                form = format!("{form} 000");
            }
            sent.toks.push(ATok::Plain(word(rng, form)));
        }
    }
    sent.toks.push(ATok::Plain(AW {
        form: ".".into(),
        lemma: ".".into(),
        upos: "PUNCT".into(),
        xpos: "interp".into(),
        feats: UNDERSCORE.into(),
        deprel: "punct".into(),
        ..word(rng, ".".into())
    }));
    // Random tree: attach each word to an already attached one.
    let mut keys: Vec<usize> = sent.words().map(|w| w.key).collect();
    keys.shuffle(rng);
    let root = keys[0];
    let mut heads = HashMap::new();
    heads.insert(root, None);
    for i in 1..keys.len() {
        let parent = keys[rng.gen_range(0..i)];
        heads.insert(keys[i], Some(parent));
    }
    for w in sent.words_mut() {
        w.head = Some(heads[&w.key]);
        if w.key == root {
            w.deprel = "root".into();
        }
    }
    sent.into_sentence()
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn pick(rng: &mut impl Rng, items: &[&str]) -> String {
    items.choose(rng).expect("non-empty").to_string()
}

fn random_feats(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(0..=3);
    let mut chosen: Vec<&str> = Vec::new();
    for f in FEATS.choose_multiple(rng, n) {
        let key = f.split('=').next().unwrap_or(f);
        if !chosen.iter().any(|c| c.starts_with(key)) {
            chosen.push(f);
        }
    }
    if chosen.is_empty() {
        UNDERSCORE.into()
    } else {
        chosen.join("|")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Perturbation {
    Upos,
    Xpos,
    Feats,
    Lemma,
    Head,
    Deprel,
    SplitToken,
    MergeTokens,
    MergeSentences,
    SplitSentence,
    CollapseMwt,
    IntroduceMwt,
    UnpackMwt,
    Comments,
    Misc,
}

impl Perturbation {
    pub const ALL: [Perturbation; 15] = [
        Perturbation::Upos,
        Perturbation::Xpos,
        Perturbation::Feats,
        Perturbation::Lemma,
        Perturbation::Head,
        Perturbation::Deprel,
        Perturbation::SplitToken,
        Perturbation::MergeTokens,
        Perturbation::MergeSentences,
        Perturbation::SplitSentence,
        Perturbation::CollapseMwt,
        Perturbation::IntroduceMwt,
        Perturbation::UnpackMwt,
        Perturbation::Comments,
        Perturbation::Misc,
    ];
}

/// Applies 1-4 randomly chosen perturbations; returns the prediction and the
/// operations applied.
pub fn random_prediction(gold: &TreebankFile, seed: u64) -> (TreebankFile, Vec<Perturbation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=4);
    let ops: Vec<Perturbation> = Perturbation::ALL.choose_multiple(&mut rng, count).copied().collect();
    let rate = rng.gen_range(0.05..0.4);
    (perturb(gold, &ops, rate, &mut rng), ops)
}

/// Applies `ops` in order, each touching roughly `rate` of its candidate sites.
pub fn perturb(file: &TreebankFile, ops: &[Perturbation], rate: f64, rng: &mut impl Rng) -> TreebankFile {
    let mut next_key = 0;
    let mut sents: Vec<ASent> = file
        .sentences
        .iter()
        .map(|s| ASent::from_sentence(s, &mut next_key))
        .collect();
    for &op in ops {
        apply(op, &mut sents, rate, rng, &mut next_key);
    }
    TreebankFile::new(
        file.source_name.clone(),
        sents.into_iter().map(ASent::into_sentence).collect(),
    )
}

fn apply(op: Perturbation, sents: &mut Vec<ASent>, rate: f64, rng: &mut impl Rng, next_key: &mut usize) {
    use Perturbation::*;
    match op {
        Upos | Xpos | Feats | Lemma | Head | Deprel | Misc => {
            for s in sents.iter_mut() {
                let keys: Vec<usize> = s.words().map(|w| w.key).collect();
                for w in s.words_mut() {
                    if !rng.gen_bool(rate) {
                        continue;
                    }
                    match op {
                        Upos => w.upos = pick(rng, UPOS),
                        Xpos => w.xpos = pick(rng, XPOS),
                        Feats => w.feats = random_feats(rng),
                        Lemma => w.lemma = format!("{}x", w.lemma),
                        Head => {
                            let target = keys[rng.gen_range(0..keys.len())];
                            w.head = Some((target != w.key).then_some(target));
                        }
                        Deprel => w.deprel = pick(rng, DEPRELS),
                        _ => w.misc = "SpaceAfter=No|Note=x".into(),
                    }
                }
            }
        }
        Comments => {
            for s in sents.iter_mut() {
                s.comments.retain(|c| !c.starts_with("# text"));
                s.comments.push("# note = edited".into());
            }
        }
        SplitToken => {
            for s in sents.iter_mut() {
                let mut i = 0;
                while i < s.toks.len() {
                    if let ATok::Plain(w) = &s.toks[i] {
                        let chars: Vec<char> = w.form.chars().collect();
                        if chars.len() >= 2 && !w.form.contains(' ') && rng.gen_bool(rate) {
                            let cut = rng.gen_range(1..chars.len());
                            let mut first = w.clone();
                            first.form = chars[..cut].iter().collect();
                            *next_key += 1;
                            let second = AW {
                                key: *next_key,
                                form: chars[cut..].iter().collect(),
                                lemma: UNDERSCORE.into(),
                                head: Some(Some(first.key)),
                                deprel: "goeswith".into(),
                                ..first.clone()
                            };
                            s.toks[i] = ATok::Plain(first);
                            s.toks.insert(i + 1, ATok::Plain(second));
                            i += 1;
                        }
                    }
                    i += 1;
                }
            }
        }
        MergeTokens => {
            for s in sents.iter_mut() {
                let mut i = 0;
                while i + 1 < s.toks.len() {
                    if let (ATok::Plain(a), ATok::Plain(b)) = (&s.toks[i], &s.toks[i + 1]) {
                        if rng.gen_bool(rate) {
                            let mut merged = a.clone();
                            merged.form = format!("{}{}", a.form, b.form);
                            if merged.head == Some(Some(b.key)) {
                                merged.head = b.head;
                            }
                            s.redirect.insert(b.key, a.key);
                            s.toks[i] = ATok::Plain(merged);
                            s.toks.remove(i + 1);
                        }
                    }
                    i += 1;
                }
            }
        }
        IntroduceMwt => {
            for s in sents.iter_mut() {
                let mut i = 0;
                while i + 1 < s.toks.len() {
                    if let (ATok::Plain(a), ATok::Plain(b)) = (&s.toks[i], &s.toks[i + 1]) {
                        if !a.form.contains(' ') && !b.form.contains(' ') && rng.gen_bool(rate) {
                            let tok = ATok::Mwt {
                                form: format!("{}{}", a.form, b.form),
                                words: vec![a.clone(), b.clone()],
                            };
                            s.toks[i] = tok;
                            s.toks.remove(i + 1);
                        }
                    }
                    i += 1;
                }
            }
        }
        CollapseMwt => {
            for s in sents.iter_mut() {
                for i in 0..s.toks.len() {
                    if let ATok::Mwt { form, words } = &s.toks[i] {
                        if rng.gen_bool(rate.max(0.5)) {
                            let inside: Vec<usize> = words.iter().map(|w| w.key).collect();
                            let head_word = words
                                .iter()
                                .find(|w| !matches!(w.head, Some(Some(h)) if inside.contains(&h)))
                                .unwrap_or(&words[0]);
                            let mut single = head_word.clone();
                            single.form = form.clone();
                            for k in &inside {
                                if *k != single.key {
                                    s.redirect.insert(*k, single.key);
                                }
                            }
                            s.toks[i] = ATok::Plain(single);
                        }
                    }
                }
            }
        }
        UnpackMwt => {
            for s in sents.iter_mut() {
                let mut i = 0;
                while i < s.toks.len() {
                    if let ATok::Mwt { form, words } = &s.toks[i] {
                        let joined: String = words.iter().map(|w| w.form.as_str()).collect();
                        if &joined == form && rng.gen_bool(rate.max(0.5)) {
                            let plain: Vec<ATok> = words.iter().cloned().map(ATok::Plain).collect();
                            let n = plain.len();
                            s.toks.splice(i..=i, plain);
                            i += n;
                            continue;
                        }
                    }
                    i += 1;
                }
            }
        }
        MergeSentences => {
            let mut i = 0;
            while i + 1 < sents.len() {
                if rng.gen_bool(rate) {
                    let next = sents.remove(i + 1);
                    sents[i].toks.extend(next.toks);
                    sents[i].redirect.extend(next.redirect);
                }
                i += 1;
            }
        }
        SplitSentence => {
            let mut i = 0;
            while i < sents.len() {
                if sents[i].toks.len() >= 2 && rng.gen_bool(rate) {
                    let cut = rng.gen_range(1..sents[i].toks.len());
                    let tail = sents[i].toks.split_off(cut);
                    let redirect = sents[i].redirect.clone();
                    sents.insert(
                        i + 1,
                        ASent {
                            comments: Vec::new(),
                            toks: tail,
                            redirect,
                        },
                    );
                    i += 1;
                }
                i += 1;
            }
        }
    }
}

/// Sentence with words addressed by stable keys instead of ids.
#[derive(Debug, Clone, Default)]
struct ASent {
    comments: Vec<String>,
    toks: Vec<ATok>,
    /// Keys of removed words mapped to the word that absorbed them.
    redirect: HashMap<usize, usize>,
}

#[derive(Debug, Clone)]
enum ATok {
    Plain(AW),
    Mwt { form: String, words: Vec<AW> },
}

#[derive(Debug, Clone)]
struct AW {
    key: usize,
    form: String,
    lemma: String,
    upos: String,
    xpos: String,
    feats: String,
    /// `None` is `_`; `Some(None)` is the root.
    head: Option<Option<usize>>,
    deprel: String,
    misc: String,
}

impl ASent {
    fn from_sentence(s: &Sentence, next_key: &mut usize) -> Self {
        let base = *next_key;
        let aw = |w: &Word| AW {
            key: base + w.id as usize,
            form: w.form.clone(),
            lemma: w.lemma.clone(),
            upos: w.upos.clone(),
            xpos: w.xpos.clone(),
            feats: w.feats.as_str().to_string(),
            head: w.head.map(|h| (h != 0).then(|| base + h as usize)),
            deprel: w.deprel.clone(),
            misc: w.misc.clone(),
        };
        let mut toks = Vec::new();
        let mut pending: Option<(String, u32, Vec<AW>)> = None;
        for t in &s.tokens {
            match t {
                TokenLine::Empty(_) => {}
                TokenLine::Multiword(m) => pending = Some((m.form.clone(), m.last, Vec::new())),
                TokenLine::Word(w) => match pending.as_mut() {
                    Some((_, last, words)) => {
                        words.push(aw(w));
                        if w.id >= *last {
                            let (form, _, words) = pending.take().expect("pending range");
                            toks.push(ATok::Mwt { form, words });
                        }
                    }
                    None => toks.push(ATok::Plain(aw(w))),
                },
            }
        }
        *next_key = base + s.word_count() + 1;
        Self {
            comments: s.comments.clone(),
            toks,
            redirect: HashMap::new(),
        }
    }

    fn words(&self) -> impl Iterator<Item = &AW> {
        self.toks.iter().flat_map(|t| match t {
            ATok::Plain(w) => std::slice::from_ref(w),
            ATok::Mwt { words, .. } => words.as_slice(),
        })
    }

    fn words_mut(&mut self) -> impl Iterator<Item = &mut AW> {
        self.toks.iter_mut().flat_map(|t| match t {
            ATok::Plain(w) => std::slice::from_mut(w),
            ATok::Mwt { words, .. } => words.as_mut_slice(),
        })
    }

    fn word_count(&self) -> usize {
        self.words().count()
    }

    fn into_sentence(self) -> Sentence {
        let ids: HashMap<usize, u32> = self.words().enumerate().map(|(i, w)| (w.key, i as u32 + 1)).collect();
        let resolve = |mut key: usize| -> u32 {
            for _ in 0..=self.redirect.len() {
                if let Some(&id) = ids.get(&key) {
                    return id;
                }
                match self.redirect.get(&key) {
                    Some(&next) => key = next,
                    None => break,
                }
            }
            0
        };
        let word = |w: &AW| {
            let id = ids[&w.key];
            let head = w.head.map(|h| h.map_or(0, |k| resolve(k))).map(|h| if h == id { 0 } else { h });
            Word {
                id,
                form: w.form.clone(),
                lemma: w.lemma.clone(),
                upos: w.upos.clone(),
                xpos: w.xpos.clone(),
                feats: Feats::new(w.feats.clone()),
                head,
                deprel: w.deprel.clone(),
                deps: UNDERSCORE.into(),
                misc: w.misc.clone(),
            }
        };
        let mut tokens = Vec::new();
        for t in &self.toks {
            match t {
                ATok::Plain(w) => tokens.push(TokenLine::Word(word(w))),
                ATok::Mwt { form, words } => {
                    let first = ids[&words[0].key];
                    let last = ids[&words[words.len() - 1].key];
                    tokens.push(TokenLine::Multiword(MultiwordToken::new(first, last, form.clone())));
                    tokens.extend(words.iter().map(|w| TokenLine::Word(word(w))));
                }
            }
        }
        Sentence {
            comments: self.comments,
            tokens,
        }
    }
}
