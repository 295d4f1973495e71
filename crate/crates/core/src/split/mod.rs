//! Paragraph-atomic train/dev/test splitting.
//!
//! Paragraphs are sorted by word count, cut into `K` quantile buckets, shuffled
//! inside each bucket with a seeded generator, and apportioned to the three
//! subsets by largest remainder. Stratified splitting repeats this per
//! document type.

mod paragraphs;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::TreebankFile;

pub use paragraphs::{extract_paragraphs, BoundaryKeys, Paragraph};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("no paragraph boundary comments found (expected '# {0}')")]
    MissingBoundaryMetadata(String),
    #[error("sentence {0} precedes the first paragraph boundary")]
    UnboundedSentence(usize),
    #[error("paragraph id '{0}' occurs more than once")]
    DuplicateParagraphId(String),
    #[error("the corpus has no paragraphs")]
    EmptyCorpus,
    #[error("paragraph '{0}' has no document type")]
    MissingDocumentType(String),
    #[error("paragraph '{0}' has no subset assignment")]
    IncompleteAssignment(String),
    #[error("invalid split spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Dev,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Train, Subset::Dev, Subset::Test];

    pub fn name(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Dev => "dev",
            Subset::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub bucket_count: usize,
    /// Train, dev and test fractions.
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratify_by_type: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            bucket_count: 10,
            ratios: [0.8, 0.1, 0.1],
            seed: 42,
            stratify_by_type: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), SplitError> {
        if self.bucket_count == 0 {
            return Err(SplitError::InvalidSpec("bucket count must be at least 1".into()));
        }
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(SplitError::InvalidSpec("ratios must be non-negative".into()));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SplitError::InvalidSpec(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetTotals {
    pub paragraphs: usize,
    pub sentences: usize,
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketDiagnostics {
    /// Document type for stratified splits.
    pub group: Option<String>,
    pub bucket: usize,
    pub size: usize,
    /// Paragraphs per subset (train, dev, test).
    pub counts: [usize; 3],
    /// Largest-remainder apportionment of `size`; ties go to the subset
    /// furthest below its share in earlier buckets of the same group.
    pub expected: [usize; 3],
    pub proportions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    pub totals: BTreeMap<Subset, SubsetTotals>,
    pub buckets: Vec<BucketDiagnostics>,
    /// Subset proportions per document type, for stratified splits.
    pub per_type: BTreeMap<String, [f64; 3]>,
    /// Largest |bucket proportion - target ratio| over non-empty buckets.
    pub max_ratio_deviation: f64,
    /// Largest |share of a subset's paragraphs drawn from bucket j - share of
    /// bucket j in the corpus| over subsets and buckets.
    pub max_bucket_share_deviation: f64,
    /// Every bucket holds exactly its apportioned counts.
    pub apportionment_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub assignment: BTreeMap<String, Subset>,
    pub diagnostics: SplitDiagnostics,
}

/// Maps paragraph id to a bucket index in `0..k`.
pub fn assign_buckets(paragraphs: &[Paragraph], k: usize) -> BTreeMap<String, usize> {
    let refs: Vec<&Paragraph> = paragraphs.iter().collect();
    bucket_members(&refs, k)
        .into_iter()
        .enumerate()
        .flat_map(|(b, members)| members.into_iter().map(move |p| (p.id.clone(), b)))
        .collect()
}

/// Paragraphs of each bucket, ordered by (segment count, id).
fn bucket_members<'a>(paragraphs: &[&'a Paragraph], k: usize) -> Vec<Vec<&'a Paragraph>> {
    let mut sorted = paragraphs.to_vec();
    sorted.sort_by(|a, b| a.segment_count.cmp(&b.segment_count).then_with(|| a.id.cmp(&b.id)));
    let n = sorted.len();
    (0..k)
        .map(|j| sorted[j * n / k..(j + 1) * n / k].to_vec())
        .collect()
}

/// Largest-remainder apportionment of `n` items; ties favour the earlier subset.
pub fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    apportion_with_deficit(n, ratios, [0.0; 3])
}

/// Largest remainder, with equal remainders resolved towards the subset that
/// is furthest below its share so far, then the earlier subset.
fn apportion_with_deficit(n: usize, ratios: [f64; 3], deficit: [f64; 3]) -> [usize; 3] {
    const TIE: f64 = 1e-9;
    let quotas = ratios.map(|r| r * n as f64);
    let mut counts = quotas.map(|q| (q + TIE).floor().max(0.0) as usize);
    let mut assigned: usize = counts.iter().sum();
    while assigned > n {
        let i = (0..3).rev().find(|&i| counts[i] > 0).unwrap_or(0);
        counts[i] -= 1;
        assigned -= 1;
    }
    let remainder: [f64; 3] = std::array::from_fn(|i| quotas[i] - counts[i] as f64);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        if (remainder[a] - remainder[b]).abs() > TIE {
            remainder[b].total_cmp(&remainder[a])
        } else if (deficit[a] - deficit[b]).abs() > TIE {
            deficit[b].total_cmp(&deficit[a])
        } else {
            a.cmp(&b)
        }
    });
    for &i in order.iter().cycle().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Apportions successive buckets of one group, carrying each subset's deficit.
struct Apportioner {
    ratios: [f64; 3],
    seen: usize,
    assigned: [usize; 3],
}

impl Apportioner {
    fn new(ratios: [f64; 3]) -> Self {
        Self {
            ratios,
            seen: 0,
            assigned: [0; 3],
        }
    }

    fn next(&mut self, size: usize) -> [usize; 3] {
        let deficit = std::array::from_fn(|i| self.ratios[i] * self.seen as f64 - self.assigned[i] as f64);
        let counts = apportion_with_deficit(size, self.ratios, deficit);
        self.seen += size;
        for i in 0..3 {
            self.assigned[i] += counts[i];
        }
        counts
    }
}

fn split_group(members: &[&Paragraph], spec: &SplitSpec, out: &mut BTreeMap<String, Subset>) {
    let mut apportioner = Apportioner::new(spec.ratios);
    for (bucket, mut items) in bucket_members(members, spec.bucket_count).into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(bucket as u64);
        items.shuffle(&mut rng);
        let [train, dev, _] = apportioner.next(items.len());
        for (i, p) in items.into_iter().enumerate() {
            let subset = if i < train {
                Subset::Train
            } else if i < train + dev {
                Subset::Dev
            } else {
                Subset::Test
            };
            out.insert(p.id.clone(), subset);
        }
    }
}

pub fn split_by_name(paragraphs: &[Paragraph], spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    spec.validate()?;
    if paragraphs.is_empty() {
        return Err(SplitError::EmptyCorpus);
    }
    let refs: Vec<&Paragraph> = paragraphs.iter().collect();
    let mut assignment = BTreeMap::new();
    split_group(&refs, spec, &mut assignment);
    let flat = SplitSpec {
        stratify_by_type: false,
        ..spec.clone()
    };
    let diagnostics = verify_split(&assignment, &flat, paragraphs)?;
    Ok(SplitResult {
        assignment,
        diagnostics,
    })
}

pub fn split_by_type(paragraphs: &[Paragraph], spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    spec.validate()?;
    if paragraphs.is_empty() {
        return Err(SplitError::EmptyCorpus);
    }
    let groups = type_groups(paragraphs)?;
    let mut assignment = BTreeMap::new();
    for members in groups.values() {
        split_group(members, spec, &mut assignment);
    }
    let stratified = SplitSpec {
        stratify_by_type: true,
        ..spec.clone()
    };
    let diagnostics = verify_split(&assignment, &stratified, paragraphs)?;
    Ok(SplitResult {
        assignment,
        diagnostics,
    })
}

/// Dispatches on `spec.stratify_by_type`.
pub fn split(paragraphs: &[Paragraph], spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    if spec.stratify_by_type {
        split_by_type(paragraphs, spec)
    } else {
        split_by_name(paragraphs, spec)
    }
}

fn type_groups(paragraphs: &[Paragraph]) -> Result<BTreeMap<&str, Vec<&Paragraph>>, SplitError> {
    let mut groups: BTreeMap<&str, Vec<&Paragraph>> = BTreeMap::new();
    for p in paragraphs {
        if p.document_type.trim().is_empty() {
            return Err(SplitError::MissingDocumentType(p.id.clone()));
        }
        groups.entry(p.document_type.as_str()).or_default().push(p);
    }
    Ok(groups)
}

/// Recomputes bucket membership and measures how closely `assignment`
/// follows the spec.
pub fn verify_split(
    assignment: &BTreeMap<String, Subset>,
    spec: &SplitSpec,
    paragraphs: &[Paragraph],
) -> Result<SplitDiagnostics, SplitError> {
    spec.validate()?;
    let mut totals: BTreeMap<Subset, SubsetTotals> = Subset::ALL.iter().map(|&s| (s, SubsetTotals::default())).collect();
    for p in paragraphs {
        let subset = assignment
            .get(&p.id)
            .ok_or_else(|| SplitError::IncompleteAssignment(p.id.clone()))?;
        let t = totals.get_mut(subset).expect("all subsets present");
        t.paragraphs += 1;
        t.sentences += p.payload.len();
        t.words += p.segment_count;
    }

    let groups: Vec<(Option<String>, Vec<&Paragraph>)> = if spec.stratify_by_type {
        type_groups(paragraphs)?
            .into_iter()
            .map(|(t, members)| (Some(t.to_string()), members))
            .collect()
    } else {
        vec![(None, paragraphs.iter().collect())]
    };

    let mut buckets = Vec::new();
    let mut per_type = BTreeMap::new();
    for (group, members) in &groups {
        let mut group_counts = [0usize; 3];
        let mut apportioner = Apportioner::new(spec.ratios);
        for (bucket, items) in bucket_members(members, spec.bucket_count).into_iter().enumerate() {
            let mut counts = [0usize; 3];
            for p in &items {
                counts[assignment[&p.id] as usize] += 1;
            }
            for i in 0..3 {
                group_counts[i] += counts[i];
            }
            buckets.push(BucketDiagnostics {
                group: group.clone(),
                bucket,
                size: items.len(),
                counts,
                expected: apportioner.next(items.len()),
                proportions: proportions(counts),
            });
        }
        if let Some(t) = group {
            per_type.insert(t.clone(), proportions(group_counts));
        }
    }

    let max_ratio_deviation = buckets
        .iter()
        .filter(|b| b.size > 0)
        .flat_map(|b| (0..3).map(move |i| (b.proportions[i] - spec.ratios[i]).abs()))
        .fold(0.0, f64::max);
    let apportionment_exact = buckets.iter().all(|b| b.counts == b.expected);

    // Bucket shares are compared on the global bucket index.
    let k = spec.bucket_count;
    let mut per_subset = [vec![0usize; k], vec![0usize; k], vec![0usize; k]];
    let mut overall = vec![0usize; k];
    for b in &buckets {
        overall[b.bucket] += b.size;
        for i in 0..3 {
            per_subset[i][b.bucket] += b.counts[i];
        }
    }
    let n = paragraphs.len() as f64;
    let mut max_bucket_share_deviation: f64 = 0.0;
    for (i, counts) in per_subset.iter().enumerate() {
        let subset_total = totals[&Subset::ALL[i]].paragraphs;
        if subset_total == 0 {
            continue;
        }
        for j in 0..k {
            let share = counts[j] as f64 / subset_total as f64;
            let global = overall[j] as f64 / n;
            max_bucket_share_deviation = max_bucket_share_deviation.max((share - global).abs());
        }
    }

    Ok(SplitDiagnostics {
        totals,
        buckets,
        per_type,
        max_ratio_deviation,
        max_bucket_share_deviation,
        apportionment_exact,
    })
}

fn proportions(counts: [usize; 3]) -> [f64; 3] {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return [0.0; 3];
    }
    counts.map(|c| c as f64 / total as f64)
}

/// Builds one treebank per subset, keeping corpus order within each.
pub fn partition_corpus(
    paragraphs: &[Paragraph],
    assignment: &BTreeMap<String, Subset>,
) -> Result<BTreeMap<Subset, TreebankFile>, SplitError> {
    let mut out: BTreeMap<Subset, TreebankFile> = Subset::ALL
        .iter()
        .map(|&s| (s, TreebankFile::new(s.name(), Vec::new())))
        .collect();
    for p in paragraphs {
        let subset = assignment
            .get(&p.id)
            .ok_or_else(|| SplitError::IncompleteAssignment(p.id.clone()))?;
        out.get_mut(subset)
            .expect("all subsets present")
            .sentences
            .extend(p.payload.iter().cloned());
    }
    Ok(out)
}
