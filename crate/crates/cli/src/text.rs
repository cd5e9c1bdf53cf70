use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use deskscale::dataio::{
    clean_currency, generate_movies, generate_reviews, movie_schema, parse_tabular, Column,
    DenseDataset, TabularFrame,
};
use deskscale::eval::{cv_rows, kfold_cv, write_report_csv, GbtTrainer, Task};
use deskscale::gbt::GbtConfig;
use deskscale::prep::{
    augment, class_report, dedupe_spam, impute_apply, impute_fit, normalize_year, ring_undersample,
    AugmentReport, RingConfig, SynonymAugmenter,
};
use deskscale::textfeat::{
    assemble, build_all_text, default_stoplist, idf_fit, idf_transform, read_lexicon,
    read_stoplist, sentiment_distribution, sentiment_tag, text_tf, tokenize, SparseVector,
};
use deskscale::{seed, Error, Result};
use serde::Serialize;

use crate::config::write_effective;
use crate::data::{reviews_frame, write_frame};
use crate::{parse_list, write_json, Common};

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PipelineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Movies CSV in the `gen --kind movies` layout; synthesized when omitted.
    #[arg(long)]
    pub movies: Option<PathBuf>,
    /// Rows to synthesize when no file is given.
    #[arg(long, default_value_t = 600)]
    pub rows: usize,
    #[arg(long, default_value = "avg_vote")]
    pub target: String,
    /// Numeric features appended after the text block.
    #[arg(long, default_value = "year,duration,votes,reviews_from_users,reviews_from_critics")]
    pub numerics: String,
    /// Numeric columns filled from context-group means.
    #[arg(long, default_value = "year,duration,votes,reviews_from_users,reviews_from_critics")]
    pub impute: String,
    #[arg(long, default_value = "director,writer,genre,actors")]
    pub context: String,
    /// Text columns concatenated into the all-text field.
    #[arg(long, default_value = "title,genre,director,writer,production_company,actors,description")]
    pub text_columns: String,
    /// Currency-formatted columns converted to numbers.
    #[arg(long, default_value = "budget")]
    pub currency: String,
    #[arg(long, default_value_t = 5000)]
    pub hash_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub min_doc_freq: u32,
    /// One stopword per line; a built-in list is used when omitted.
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
    /// `token,pos|neg` lines; enables sentiment tagging of descriptions.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value_t = 300)]
    pub num_round: usize,
    #[arg(long, default_value_t = 5.0)]
    pub min_child_weight: f64,
    #[arg(long, default_value_t = 1.5)]
    pub tree_lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct PipelineReport {
    rows: usize,
    dropped_missing_target: usize,
    imputed: BTreeMap<String, usize>,
    num_features: usize,
    text_terms_kept: usize,
    sentiment: Option<deskscale::textfeat::SentimentDistribution>,
    cv_mean: deskscale::eval::EvalReport,
}

fn read_file(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn missing_count(frame: &TabularFrame, col: &str) -> Result<usize> {
    let idx = frame.column_index(col)?;
    Ok(frame.column_cells(idx).filter(|c| c.is_missing()).count())
}

pub fn pipeline(a: &PipelineArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let mut frame = match &a.movies {
        Some(p) => parse_tabular(read_file(p)?, &movie_schema())?,
        None => generate_movies(a.rows, a.common.seed)?,
    };
    let currency = parse_list(&a.currency);
    frame = clean_currency(&frame, &currency.iter().map(String::as_str).collect::<Vec<_>>())?;

    let context = parse_list(&a.context);
    let context: Vec<&str> = context.iter().map(String::as_str).collect();
    let mut imputed = BTreeMap::new();
    for col in parse_list(&a.impute) {
        imputed.insert(col.clone(), missing_count(&frame, &col)?);
        let plan = impute_fit(&frame, &col, &context)?;
        frame = impute_apply(&frame, &plan)?;
    }
    if frame.column_index("year").is_ok() {
        frame = normalize_year(&frame, "year")?;
    }

    let target = frame.column_index(&a.target)?;
    let numerics = parse_list(&a.numerics);
    let numeric_idx = numerics
        .iter()
        .map(|c| frame.column_index(c))
        .collect::<Result<Vec<_>>>()?;
    let text_columns = parse_list(&a.text_columns);
    let text_columns: Vec<&str> = text_columns.iter().map(String::as_str).collect();
    let stop = match &a.stoplist {
        Some(p) => read_stoplist(read_file(p)?)?,
        None => default_stoplist(),
    };

    let mut rows = Vec::new();
    let mut tfs = Vec::new();
    let mut labels = Vec::new();
    for r in 0..frame.len() {
        let Some(y) = frame.cell(r, target).as_number() else { continue };
        rows.push(r);
        labels.push(y);
        tfs.push(text_tf(&build_all_text(&frame, r, &text_columns)?, &stop, a.hash_dim)?);
    }
    let dropped = frame.len() - rows.len();
    let idf = idf_fit(&tfs, a.min_doc_freq)?;
    let mut vectors = Vec::with_capacity(rows.len());
    for (&r, tf) in rows.iter().zip(&tfs) {
        let numeric: Vec<(&str, f64)> = numerics
            .iter()
            .zip(&numeric_idx)
            .map(|(name, &c)| {
                frame.cell(r, c).as_number().map(|v| (name.as_str(), v)).ok_or_else(|| {
                    Error::InvalidData(format!("row {} has no value for {name} after imputation", r + 1))
                })
            })
            .collect::<Result<_>>()?;
        vectors.push(assemble(&idf_transform(&idf, tf)?, &numeric)?);
    }
    let mut jsonl = BufWriter::new(File::create(a.out.join("vectors.jsonl"))?);
    for v in &vectors {
        writeln!(jsonl, "{}", v.to_json())?;
    }
    jsonl.flush()?;

    let sentiment = match &a.lexicon {
        Some(p) => {
            let lexicon = read_lexicon(read_file(p)?)?;
            let desc = frame.column_index("description")?;
            let tags: Vec<_> = (0..frame.len())
                .map(|r| sentiment_tag(&tokenize(frame.cell(r, desc).as_text().unwrap_or("")), &lexicon))
                .collect();
            Some(sentiment_distribution(&tags))
        }
        None => None,
    };

    let dense: Vec<Vec<f64>> = vectors.iter().map(SparseVector::to_dense).collect();
    let ds = DenseDataset::from_rows(&dense, labels)?;
    let trainer = GbtTrainer {
        config: GbtConfig {
            max_depth: a.max_depth,
            eta: a.eta,
            num_round: a.num_round,
            min_child_weight: a.min_child_weight,
            lambda: a.tree_lambda,
            gamma: a.gamma,
            seed: a.common.seed,
        },
        task: Task::Regression,
    };
    let cv = kfold_cv(&ds, a.k, &trainer, a.common.seed)?;
    write_json(&a.out.join("cv-report.json"), &cv)?;
    write_report_csv(
        &cv_rows("pipeline", "XGB", &cv),
        BufWriter::new(File::create(a.out.join("cv-report.csv"))?),
    )?;
    let report = PipelineReport {
        rows: ds.len(),
        dropped_missing_target: dropped,
        imputed,
        num_features: ds.num_features(),
        text_terms_kept: idf.idf.iter().filter(|&&w| w > 0.0).count(),
        sentiment,
        cv_mean: cv.mean.clone(),
    };
    write_json(&a.out.join("pipeline-report.json"), &report)?;
    sayln!(
        "rmse {:.4} mae {:.4} r2 {:.4}",
        cv.mean.rmse.unwrap_or(f64::NAN),
        cv.mean.mae.unwrap_or(f64::NAN),
        cv.mean.r2.unwrap_or(f64::NAN)
    );
    write_effective(&a.out, a)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BalanceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Reviews CSV with `review,polarity` columns; synthesized when omitted.
    #[arg(long)]
    pub reviews: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub rows: usize,
    /// Reviews with fewer tokens are treated as SPAM.
    #[arg(long, default_value_t = 3)]
    pub min_tokens: usize,
    /// Classes above this size are ring-undersampled to it; smaller classes
    /// are augmented. Defaults to the median class size.
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub rings: usize,
    /// Upper bound on copies (original included) per minority review.
    #[arg(long, default_value_t = 3)]
    pub max_factor: usize,
    #[arg(long, default_value_t = 5000)]
    pub hash_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub min_doc_freq: u32,
    /// JSON object mapping a word to its synonyms; a small built-in map is
    /// used when omitted.
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

const BUILTIN_SYNONYMS: &[(&str, &[&str])] = &[
    ("terrible", &["horrible", "dreadful"]),
    ("dirty", &["filthy", "grimy"]),
    ("rude", &["impolite", "unfriendly"]),
    ("bad", &["poor", "subpar"]),
    ("slow", &["sluggish", "unhurried"]),
    ("noisy", &["loud"]),
    ("okay", &["alright", "decent"]),
    ("average", &["ordinary", "standard"]),
    ("good", &["fine", "pleasant"]),
    ("nice", &["lovely", "pleasant"]),
    ("clean", &["spotless", "tidy"]),
    ("excellent", &["superb", "outstanding"]),
    ("amazing", &["incredible", "stunning"]),
    ("hotel", &["inn", "lodging"]),
    ("room", &["suite", "bedroom"]),
    ("food", &["cuisine", "meals"]),
    ("staff", &["employees", "personnel"]),
];

#[derive(Serialize)]
struct ClassAction {
    label: i64,
    before: usize,
    after: usize,
    action: &'static str,
}

#[derive(Serialize)]
struct BalanceReport {
    input_rows: usize,
    spam_removed: usize,
    target: usize,
    classes: Vec<ClassAction>,
    augment: AugmentReport,
}

fn integral(v: f64, row: usize) -> Result<i64> {
    if v.fract() == 0.0 {
        Ok(v as i64)
    } else {
        Err(Error::InvalidData(format!("row {row}: polarity {v} is not an integer class")))
    }
}

pub fn balance(a: &BalanceArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let frame = match &a.reviews {
        Some(p) => parse_tabular(read_file(p)?, &[Column::text("review"), Column::number("polarity")])?,
        None => reviews_frame(&generate_reviews(a.rows, a.common.seed))?,
    };
    let kept = dedupe_spam(&frame, "review", a.min_tokens)?;
    let mut rows: Vec<(String, i64)> = Vec::with_capacity(kept.len());
    for (i, r) in kept.rows().iter().enumerate() {
        let label = r[1]
            .as_number()
            .ok_or_else(|| Error::InvalidData(format!("row {}: missing polarity", i + 1)))?;
        rows.push((r[0].as_text().unwrap_or("").to_owned(), integral(label, i + 1)?));
    }
    let labels: Vec<i64> = rows.iter().map(|r| r.1).collect();
    let before = class_report(&labels);
    fs::write(a.out.join("class-report-before.csv"), before.to_csv())?;
    if before.counts.is_empty() {
        return Err(Error::InvalidData("no reviews left after SPAM filtering".into()));
    }
    let target = a.target.unwrap_or_else(|| {
        let mut sizes: Vec<usize> = before.counts.iter().map(|c| c.1).collect();
        sizes.sort_unstable();
        sizes[sizes.len() / 2]
    });
    if target == 0 {
        return Err(Error::Config("target must be positive".into()));
    }

    let stop: HashSet<String> = HashSet::new();
    let tfs = rows
        .iter()
        .map(|(t, _)| text_tf(t, &stop, a.hash_dim))
        .collect::<Result<Vec<_>>>()?;
    let idf = idf_fit(&tfs, a.min_doc_freq)?;
    let mut augmenter = match &a.synonyms {
        Some(p) => {
            let map: HashMap<String, Vec<String>> = serde_json::from_str(&fs::read_to_string(p)?)
                .map_err(|e| Error::Config(format!("synonyms file {}: {e}", p.display())))?;
            SynonymAugmenter { synonyms: map }
        }
        None => SynonymAugmenter::new(BUILTIN_SYNONYMS.iter().map(|(w, s)| (*w, s.to_vec()))),
    };

    let mut by_class: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, (_, l)) in rows.iter().enumerate() {
        by_class.entry(*l).or_default().push(i);
    }
    let mut balanced: Vec<(String, i64)> = Vec::new();
    let mut classes = Vec::new();
    let mut aug_total = AugmentReport::default();
    for (ci, (label, idx)) in by_class.iter().enumerate() {
        let members: Vec<(String, i64)> = idx.iter().map(|&i| rows[i].clone()).collect();
        let (out, action) = if idx.len() > target {
            let vecs = idx
                .iter()
                .map(|&i| idf_transform(&idf, &tfs[i]))
                .collect::<Result<Vec<_>>>()?;
            let cfg = RingConfig {
                num_rings: a.rings,
                target_size: target,
                seed: seed::derive(a.common.seed, 11, ci as u64),
            };
            let keep = ring_undersample(&vecs, &cfg)?;
            (keep.into_iter().map(|k| members[k].clone()).collect(), "undersampled")
        } else if idx.len() < target {
            let factor = target.div_ceil(idx.len()).min(a.max_factor.max(1));
            let (out, rep) = augment(&members, &mut augmenter, factor, seed::derive(a.common.seed, 12, ci as u64))?;
            aug_total.inputs += rep.inputs;
            aug_total.generated += rep.generated;
            aug_total.failures += rep.failures;
            (out, "augmented")
        } else {
            (members, "kept")
        };
        classes.push(ClassAction {
            label: *label,
            before: idx.len(),
            after: out.len(),
            action,
        });
        balanced.extend(out);
    }

    let after = class_report(&balanced.iter().map(|r| r.1).collect::<Vec<_>>());
    fs::write(a.out.join("class-report-after.csv"), after.to_csv())?;
    let as_u8: Vec<(String, u8)> = balanced
        .iter()
        .map(|(t, l)| {
            u8::try_from(*l)
                .map(|l| (t.clone(), l))
                .map_err(|_| Error::InvalidData(format!("polarity {l} is out of range")))
        })
        .collect::<Result<_>>()?;
    write_frame(&reviews_frame(&as_u8)?, &a.out.join("balanced.csv"))?;
    write_json(
        &a.out.join("balance-report.json"),
        &BalanceReport {
            input_rows: frame.len(),
            spam_removed: frame.len() - kept.len(),
            target,
            classes,
            augment: aug_total,
        },
    )?;
    say!("{}", after.to_csv());
    write_effective(&a.out, a)
}
