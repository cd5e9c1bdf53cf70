use std::collections::HashMap;
use std::time::Duration;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Produces one label-preserving paraphrase of `text`.
pub trait Paraphraser {
    fn paraphrase(&mut self, text: &str, rng: &mut Rng) -> Result<String>;
}

/// Replaces each whitespace-separated word found in the map by a seeded pick
/// among the word itself and its synonyms.
#[derive(Debug, Clone, Default)]
pub struct SynonymAugmenter {
    pub synonyms: HashMap<String, Vec<String>>,
}

impl SynonymAugmenter {
    pub fn new<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: Into<String>,
    {
        SynonymAugmenter {
            synonyms: pairs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into_iter().map(Into::into).collect()))
                .collect(),
        }
    }
}

impl Paraphraser for SynonymAugmenter {
    fn paraphrase(&mut self, text: &str, rng: &mut Rng) -> Result<String> {
        let words: Vec<String> = text
            .split_whitespace()
            .map(|w| match self.synonyms.get(&w.to_lowercase()) {
                Some(alts) if !alts.is_empty() => {
                    let pick = rng.random_range(0..=alts.len());
                    if pick == 0 { w.to_owned() } else { alts[pick - 1].clone() }
                }
                _ => w.to_owned(),
            })
            .collect();
        Ok(words.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub text: String,
    pub source: String,
    pub pivot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationResponse {
    pub text: String,
}

/// Carries one translation request; implementations enforce `timeout`.
pub trait Transport {
    fn translate(&mut self, request: &TranslationRequest, timeout: Duration) -> Result<TranslationResponse>;
}

/// Test transport that echoes the input text.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTransport;

impl Transport for IdentityTransport {
    fn translate(&mut self, request: &TranslationRequest, _: Duration) -> Result<TranslationResponse> {
        Ok(TranslationResponse {
            text: request.text.clone(),
        })
    }
}

/// Round-trip translation through a pivot language.
pub struct BackTranslator<T> {
    pub transport: T,
    pub source: String,
    pub pivot: String,
    pub timeout: Duration,
}

impl<T: Transport> BackTranslator<T> {
    pub fn new(transport: T, source: &str, pivot: &str) -> Self {
        BackTranslator {
            transport,
            source: source.to_owned(),
            pivot: pivot.to_owned(),
            timeout: Duration::from_secs(30),
        }
    }
}

impl<T: Transport> Paraphraser for BackTranslator<T> {
    fn paraphrase(&mut self, text: &str, _: &mut Rng) -> Result<String> {
        let there = self.transport.translate(
            &TranslationRequest {
                text: text.to_owned(),
                source: self.source.clone(),
                pivot: self.pivot.clone(),
            },
            self.timeout,
        )?;
        let back = self.transport.translate(
            &TranslationRequest {
                text: there.text,
                source: self.pivot.clone(),
                pivot: self.source.clone(),
            },
            self.timeout,
        )?;
        Ok(back.text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AugmentReport {
    pub inputs: usize,
    pub generated: usize,
    pub failures: usize,
}

/// Each input is followed by up to `factor − 1` paraphrases carrying its label.
/// Failed paraphrases are skipped and counted.
pub fn augment<L: Clone>(
    texts: &[(String, L)],
    augmenter: &mut dyn Paraphraser,
    factor: usize,
    seed: u64,
) -> Result<(Vec<(String, L)>, AugmentReport)> {
    if factor == 0 {
        return Err(Error::config("augmentation factor must be >= 1"));
    }
    let mut out = Vec::with_capacity(texts.len() * factor);
    let mut report = AugmentReport {
        inputs: texts.len(),
        ..Default::default()
    };
    for (i, (text, label)) in texts.iter().enumerate() {
        out.push((text.clone(), label.clone()));
        let mut rng = seed::derived_rng(seed, 6, i as u64);
        for _ in 1..factor {
            match augmenter.paraphrase(text, &mut rng) {
                Ok(p) => {
                    out.push((p, label.clone()));
                    report.generated += 1;
                }
                Err(e) => {
                    log::warn!("paraphrase of item {i} failed: {e}");
                    report.failures += 1;
                }
            }
        }
    }
    Ok((out, report))
}
