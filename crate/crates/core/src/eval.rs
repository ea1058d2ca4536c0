//! Answer quality metrics and the extractor/k ablation runner.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::descriptors::Lambda;
use crate::index::cosine;
use crate::prompts::Prompts;
use crate::providers::{ChatRequest, ChatTask, ProviderError, Providers};
use crate::retrieval::{criteria_for_lambdas, Criterion, Engine, Mode, Query, RetrievalError};
use crate::text::{set_prf, token_set};

pub const DEFAULT_ABLATION_K: [usize; 2] = [4, 8];
pub const JUDGE_ASPECTS: [&str; 3] = ["comprehensiveness", "correctness", "relevance"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    BadCase {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("no evaluation cases")]
    NoCases,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Word-level F1 over lowercased, punctuation-stripped token sets.
pub fn f1_score(prediction: &str, gold: &str) -> f64 {
    set_prf(&token_set(prediction), &token_set(gold)).2
}

/// Embedding cosine of two answers, clamped to [0, 1].
pub fn retrieval_similarity(
    providers: &Providers,
    prediction: &str,
    gold: &str,
) -> Result<f64, ProviderError> {
    let a = providers.embed_text(prediction)?;
    let b = providers.embed_text(gold)?;
    Ok(cosine(&a, &b).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JudgeOutcome {
    /// `None` when the judge never produced a usable score.
    pub score: Option<f64>,
    pub repaired: bool,
    pub warnings: Vec<String>,
}

/// Read a judge reply: either a single `score` or the mean of the aspect
/// scores present. Out-of-range values are clamped with a warning.
pub fn parse_judge(reply: &str) -> Result<(f64, Vec<String>), String> {
    let start = reply.find('{').ok_or("no JSON object in judge reply")?;
    let end = reply.rfind('}').ok_or("no JSON object in judge reply")?;
    if end < start {
        return Err("no JSON object in judge reply".into());
    }
    let value: Value = serde_json::from_str(&reply[start..=end]).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("judge reply is not an object")?;
    let keys: Vec<&str> = if obj.contains_key("score") {
        vec!["score"]
    } else {
        JUDGE_ASPECTS
            .iter()
            .copied()
            .filter(|k| obj.contains_key(*k))
            .collect()
    };
    if keys.is_empty() {
        return Err("judge reply has no score".into());
    }
    let mut warnings = Vec::new();
    let mut sum = 0.0;
    for key in &keys {
        let raw = obj[*key]
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("judge field '{key}' is not a number"))?;
        let clamped = raw.clamp(0.0, 1.0);
        if clamped != raw {
            warnings.push(format!("judge {key} {raw} clamped to {clamped}"));
        }
        sum += clamped;
    }
    Ok((sum / keys.len() as f64, warnings))
}

/// Ask the judge model to grade a prediction against the golden answer.
/// An unusable reply gets one repair request before the case is marked
/// invalid.
pub fn generation_eval(
    providers: &Providers,
    prompts: &Prompts,
    question: &str,
    prediction: &str,
    gold: &str,
) -> Result<JudgeOutcome, ProviderError> {
    let context = vec![question.to_string(), prediction.to_string(), gold.to_string()];
    let prompt = prompts.judge_prompt(question, prediction, gold);
    let reply = providers.chat(&ChatRequest::new(ChatTask::Judge, prompt.clone()).with_context(context.clone()))?;
    let error = match parse_judge(&reply) {
        Ok((score, warnings)) => {
            return Ok(JudgeOutcome {
                score: Some(score),
                repaired: false,
                warnings,
            })
        }
        Err(e) => e,
    };
    log::warn!("judge reply unusable: {error}");
    let repair = prompts.repair_prompt(&prompt, &reply, &error);
    let reply = providers.chat(&ChatRequest::new(ChatTask::Judge, repair).with_context(context))?;
    Ok(match parse_judge(&reply) {
        Ok((score, warnings)) => JudgeOutcome {
            score: Some(score),
            repaired: true,
            warnings,
        },
        Err(e) => JudgeOutcome {
            score: None,
            repaired: true,
            warnings: vec![format!("judge output invalid after repair: {e}")],
        },
    })
}

/// One line of a cases JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCase {
    #[serde(default)]
    pub id: Option<String>,
    pub question: String,
    /// Image path, relative to the cases file.
    #[serde(default)]
    pub query_image: Option<String>,
    pub golden_answer: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCase {
    pub id: String,
    pub case: EvalCase,
    pub image: Option<Vec<u8>>,
}

pub fn load_cases(path: &Path) -> Result<Vec<LoadedCase>, EvalError> {
    let io = |p: &Path, source| EvalError::Io {
        path: p.to_path_buf(),
        source,
    };
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| EvalError::BadCase {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let case: EvalCase = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if case.question.trim().is_empty() || case.golden_answer.trim().is_empty() {
            return Err(bad("question and golden_answer must be non-empty".into()));
        }
        let image = match &case.query_image {
            Some(rel) => {
                let p = base.join(rel);
                Some(fs::read(&p).map_err(|e| io(&p, e))?)
            }
            None => None,
        };
        out.push(LoadedCase {
            id: case.id.clone().unwrap_or_else(|| format!("case-{:03}", out.len() + 1)),
            case,
            image,
        });
    }
    if out.is_empty() {
        return Err(EvalError::NoCases);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub mode: Mode,
    pub lambdas: BTreeSet<Lambda>,
    pub criteria: BTreeSet<Criterion>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub id: String,
    pub answer: String,
    pub f1: f64,
    pub rs: f64,
    pub ge: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub cases: Vec<CaseResult>,
    pub mean_f1: f64,
    pub mean_rs: f64,
    /// Mean over cases with a valid judge score.
    pub mean_ge: Option<f64>,
    pub invalid_ge: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl EvalReport {
    pub fn from_cases(config: EvalConfig, cases: Vec<CaseResult>) -> Self {
        Self {
            mean_f1: mean(cases.iter().map(|c| c.f1)).unwrap_or(0.0),
            mean_rs: mean(cases.iter().map(|c| c.rs)).unwrap_or(0.0),
            mean_ge: mean(cases.iter().filter_map(|c| c.ge)),
            invalid_ge: cases.iter().filter(|c| c.ge.is_none()).count(),
            config,
            cases,
        }
    }
}

/// Answer and score every case under one configuration.
pub fn run_eval(
    engine: &Engine<'_>,
    cases: &[LoadedCase],
    mode: Mode,
    lambdas: &BTreeSet<Lambda>,
    k: usize,
) -> Result<EvalReport, EvalError> {
    let criteria = criteria_for_lambdas(lambdas);
    let mut results = Vec::with_capacity(cases.len());
    for c in cases {
        let query = Query {
            text: c.case.question.clone(),
            image: c.image.clone(),
            k,
            mode,
            criteria: criteria.clone(),
        };
        let answer = engine.answer(&query)?.answer;
        let gold = &c.case.golden_answer;
        let judge = generation_eval(engine.providers, engine.prompts, &query.text, &answer, gold)?;
        results.push(CaseResult {
            id: c.id.clone(),
            f1: f1_score(&answer, gold),
            rs: retrieval_similarity(engine.providers, &answer, gold)?,
            ge: judge.score,
            warnings: judge.warnings,
            answer,
        });
    }
    let config = EvalConfig {
        mode,
        lambdas: lambdas.clone(),
        criteria,
        k,
    };
    Ok(EvalReport::from_cases(config, results))
}

/// The nested extractor subsets {1}, {1,2}, {1,2,3}, {1,2,3,4}.
pub fn default_subsets() -> Vec<BTreeSet<Lambda>> {
    (1..=Lambda::ALL.len())
        .map(|n| Lambda::ALL[..n].iter().copied().collect())
        .collect()
}

/// One report per (subset, k) cell, subsets outermost.
pub fn run_ablation(
    engine: &Engine<'_>,
    cases: &[LoadedCase],
    mode: Mode,
    subsets: &[BTreeSet<Lambda>],
    ks: &[usize],
) -> Result<Vec<EvalReport>, EvalError> {
    let mut cells = Vec::with_capacity(subsets.len() * ks.len());
    for subset in subsets {
        for &k in ks {
            cells.push(run_eval(engine, cases, mode, subset, k)?);
        }
    }
    Ok(cells)
}
