//! Evaluation metrics: span-based micro-averaged P/R/F1 (exact boundary +
//! type matching), token-level confusion and accuracy, Cohen's kappa, and
//! Pearson's R with a small correlation-table report.

use crate::corpus::bilou::TagSequence;
use crate::corpus::{ConceptType, SpanAnnotation};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Token-level labels: the four concepts plus Outside.
pub const TOKEN_LABELS: [&str; 5] = ["Process", "Method", "Material", "Data", "O"];

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("gold and prediction cover different documents (first difference: {doc_id})")]
    DocumentSetMismatch { doc_id: String },
    #[error("sequence {index}: gold has {gold} tokens but prediction has {pred}")]
    LengthMismatch {
        index: usize,
        gold: usize,
        pred: usize,
    },
    #[error("annotator streams have {a} and {b} sequences")]
    SequenceCountMismatch { a: usize, b: usize },
    #[error("kappa is undefined: expected agreement is 1 but observed agreement is {observed}")]
    DegenerateAgreement { observed: f64 },
    #[error("Pearson's R needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("Pearson's R is undefined for a constant series")]
    ConstantSeries,
    #[error("correlation table: {0}")]
    InvalidTable(String),
}

/// Precision/recall/F1 with the underlying counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PrfScores {
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfScores {
    fn from_counts(tp: usize, fp: usize, fn_count: usize) -> PrfScores {
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_count > 0 {
            tp as f64 / (tp + fn_count) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PrfScores {
            tp,
            fp,
            fn_count,
            precision,
            recall,
            f1,
        }
    }

    /// Gold span count.
    pub fn support(&self) -> usize {
        self.tp + self.fn_count
    }
}

/// Span evaluation report: per-concept and pooled (micro) scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_type: BTreeMap<ConceptType, PrfScores>,
    pub overall: PrfScores,
    /// Filled by pipelines that also have tag sequences available.
    pub token: Option<TokenConfusion>,
}

impl EvalReport {
    /// CSV with one row per concept plus the overall row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,precision,recall,f1,tp,fp,fn,support\n");
        for concept in ConceptType::ALL {
            let s = self.per_type.get(&concept).copied().unwrap_or_default();
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{},{},{},{}\n",
                concept,
                s.precision,
                s.recall,
                s.f1,
                s.tp,
                s.fp,
                s.fn_count,
                s.support()
            ));
        }
        let o = &self.overall;
        out.push_str(&format!(
            "Overall,{:.6},{:.6},{:.6},{},{},{},{}\n",
            o.precision,
            o.recall,
            o.f1,
            o.tp,
            o.fp,
            o.fn_count,
            o.support()
        ));
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>9} {:>9} {:>9} {:>8}", "label", "P", "R", "F1", "support")?;
        for concept in ConceptType::ALL {
            let s = self.per_type.get(&concept).copied().unwrap_or_default();
            writeln!(
                f,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                concept.as_str(),
                s.precision,
                s.recall,
                s.f1,
                s.support()
            )?;
        }
        let o = &self.overall;
        writeln!(
            f,
            "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>8}",
            "Overall",
            o.precision,
            o.recall,
            o.f1,
            o.support()
        )?;
        if let Some(tok) = &self.token {
            writeln!(f, "token accuracy: {:.4}", tok.accuracy)?;
        }
        Ok(())
    }
}

/// Span micro-F1 with exact matching on (sentence, start, end, concept).
///
/// TP/FP/FN are pooled over all documents; the overall row additionally
/// pools over concept types. Gold and prediction must cover the same
/// document ids.
pub fn span_f1(
    gold: &BTreeMap<String, Vec<SpanAnnotation>>,
    pred: &BTreeMap<String, Vec<SpanAnnotation>>,
) -> Result<EvalReport, MetricsError> {
    if gold.len() != pred.len() || gold.keys().zip(pred.keys()).any(|(a, b)| a != b) {
        let doc_id = gold
            .keys()
            .find(|k| !pred.contains_key(*k))
            .or_else(|| pred.keys().find(|k| !gold.contains_key(*k)))
            .cloned()
            .unwrap_or_default();
        return Err(MetricsError::DocumentSetMismatch { doc_id });
    }

    let mut tp = [0usize; 4];
    let mut fp = [0usize; 4];
    let mut fn_count = [0usize; 4];
    for (doc_id, gold_spans) in gold {
        let g: BTreeSet<&SpanAnnotation> = gold_spans.iter().collect();
        let p: BTreeSet<&SpanAnnotation> = pred[doc_id].iter().collect();
        for span in g.intersection(&p) {
            tp[span.concept.index()] += 1;
        }
        for span in p.difference(&g) {
            fp[span.concept.index()] += 1;
        }
        for span in g.difference(&p) {
            fn_count[span.concept.index()] += 1;
        }
    }

    let mut per_type = BTreeMap::new();
    for concept in ConceptType::ALL {
        let i = concept.index();
        per_type.insert(concept, PrfScores::from_counts(tp[i], fp[i], fn_count[i]));
    }
    let overall = PrfScores::from_counts(
        tp.iter().sum(),
        fp.iter().sum(),
        fn_count.iter().sum(),
    );
    Ok(EvalReport {
        per_type,
        overall,
        token: None,
    })
}

/// Token-level confusion over `{Process, Method, Material, Data, O}`
/// (BILOU tags collapse to their concept type before counting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenConfusion {
    /// `matrix[gold][pred]`, indexed by [`TOKEN_LABELS`].
    pub matrix: [[usize; 5]; 5],
    pub accuracy: f64,
    pub total: usize,
}

impl TokenConfusion {
    /// Raw counts as CSV with labeled header row/column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in TOKEN_LABELS {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (g, row) in self.matrix.iter().enumerate() {
            out.push_str(TOKEN_LABELS[g]);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Row-normalized variant (each gold row sums to 1; zero rows stay 0).
    pub fn to_csv_normalized(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in TOKEN_LABELS {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (g, row) in self.matrix.iter().enumerate() {
            let sum: usize = row.iter().sum();
            out.push_str(TOKEN_LABELS[g]);
            for v in row {
                let norm = if sum > 0 { *v as f64 / sum as f64 } else { 0.0 };
                out.push_str(&format!(",{norm:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

fn collapse(tag: crate::corpus::bilou::Tag) -> usize {
    tag.concept().map_or(4, ConceptType::index)
}

/// Confusion matrix and accuracy over aligned tag sequences.
pub fn token_confusion(
    gold: &[TagSequence],
    pred: &[TagSequence],
) -> Result<TokenConfusion, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::SequenceCountMismatch {
            a: gold.len(),
            b: pred.len(),
        });
    }
    let mut matrix = [[0usize; 5]; 5];
    let mut total = 0usize;
    let mut correct = 0usize;
    for (index, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(MetricsError::LengthMismatch {
                index,
                gold: g.len(),
                pred: p.len(),
            });
        }
        for (&gt, &pt) in g.iter().zip(p.iter()) {
            let gi = collapse(gt);
            let pi = collapse(pt);
            matrix[gi][pi] += 1;
            total += 1;
            if gi == pi {
                correct += 1;
            }
        }
    }
    let accuracy = if total > 0 {
        correct as f64 / total as f64
    } else {
        0.0
    };
    Ok(TokenConfusion {
        matrix,
        accuracy,
        total,
    })
}

/// Inter-annotator agreement report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub observed: f64,
    pub expected: f64,
    /// Label marginals over [`TOKEN_LABELS`], one per annotator.
    pub marginals_a: [f64; 5],
    pub marginals_b: [f64; 5],
    pub tokens: usize,
}

/// Cohen's kappa over aligned token streams, labels collapsed to the five
/// token labels. `kappa = (p_o - p_e) / (1 - p_e)`; when both annotators are
/// constant with the same label (`p_e = 1`), kappa is 1 if they agree
/// everywhere and an error otherwise.
pub fn cohens_kappa(
    tags_a: &[TagSequence],
    tags_b: &[TagSequence],
) -> Result<AgreementReport, MetricsError> {
    if tags_a.len() != tags_b.len() {
        return Err(MetricsError::SequenceCountMismatch {
            a: tags_a.len(),
            b: tags_b.len(),
        });
    }
    let mut counts_a = [0usize; 5];
    let mut counts_b = [0usize; 5];
    let mut agree = 0usize;
    let mut total = 0usize;
    for (index, (a, b)) in tags_a.iter().zip(tags_b).enumerate() {
        if a.len() != b.len() {
            return Err(MetricsError::LengthMismatch {
                index,
                gold: a.len(),
                pred: b.len(),
            });
        }
        for (&ta, &tb) in a.iter().zip(b.iter()) {
            let la = collapse(ta);
            let lb = collapse(tb);
            counts_a[la] += 1;
            counts_b[lb] += 1;
            total += 1;
            if la == lb {
                agree += 1;
            }
        }
    }
    let observed = if total > 0 {
        agree as f64 / total as f64
    } else {
        0.0
    };
    let mut marginals_a = [0.0; 5];
    let mut marginals_b = [0.0; 5];
    let mut expected = 0.0;
    for l in 0..5 {
        marginals_a[l] = counts_a[l] as f64 / total.max(1) as f64;
        marginals_b[l] = counts_b[l] as f64 / total.max(1) as f64;
        expected += marginals_a[l] * marginals_b[l];
    }
    let kappa = if expected >= 1.0 {
        if (observed - 1.0).abs() < 1e-12 {
            1.0
        } else {
            return Err(MetricsError::DegenerateAgreement { observed });
        }
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(AgreementReport {
        kappa,
        observed,
        expected,
        marginals_a,
        marginals_b,
        tokens: total,
    })
}

/// Pearson correlation result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r: f64,
    pub n: usize,
}

/// Product-moment correlation (two-pass: means, then central moments).
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<CorrelationReport, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            index: 0,
            gold: x.len(),
            pred: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricsError::TooFewPoints(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ConstantSeries);
    }
    Ok(CorrelationReport {
        r: sxy / (sxx * syy).sqrt(),
        n: x.len(),
    })
}

/// Input for the per-domain correlation table: the agreement row, the
/// concept-count row, and any number of additional metric rows, all aligned
/// over the same 10 domains.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationInput {
    pub domains: Vec<String>,
    pub kappa: Vec<f64>,
    pub counts: Vec<f64>,
    pub rows: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub label: String,
    pub values: Vec<f64>,
    pub r_kappa: f64,
    pub r_counts: f64,
}

/// Per-domain correlation table: every row's Pearson R against the kappa
/// row and against the concept-count row (the kappa and count rows are
/// included, so the diagonal entries are exactly 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub domains: Vec<String>,
    pub rows: Vec<CorrelationRow>,
}

pub fn correlation_table(input: &CorrelationInput) -> Result<CorrelationTable, MetricsError> {
    let d = input.domains.len();
    if d != 10 {
        return Err(MetricsError::InvalidTable(format!(
            "expected 10 domains, got {d}"
        )));
    }
    let distinct: BTreeSet<&String> = input.domains.iter().collect();
    if distinct.len() != d {
        return Err(MetricsError::InvalidTable("duplicate domain".into()));
    }
    let check_len = |label: &str, v: &[f64]| {
        if v.len() == d {
            Ok(())
        } else {
            Err(MetricsError::InvalidTable(format!(
                "row {label} has {} values for {d} domains",
                v.len()
            )))
        }
    };
    check_len("kappa", &input.kappa)?;
    check_len("counts", &input.counts)?;
    for (label, values) in &input.rows {
        check_len(label, values)?;
    }

    let mut all_rows: Vec<(String, Vec<f64>)> = Vec::with_capacity(input.rows.len() + 2);
    all_rows.push(("kappa".to_string(), input.kappa.clone()));
    all_rows.push(("concept_phrases".to_string(), input.counts.clone()));
    all_rows.extend(input.rows.iter().cloned());

    let mut rows = Vec::with_capacity(all_rows.len());
    for (label, values) in all_rows {
        let r_kappa = pearson_r(&values, &input.kappa)?.r;
        let r_counts = pearson_r(&values, &input.counts)?.r;
        rows.push(CorrelationRow {
            label,
            values,
            r_kappa,
            r_counts,
        });
    }
    Ok(CorrelationTable {
        domains: input.domains.clone(),
        rows,
    })
}

impl CorrelationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for d in &self.domains {
            out.push(',');
            out.push_str(d);
        }
        out.push_str(",R_kappa,R_counts\n");
        for row in &self.rows {
            out.push_str(&row.label);
            for v in &row.values {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{:.4},{:.4}\n", row.r_kappa, row.r_counts));
        }
        out
    }
}
