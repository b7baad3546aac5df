use super::{Document, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CandidateSpan {
    pub span: Span,
    /// Position in enumeration order.
    pub span_index: usize,
}

impl CandidateSpan {
    pub fn start(&self) -> usize {
        self.span.start
    }

    pub fn end(&self) -> usize {
        self.span.end
    }
}

/// Every sentence-internal span of at most `max_width` tokens, ordered by
/// `(start, end)`.
pub fn enumerate_spans(doc: &Document, max_width: usize) -> Vec<CandidateSpan> {
    assert!(max_width >= 1, "max_width must be at least 1");
    let mut out = Vec::new();
    for sentence in &doc.sentence_bounds {
        for start in sentence.start..=sentence.end {
            let last = sentence.end.min(start + max_width - 1);
            for end in start..=last {
                out.push(CandidateSpan {
                    span: Span::new(start, end),
                    span_index: out.len(),
                });
            }
        }
    }
    out
}

/// `Σ_sentences L·W − W(W−1)/2` with `W = min(max_width, L)`.
pub fn expected_span_count(doc: &Document, max_width: usize) -> usize {
    doc.sentence_bounds
        .iter()
        .map(|s| {
            let l = s.width();
            let w = max_width.min(l);
            l * w - w * (w - 1) / 2
        })
        .sum()
}

/// `(reachable, unreachable)` gold span counts; a gold span wider than
/// `max_width` can never be proposed.
pub fn gold_coverage(doc: &Document, max_width: usize) -> (usize, usize) {
    let (mut ok, mut missed) = (0, 0);
    for span in doc.gold_clusters.iter().flatten() {
        if span.width() <= max_width {
            ok += 1;
        } else {
            missed += 1;
        }
    }
    (ok, missed)
}
