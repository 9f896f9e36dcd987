use crate::{Error, Result};

/// A maximal run of one label, with inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSegment {
    pub class: usize,
    pub start: usize,
    pub end: usize,
}

impl LabelSegment {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Run-length encodes `labels`.
pub fn segments_from_labels(labels: &[usize]) -> Result<Vec<LabelSegment>> {
    let (&first, _) = labels.split_first().ok_or(Error::EmptySequence)?;
    let mut out = vec![LabelSegment {
        class: first,
        start: 0,
        end: 0,
    }];
    for (t, &l) in labels.iter().enumerate().skip(1) {
        let last = out.last_mut().expect("non-empty");
        if l == last.class {
            last.end = t;
        } else {
            out.push(LabelSegment {
                class: l,
                start: t,
                end: t,
            });
        }
    }
    Ok(out)
}
