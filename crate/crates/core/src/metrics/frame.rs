use crate::{Error, Result};

fn check(pred: &[usize], gt: &[usize]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    if gt.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

/// Percentage of frames whose predicted label equals the ground truth.
pub fn frame_accuracy(pred: &[usize], gt: &[usize]) -> Result<f64> {
    check(pred, gt)?;
    let hits = pred.iter().zip(gt).filter(|(p, g)| p == g).count();
    Ok(100.0 * hits as f64 / gt.len() as f64)
}

/// Frame-level F1 (in percent) of every class `0..num_classes`; `None` for
/// classes that occur in neither sequence.
pub fn per_class_f1(pred: &[usize], gt: &[usize], num_classes: usize) -> Result<Vec<Option<f64>>> {
    check(pred, gt)?;
    let size = num_classes.max(pred.iter().chain(gt).max().map_or(0, |m| m + 1));
    let (mut tp, mut fp, mut fneg) = (vec![0usize; size], vec![0usize; size], vec![0usize; size]);
    for (&p, &g) in pred.iter().zip(gt) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fneg[g] += 1;
        }
    }
    Ok((0..size)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fneg[c];
            (denom > 0).then(|| 100.0 * 2.0 * tp[c] as f64 / denom as f64)
        })
        .collect())
}

/// Mean per-class F1 over the classes present in the prediction or the
/// ground truth.
pub fn average_f1(pred: &[usize], gt: &[usize], num_classes: usize) -> Result<f64> {
    let f1: Vec<f64> = per_class_f1(pred, gt, num_classes)?.into_iter().flatten().collect();
    Ok(f1.iter().sum::<f64>() / f1.len() as f64)
}
