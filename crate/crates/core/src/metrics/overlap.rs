use crate::data::Mask;
use crate::error::{bail, Result};

fn counts(x: &Mask, y: &Mask) -> Result<(usize, usize, usize)> {
    if x.height() != y.height() || x.width() != y.width() {
        bail!(Validation, "mask shapes differ: {}x{} vs {}x{}", x.height(), x.width(), y.height(), y.width());
    }
    let mut inter = 0;
    let mut nx = 0;
    let mut ny = 0;
    for (&a, &b) in x.data().iter().zip(y.data()) {
        nx += a as usize;
        ny += b as usize;
        inter += (a & b) as usize;
    }
    Ok((inter, nx, ny))
}

/// `2|X∩Y| / (|X| + |Y|)`, or 1 when both sets are empty.
pub fn dice_from_counts(inter: usize, nx: usize, ny: usize) -> f64 {
    if nx + ny == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (nx + ny) as f64
    }
}

/// `|X∩Y| / |X∪Y|`, or 1 when both sets are empty.
pub fn iou_from_counts(inter: usize, nx: usize, ny: usize) -> f64 {
    let union = nx + ny - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn dice(x: &Mask, y: &Mask) -> Result<f64> {
    let (i, a, b) = counts(x, y)?;
    Ok(dice_from_counts(i, a, b))
}

pub fn iou(x: &Mask, y: &Mask) -> Result<f64> {
    let (i, a, b) = counts(x, y)?;
    Ok(iou_from_counts(i, a, b))
}

/// Mean over images of the fraction of labels predicted correctly.
pub fn mla<P: AsRef<[u8]>, Q: AsRef<[u8]>>(pred: &[P], truth: &[Q]) -> Result<f64> {
    if pred.len() != truth.len() {
        bail!(Validation, "{} predicted label rows for {} true rows", pred.len(), truth.len());
    }
    if pred.is_empty() {
        bail!(Validation, "mla of zero images");
    }
    let mut total = 0.0;
    for (k, (p, t)) in pred.iter().zip(truth).enumerate() {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != t.len() || p.is_empty() {
            bail!(Validation, "image {k}: {} predicted labels vs {} true labels", p.len(), t.len());
        }
        let correct = p.iter().zip(t).filter(|(a, b)| a == b).count();
        total += correct as f64 / p.len() as f64;
    }
    Ok(total / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn m(bits: &[u8], w: usize) -> Mask {
        Mask::from_vec(bits.len() / w, w, bits.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let a = m(&[1, 1, 1, 1, 0, 0, 0, 0], 4);
        let b = m(&[0, 0, 1, 1, 1, 1, 0, 0], 4);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(iou(&a, &b).unwrap(), 1.0 / 3.0);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let c = m(&[0, 0, 0, 0, 0, 0, 1, 1], 4);
        assert_eq!(dice(&a, &c).unwrap(), 0.0);
        let e = Mask::zeros(2, 4);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
        assert!(dice(&a, &Mask::zeros(4, 2)).is_err());
    }

    #[test]
    fn mla_examples() {
        assert_eq!(mla(&[vec![1u8, 0, 1, 1]], &[vec![1u8, 0, 1, 0]]).unwrap(), 0.75);
        assert_eq!(mla(&[[1u8, 1]], &[[0u8, 0]]).unwrap(), 0.0);
        assert!(mla(&[[1u8]], &[[1u8, 0]]).is_err());
    }
}
