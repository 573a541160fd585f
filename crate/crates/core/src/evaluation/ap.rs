use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, Zero};

/// All-point interpolated average precision of a ranked detection list,
/// exact as a fraction. `None` when there are no truths or the fraction
/// would overflow.
pub fn average_precision_exact(ranked: &[bool], truths: usize) -> Option<Ratio<u128>> {
    if truths == 0 {
        return None;
    }
    let precisions = envelope(ranked, |tp, n| Ratio::new(tp as u128, n as u128));
    let step = Ratio::new(1u128, truths as u128);
    let mut ap = Ratio::zero();
    for (i, &hit) in ranked.iter().enumerate() {
        if hit {
            ap = ap.checked_add(&precisions[i].checked_mul(&step)?)?;
        }
    }
    Some(ap)
}

/// As [`average_precision_exact`], in floating point.
pub fn average_precision_f64(ranked: &[bool], truths: usize) -> Option<f64> {
    if truths == 0 {
        return None;
    }
    let precisions = envelope(ranked, |tp, n| tp as f64 / n as f64);
    let step = 1.0 / truths as f64;
    Some(
        ranked
            .iter()
            .zip(&precisions)
            .filter(|(hit, _)| **hit)
            .map(|(_, p)| p * step)
            .sum(),
    )
}

/// Average precision, from the exact fraction when it fits.
pub fn average_precision_ranked(ranked: &[bool], truths: usize) -> Option<f64> {
    match average_precision_exact(ranked, truths) {
        Some(r) => Some(*r.numer() as f64 / *r.denom() as f64),
        None => average_precision_f64(ranked, truths),
    }
}

/// Precision at each rank, made non-increasing from the right.
fn envelope<T: PartialOrd + Clone>(
    ranked: &[bool],
    precision: impl Fn(usize, usize) -> T,
) -> Vec<T> {
    let mut tp = 0;
    let mut p: Vec<T> = ranked
        .iter()
        .enumerate()
        .map(|(i, &hit)| {
            tp += hit as usize;
            precision(tp, i + 1)
        })
        .collect();
    for i in (0..p.len().saturating_sub(1)).rev() {
        if p[i + 1] > p[i] {
            p[i] = p[i + 1].clone();
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tp_fp_tp_is_five_sixths() {
        let r = average_precision_exact(&[true, false, true], 2).unwrap();
        assert_eq!(r, Ratio::new(5, 6));
        assert_eq!(
            average_precision_ranked(&[true, false, true], 2),
            Some(5.0 / 6.0)
        );
    }

    #[test]
    fn perfect_and_wrong() {
        assert_eq!(average_precision_ranked(&[true, true, true], 3), Some(1.0));
        assert_eq!(average_precision_ranked(&[false], 1), Some(0.0));
        assert_eq!(average_precision_ranked(&[], 1), Some(0.0));
        assert_eq!(average_precision_ranked(&[true], 0), None);
    }

    #[test]
    fn missed_truths_cap_recall() {
        // one of two truths found, first in rank
        assert_eq!(average_precision_exact(&[true], 2), Some(Ratio::new(1, 2)));
    }

    #[test]
    fn long_lists_fall_back() {
        let ranked: Vec<bool> = (0..3000).map(|i| i % 7 != 3).collect();
        let truths = ranked.iter().filter(|h| **h).count();
        let ap = average_precision_ranked(&ranked, truths).unwrap();
        let f = average_precision_f64(&ranked, truths).unwrap();
        assert!((ap - f).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn exact_agrees_with_float(ranked in prop::collection::vec(any::<bool>(), 0..40), extra in 0usize..5) {
            let truths = ranked.iter().filter(|h| **h).count() + extra;
            prop_assume!(truths > 0);
            let exact = average_precision_exact(&ranked, truths).unwrap();
            let e = *exact.numer() as f64 / *exact.denom() as f64;
            let f = average_precision_f64(&ranked, truths).unwrap();
            prop_assert!((e - f).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&e));
        }

        #[test]
        fn one_iff_hits_lead(ranked in prop::collection::vec(any::<bool>(), 1..30)) {
            let truths = ranked.iter().filter(|h| **h).count();
            prop_assume!(truths > 0);
            let ap = average_precision_exact(&ranked, truths).unwrap();
            let first_miss = ranked.iter().position(|h| !*h).unwrap_or(ranked.len());
            let hits_lead = ranked[first_miss..].iter().all(|h| !*h);
            prop_assert_eq!(ap == Ratio::new(1, 1), hits_lead);
        }
    }
}
