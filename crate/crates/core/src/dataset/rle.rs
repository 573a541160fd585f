use crate::error::{Error, Result};
use crate::geometry::RasterGrid;

/// Column-major run lengths, alternating background and foreground and
/// starting with background (so a mask whose first cell is set starts with a
/// zero run).
pub fn encode_rle(grid: &RasterGrid) -> Vec<u64> {
    let (w, h) = (grid.width(), grid.height());
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for x in 0..w {
        for y in 0..h {
            let v = grid.get(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    counts
}

/// Inverse of [`encode_rle`]; the runs must cover exactly `width * height`
/// cells.
pub fn decode_rle(counts: &[u64], width: usize, height: usize) -> Result<RasterGrid> {
    let total: u64 = counts
        .iter()
        .try_fold(0u64, |acc, c| acc.checked_add(*c))
        .ok_or_else(|| Error::Format("run-length counts overflow".into()))?;
    let expected = (width as u64) * (height as u64);
    if total != expected {
        return Err(Error::Format(format!(
            "run-length counts sum to {total}, expected {width}x{height} = {expected}"
        )));
    }
    let mut grid = RasterGrid::new(width, height)?;
    let mut pos = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        let c = c as usize;
        if i % 2 == 1 {
            for k in pos..pos + c {
                grid.set(k / height, k % height, true);
            }
        }
        pos += c;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(encode_rle(&RasterGrid::new(2, 2).unwrap()), vec![4]);
        assert_eq!(
            encode_rle(&RasterGrid::from_fn(2, 2, |_, _| true).unwrap()),
            vec![0, 4]
        );
        let mut g = RasterGrid::new(3, 1).unwrap();
        g.set(1, 0, true);
        assert_eq!(encode_rle(&g), vec![1, 1, 1]);
    }

    #[test]
    fn column_major_order() {
        // 2x2 with only (1, 0) set: column 0 is (0,0),(0,1), then (1,0)
        let mut g = RasterGrid::new(2, 2).unwrap();
        g.set(1, 0, true);
        assert_eq!(encode_rle(&g), vec![2, 1, 1]);
    }

    #[test]
    fn count_mismatch() {
        assert!(matches!(decode_rle(&[3], 2, 2), Err(Error::Format(_))));
        assert!(decode_rle(&[u64::MAX, 5], 2, 2).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(w in 1usize..20, h in 1usize..20, bits in prop::collection::vec(any::<bool>(), 400)) {
            let g = RasterGrid::from_fn(w, h, |x, y| bits[y * 20 + x]).unwrap();
            let back = decode_rle(&encode_rle(&g), w, h).unwrap();
            prop_assert_eq!(g, back);
        }
    }
}
