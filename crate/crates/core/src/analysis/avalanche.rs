/// Sizes of maximal runs of non-empty bins. Runs touching either end of
/// the series are kept.
pub fn extract_avalanches(population: &[u32]) -> Vec<u64> {
    let mut sizes = Vec::new();
    let mut current = 0u64;
    for &a in population {
        if a > 0 {
            current += u64::from(a);
        } else if current > 0 {
            sizes.push(current);
            current = 0;
        }
    }
    if current > 0 {
        sizes.push(current);
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(extract_avalanches(&[0, 2, 3, 0, 0, 1, 0]), vec![5, 1]);
        assert!(extract_avalanches(&[0, 0, 0]).is_empty());
        assert_eq!(extract_avalanches(&[1, 1, 1]), vec![3]);
    }

    proptest! {
        #[test]
        fn sizes_conserve_spikes(a in proptest::collection::vec(0u32..4, 0..300)) {
            let sizes = extract_avalanches(&a);
            let total: u64 = a.iter().map(|&x| u64::from(x)).sum();
            prop_assert_eq!(sizes.iter().sum::<u64>(), total);
            prop_assert!(sizes.iter().all(|&s| s >= 1));
            // one avalanche per rising edge
            let starts = a.iter().enumerate()
                .filter(|&(i, &x)| x > 0 && (i == 0 || a[i - 1] == 0))
                .count();
            prop_assert_eq!(sizes.len(), starts);
        }
    }
}
