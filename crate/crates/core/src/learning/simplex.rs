/// Euclidean projection onto the probability simplex by the sort-and-threshold
/// rule. Entries must be finite; an empty input gives an empty output.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        assert_eq!(project_to_simplex(&[0.2, 0.2]), vec![0.5, 0.5]);
        assert_eq!(project_to_simplex(&[0.5, 0.5, 1.5]), vec![0.0, 0.0, 1.0]);
        assert_eq!(project_to_simplex(&[0.25, 0.75]), vec![0.25, 0.75]);
        assert_eq!(project_to_simplex(&[-3.0]), vec![1.0]);
    }

    proptest! {
        #[test]
        fn lands_on_simplex_and_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = project_to_simplex(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let q = project_to_simplex(&p);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn permutation_equivariant(v in prop::collection::vec(-5.0f64..5.0, 2..8), shift in 0usize..8) {
            let k = shift % v.len();
            let mut rotated = v.clone();
            rotated.rotate_left(k);
            let mut p = project_to_simplex(&v);
            p.rotate_left(k);
            let q = project_to_simplex(&rotated);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
