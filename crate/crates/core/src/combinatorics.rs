//! Subset enumeration helpers.

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Advances `subset` (strictly increasing indices below `n`) to its
/// lexicographic successor. Returns `false` once exhausted.
pub fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All k-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Combinations {
    Combinations {
        n,
        current: if k <= n { Some((0..k).collect()) } else { None },
    }
}

pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let mut succ = out.clone();
        if next_combination(&mut succ, self.n) {
            self.current = Some(succ);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(3, 2), Some(3));
        assert_eq!(binomial(6, 3), Some(20));
        assert_eq!(binomial(66, 3), Some(45760));
        assert_eq!(binomial(4, 5), Some(0));
        assert_eq!(binomial(10, 0), Some(1));
        assert_eq!(binomial(120, 60).map(|v| v > 1u128 << 100), Some(true));
        assert_eq!(binomial(200, 100), None);
    }

    #[test]
    fn lexicographic_order() {
        let all: Vec<_> = combinations(4, 2).collect();
        assert_eq!(
            all,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(combinations(5, 5).count(), 1);
        assert_eq!(combinations(3, 4).count(), 0);
        for n in 0..9 {
            for k in 0..=n {
                assert_eq!(combinations(n, k).count() as u128, binomial(n, k).unwrap());
            }
        }
    }
}
