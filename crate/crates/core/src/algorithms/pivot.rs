use crate::error::{Error, Result};
use crate::request::RequestSet;

/// `s` is a valid pivot of `set` when, for every request `r`, at least
/// `|set| / m` states `s'` of `set` have `r(s') >= r(s)`.
pub fn is_valid_pivot(set: &[usize], requests: &RequestSet, s: usize) -> bool {
    let m = requests.m();
    requests.iter().all(|r| {
        let at_least = set.iter().filter(|&&x| r.cost(x) >= r.cost(s)).count();
        at_least * m >= set.len()
    })
}

/// Lowest-index valid pivot of `set` by exhaustive search.
pub fn select_pivot(set: &[usize], requests: &RequestSet) -> Result<usize> {
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted
        .iter()
        .copied()
        .find(|&s| is_valid_pivot(set, requests, s))
        .ok_or(Error::NoPivot(set.len()))
}

/// `m ln(n/m)`, the size above which a pivot is guaranteed to exist.
pub fn pivot_threshold(n: usize, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    m as f64 * (n as f64 / m as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{rational_pow, rat, ExtendedCost};
    use crate::request::Request;

    #[test]
    fn constant_request_picks_lowest() {
        let rs = RequestSet::new(vec![Request::new(vec![ExtendedCost::one(); 5])]).unwrap();
        assert_eq!(select_pivot(&[3, 1, 4], &rs).unwrap(), 1);
    }

    #[test]
    fn geometric_pair_example() {
        let c = rat(4, 1);
        let up = (0..4).map(|i| ExtendedCost::Finite(rational_pow(&c, i - 4))).collect();
        let down = (0..4).map(|i| ExtendedCost::Finite(rational_pow(&c, -i - 1))).collect();
        let rs = RequestSet::new(vec![Request::new(up), Request::new(down)]).unwrap();
        let set = [0, 1, 2, 3];
        assert!(!is_valid_pivot(&set, &rs, 0));
        assert!(is_valid_pivot(&set, &rs, 1));
        assert_eq!(select_pivot(&set, &rs).unwrap(), 1);
    }
}
