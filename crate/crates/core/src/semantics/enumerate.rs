//! Bijective indexing of all lassos with `prefix + loop <= k`.
//!
//! Order: prefix length ascending, then loop length ascending, then the step
//! sequence lexicographically (first step most significant, each step ordered
//! by its digits, most significant digit first).

use super::engine::FlatTrace;
use super::SemanticsError;

#[derive(Debug, Clone)]
pub(crate) struct LassoSpace {
    radices: Vec<u32>,
    step_count: u64,
    /// (prefix_len, loop_len, first global index)
    blocks: Vec<(usize, usize, u64)>,
    total: u64,
}

impl LassoSpace {
    pub fn new(radices: Vec<u32>, k: usize, cap: u64) -> Result<Self, SemanticsError> {
        let budget = |needed: Option<u64>| SemanticsError::BudgetExceeded { needed, cap };
        let step_count = radices.iter().try_fold(1u64, |acc, r| acc.checked_mul(u64::from(*r))).ok_or(budget(None))?;
        let mut blocks = Vec::new();
        let mut total = 0u64;
        for prefix in 0..k {
            for lp in 1..=(k - prefix) {
                let len = u32::try_from(prefix + lp).map_err(|_| budget(None))?;
                let count = step_count.checked_pow(len).ok_or(budget(None))?;
                blocks.push((prefix, lp, total));
                total = total.checked_add(count).ok_or(budget(None))?;
            }
        }
        if total > cap {
            return Err(budget(Some(total)));
        }
        Ok(LassoSpace { radices, step_count, blocks, total })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn width(&self) -> usize {
        self.radices.len()
    }

    /// Writes lasso number `g` into `out`.
    pub fn decode(&self, g: u64, out: &mut FlatTrace) {
        debug_assert!(g < self.total);
        let block = self.blocks.partition_point(|b| b.2 <= g) - 1;
        let (prefix, lp, start) = self.blocks[block];
        let len = prefix + lp;
        let w = self.width();
        out.len = len;
        out.loop_start = prefix;
        out.digits.clear();
        out.digits.resize(len * w, 0);
        let mut q = g - start;
        for pos in (0..len).rev() {
            let mut s = q % self.step_count;
            q /= self.step_count;
            for d in (0..w).rev() {
                let r = u64::from(self.radices[d]);
                out.digits[pos * w + d] = (s % r) as u32;
                s /= r;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all(space: &LassoSpace) -> Vec<(usize, Vec<u32>)> {
        let mut t = FlatTrace::default();
        (0..space.total())
            .map(|g| {
                space.decode(g, &mut t);
                (t.loop_start, t.digits.clone())
            })
            .collect()
    }

    #[test]
    fn counts_and_order_for_one_bit() {
        let space = LassoSpace::new(vec![2], 2, u64::MAX).unwrap();
        // (0,1): 2, (0,2): 4, (1,1): 4
        assert_eq!(space.total(), 10);
        let lassos = all(&space);
        assert_eq!(lassos[0], (0, vec![0]));
        assert_eq!(lassos[1], (0, vec![1]));
        assert_eq!(lassos[2], (0, vec![0, 0]));
        assert_eq!(lassos[3], (0, vec![0, 1]));
        assert_eq!(lassos[5], (0, vec![1, 1]));
        assert_eq!(lassos[6], (1, vec![0, 0]));
        assert_eq!(lassos[9], (1, vec![1, 1]));
    }

    #[test]
    fn mixed_radix_steps_are_lexicographic() {
        let space = LassoSpace::new(vec![2, 3], 1, u64::MAX).unwrap();
        let lassos: Vec<_> = all(&space).into_iter().map(|(_, d)| d).collect();
        assert_eq!(lassos, vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![1, 2]]);
    }

    #[test]
    fn decoding_is_a_bijection() {
        let space = LassoSpace::new(vec![2, 2, 3], 3, u64::MAX).unwrap();
        let lassos = all(&space);
        let unique: std::collections::HashSet<_> = lassos.iter().cloned().collect();
        assert_eq!(unique.len() as u64, space.total());
    }

    #[test]
    fn cap_is_enforced() {
        let err = LassoSpace::new(vec![2; 10], 4, 1000).unwrap_err();
        assert!(matches!(err, SemanticsError::BudgetExceeded { needed: Some(_), cap: 1000 }));
        let err = LassoSpace::new(vec![2; 63], 8, 1000).unwrap_err();
        assert!(matches!(err, SemanticsError::BudgetExceeded { needed: None, .. }));
    }
}
