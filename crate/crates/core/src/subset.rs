use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Index subset of `[r]` (0-based), stored as a bitmask; `r <= 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Subset(pub u64);

pub const MAX_INDEX: usize = 64;

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn full(r: usize) -> Self {
        assert!(r <= MAX_INDEX);
        if r == MAX_INDEX {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << r) - 1)
        }
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut bits = 0u64;
        for &i in indices {
            assert!(i < MAX_INDEX, "index {i} out of range");
            bits |= 1 << i;
        }
        Subset(bits)
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_INDEX && self.0 & (1 << i) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, r: usize) -> Self {
        Subset(!self.0 & Subset::full(r).0)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_proper_subset_of(self, other: Subset) -> bool {
        self.is_subset_of(other) && self != other
    }

    pub fn indices(self) -> Vec<usize> {
        (0..MAX_INDEX).filter(|&i| self.contains(i)).collect()
    }

    pub fn fits(self, r: usize) -> bool {
        self.is_subset_of(Subset::full(r))
    }

    /// All subsets of `[r]`, by increasing cardinality and lexicographically
    /// (on sorted index lists) within one cardinality.
    pub fn enumerate(r: usize) -> Vec<Subset> {
        assert!(r < MAX_INDEX);
        let mut all: Vec<Subset> = (0..(1u64 << r)).map(Subset).collect();
        all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.indices().cmp(&b.indices())));
        all
    }

    /// Parses `"0,2,5"` (empty string is the empty set).
    pub fn parse(s: &str) -> Result<Subset, String> {
        let mut idx = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let i: usize = part
                .parse()
                .map_err(|_| format!("bad index `{part}` in subset `{s}`"))?;
            if i >= MAX_INDEX {
                return Err(format!("index {i} out of range"));
            }
            idx.push(i);
        }
        Ok(Subset::from_indices(&idx))
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl Serialize for Subset {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.indices().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let idx = Vec::<usize>::deserialize(d)?;
        if let Some(bad) = idx.iter().find(|&&i| i >= MAX_INDEX) {
            return Err(serde::de::Error::custom(format!("index {bad} out of range")));
        }
        Ok(Subset::from_indices(&idx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_order_is_cardinality_then_lexicographic() {
        let order: Vec<Vec<usize>> = Subset::enumerate(3).into_iter().map(Subset::indices).collect();
        assert_eq!(
            order,
            vec![
                vec![],
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2]
            ]
        );
    }

    #[test]
    fn set_relations() {
        let t = Subset::from_indices(&[0, 2]);
        assert!(Subset::from_indices(&[2]).is_proper_subset_of(t));
        assert!(!t.is_proper_subset_of(t));
        assert!(!Subset::from_indices(&[1]).is_subset_of(t));
        assert_eq!(t.complement(4), Subset::from_indices(&[1, 3]));
        assert_eq!(Subset::parse(" 0, 2 ").unwrap(), t);
        assert_eq!(Subset::parse("").unwrap(), Subset::EMPTY);
    }
}
