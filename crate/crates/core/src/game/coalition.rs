use serde::{Deserialize, Serialize};

use super::GameError;

/// Largest supported party count; coalition tables hold `2^n` values.
pub const MAX_PARTIES: usize = 24;

/// A subset of `{0, .., n-1}` encoded as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    mask: u32,
    n: usize,
}

impl Coalition {
    pub fn new(mask: u32, n: usize) -> Result<Self, GameError> {
        if n == 0 || n > MAX_PARTIES {
            return Err(GameError::PartyCount(n));
        }
        if u64::from(mask) >> n != 0 {
            return Err(GameError::MaskOutOfRange { mask, n });
        }
        Ok(Self { mask, n })
    }

    pub fn empty(n: usize) -> Result<Self, GameError> {
        Self::new(0, n)
    }

    pub fn grand(n: usize) -> Result<Self, GameError> {
        if n == 0 || n > MAX_PARTIES {
            return Err(GameError::PartyCount(n));
        }
        Self::new(full_mask(n), n)
    }

    pub fn from_members(members: &[usize], n: usize) -> Result<Self, GameError> {
        let mut mask = 0u32;
        for &m in members {
            if m >= n {
                return Err(GameError::MaskOutOfRange { mask: 1 << m.min(31), n });
            }
            mask |= 1 << m;
        }
        Self::new(mask, n)
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    pub fn n(self) -> usize {
        self.n
    }

    pub fn contains(self, party: usize) -> bool {
        party < self.n && self.mask & (1 << party) != 0
    }

    pub fn len(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.mask == 0
    }

    pub fn with(self, party: usize) -> Self {
        debug_assert!(party < self.n);
        Self { mask: self.mask | (1 << party), n: self.n }
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        let mask = self.mask;
        (0..self.n).filter(move |i| mask & (1 << i) != 0)
    }
}

pub(crate) fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        ((1u64 << n) - 1) as u32
    }
}

/// Value of every coalition of `n` parties, indexed by bitmask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicFunction {
    n: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawCharacteristicFunction {
    n: usize,
    values: Vec<f64>,
}

impl<'de> Deserialize<'de> for CharacteristicFunction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawCharacteristicFunction::deserialize(deserializer)?;
        Self::new(raw.n, raw.values).map_err(serde::de::Error::custom)
    }
}

impl CharacteristicFunction {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, GameError> {
        if n == 0 || n > MAX_PARTIES {
            return Err(GameError::PartyCount(n));
        }
        let expected = 1usize << n;
        if values.len() != expected {
            return Err(GameError::ValueCount { n, expected, got: values.len() });
        }
        if values[0] != 0.0 {
            return Err(GameError::NonZeroEmpty(values[0]));
        }
        if let Some((mask, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GameError::NonFinite { mask: mask as u32, value });
        }
        Ok(Self { n, values })
    }

    /// Builds the table by evaluating `f` on every non-empty mask.
    pub fn from_fn(n: usize, mut f: impl FnMut(u32) -> f64) -> Result<Self, GameError> {
        if n == 0 || n > MAX_PARTIES {
            return Err(GameError::PartyCount(n));
        }
        let values = (0..1u32 << n).map(|m| if m == 0 { 0.0 } else { f(m) }).collect();
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, mask: u32) -> f64 {
        self.values[mask as usize]
    }

    pub fn coalition_value(&self, c: Coalition) -> f64 {
        self.value(c.mask())
    }

    pub fn singleton(&self, party: usize) -> f64 {
        self.value(1 << party)
    }

    pub fn grand_mask(&self) -> u32 {
        full_mask(self.n)
    }

    pub fn grand_value(&self) -> f64 {
        self.value(self.grand_mask())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite values always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coalition_bounds() {
        assert!(Coalition::new(0b100, 2).is_err());
        assert!(Coalition::new(0, 0).is_err());
        let c = Coalition::from_members(&[0, 2], 3).unwrap();
        assert_eq!(c.mask(), 0b101);
        assert!(c.contains(2) && !c.contains(1));
        assert_eq!(c.members().collect::<Vec<_>>(), vec![0, 2]);
        assert_ne!(Coalition::empty(3).unwrap(), c);
        assert_eq!(Coalition::grand(24).unwrap().len(), 24);
    }

    #[test]
    fn cf_validation() {
        assert!(matches!(CharacteristicFunction::new(2, vec![0.0, 1.0, 2.0]), Err(GameError::ValueCount { .. })));
        assert!(matches!(CharacteristicFunction::new(1, vec![0.5, 1.0]), Err(GameError::NonZeroEmpty(_))));
        assert!(matches!(
            CharacteristicFunction::new(1, vec![0.0, f64::NAN]),
            Err(GameError::NonFinite { mask: 1, .. })
        ));
    }

    #[test]
    fn cf_json_layout() {
        let cf = CharacteristicFunction::new(2, vec![0.0, 7.0, 5.0, 8.0]).unwrap();
        let text = cf.to_json();
        assert_eq!(text, r#"{"n":2,"values":[0.0,7.0,5.0,8.0]}"#);
        assert_eq!(CharacteristicFunction::from_json(&text).unwrap(), cf);
        // extra fields are tolerated, bad tables are not
        assert!(CharacteristicFunction::from_json(r#"{"n":2,"values":[0,7,5,8],"checks":{}}"#).is_ok());
        assert!(CharacteristicFunction::from_json(r#"{"n":2,"values":[1,7,5,8]}"#).is_err());
    }
}
