use std::fmt;

use serde::{Deserialize, Serialize};

/// Ternary pairwise preference label.
///
/// `First` means the first item of the ordered pair is preferred, `Second`
/// means the second one is, and `Uncertain` marks pairs whose relation is
/// unknown. The integer encoding is 1 / −1 / 0 respectively.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Label {
    Second,
    Uncertain,
    First,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Second, Label::Uncertain, Label::First];

    pub fn as_i64(self) -> i64 {
        match self {
            Label::Second => -1,
            Label::Uncertain => 0,
            Label::First => 1,
        }
    }

    /// Position in `Label::ALL`, used to index confusion matrices and class
    /// probability vectors ordered as (−1, 0, 1).
    pub fn index(self) -> usize {
        match self {
            Label::Second => 0,
            Label::Uncertain => 1,
            Label::First => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    /// The label of the same pair read in the opposite order.
    pub fn flipped(self) -> Label {
        match self {
            Label::Second => Label::First,
            Label::Uncertain => Label::Uncertain,
            Label::First => Label::Second,
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = String;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        match value {
            -1 => Ok(Label::Second),
            0 => Ok(Label::Uncertain),
            1 => Ok(Label::First),
            other => Err(format!("label {other} is not one of -1, 0, 1")),
        }
    }
}

impl From<Label> for i64 {
    fn from(label: Label) -> i64 {
        label.as_i64()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_round_trip() {
        for label in Label::ALL {
            assert_eq!(Label::try_from(label.as_i64()).unwrap(), label);
            assert_eq!(Label::from_index(label.index()), Some(label));
        }
        assert!(Label::try_from(2).is_err());
    }

    #[test]
    fn serde_uses_integers() {
        assert_eq!(serde_json::to_string(&Label::Second).unwrap(), "-1");
        let parsed: Label = serde_json::from_str("1").unwrap();
        assert_eq!(parsed, Label::First);
        assert!(serde_json::from_str::<Label>("3").is_err());
    }
}
