//! Fixed tone vocabulary shared by workers, engines and the wire format.
//!
//! Every label has exactly one canonical lower-case string. Parsing is
//! case-insensitive against that string and nothing else; the taxonomy is
//! closed and cannot grow at runtime.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {field} label {value:?}")]
pub struct UnknownLabel {
    pub field: ToneField,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToneField {
    Primary,
    Secondary,
    Intensity,
}

impl fmt::Display for ToneField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToneField::Primary => "primary",
            ToneField::Secondary => "secondary",
            ToneField::Intensity => "intensity",
        })
    }
}

/// Generates a closed label enum with canonical strings, `Display`,
/// case-insensitive `FromStr` and string-based serde.
macro_rules! label_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $field:expr, [ $( $variant:ident => $canon:literal ),+ $(,)? ]
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $( $variant ),+
        }

        impl $name {
            /// All members in canonical order.
            pub const ALL: &'static [$name] = &[ $( $name::$variant ),+ ];

            pub fn as_str(self) -> &'static str {
                match self {
                    $( $name::$variant => $canon ),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownLabel;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let needle = s.trim();
                Self::ALL
                    .iter()
                    .copied()
                    .find(|m| m.as_str().eq_ignore_ascii_case(needle))
                    .ok_or_else(|| UnknownLabel { field: $field, value: s.to_string() })
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

label_enum!(
    /// The formal/informal axis.
    PrimaryTone, ToneField::Primary, [
        Formal => "formal",
        Informal => "informal",
    ]
);

label_enum!(
    /// Finer attitude labels. Exactly one is chosen per identification.
    SecondaryTone, ToneField::Secondary, [
        AppreciativeThankful => "appreciative/thankful",
        Confident => "confident",
        CourteousRespectfulPolite => "courteous/respectful/polite",
        EmotionalPersuasive => "emotional/persuasive",
        EnthusiasticCheerful => "enthusiastic/cheerful",
        LightHumorousFriendliness => "light/humorous/friendliness",
        RegretfulSorrowful => "regretful/sorrowful",
        Serious => "serious",
        ColdUnfriendly => "cold/unfriendly",
        Enraged => "enraged",
    ]
);

label_enum!(
    /// How closely a text should match a tone, ordered
    /// `Very > QuiteClose > Somewhat`.
    Intensity, ToneField::Intensity, [
        Very => "very",
        QuiteClose => "quite close",
        Somewhat => "somewhat",
    ]
);

// Canonical order above is the printed order; strength order is separate.
impl Ord for Intensity {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.strength().cmp(&other.strength())
    }
}

impl PartialOrd for Intensity {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Intensity {
    pub fn strength(self) -> u8 {
        match self {
            Intensity::Very => 3,
            Intensity::QuiteClose => 2,
            Intensity::Somewhat => 1,
        }
    }
}

/// A (primary, secondary) pair with an optional intensity rating.
///
/// Target tones always carry an intensity; the scaffolding engine enforces
/// that when a tuple is submitted as a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ToneTuple {
    pub primary: PrimaryTone,
    pub secondary: SecondaryTone,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<Intensity>,
}

impl ToneTuple {
    pub fn new(primary: PrimaryTone, secondary: SecondaryTone, intensity: Option<Intensity>) -> Self {
        Self {
            primary,
            secondary,
            intensity,
        }
    }

    /// Every tuple the taxonomy admits: 2 × 10 × (3 intensities + unrated).
    pub fn all() -> impl Iterator<Item = ToneTuple> {
        PrimaryTone::ALL.iter().flat_map(|&p| {
            SecondaryTone::ALL.iter().flat_map(move |&s| {
                std::iter::once(None)
                    .chain(Intensity::ALL.iter().copied().map(Some))
                    .map(move |i| ToneTuple::new(p, s, i))
            })
        })
    }
}

impl fmt::Display for ToneTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(i) = self.intensity {
            write!(f, "{} ", i)?;
        }
        write!(f, "{} and {}", self.primary, self.secondary)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub primaries: Vec<PrimaryTone>,
    pub secondaries: Vec<SecondaryTone>,
    pub intensities: Vec<Intensity>,
}

pub fn taxonomy() -> Taxonomy {
    Taxonomy {
        primaries: PrimaryTone::ALL.to_vec(),
        secondaries: SecondaryTone::ALL.to_vec(),
        intensities: Intensity::ALL.to_vec(),
    }
}

pub fn parse_tone(
    primary: &str,
    secondary: &str,
    intensity: Option<&str>,
) -> Result<ToneTuple, UnknownLabel> {
    Ok(ToneTuple {
        primary: primary.parse()?,
        secondary: secondary.parse()?,
        intensity: intensity.map(str::parse).transpose()?,
    })
}

pub const PRIMARY_WEIGHT: u8 = 4;
pub const SECONDARY_WEIGHT: u8 = 2;
pub const INTENSITY_WEIGHT: u8 = 1;
pub const MAX_SIMILARITY: u8 = PRIMARY_WEIGHT + SECONDARY_WEIGHT + INTENSITY_WEIGHT;

/// Weighted exact-match score in `0..=7`. Primary agreement outweighs any
/// combination of the other two attributes.
pub fn tone_similarity(a: &ToneTuple, b: &ToneTuple) -> u8 {
    let mut score = 0;
    if a.primary == b.primary {
        score += PRIMARY_WEIGHT;
    }
    if a.secondary == b.secondary {
        score += SECONDARY_WEIGHT;
    }
    if matches!((a.intensity, b.intensity), (Some(x), Some(y)) if x == y) {
        score += INTENSITY_WEIGHT;
    }
    score
}

/// Serde adapter for an intensity that may be missing, rendered as
/// `"unrated"` instead of being omitted.
pub mod rated_intensity {
    use super::Intensity;
    use serde::{Deserialize, Deserializer, Serializer};

    pub const UNRATED: &str = "unrated";

    pub fn serialize<S: Serializer>(v: &Option<Intensity>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(v.map(Intensity::as_str).unwrap_or(UNRATED))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Intensity>, D::Error> {
        let raw = String::deserialize(d)?;
        if raw.eq_ignore_ascii_case(UNRATED) {
            Ok(None)
        } else {
            raw.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn taxonomy_sizes_and_order() {
        let t = taxonomy();
        assert_eq!(t.primaries.len(), 2);
        assert_eq!(t.secondaries.len(), 10);
        assert_eq!(t.intensities.len(), 3);
        assert_eq!(t.secondaries[0].as_str(), "appreciative/thankful");
        assert_eq!(t, taxonomy());
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_tone("formal", "serious", None).unwrap(),
            ToneTuple::new(PrimaryTone::Formal, SecondaryTone::Serious, None)
        );
        assert_eq!(
            parse_tone("FORMAL", "Appreciative/Thankful", Some("very")).unwrap(),
            ToneTuple::new(
                PrimaryTone::Formal,
                SecondaryTone::AppreciativeThankful,
                Some(Intensity::Very)
            )
        );
        let err = parse_tone("casual", "serious", None).unwrap_err();
        assert_eq!(err.field, ToneField::Primary);
        assert_eq!(err.value, "casual");
    }

    #[test]
    fn multi_label_secondary_rejected() {
        let err = parse_tone("formal", "serious, confident", None).unwrap_err();
        assert_eq!(err.field, ToneField::Secondary);
        assert!(serde_json::from_str::<ToneTuple>(
            r#"{"primary":"formal","secondary":["serious","confident"]}"#
        )
        .is_err());
    }

    #[test]
    fn intensity_with_space_and_order() {
        assert_eq!("Quite Close".parse::<Intensity>().unwrap(), Intensity::QuiteClose);
        assert!(Intensity::Very > Intensity::QuiteClose);
        assert!(Intensity::QuiteClose > Intensity::Somewhat);
        assert_eq!(Intensity::ALL.iter().max(), Some(&Intensity::Very));
    }

    #[test]
    fn similarity_examples() {
        use Intensity::*;
        use PrimaryTone::*;
        use SecondaryTone::*;
        let t = |p, s, i| ToneTuple::new(p, s, i);
        assert_eq!(tone_similarity(&t(Formal, Serious, Some(Very)), &t(Formal, Serious, Some(Very))), 7);
        assert_eq!(tone_similarity(&t(Formal, Serious, None), &t(Informal, Serious, None)), 2);
        assert_eq!(
            tone_similarity(&t(Formal, Confident, Some(Very)), &t(Formal, Serious, Some(Somewhat))),
            4
        );
    }

    #[test]
    fn print_parse_identity_exhaustive() {
        let all: Vec<_> = ToneTuple::all().collect();
        assert_eq!(all.len(), 2 * 10 * 4);
        for t in all {
            let back = parse_tone(
                t.primary.as_str(),
                t.secondary.as_str(),
                t.intensity.map(Intensity::as_str),
            )
            .unwrap();
            assert_eq!(back, t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<ToneTuple>(&json).unwrap(), t);
        }
    }

    #[test]
    fn unrated_adapter() {
        #[derive(Serialize, Deserialize)]
        struct W(#[serde(with = "rated_intensity")] Option<Intensity>);
        assert_eq!(serde_json::to_string(&W(None)).unwrap(), "\"unrated\"");
        assert_eq!(serde_json::to_string(&W(Some(Intensity::QuiteClose))).unwrap(), "\"quite close\"");
        assert_eq!(serde_json::from_str::<W>("\"unrated\"").unwrap().0, None);
    }

    fn arb_tuple() -> impl Strategy<Value = ToneTuple> {
        (0..2usize, 0..10usize, 0..4usize).prop_map(|(p, s, i)| {
            ToneTuple::new(
                PrimaryTone::ALL[p],
                SecondaryTone::ALL[s],
                if i == 3 { None } else { Some(Intensity::ALL[i]) },
            )
        })
    }

    proptest! {
        #[test]
        fn similarity_symmetric(a in arb_tuple(), b in arb_tuple()) {
            prop_assert_eq!(tone_similarity(&a, &b), tone_similarity(&b, &a));
            prop_assert!(tone_similarity(&a, &b) <= MAX_SIMILARITY);
        }

        #[test]
        fn self_similarity_is_maximal(a in arb_tuple(), b in arb_tuple()) {
            // b shares a's intensity-presence pattern
            let b = ToneTuple { intensity: b.intensity.and(a.intensity).or(a.intensity.and(Some(Intensity::Somewhat))), ..b };
            prop_assert!(tone_similarity(&a, &a) >= tone_similarity(&a, &b));
        }
    }
}
