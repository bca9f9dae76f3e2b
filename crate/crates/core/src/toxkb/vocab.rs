use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Toxidrome {
    Anticholinergic,
    Cholinergic,
    Opioid,
    SedativeHypnotic,
    SerotoninToxicity,
    Sympathomimetic,
}

impl Toxidrome {
    /// In lexicographic order of [`Toxidrome::name`].
    pub const ALL: [Toxidrome; 6] = [
        Toxidrome::Anticholinergic,
        Toxidrome::Cholinergic,
        Toxidrome::Opioid,
        Toxidrome::SedativeHypnotic,
        Toxidrome::SerotoninToxicity,
        Toxidrome::Sympathomimetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Toxidrome::Anticholinergic => "anticholinergic",
            Toxidrome::Cholinergic => "cholinergic",
            Toxidrome::Opioid => "opioid",
            Toxidrome::SedativeHypnotic => "sedative_hypnotic",
            Toxidrome::SerotoninToxicity => "serotonin_toxicity",
            Toxidrome::Sympathomimetic => "sympathomimetic",
        }
    }

    /// Other constants a rule file may use for the same label.
    pub fn aliases(self) -> &'static [&'static str] {
        match self {
            Toxidrome::SerotoninToxicity => &["serotonergic"],
            _ => &[],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Toxidrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownName {
    pub kind: &'static str,
    pub name: String,
    pub expected: Vec<&'static str>,
}

impl fmt::Display for UnknownName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown {} `{}` (expected one of: {})",
            self.kind,
            self.name,
            self.expected.join(", ")
        )
    }
}

impl std::error::Error for UnknownName {}

impl FromStr for Toxidrome {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Toxidrome::ALL
            .into_iter()
            .find(|t| t.name() == s || t.aliases().contains(&s))
            .ok_or_else(|| UnknownName {
                kind: "toxidrome",
                name: s.to_string(),
                expected: Toxidrome::ALL.iter().map(|t| t.name()).collect(),
            })
    }
}

/// Bedside signs, in the column order of the toxidrome table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    HeartRate,
    BloodPressure,
    PupilDiameter,
    Secretions,
    Temperature,
    RespiratoryRate,
    MentalStatus,
}

impl Sign {
    pub const ALL: [Sign; 7] = [
        Sign::HeartRate,
        Sign::BloodPressure,
        Sign::PupilDiameter,
        Sign::Secretions,
        Sign::Temperature,
        Sign::RespiratoryRate,
        Sign::MentalStatus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sign::HeartRate => "heart_rate",
            Sign::BloodPressure => "blood_pressure",
            Sign::PupilDiameter => "pupil_diameter",
            Sign::Secretions => "secretions",
            Sign::Temperature => "temperature",
            Sign::RespiratoryRate => "respiratory_rate",
            Sign::MentalStatus => "mental_status",
        }
    }

    /// Predicate used for this sign in rule files.
    pub fn predicate(self) -> &'static str {
        match self {
            Sign::HeartRate => "heartRate",
            Sign::BloodPressure => "bloodPressure",
            Sign::PupilDiameter => "pupilDiameter",
            Sign::Secretions => "secretions",
            Sign::Temperature => "temperature",
            Sign::RespiratoryRate => "respiratoryRate",
            Sign::MentalStatus => "mentalStatus",
        }
    }

    pub fn domain(self) -> &'static [Value] {
        use Value::*;
        match self {
            Sign::PupilDiameter => &[Large, Normal, Small],
            Sign::MentalStatus => &[Agitated, Alert, Sedated, Delirious],
            _ => &[Increased, Normal, Decreased],
        }
    }

    /// The value recorded when the table leaves the cell empty.
    pub fn unremarkable(self) -> Value {
        match self {
            Sign::MentalStatus => Value::Alert,
            _ => Value::Normal,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sign {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sign::ALL
            .into_iter()
            .find(|sign| sign.name() == s)
            .ok_or_else(|| UnknownName {
                kind: "sign",
                name: s.to_string(),
                expected: Sign::ALL.iter().map(|s| s.name()).collect(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Increased,
    Normal,
    Decreased,
    Large,
    Small,
    Agitated,
    Alert,
    Sedated,
    Delirious,
}

impl Value {
    pub const ALL: [Value; 9] = [
        Value::Increased,
        Value::Normal,
        Value::Decreased,
        Value::Large,
        Value::Small,
        Value::Agitated,
        Value::Alert,
        Value::Sedated,
        Value::Delirious,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Value::Increased => "increased",
            Value::Normal => "normal",
            Value::Decreased => "decreased",
            Value::Large => "large",
            Value::Small => "small",
            Value::Agitated => "agitated",
            Value::Alert => "alert",
            Value::Sedated => "sedated",
            Value::Delirious => "delirious",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Value {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Value::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| UnknownName {
                kind: "value",
                name: s.to_string(),
                expected: Value::ALL.iter().map(|v| v.name()).collect(),
            })
    }
}

/// One observed sign with its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub sign: Sign,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FindingError {
    Syntax(String),
    Unknown(UnknownName),
    OutOfDomain { sign: Sign, value: Value },
}

impl fmt::Display for FindingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FindingError::Syntax(text) => write!(f, "expected `sign=value`, got `{text}`"),
            FindingError::Unknown(e) => e.fmt(f),
            FindingError::OutOfDomain { sign, value } => {
                let domain: Vec<&str> = sign.domain().iter().map(|v| v.name()).collect();
                write!(f, "`{value}` is not a value of {sign} (expected one of: {})", domain.join(", "))
            }
        }
    }
}

impl std::error::Error for FindingError {}

impl Finding {
    pub fn new(sign: Sign, value: Value) -> Result<Self, FindingError> {
        if sign.domain().contains(&value) {
            Ok(Self { sign, value })
        } else {
            Err(FindingError::OutOfDomain { sign, value })
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.sign, self.value)
    }
}

impl FromStr for Finding {
    type Err = FindingError;

    /// Parses `sign=value`, e.g. `mental_status=agitated`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (sign, value) = s.split_once('=').ok_or_else(|| FindingError::Syntax(s.to_string()))?;
        let sign: Sign = sign.trim().parse().map_err(FindingError::Unknown)?;
        let value: Value = value.trim().parse().map_err(FindingError::Unknown)?;
        Finding::new(sign, value)
    }
}

/// Canonical value of every sign for one toxidrome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToxidromeTemplate {
    pub toxidrome: Toxidrome,
    expected: [Value; 7],
}

impl ToxidromeTemplate {
    pub fn value(&self, sign: Sign) -> Value {
        self.expected[sign.index()]
    }

    pub fn findings(&self) -> impl Iterator<Item = Finding> + '_ {
        Sign::ALL.into_iter().map(|sign| Finding {
            sign,
            value: self.value(sign),
        })
    }

    /// Signs whose canonical value is not the unremarkable one.
    pub fn abnormal(&self) -> impl Iterator<Item = Finding> + '_ {
        self.findings().filter(|f| f.value != f.sign.unremarkable())
    }
}

/// The toxidrome table, with empty cells filled in as `normal`.
pub fn template_of(toxidrome: Toxidrome) -> ToxidromeTemplate {
    use Value::*;
    // heart rate, blood pressure, pupils, secretions, temperature, respiratory rate, mental status
    let expected = match toxidrome {
        Toxidrome::Anticholinergic => [Increased, Normal, Large, Decreased, Increased, Normal, Delirious],
        Toxidrome::Cholinergic => [Decreased, Normal, Small, Increased, Normal, Decreased, Sedated],
        Toxidrome::Opioid => [Normal, Normal, Small, Normal, Normal, Decreased, Sedated],
        Toxidrome::SedativeHypnotic => [Normal, Normal, Normal, Normal, Normal, Normal, Sedated],
        Toxidrome::SerotoninToxicity => [Increased, Increased, Normal, Normal, Increased, Normal, Agitated],
        Toxidrome::Sympathomimetic => [Increased, Increased, Large, Normal, Increased, Increased, Agitated],
    };
    ToxidromeTemplate { toxidrome, expected }
}

/// Looks a template up by toxidrome name.
pub fn template_named(name: &str) -> Result<ToxidromeTemplate, UnknownName> {
    name.parse().map(template_of)
}
