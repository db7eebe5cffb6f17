//! Markets as data: outcome spaces, share labels, payoff tables and the
//! structural checks that make a market well-formed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::MarketId;
use crate::units::{div_round_half_even, Price, SCALE};

/// Label suffixes used by yes/no bundle markets: `<bundle>:YES`, `<bundle>:NO`.
pub const YES_SUFFIX: &str = ":YES";
pub const NO_SUFFIX: &str = ":NO";
/// Labels of a scalar market.
pub const LONG: &str = "LONG";
pub const SHORT: &str = "SHORT";
/// Bundle id used by markets that form a single bundle.
pub const SINGLE_BUNDLE: &str = "*";

pub const DEFAULT_SCALAR_PRECISION: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffKind {
    /// Winner-take-all: one unit label per outcome.
    Wta,
    /// Yes/no bundles, one complementary pair per bundle.
    Ynb,
    /// Yes/no bundles whose YES labels are jointly winner-take-all.
    YnbNr,
    /// One linear share (plus its complement) on a bounded quantity.
    Scalar,
    /// Arbitrary payoff table; only distinguishability is enforced.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShareLabel {
    pub id: String,
    pub name: String,
}

impl<'de> Deserialize<'de> for ShareLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Bare(String),
            Full {
                id: String,
                #[serde(default)]
                name: Option<String>,
            },
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Bare(id) => ShareLabel::new(id),
            Repr::Full { id, name } => {
                let name = name.unwrap_or_else(|| id.clone());
                ShareLabel { id, name }
            }
        })
    }
}

impl ShareLabel {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Self { name: id.clone(), id }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarSpec {
    /// Lower bound, in quantity units.
    pub a: i64,
    /// Upper bound, in quantity units.
    pub b: i64,
    /// Decimal places kept in the normalized payout.
    #[serde(default = "default_precision")]
    pub precision: u32,
    #[serde(default)]
    pub quantity: String,
}

fn default_precision() -> u32 {
    DEFAULT_SCALAR_PRECISION
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub id: MarketId,
    pub event: String,
    #[serde(default)]
    pub outcomes: Vec<String>,
    pub labels: Vec<ShareLabel>,
    pub kind: PayoffKind,
    /// Sparse payoff table `label -> outcome -> micro-units per share`.
    /// Missing entries pay zero.
    #[serde(default)]
    pub payoffs: BTreeMap<String, BTreeMap<String, Price>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<ScalarSpec>,
    pub resolution_policy: String,
    /// Logical tick of creation; assigned by the engine.
    #[serde(default)]
    pub created: u64,
}

impl MarketSpec {
    /// Winner-take-all market with one label per outcome, named after it.
    pub fn wta(id: &str, outcomes: &[&str], policy: &str) -> Self {
        let mut payoffs = BTreeMap::new();
        for o in outcomes {
            payoffs.insert(o.to_string(), BTreeMap::from([(o.to_string(), SCALE)]));
        }
        Self {
            id: id.into(),
            event: format!("Which outcome of {id} occurs?"),
            outcomes: outcomes.iter().map(|s| s.to_string()).collect(),
            labels: outcomes.iter().map(|o| ShareLabel::new(*o)).collect(),
            kind: PayoffKind::Wta,
            payoffs,
            scalar: None,
            resolution_policy: policy.into(),
            created: 0,
        }
    }

    /// Binary market over `{True, False}` with labels `YES` and `NO`.
    pub fn binary(id: &str, policy: &str) -> Self {
        let mut spec = Self::wta(id, &["True", "False"], policy);
        spec.labels = vec![ShareLabel::new("YES"), ShareLabel::new("NO")];
        spec.payoffs = BTreeMap::from([
            ("YES".to_string(), BTreeMap::from([("True".to_string(), SCALE)])),
            ("NO".to_string(), BTreeMap::from([("False".to_string(), SCALE)])),
        ]);
        spec
    }

    /// Yes/no bundle market with one bundle per outcome.
    pub fn ynb(id: &str, outcomes: &[&str], neg_risk: bool, policy: &str) -> Self {
        let mut labels = Vec::new();
        let mut payoffs = BTreeMap::new();
        for k in outcomes {
            let yes = format!("{k}{YES_SUFFIX}");
            let no = format!("{k}{NO_SUFFIX}");
            payoffs.insert(yes.clone(), BTreeMap::from([(k.to_string(), SCALE)]));
            payoffs.insert(
                no.clone(),
                outcomes.iter().filter(|o| *o != k).map(|o| (o.to_string(), SCALE)).collect(),
            );
            labels.push(ShareLabel::new(yes));
            labels.push(ShareLabel::new(no));
        }
        Self {
            id: id.into(),
            event: format!("Which outcome of {id} occurs?"),
            outcomes: outcomes.iter().map(|s| s.to_string()).collect(),
            labels,
            kind: if neg_risk { PayoffKind::YnbNr } else { PayoffKind::Ynb },
            payoffs,
            scalar: None,
            resolution_policy: policy.into(),
            created: 0,
        }
    }

    pub fn scalar(id: &str, a: i64, b: i64, precision: u32, policy: &str) -> Self {
        Self {
            id: id.into(),
            event: format!("Observed value of {id}"),
            outcomes: vec![],
            labels: vec![ShareLabel::new(LONG), ShareLabel::new(SHORT)],
            kind: PayoffKind::Scalar,
            payoffs: BTreeMap::new(),
            scalar: Some(ScalarSpec { a, b, precision, quantity: "X".into() }),
            resolution_policy: policy.into(),
            created: 0,
        }
    }

    fn payoff_entry(&self, label: &str, outcome: &str) -> Price {
        self.payoffs.get(label).and_then(|row| row.get(outcome)).copied().unwrap_or(0)
    }
}

/// A structural defect found by [`validate_market`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    EmptyOutcomeSpace,
    NoLabels,
    DuplicateOutcome { outcome: String },
    DuplicateLabel { label: String },
    PayoffForUnknownLabel { label: String },
    PayoffForUnknownOutcome { label: String, outcome: String },
    Indistinguishable { first: String, second: String },
    WtaNotBijective,
    WtaNonUnitPayoff { label: String, outcome: String },
    WtaNotExclusive { outcome: String },
    WtaIncomplete { outcome: String },
    YnbMalformedLabel { label: String },
    YnbUnpaired { bundle: String },
    YnbPairNotComplementary { bundle: String, outcome: String },
    YnbNrYesNotWta { outcome: String },
    ScalarMissingBounds,
    ScalarBounds { a: i64, b: i64 },
    ScalarPrecision { precision: u32 },
    ScalarOutcomesGiven,
    ScalarLabels,
    ScalarPayoffsGiven,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            EmptyOutcomeSpace => write!(f, "outcome space is empty"),
            NoLabels => write!(f, "no share labels"),
            DuplicateOutcome { outcome } => write!(f, "duplicate outcome {outcome}"),
            DuplicateLabel { label } => write!(f, "duplicate label {label}"),
            PayoffForUnknownLabel { label } => write!(f, "payoff row for unknown label {label}"),
            PayoffForUnknownOutcome { label, outcome } => {
                write!(f, "payoff of {label} names unknown outcome {outcome}")
            }
            Indistinguishable { first, second } => {
                write!(f, "outcomes {first} and {second} have identical payoffs")
            }
            WtaNotBijective => write!(f, "labels are not in bijection with outcomes"),
            WtaNonUnitPayoff { label, outcome } => {
                write!(f, "{label} pays a non 0/1 amount at {outcome}")
            }
            WtaNotExclusive { outcome } => write!(f, "more than one label wins at {outcome}"),
            WtaIncomplete { outcome } => write!(f, "no label wins at {outcome}"),
            YnbMalformedLabel { label } => write!(f, "label {label} is not <bundle>:YES or <bundle>:NO"),
            YnbUnpaired { bundle } => write!(f, "bundle {bundle} lacks its YES or NO label"),
            YnbPairNotComplementary { bundle, outcome } => {
                write!(f, "bundle {bundle} is not a binary winner-take-all pair at {outcome}")
            }
            YnbNrYesNotWta { outcome } => {
                write!(f, "YES labels are not winner-take-all at {outcome}")
            }
            ScalarMissingBounds => write!(f, "scalar market without bounds"),
            ScalarBounds { a, b } => write!(f, "scalar bounds {a} >= {b}"),
            ScalarPrecision { precision } => write!(f, "scalar precision {precision} exceeds 6"),
            ScalarOutcomesGiven => write!(f, "scalar markets synthesize their outcome space"),
            ScalarLabels => write!(f, "scalar labels must be exactly LONG and SHORT"),
            ScalarPayoffsGiven => write!(f, "scalar payoffs are computed, not tabulated"),
        }
    }
}

/// Returns every structural violation of `spec`; empty means valid.
pub fn validate_market(spec: &MarketSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if spec.labels.is_empty() {
        out.push(Violation::NoLabels);
    }
    let mut seen = BTreeSet::new();
    for l in &spec.labels {
        if !seen.insert(l.id.as_str()) {
            out.push(Violation::DuplicateLabel { label: l.id.clone() });
        }
    }

    if spec.kind == PayoffKind::Scalar {
        validate_scalar(spec, &mut out);
        return out;
    }

    if spec.outcomes.is_empty() {
        out.push(Violation::EmptyOutcomeSpace);
    }
    let mut outcomes = BTreeSet::new();
    for o in &spec.outcomes {
        if !outcomes.insert(o.as_str()) {
            out.push(Violation::DuplicateOutcome { outcome: o.clone() });
        }
    }
    for (label, row) in &spec.payoffs {
        if !seen.contains(label.as_str()) {
            out.push(Violation::PayoffForUnknownLabel { label: label.clone() });
        }
        for o in row.keys() {
            if !outcomes.contains(o.as_str()) {
                out.push(Violation::PayoffForUnknownOutcome { label: label.clone(), outcome: o.clone() });
            }
        }
    }
    if !out.is_empty() {
        return out;
    }

    // Distinguishability: group outcomes by their payoff column.
    let mut columns: BTreeMap<Vec<Price>, &str> = BTreeMap::new();
    for o in &spec.outcomes {
        let col: Vec<Price> = spec.labels.iter().map(|l| spec.payoff_entry(&l.id, o)).collect();
        if let Some(first) = columns.get(&col) {
            out.push(Violation::Indistinguishable { first: first.to_string(), second: o.clone() });
        } else {
            columns.insert(col, o);
        }
    }

    match spec.kind {
        PayoffKind::Wta => {
            let ids: Vec<&str> = spec.labels.iter().map(|l| l.id.as_str()).collect();
            check_wta(spec, &ids, &mut out, false);
        }
        PayoffKind::Ynb | PayoffKind::YnbNr => check_ynb(spec, &mut out),
        PayoffKind::Custom | PayoffKind::Scalar => {}
    }
    out
}

fn validate_scalar(spec: &MarketSpec, out: &mut Vec<Violation>) {
    match &spec.scalar {
        None => out.push(Violation::ScalarMissingBounds),
        Some(s) => {
            if s.a >= s.b {
                out.push(Violation::ScalarBounds { a: s.a, b: s.b });
            }
            if s.precision > 6 {
                out.push(Violation::ScalarPrecision { precision: s.precision });
            }
        }
    }
    if !spec.outcomes.is_empty() {
        out.push(Violation::ScalarOutcomesGiven);
    }
    let ids: BTreeSet<&str> = spec.labels.iter().map(|l| l.id.as_str()).collect();
    if spec.labels.len() != 2 || ids != BTreeSet::from([LONG, SHORT]) {
        out.push(Violation::ScalarLabels);
    }
    if !spec.payoffs.is_empty() {
        out.push(Violation::ScalarPayoffsGiven);
    }
}

/// Exclusivity, completeness and bijection over `labels`.
fn check_wta(spec: &MarketSpec, labels: &[&str], out: &mut Vec<Violation>, yes_only: bool) {
    let mut winners_per_label: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &spec.outcomes {
        let mut winners = 0;
        let mut sum: u128 = 0;
        for l in labels {
            let r = spec.payoff_entry(l, o);
            if r != 0 && r != SCALE && !yes_only {
                out.push(Violation::WtaNonUnitPayoff { label: l.to_string(), outcome: o.clone() });
            }
            if r != 0 {
                winners += 1;
                *winners_per_label.entry(l).or_default() += 1;
            }
            sum += r as u128;
        }
        if winners > 1 {
            out.push(if yes_only {
                Violation::YnbNrYesNotWta { outcome: o.clone() }
            } else {
                Violation::WtaNotExclusive { outcome: o.clone() }
            });
        } else if sum != SCALE as u128 {
            out.push(if yes_only {
                Violation::YnbNrYesNotWta { outcome: o.clone() }
            } else {
                Violation::WtaIncomplete { outcome: o.clone() }
            });
        }
    }
    let bijective = labels.len() == spec.outcomes.len()
        && labels.iter().all(|l| winners_per_label.get(l) == Some(&1));
    if !bijective {
        out.push(if yes_only {
            Violation::YnbNrYesNotWta { outcome: "*".into() }
        } else {
            Violation::WtaNotBijective
        });
    }
}

fn check_ynb(spec: &MarketSpec, out: &mut Vec<Violation>) {
    let mut pairs: BTreeMap<&str, (Option<&str>, Option<&str>)> = BTreeMap::new();
    for l in &spec.labels {
        if let Some(k) = l.id.strip_suffix(YES_SUFFIX) {
            pairs.entry(k).or_default().0 = Some(&l.id);
        } else if let Some(k) = l.id.strip_suffix(NO_SUFFIX) {
            pairs.entry(k).or_default().1 = Some(&l.id);
        } else {
            out.push(Violation::YnbMalformedLabel { label: l.id.clone() });
        }
    }
    let mut yes_labels = Vec::new();
    for (k, pair) in &pairs {
        let (Some(y), Some(n)) = pair else {
            out.push(Violation::YnbUnpaired { bundle: k.to_string() });
            continue;
        };
        yes_labels.push(*y);
        for o in &spec.outcomes {
            let ry = spec.payoff_entry(y, o);
            let rn = spec.payoff_entry(n, o);
            let binary = (ry == 0 || ry == SCALE) && (rn == 0 || rn == SCALE);
            if !binary || ry + rn != SCALE {
                out.push(Violation::YnbPairNotComplementary { bundle: k.to_string(), outcome: o.clone() });
            }
        }
    }
    if spec.kind == PayoffKind::YnbNr && !yes_labels.is_empty() {
        check_wta(spec, &yes_labels, out, true);
    }
}

/// A group of labels sharing one treasury slice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bundle {
    pub id: String,
    pub labels: Vec<usize>,
    /// Set when the bundle is a complementary pair (YES side / long side).
    pub yes: Option<usize>,
    pub no: Option<usize>,
    /// Outcome index on which the YES label pays, for negative-risk bundles.
    pub outcome: Option<usize>,
    /// True when one unit of every label pays exactly one unit under every outcome.
    pub complete_set: bool,
}

/// A resolved outcome as recorded in the register.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Scalar { x: i64, payout: Price },
    Categorical(String),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Categorical(s) => f.write_str(s),
            Outcome::Scalar { x, .. } => write!(f, "{x}"),
        }
    }
}

/// Outcome as supplied by a caller: a named outcome, or an observed quantity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutcomeArg {
    Quantity(i64),
    Name(String),
}

impl From<&str> for OutcomeArg {
    fn from(s: &str) -> Self {
        OutcomeArg::Name(s.to_owned())
    }
}

impl fmt::Display for OutcomeArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeArg::Quantity(x) => write!(f, "{x}"),
            OutcomeArg::Name(s) => f.write_str(s),
        }
    }
}

/// A validated market with index structures for fast payoff lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Market {
    pub spec: MarketSpec,
    labels: Vec<String>,
    label_ix: BTreeMap<String, usize>,
    outcome_ix: BTreeMap<String, usize>,
    /// `table[label][column]`; scalar markets carry the two bound columns.
    table: Vec<Vec<Price>>,
    bundles: Vec<Bundle>,
}

impl Market {
    pub fn new(spec: MarketSpec) -> Result<Self> {
        let violations = validate_market(&spec);
        if !violations.is_empty() {
            return Err(EngineError::InvalidSpec(violations));
        }
        let labels: Vec<String> = spec.labels.iter().map(|l| l.id.clone()).collect();
        let label_ix: BTreeMap<String, usize> =
            labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let outcome_ix = spec.outcomes.iter().enumerate().map(|(i, o)| (o.clone(), i)).collect();

        let table: Vec<Vec<Price>> = if spec.kind == PayoffKind::Scalar {
            labels
                .iter()
                .map(|l| if l == LONG { vec![0, SCALE] } else { vec![SCALE, 0] })
                .collect()
        } else {
            labels
                .iter()
                .map(|l| spec.outcomes.iter().map(|o| spec.payoff_entry(l, o)).collect())
                .collect()
        };

        let bundles = match spec.kind {
            PayoffKind::Ynb | PayoffKind::YnbNr => {
                let mut ids: Vec<&str> = Vec::new();
                for l in &labels {
                    if let Some(k) = l.strip_suffix(YES_SUFFIX) {
                        ids.push(k);
                    }
                }
                ids.iter()
                    .map(|k| {
                        let y = label_ix[&format!("{k}{YES_SUFFIX}")];
                        let n = label_ix[&format!("{k}{NO_SUFFIX}")];
                        let outcome = table[y].iter().position(|&r| r == SCALE);
                        Bundle {
                            id: k.to_string(),
                            labels: vec![y, n],
                            yes: Some(y),
                            no: Some(n),
                            outcome,
                            complete_set: true,
                        }
                    })
                    .collect()
            }
            _ => {
                let all: Vec<usize> = (0..labels.len()).collect();
                let complete_set = (0..table.first().map_or(0, Vec::len))
                    .all(|c| all.iter().map(|&j| table[j][c] as u128).sum::<u128>() == SCALE as u128);
                let (yes, no) = if spec.kind == PayoffKind::Scalar {
                    (Some(label_ix[LONG]), Some(label_ix[SHORT]))
                } else if labels.len() == 2 {
                    (Some(0), Some(1))
                } else {
                    (None, None)
                };
                vec![Bundle {
                    id: SINGLE_BUNDLE.to_string(),
                    labels: all,
                    yes,
                    no,
                    outcome: None,
                    complete_set,
                }]
            }
        };

        Ok(Self { spec, labels, label_ix, outcome_ix, table, bundles })
    }

    pub fn id(&self) -> &MarketId {
        &self.spec.id
    }

    pub fn kind(&self) -> PayoffKind {
        self.spec.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn outcomes(&self) -> &[String] {
        &self.spec.outcomes
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.label_ix.get(label).copied().ok_or_else(|| EngineError::UnknownLabel {
            market: self.spec.id.clone(),
            label: label.to_owned(),
        })
    }

    pub fn outcome_index(&self, outcome: &str) -> Result<usize> {
        self.outcome_ix.get(outcome).copied().ok_or_else(|| EngineError::UnknownOutcome {
            market: self.spec.id.clone(),
            outcome: outcome.to_owned(),
        })
    }

    pub fn bundle(&self, id: &str) -> Result<&Bundle> {
        self.bundles.iter().find(|b| b.id == id).ok_or_else(|| EngineError::UnknownBundle {
            market: self.spec.id.clone(),
            bundle: id.to_owned(),
        })
    }

    /// Bundle containing `label`.
    pub fn bundle_of(&self, label: usize) -> &Bundle {
        self.bundles.iter().find(|b| b.labels.contains(&label)).expect("every label is in a bundle")
    }

    /// Resolves an optional bundle argument: single-bundle markets accept none.
    pub fn select_bundle(&self, bundle: Option<&str>) -> Result<&Bundle> {
        match bundle {
            Some(b) => self.bundle(b),
            None if self.bundles.len() == 1 => Ok(&self.bundles[0]),
            None => Err(EngineError::BundleRequired(self.spec.id.clone())),
        }
    }

    /// Negative-risk bundle keyed by outcome name (or bundle id).
    pub fn neg_risk_bundle(&self, key: &str) -> Result<&Bundle> {
        if self.kind() != PayoffKind::YnbNr {
            return Err(EngineError::NotNegRisk(self.spec.id.clone()));
        }
        if let Ok(o) = self.outcome_index(key) {
            if let Some(b) = self.bundles.iter().find(|b| b.outcome == Some(o)) {
                return Ok(b);
            }
        }
        self.bundle(key)
    }

    /// The partner of `label` in a two-label bundle.
    pub fn complement(&self, label: usize) -> Option<usize> {
        let b = self.bundle_of(label);
        match (b.yes, b.no) {
            (Some(y), Some(n)) if y == label => Some(n),
            (Some(y), Some(n)) if n == label => Some(y),
            _ => None,
        }
    }

    /// Maximum per-share payout of a label over all outcomes.
    pub fn payout_ceiling(&self, label: usize) -> Price {
        self.table[label].iter().copied().max().unwrap_or(0)
    }

    /// Outcome on which `label` pays one unit and elsewhere nothing, if any.
    pub fn winning_outcome_of(&self, label: usize) -> Option<&str> {
        if self.kind() == PayoffKind::Scalar {
            return None;
        }
        let row = &self.table[label];
        let winners: Vec<usize> = row.iter().enumerate().filter(|(_, &r)| r != 0).map(|(i, _)| i).collect();
        match winners.as_slice() {
            [w] if row[*w] == SCALE => Some(&self.spec.outcomes[*w]),
            _ => None,
        }
    }

    /// Normalized scalar payout of the long share at observed quantity `x`.
    pub fn scalar_payout(&self, x: i64) -> Option<Price> {
        let s = self.spec.scalar.as_ref()?;
        Some(scalar_payout(s, x))
    }

    /// Turns a caller-supplied outcome into the canonical register value.
    pub fn resolve_outcome(&self, arg: &OutcomeArg) -> Result<Outcome> {
        match (self.kind(), arg) {
            (PayoffKind::Scalar, OutcomeArg::Quantity(x)) => {
                Ok(Outcome::Scalar { x: *x, payout: self.scalar_payout(*x).unwrap_or(0) })
            }
            (PayoffKind::Scalar, OutcomeArg::Name(n)) => match n.parse::<i64>() {
                Ok(x) => self.resolve_outcome(&OutcomeArg::Quantity(x)),
                Err(_) => Err(EngineError::UnknownOutcome { market: self.spec.id.clone(), outcome: n.clone() }),
            },
            (_, OutcomeArg::Name(n)) => {
                self.outcome_index(n)?;
                Ok(Outcome::Categorical(n.clone()))
            }
            (_, OutcomeArg::Quantity(x)) => {
                let n = x.to_string();
                self.outcome_index(&n)?;
                Ok(Outcome::Categorical(n))
            }
        }
    }

    /// Per-share payout of `label` once the market resolved to `outcome`.
    pub fn payoff(&self, label: &str, outcome: &Outcome) -> Result<Price> {
        let j = self.label_index(label)?;
        self.payoff_ix(j, outcome)
    }

    pub fn payoff_ix(&self, j: usize, outcome: &Outcome) -> Result<Price> {
        match outcome {
            Outcome::Scalar { payout, .. } => {
                Ok(if self.labels[j] == LONG { *payout } else { SCALE - *payout })
            }
            Outcome::Categorical(o) => Ok(self.table[j][self.outcome_index(o)?]),
        }
    }

    /// Payout vectors (one entry per label) to enumerate for worst-case
    /// liability. Before resolution every outcome counts; afterwards only the
    /// realized one can be claimed.
    pub fn liability_scenarios(&self, resolved: Option<&Outcome>) -> Vec<Vec<Price>> {
        match resolved {
            Some(o) => vec![(0..self.labels.len()).map(|j| self.payoff_ix(j, o).unwrap_or(0)).collect()],
            None => {
                let cols = self.table.first().map_or(0, Vec::len);
                (0..cols).map(|c| self.table.iter().map(|row| row[c]).collect()).collect()
            }
        }
    }
}

/// Linear share payout: clamp `(x - a) / (b - a)` to `[0, 1]` and round it to
/// `precision` decimals (ties to even).
pub fn scalar_payout(s: &ScalarSpec, x: i64) -> Price {
    if x <= s.a {
        return 0;
    }
    if x >= s.b {
        return SCALE;
    }
    let units = 10i128.pow(s.precision.min(6));
    let level = div_round_half_even((x as i128 - s.a as i128) * units, s.b as i128 - s.a as i128);
    let level = level.clamp(0, units);
    (level * (SCALE as i128 / units)) as Price
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> MarketSpec {
        MarketSpec::wta("m", &["A", "B", "C"], "p")
    }

    #[test]
    fn canonical_wta_is_valid() {
        assert!(validate_market(&abc()).is_empty());
        assert!(validate_market(&MarketSpec::binary("hal", "p")).is_empty());
    }

    #[test]
    fn missing_share_is_incomplete() {
        let mut spec = abc();
        spec.labels.retain(|l| l.id != "C");
        spec.payoffs.remove("C");
        let v = validate_market(&spec);
        assert!(v.contains(&Violation::WtaIncomplete { outcome: "C".into() }), "{v:?}");
    }

    #[test]
    fn overlapping_winners_are_not_exclusive() {
        let mut spec = abc();
        spec.payoffs.get_mut("A").unwrap().insert("B".into(), SCALE);
        let v = validate_market(&spec);
        assert!(v.contains(&Violation::WtaNotExclusive { outcome: "B".into() }), "{v:?}");
    }

    #[test]
    fn identical_columns_are_indistinguishable() {
        let mut spec = MarketSpec::wta("m", &["A", "B"], "p");
        spec.kind = PayoffKind::Custom;
        spec.payoffs.get_mut("A").unwrap().insert("B".into(), SCALE);
        spec.payoffs.get_mut("B").unwrap().insert("A".into(), SCALE);
        let v = validate_market(&spec);
        assert_eq!(v, vec![Violation::Indistinguishable { first: "A".into(), second: "B".into() }]);
    }

    #[test]
    fn empty_outcome_space_rejected() {
        let mut spec = abc();
        spec.outcomes.clear();
        spec.payoffs.clear();
        assert!(validate_market(&spec).contains(&Violation::EmptyOutcomeSpace));
        assert!(matches!(Market::new(spec), Err(EngineError::InvalidSpec(_))));
    }

    #[test]
    fn ynb_pairs_and_neg_risk() {
        let spec = MarketSpec::ynb("hbo", &["A", "B", "C"], true, "p");
        assert!(validate_market(&spec).is_empty());
        let m = Market::new(spec).unwrap();
        assert_eq!(m.bundles().len(), 3);
        assert_eq!(m.neg_risk_bundle("B").unwrap().id, "B");

        // A YNB whose YES side double-pays is fine as plain YNB, not as negative risk.
        let mut words = MarketSpec::ynb("w", &["x", "y"], false, "p");
        words.outcomes.push("both".into());
        for l in ["x:YES", "y:YES"] {
            words.payoffs.get_mut(l).unwrap().insert("both".into(), SCALE);
        }
        assert!(validate_market(&words).is_empty(), "{:?}", validate_market(&words));
        words.kind = PayoffKind::YnbNr;
        assert!(validate_market(&words).contains(&Violation::YnbNrYesNotWta { outcome: "both".into() }));
    }

    #[test]
    fn ynb_rejects_unpaired_label() {
        let mut spec = MarketSpec::ynb("m", &["A", "B"], false, "p");
        spec.labels.retain(|l| l.id != "B:NO");
        spec.payoffs.remove("B:NO");
        assert!(validate_market(&spec).contains(&Violation::YnbUnpaired { bundle: "B".into() }));
    }

    #[test]
    fn wta_payoffs_are_indicators() {
        let m = Market::new(abc()).unwrap();
        let b = Outcome::Categorical("B".into());
        let got: Vec<Price> = ["A", "B", "C"].iter().map(|l| m.payoff(l, &b).unwrap()).collect();
        assert_eq!(got, vec![0, SCALE, 0]);
        assert!(matches!(m.payoff("D", &b), Err(EngineError::UnknownLabel { .. })));
        assert!(matches!(
            m.resolve_outcome(&OutcomeArg::from("Z")),
            Err(EngineError::UnknownOutcome { .. })
        ));
    }

    #[test]
    fn scalar_payout_matches_linear_share() {
        // Bounds in micro-percent: [0%, 100%], observed 49.8%.
        let m = Market::new(MarketSpec::scalar("pv", 0, 100_000_000, 3, "p")).unwrap();
        let o = m.resolve_outcome(&OutcomeArg::Quantity(49_800_000)).unwrap();
        assert_eq!(m.payoff(LONG, &o).unwrap(), 498_000);
        assert_eq!(m.payoff(SHORT, &o).unwrap(), 502_000);
        assert_eq!(m.scalar_payout(-5), Some(0));
        assert_eq!(m.scalar_payout(100_000_000), Some(SCALE));
        assert_eq!(m.scalar_payout(200_000_000), Some(SCALE));
        // 0.4985 rounds to even at three decimals.
        assert_eq!(m.scalar_payout(49_850_000), Some(498_000));
        assert_eq!(m.scalar_payout(49_950_000), Some(500_000));
    }

    #[test]
    fn scalar_bounds_checked() {
        let spec = MarketSpec::scalar("pv", 5, 5, 3, "p");
        assert!(validate_market(&spec).contains(&Violation::ScalarBounds { a: 5, b: 5 }));
    }

    #[test]
    fn spec_json_round_trip_accepts_bare_labels() {
        let json = r#"{"id":"m","event":"e","outcomes":["A","B"],"labels":["A",{"id":"B","name":"Bee"}],
            "kind":"wta","payoffs":{"A":{"A":1000000},"B":{"B":1000000}},"resolution_policy":"p"}"#;
        let spec: MarketSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.labels[1].name, "Bee");
        assert!(validate_market(&spec).is_empty());
    }
}
