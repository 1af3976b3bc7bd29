// SPDX-License-Identifier: Apache-2.0

//! Scenario files: serde types and conversion into library objects.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use epiq::context::{Amplitude, ContextNetwork, Layer};
use epiq::evolution::{EvolutionRule, KnowabilityLevel};
use epiq::exact::{QComplex, QSqrt2};
use epiq::hilbert::JointVolumeTable;
use epiq::statespace::{
    induced_state, AttributeDef, AttributeKind, EpistemicState, ExactState, Exclusion, PropertySpec, Registry,
    Valuation,
};
use epiq::uniqueness::{CandidateMap, PolynomialMap};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Propagate,
    Montecarlo,
    Hilbert,
    Uniqueness,
    Validate,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Command::Propagate => "propagate",
            Command::Montecarlo => "montecarlo",
            Command::Hilbert => "hilbert",
            Command::Uniqueness => "uniqueness",
            Command::Validate => "validate",
        })
    }
}

/// A real number written as a JSON number or as an exact token such as
/// `"1/sqrt2"`, `"-3/5"` or `"2*sqrt2"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawNumber")]
pub struct ExactNumber(pub QSqrt2);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Float(f64),
    Token(String),
}

impl TryFrom<RawNumber> for ExactNumber {
    type Error = String;
    fn try_from(raw: RawNumber) -> Result<Self, String> {
        match raw {
            RawNumber::Float(x) => QSqrt2::from_f64_shortest(x)
                .map(ExactNumber)
                .ok_or_else(|| format!("number {x} is not finite")),
            RawNumber::Token(s) => s.parse::<QSqrt2>().map(ExactNumber).map_err(|e| e.to_string()),
        }
    }
}

impl ExactNumber {
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
}

/// A complex amplitude: a real number or an `[re, im]` pair.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AmplitudeToken {
    Real(ExactNumber),
    Pair([ExactNumber; 2]),
}

impl AmplitudeToken {
    pub fn to_amplitude(&self) -> Amplitude {
        match self {
            AmplitudeToken::Real(x) => Amplitude::exact(QComplex::real(x.0.clone())),
            AmplitudeToken::Pair([re, im]) => Amplitude::exact(QComplex::new(re.0.clone(), im.0.clone())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSection {
    pub id: String,
    pub kind: AttributeKind,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSection {
    pub id: String,
    pub attributes: Vec<String>,
}

/// "`object.attribute` is known not to hold `value`".
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusionSection {
    pub object: String,
    pub attribute: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySection {
    pub id: String,
    pub labels: Vec<f64>,
    pub object: String,
    pub attribute: String,
    /// Property value index for each attribute value; `null` leaves it undefined.
    pub map: Vec<Option<usize>>,
    /// Label of an extra value collecting the states where the map is undefined.
    #[serde(default)]
    pub trash_bin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpaceSection {
    pub attributes: Vec<AttributeSection>,
    pub objects: Vec<ObjectSection>,
    #[serde(default)]
    pub knowledge: Vec<ExclusionSection>,
    #[serde(default)]
    pub property: Option<PropertySection>,
    /// Knowability level of the property's alternatives.
    #[serde(default = "decided")]
    pub level: KnowabilityLevel,
}

fn decided() -> KnowabilityLevel {
    KnowabilityLevel::Decided
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSection {
    pub object: String,
    pub attribute: String,
    pub step: usize,
}

/// Exact states are lists of attribute values in slot order.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSection {
    pub from: Vec<String>,
    pub to: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default)]
    pub shift: Option<ShiftSection>,
    #[serde(default)]
    pub table: Option<Vec<TransitionSection>>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSection {
    pub property: String,
    pub level: KnowabilityLevel,
    pub labels: Vec<f64>,
    #[serde(default)]
    pub simultaneous: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSection {
    pub layers: Vec<LayerSection>,
    pub initial: Vec<AmplitudeToken>,
    pub edges: Vec<Vec<Vec<AmplitudeToken>>>,
    /// Resolves contingent layers: reachable path knowledge forces a
    /// reduction, unreachable knowledge leaves them unknowable.
    #[serde(default)]
    pub path_knowledge_reachable: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub property: String,
    pub groups: Vec<Vec<usize>>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertSection {
    #[serde(default)]
    pub joint_volumes: Option<Vec<Vec<ExactNumber>>>,
    /// Phases (radians) of the basis-change entries.
    #[serde(default)]
    pub phases: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub contract: Option<ContractSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum CandidateSpec {
    Named(String),
    Polynomial { polynomial: Vec<(u32, u32, f64)> },
}

impl CandidateSpec {
    pub fn to_candidate(&self) -> Result<CandidateMap, CliError> {
        match self {
            CandidateSpec::Named(name) => match name.as_str() {
                "real-identity" => Ok(CandidateMap::RealIdentity),
                "real-square" => Ok(CandidateMap::RealSquare),
                other => other
                    .strip_prefix("|a|^")
                    .and_then(|e| e.parse::<u32>().ok())
                    .filter(|e| *e >= 2 && e % 2 == 0)
                    .map(|e| CandidateMap::ModulusPower { gamma: e / 2 })
                    .ok_or_else(|| CliError::Schema(format!("uniqueness.candidates: unknown candidate `{other}`"))),
            },
            CandidateSpec::Polynomial { polynomial } => PolynomialMap::new(polynomial.clone())
                .map(CandidateMap::Polynomial)
                .map_err(|e| CliError::Schema(format!("uniqueness.candidates: {e}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessSection {
    pub shapes: Vec<(usize, usize)>,
    #[serde(default)]
    pub candidates: Option<Vec<CandidateSpec>>,
    #[serde(default)]
    pub starts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub statespace: Option<StateSpaceSection>,
    #[serde(default)]
    pub evolution: Option<EvolutionSection>,
    #[serde(default)]
    pub context: Option<ContextSection>,
    /// A bare outcome distribution for Monte Carlo runs.
    #[serde(default)]
    pub distribution: Option<Vec<ExactNumber>>,
    #[serde(default)]
    pub hilbert: Option<HilbertSection>,
    #[serde(default)]
    pub uniqueness: Option<UniquenessSection>,
    #[serde(default)]
    pub run: RunSection,
}

/// Parses scenario JSON, reporting the path of the offending field.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema(format!("{path}: {}", e.into_inner()))
    })?;
    if scenario.name.trim().is_empty() {
        return Err(CliError::Schema("name: must not be empty".into()));
    }
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// Library objects built from the state-space section.
pub struct StateSpaceModel {
    pub registry: Arc<Registry>,
    pub state: EpistemicState,
    pub property: Option<PropertySpec>,
    pub level: KnowabilityLevel,
}

fn domain<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Domain(e.to_string())
}

impl StateSpaceSection {
    pub fn build(&self) -> Result<StateSpaceModel, CliError> {
        let attributes = self
            .attributes
            .iter()
            .map(|a| AttributeDef::new(a.id.clone(), a.kind, a.values.clone()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(domain)?;
        let objects = self
            .objects
            .iter()
            .map(|o| (o.id.clone(), o.attributes.clone()))
            .collect();
        let registry = Arc::new(Registry::new(attributes, objects).map_err(domain)?);
        let knowledge = self
            .knowledge
            .iter()
            .map(|k| {
                let slot = registry.slot(&k.object, &k.attribute).map_err(domain)?;
                let value = value_index(&registry, slot, &k.value)?;
                Ok(Exclusion { slot, value })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let all = induced_state(registry.clone(), &knowledge).map_err(domain)?;
        let state = EpistemicState::physical(registry.clone(), all.members().clone()).map_err(domain)?;
        let property = match &self.property {
            None => None,
            Some(p) => {
                let slot = registry.slot(&p.object, &p.attribute).map_err(domain)?;
                if p.map.len() != registry.slot_attribute(slot).len() {
                    return Err(CliError::Domain(format!(
                        "property `{}`: map needs one entry per value of `{}`",
                        p.id, p.attribute
                    )));
                }
                let spec = PropertySpec::new(
                    p.id.clone(),
                    p.labels.clone(),
                    Valuation::Slot {
                        slot,
                        by_value: p.map.clone(),
                    },
                )
                .map_err(domain)?;
                Some(match p.trash_bin {
                    Some(label) => spec.with_trash_bin(label).map_err(domain)?,
                    None => spec,
                })
            }
        };
        Ok(StateSpaceModel {
            registry,
            state,
            property,
            level: self.level,
        })
    }
}

fn value_index(registry: &Registry, slot: usize, value: &str) -> Result<usize, CliError> {
    let attr = registry.slot_attribute(slot);
    attr.index_of(value)
        .ok_or_else(|| CliError::Domain(format!("attribute `{}` has no value `{value}`", attr.id())))
}

fn exact_state(registry: &Registry, values: &[String]) -> Result<ExactState, CliError> {
    if values.len() != registry.slot_count() {
        return Err(CliError::Domain(format!(
            "exact state needs {} values, got {}",
            registry.slot_count(),
            values.len()
        )));
    }
    let idx = values
        .iter()
        .enumerate()
        .map(|(slot, v)| value_index(registry, slot, v).map(|i| i as u16))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExactState::new(idx))
}

impl EvolutionSection {
    pub fn build(&self, registry: &Arc<Registry>) -> Result<EvolutionRule, CliError> {
        match (&self.shift, &self.table) {
            (Some(s), None) => {
                let slot = registry.slot(&s.object, &s.attribute).map_err(domain)?;
                EvolutionRule::shift(registry.clone(), slot, s.step).map_err(domain)
            }
            (None, Some(rows)) => {
                let mut table = BTreeMap::new();
                for row in rows {
                    let from = exact_state(registry, &row.from)?;
                    let to = row
                        .to
                        .iter()
                        .map(|t| exact_state(registry, t))
                        .collect::<Result<BTreeSet<_>, _>>()?;
                    table.insert(from, to);
                }
                EvolutionRule::new(registry.clone(), table).map_err(domain)
            }
            _ => Err(CliError::Schema(
                "evolution: exactly one of `shift` or `table` is required".into(),
            )),
        }
    }
}

impl ContextSection {
    pub fn build(&self) -> ContextNetwork {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let mut layer = Layer::new(l.property.clone(), l.level, l.labels.clone());
                layer.simultaneous = l.simultaneous;
                layer
            })
            .collect();
        let initial = self.initial.iter().map(AmplitudeToken::to_amplitude).collect();
        let edges = self
            .edges
            .iter()
            .map(|m| {
                m.iter()
                    .map(|r| r.iter().map(AmplitudeToken::to_amplitude).collect())
                    .collect()
            })
            .collect();
        ContextNetwork::new(layers, initial, edges)
    }
}

impl HilbertSection {
    pub fn joint_table(&self) -> Result<Option<JointVolumeTable>, CliError> {
        self.joint_volumes
            .as_ref()
            .map(|v| {
                JointVolumeTable::new(v.iter().map(|r| r.iter().map(ExactNumber::to_f64).collect()).collect())
                    .map_err(domain)
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_tokens() {
        let s = parse_scenario(
            r#"{"name":"t","distribution":["1/2", 0.25, "1/4"],
                "context":{"layers":[],"initial":["1/sqrt2",["0","-1/sqrt2"]],"edges":[]}}"#,
        )
        .unwrap();
        let d = s.distribution.unwrap();
        assert_eq!(d[1].0, QSqrt2::from_ratio(1, 4));
        let c = s.context.unwrap();
        let a = c.initial[1].to_amplitude();
        assert_eq!(a.exact_value().unwrap().im, -&QSqrt2::frac_1_sqrt2());
    }

    #[test]
    fn unknown_fields_are_schema_errors() {
        let err = parse_scenario(r#"{"name":"t","run":{"comand":"propagate"}}"#).unwrap_err();
        match err {
            CliError::Schema(msg) => assert!(msg.starts_with("run"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let err = parse_scenario(r#"{"name":"t","distribution":["1/sqrtx"]}"#).unwrap_err();
        match err {
            CliError::Schema(msg) => assert!(msg.contains("distribution[0]"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let err = parse_scenario(
            r#"{"name":"t","context":{"layers":[{"property":"p","level":4,"labels":[0]}],"initial":[],"edges":[]}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Schema(m) if m.contains("context.layers[0].level")));
    }

    #[test]
    fn candidate_names() {
        let c = CandidateSpec::Named("|a|^4".into()).to_candidate().unwrap();
        assert_eq!(c, CandidateMap::ModulusPower { gamma: 2 });
        assert!(CandidateSpec::Named("|a|^3".into()).to_candidate().is_err());
    }
}
