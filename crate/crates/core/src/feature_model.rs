//! Feature catalog, bit-vector configurations and dependency repair.
//!
//! A configuration holds one bit per optional feature, in model order. A set
//! bit means the feature is switched to its modified value; a clear bit keeps
//! the interpreter default. Compulsory features are always clear.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type FeatureId = u32;

/// A configuration value as written in the interpreter's config profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(true) => f.write_str("TRUE"),
            Scalar::Bool(false) => f.write_str("FALSE"),
            Scalar::Int(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub id: FeatureId,
    pub name: String,
    pub default: Scalar,
    pub modified: Scalar,
    #[serde(default)]
    pub category: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Flipping any antecedent requires flipping every consequent.
    ImpliesFlip,
    /// All group members carry the same bit.
    AllEqual,
    /// Either no member is flipped, or all are and nothing else is.
    ExclusiveGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyRule {
    pub rule_id: String,
    pub kind: RuleKind,
    #[serde(default)]
    pub antecedent: Vec<FeatureId>,
    #[serde(default)]
    pub consequent: Vec<FeatureId>,
    #[serde(default)]
    pub group: Vec<FeatureId>,
}

impl DependencyRule {
    /// Every feature id the rule mentions, ascending.
    pub fn members(&self) -> Vec<FeatureId> {
        let set: BTreeSet<FeatureId> = self
            .antecedent
            .iter()
            .chain(&self.consequent)
            .chain(&self.group)
            .copied()
            .collect();
        set.into_iter().collect()
    }
}

/// What repair does when the exclusive group is partially flipped or mixed
/// with other flips.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RomPolicy {
    #[default]
    Deactivate,
    ActivateAllReset,
}

#[derive(Debug, Deserialize)]
struct ModelFile {
    features: Vec<Feature>,
    #[serde(default)]
    rules: Vec<DependencyRule>,
    #[serde(default)]
    rom_policy: RomPolicy,
}

/// A rule resolved to bit positions.
#[derive(Debug, Clone)]
struct CompiledRule {
    kind: RuleKind,
    antecedent: Vec<usize>,
    consequent: Vec<usize>,
    group: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FeatureModel {
    features: Vec<Feature>,
    rules: Vec<DependencyRule>,
    compiled: Vec<CompiledRule>,
    index: HashMap<FeatureId, usize>,
    rom_policy: RomPolicy,
}

impl FeatureModel {
    pub fn new(
        features: Vec<Feature>,
        mut rules: Vec<DependencyRule>,
        rom_policy: RomPolicy,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(features.len());
        for (pos, f) in features.iter().enumerate() {
            if index.insert(f.id, pos).is_some() {
                return Err(Error::Validation(format!("duplicate feature id {}", f.id)));
            }
            if f.default == f.modified {
                return Err(Error::Validation(format!(
                    "feature {} has identical default and modified values",
                    f.id
                )));
            }
        }

        rules.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
        let mut seen_ids = BTreeSet::new();
        let mut exclusive = 0;
        let mut compiled = Vec::with_capacity(rules.len());
        for rule in &rules {
            if !seen_ids.insert(rule.rule_id.clone()) {
                return Err(Error::Validation(format!("duplicate rule id {}", rule.rule_id)));
            }
            let resolve = |ids: &[FeatureId]| -> Result<Vec<usize>> {
                ids.iter()
                    .map(|id| {
                        index.get(id).copied().ok_or_else(|| {
                            Error::Validation(format!(
                                "rule {} references unknown feature {id}",
                                rule.rule_id
                            ))
                        })
                    })
                    .collect()
            };
            let c = CompiledRule {
                kind: rule.kind,
                antecedent: resolve(&rule.antecedent)?,
                consequent: resolve(&rule.consequent)?,
                group: resolve(&rule.group)?,
            };
            match rule.kind {
                RuleKind::ImpliesFlip => {
                    if c.antecedent.is_empty() || c.consequent.is_empty() {
                        return Err(Error::Validation(format!(
                            "rule {} needs antecedent and consequent features",
                            rule.rule_id
                        )));
                    }
                }
                RuleKind::AllEqual | RuleKind::ExclusiveGroup => {
                    if c.group.len() < 2 {
                        return Err(Error::Validation(format!(
                            "rule {} needs a group of at least two features",
                            rule.rule_id
                        )));
                    }
                    if rule.kind == RuleKind::ExclusiveGroup {
                        exclusive += 1;
                    }
                }
            }
            compiled.push(c);
        }
        if exclusive > 1 {
            return Err(Error::Validation(
                "at most one exclusive_group rule is supported".into(),
            ));
        }

        Ok(Self { features, rules, compiled, index, rom_policy })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::new(file.features, file.rules, file.rom_policy)
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    /// Rules in ascending `rule_id` order.
    pub fn rules(&self) -> &[DependencyRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn rom_policy(&self) -> RomPolicy {
        self.rom_policy
    }

    pub fn with_rom_policy(mut self, policy: RomPolicy) -> Self {
        self.rom_policy = policy;
        self
    }

    pub fn position(&self, id: FeatureId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Feature ids of the exclusive group, empty when the model has none.
    pub fn rom_group(&self) -> Vec<FeatureId> {
        self.rules
            .iter()
            .find(|r| r.kind == RuleKind::ExclusiveGroup)
            .map(|r| r.group.clone())
            .unwrap_or_default()
    }

    /// Resolves compulsory ids to a mask over bit positions.
    pub fn compulsory_mask(&self, compulsory: &BTreeSet<FeatureId>) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.len()];
        for id in compulsory {
            let pos = self
                .position(*id)
                .ok_or_else(|| Error::Validation(format!("unknown compulsory feature {id}")))?;
            mask[pos] = true;
        }
        Ok(mask)
    }

    pub fn zero(&self) -> Configuration {
        Configuration::zeros(self.len())
    }

    /// Builds a configuration flipping exactly `ids`.
    pub fn config_from_ids(&self, ids: &[FeatureId]) -> Result<Configuration> {
        let mut c = self.zero();
        for id in ids {
            let pos = self
                .position(*id)
                .ok_or_else(|| Error::Validation(format!("unknown feature {id}")))?;
            c.set(pos, true);
        }
        Ok(c)
    }

    /// Ids of the flipped features, in model order.
    pub fn flipped_ids(&self, config: &Configuration) -> Vec<FeatureId> {
        config.ones().map(|pos| self.features[pos].id).collect()
    }

    /// Feature assignments for a configuration: modified value where the bit
    /// is set, default otherwise.
    pub fn decode(&self, config: &Configuration) -> Vec<(FeatureId, Scalar)> {
        self.features
            .iter()
            .zip(config.iter())
            .map(|(f, bit)| (f.id, if bit { f.modified } else { f.default }))
            .collect()
    }

    /// Inverse of [`decode`](Self::decode). Every feature of the model must
    /// be assigned either its default or its modified value.
    pub fn encode(&self, assignments: &[(FeatureId, Scalar)]) -> Result<Configuration> {
        let mut c = self.zero();
        let mut assigned = vec![false; self.len()];
        for (id, value) in assignments {
            let pos = self
                .position(*id)
                .ok_or_else(|| Error::Validation(format!("unknown feature {id}")))?;
            let f = &self.features[pos];
            let bit = if *value == f.modified {
                true
            } else if *value == f.default {
                false
            } else {
                return Err(Error::Validation(format!(
                    "value {value} is neither default nor modified for feature {id}"
                )));
            };
            c.set(pos, bit);
            assigned[pos] = true;
        }
        if let Some(pos) = assigned.iter().position(|a| !a) {
            return Err(Error::Validation(format!(
                "feature {} is not assigned",
                self.features[pos].id
            )));
        }
        Ok(c)
    }

    pub fn is_valid(&self, config: &Configuration, compulsory: &[bool]) -> bool {
        debug_assert_eq!(config.len(), self.len());
        if config.iter().zip(compulsory).any(|(bit, locked)| bit && *locked) {
            return false;
        }
        self.compiled.iter().all(|rule| self.satisfied(rule, config))
    }

    fn satisfied(&self, rule: &CompiledRule, c: &Configuration) -> bool {
        match rule.kind {
            RuleKind::ImpliesFlip => {
                !rule.antecedent.iter().any(|&p| c.get(p))
                    || rule.consequent.iter().all(|&p| c.get(p))
            }
            RuleKind::AllEqual => {
                let first = c.get(rule.group[0]);
                rule.group.iter().all(|&p| c.get(p) == first)
            }
            RuleKind::ExclusiveGroup => {
                let set = rule.group.iter().filter(|&&p| c.get(p)).count();
                set == 0 || (set == rule.group.len() && c.count_ones() == set)
            }
        }
    }

    /// Forces `config` to satisfy every rule and compulsory lock.
    ///
    /// Rules are visited in ascending `rule_id` order until nothing changes.
    /// A bit that repair clears stays locked for the rest of the pass, so a
    /// rule that needs a locked bit set gives way by clearing its own
    /// trigger. Each bit therefore moves at most twice and the loop ends.
    pub fn repair(&self, config: &Configuration, compulsory: &[bool]) -> Configuration {
        debug_assert_eq!(config.len(), self.len());
        let mut c = config.clone();
        let mut locked: Vec<bool> = compulsory.to_vec();
        for (pos, &l) in locked.iter().enumerate() {
            if l {
                c.set(pos, false);
            }
        }

        loop {
            let mut changed = false;
            for rule in &self.compiled {
                if self.satisfied(rule, &c) {
                    continue;
                }
                match rule.kind {
                    RuleKind::ImpliesFlip => {
                        if rule.consequent.iter().any(|&p| locked[p]) {
                            for &p in &rule.antecedent {
                                c.set(p, false);
                                locked[p] = true;
                            }
                        } else {
                            for &p in &rule.consequent {
                                c.set(p, true);
                            }
                        }
                    }
                    RuleKind::AllEqual => {
                        if rule.group.iter().any(|&p| locked[p]) {
                            for &p in &rule.group {
                                c.set(p, false);
                                locked[p] = true;
                            }
                        } else {
                            for &p in &rule.group {
                                c.set(p, true);
                            }
                        }
                    }
                    RuleKind::ExclusiveGroup => {
                        if self.rom_policy == RomPolicy::ActivateAllReset
                            && !rule.group.iter().any(|&p| locked[p])
                        {
                            let mut only_group = Configuration::zeros(self.len());
                            for &p in &rule.group {
                                only_group.set(p, true);
                            }
                            if self.is_valid(&only_group, compulsory) {
                                return only_group;
                            }
                        }
                        for &p in &rule.group {
                            c.set(p, false);
                            locked[p] = true;
                        }
                    }
                }
                changed = true;
            }
            if !changed {
                break;
            }
        }
        debug_assert!(self.is_valid(&c, compulsory));
        c
    }

    /// Draws each free bit with probability one half and repairs the result.
    pub fn random_valid(&self, compulsory: &[bool], seed: u64) -> Configuration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.random_valid_with(compulsory, &mut rng)
    }

    pub fn random_valid_with<R: Rng + ?Sized>(
        &self,
        compulsory: &[bool],
        rng: &mut R,
    ) -> Configuration {
        let mut c = Configuration::zeros(self.len());
        for (pos, &locked) in compulsory.iter().enumerate() {
            let bit: bool = rng.gen();
            if !locked {
                c.set(pos, bit);
            }
        }
        self.repair(&c, compulsory)
    }
}

/// Fixed-length bit-vector over the model's features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    bits: Vec<bool>,
}

impl Configuration {
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, pos: usize) -> bool {
        self.bits[pos]
    }

    pub fn set(&mut self, pos: usize, value: bool) {
        self.bits[pos] = value;
    }

    pub fn flip(&mut self, pos: usize) {
        self.bits[pos] = !self.bits[pos];
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn hamming(&self, other: &Configuration) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|b| if *b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit '{other}' in bitstring"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }
}

impl Serialize for Configuration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bitstring())
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppSpec {
    pub name: String,
    #[serde(default)]
    pub compulsory: BTreeSet<FeatureId>,
    pub base_memory_kb: f64,
    pub base_time_s: f64,
}

impl AppSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let app: AppSpec = serde_json::from_str(&text)?;
        app.check()?;
        Ok(app)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.base_memory_kb > 0.0 && self.base_time_s > 0.0) {
            return Err(Error::Validation(format!(
                "app {} needs positive baseline memory and time",
                self.name
            )));
        }
        Ok(())
    }

    /// Validates the compulsory ids against `model` and returns their mask.
    pub fn compulsory_mask(&self, model: &FeatureModel) -> Result<Vec<bool>> {
        model.compulsory_mask(&self.compulsory)
    }
}
