//! Named regressor groupings.
//!
//! Manifests are TOML documents mapping a group name to the regressor series
//! it contains. `all`, `none` and `cpi_only` are derived from the dataset when
//! resolved and must not list members.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Dataset, SeriesId};

/// Manifest bundled with the crate.
pub const DEFAULT_GROUPS: &str = include_str!("../data/default_groups.toml");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupName {
    All,
    None,
    CpiOnly,
    Economic,
    Climate,
    Geopolitical,
    Manufacturing,
    LlmSelected,
    HumanSelected,
    Custom(String),
}

impl GroupName {
    pub fn is_derived(&self) -> bool {
        matches!(self, GroupName::All | GroupName::None | GroupName::CpiOnly)
    }

    pub fn as_str(&self) -> &str {
        match self {
            GroupName::All => "all",
            GroupName::None => "none",
            GroupName::CpiOnly => "cpi_only",
            GroupName::Economic => "economic",
            GroupName::Climate => "climate",
            GroupName::Geopolitical => "geopolitical",
            GroupName::Manufacturing => "manufacturing",
            GroupName::LlmSelected => "llm_selected",
            GroupName::HumanSelected => "human_selected",
            GroupName::Custom(name) => name,
        }
    }
}

impl FromStr for GroupName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => GroupName::All,
            "none" => GroupName::None,
            "cpi_only" => GroupName::CpiOnly,
            "economic" => GroupName::Economic,
            "climate" => GroupName::Climate,
            "geopolitical" => GroupName::Geopolitical,
            "manufacturing" => GroupName::Manufacturing,
            "llm_selected" => GroupName::LlmSelected,
            "human_selected" => GroupName::HumanSelected,
            custom if custom.starts_with("custom:") && custom.len() > "custom:".len() => {
                GroupName::Custom(custom.to_string())
            }
            other => {
                return Err(Error::Manifest(format!(
                    "unknown group name `{other}` (custom groups need a `custom:` prefix)"
                )))
            }
        })
    }
}

impl fmt::Display for GroupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for GroupName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for GroupName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Members {
    /// Resolved from the dataset (`all`, `none`, `cpi_only`).
    Derived,
    /// Same regressors for every target, in declared order.
    Shared(Vec<String>),
    /// A separate list per target name.
    PerTarget(BTreeMap<String, Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupManifest {
    pub name: GroupName,
    pub members: Members,
}

impl GroupManifest {
    pub fn derived(name: GroupName) -> Self {
        GroupManifest {
            name,
            members: Members::Derived,
        }
    }

    pub fn shared(name: GroupName, members: Vec<String>) -> Result<Self> {
        let manifest = GroupManifest {
            name,
            members: Members::Shared(members),
        };
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<()> {
        let check_dups = |list: &[String], ctx: &str| -> Result<()> {
            let mut seen = BTreeSet::new();
            for m in list {
                if !seen.insert(m) {
                    return Err(Error::Manifest(format!(
                        "duplicate member `{m}` in group `{}`{ctx}",
                        self.name
                    )));
                }
            }
            Ok(())
        };
        match (&self.members, self.name.is_derived()) {
            (Members::Derived, true) => Ok(()),
            (Members::Derived, false) => Err(Error::Manifest(format!(
                "group `{}` must declare its members",
                self.name
            ))),
            (_, true) => Err(Error::Manifest(format!(
                "reserved group `{}` must not enumerate members",
                self.name
            ))),
            (Members::Shared(list), false) => check_dups(list, ""),
            (Members::PerTarget(map), false) => map
                .iter()
                .try_for_each(|(t, list)| check_dups(list, &format!(" for `{t}`"))),
        }
    }

    /// Declared members for `target` in manifest order. Derived groups have none.
    pub fn declared_for(&self, target: &str) -> Result<Vec<String>> {
        match &self.members {
            Members::Derived => Ok(Vec::new()),
            Members::Shared(list) => Ok(list.clone()),
            Members::PerTarget(map) => map.get(target).cloned().ok_or_else(|| {
                Error::Manifest(format!("group `{}` has no entry for `{target}`", self.name))
            }),
        }
    }

    /// Regressor ids for `target`, sorted by name, never containing the target.
    pub fn resolve(&self, dataset: &Dataset, target: &SeriesId) -> Result<Vec<SeriesId>> {
        if !target.is_target() {
            return Err(Error::Input(format!("`{target}` is not a target series")));
        }
        let mut out: Vec<SeriesId> = match self.name {
            GroupName::None => Vec::new(),
            GroupName::All => dataset
                .ids()
                .filter(|id| id.name() != target.name())
                .cloned()
                .collect(),
            GroupName::CpiOnly => dataset
                .targets()
                .filter(|id| id.name() != target.name())
                .cloned()
                .collect(),
            _ => self
                .declared_for(target.name())?
                .into_iter()
                .map(|name| {
                    let series = dataset.get(&name).ok_or_else(|| Error::Coverage {
                        id: name.clone(),
                        required: "presence in the dataset".into(),
                    })?;
                    if series.id().is_target() {
                        return Err(Error::Manifest(format!(
                            "group `{}` lists target series `{name}`",
                            self.name
                        )));
                    }
                    Ok(series.id().clone())
                })
                .collect::<Result<_>>()?,
        };
        out.sort_by(|a, b| a.name().cmp(b.name()));
        Ok(out)
    }
}

/// Manifests keyed by group name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestSet {
    groups: BTreeMap<GroupName, GroupManifest>,
}

impl ManifestSet {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Manifest(e.to_string()))?;
        let mut groups = BTreeMap::new();
        for (key, value) in table {
            let name: GroupName = key.parse()?;
            let members = match value {
                toml::Value::Array(items) => {
                    let list = string_list(&key, items)?;
                    if name.is_derived() {
                        if !list.is_empty() {
                            return Err(Error::Manifest(format!(
                                "reserved group `{key}` must not enumerate members"
                            )));
                        }
                        Members::Derived
                    } else {
                        Members::Shared(list)
                    }
                }
                toml::Value::Table(per_target) => {
                    let mut map = BTreeMap::new();
                    for (target, items) in per_target {
                        let toml::Value::Array(items) = items else {
                            return Err(Error::Manifest(format!(
                                "group `{key}`: entry `{target}` must be a list"
                            )));
                        };
                        map.insert(target, string_list(&key, items)?);
                    }
                    Members::PerTarget(map)
                }
                _ => {
                    return Err(Error::Manifest(format!(
                        "group `{key}` must be a list or a per-target table"
                    )))
                }
            };
            let manifest = GroupManifest { name: name.clone(), members };
            manifest.validate()?;
            groups.insert(name, manifest);
        }
        Ok(ManifestSet { groups })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ManifestSet::parse(&text)
    }

    pub fn bundled() -> Self {
        ManifestSet::parse(DEFAULT_GROUPS).expect("bundled manifest is valid")
    }

    /// Looks up a group; the derived groups are always available.
    pub fn get(&self, name: &GroupName) -> Result<GroupManifest> {
        if let Some(m) = self.groups.get(name) {
            return Ok(m.clone());
        }
        if name.is_derived() {
            return Ok(GroupManifest::derived(name.clone()));
        }
        Err(Error::Manifest(format!("group `{name}` is not defined")))
    }

    pub fn insert(&mut self, manifest: GroupManifest) -> Result<()> {
        manifest.validate()?;
        self.groups.insert(manifest.name.clone(), manifest);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &GroupName> {
        self.groups.keys()
    }

    /// Canonical TOML rendering (derived and shared groups first, then
    /// per-target tables).
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let mut tables = String::new();
        for m in self.groups.values() {
            let key = toml_key(m.name.as_str());
            match &m.members {
                Members::Derived => out.push_str(&format!("{key} = []\n")),
                Members::Shared(list) => out.push_str(&format!("{key} = {}\n", toml_list(list))),
                Members::PerTarget(map) => {
                    tables.push_str(&format!("\n[{key}]\n"));
                    for (t, list) in map {
                        tables.push_str(&format!("{} = {}\n", toml_key(t), toml_list(list)));
                    }
                }
            }
        }
        out + &tables
    }
}

fn string_list(group: &str, items: Vec<toml::Value>) -> Result<Vec<String>> {
    items
        .into_iter()
        .map(|v| match v {
            toml::Value::String(s) => Ok(s),
            other => Err(Error::Manifest(format!(
                "group `{group}`: member `{other}` is not a string"
            ))),
        })
        .collect()
}

fn toml_key(key: &str) -> String {
    if key
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        key.to_string()
    } else {
        format!("\"{key}\"")
    }
}

fn toml_list(list: &[String]) -> String {
    let items: Vec<String> = list.iter().map(|s| format!("\"{s}\"")).collect();
    format!("[{}]", items.join(", "))
}
