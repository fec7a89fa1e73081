//! Persona-based Likert rating of candidate regressors and consensus
//! selection into the `llm_selected` group.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Variable;
use crate::error::{Error, Result};
use crate::groups::{GroupManifest, GroupName};
use crate::llm::LlmClient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persona {
    FoodEconomist,
    Agronomist,
    GlobalAffairs,
    AverageCanadian,
}

impl Persona {
    pub const ALL: [Persona; 4] = [
        Persona::FoodEconomist,
        Persona::Agronomist,
        Persona::GlobalAffairs,
        Persona::AverageCanadian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Persona::FoodEconomist => "food_economist",
            Persona::Agronomist => "agronomist",
            Persona::GlobalAffairs => "global_affairs",
            Persona::AverageCanadian => "average_canadian",
        }
    }

    pub fn role(self) -> &'static str {
        match self {
            Persona::FoodEconomist => "Food Economist",
            Persona::Agronomist => "Agronomist",
            Persona::GlobalAffairs => "Global Affairs Specialist",
            Persona::AverageCanadian => "Average Canadian",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Persona::FoodEconomist => "You are an experienced Food Economist with a deep understanding of the Canadian food economy. You have been hired to consult on Canada’s Food Price Report because of your knowledge and expertise in Canada’s food market.",
            Persona::Agronomist => "You are an experienced Agronomist specializing in North American agriculture. You have been hired to consult on Canada’s Food Price Report because of your knowledge and expertise in agriculture and its impacts on Canadian food.",
            Persona::GlobalAffairs => "You are an experienced Global Affairs Specialist with a deep understanding of Canada’s global relations. You have been hired to consult on Canada’s Food Price Report because of your knowledge and expertise in Canadian-Global contexts.",
            Persona::AverageCanadian => "You are an average Canadian citizen who does their own grocery shopping, budgeting, and works an average Canadian job. You are being surveyed for Canada’s Food Price Report because of your experience living, working, and grocery shopping in Canada.",
        }
    }
}

impl FromStr for Persona {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Persona::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown persona `{s}`")))
    }
}

impl fmt::Display for Persona {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const SCALE: &str = "- 1 -- Not at all influential
- 2
- 3 -- Slightly influential
- 4
- 5 -- Moderately influential
- 6
- 7 -- Very influential
- 8
- 9 -- Extremely influential";

pub fn render_persona_prompt(persona: Persona, variables: &[Variable]) -> Result<String> {
    if variables.is_empty() {
        return Err(Error::Prompt("no variables to rate".into()));
    }
    if let Some(v) = variables.iter().find(|v| v.description.trim().is_empty()) {
        return Err(Error::Prompt(format!("no description for `{}`", v.id)));
    }
    let mut out = format!(
        "{}\n\n\
         For Canada's Food Price Report 2025, we are looking to better understand the factors that may contribute to fluctuations in Canadian food prices.\n\n\
         We have collected {} monthly time-series variables and have described them below. We are asking you to rank them in terms of their influence on food prices in Canada according to a scale from 1 -- \"Not at all influential\" to 9 -- \"Extremely influential\".\n\n\
         From the context of your role as {}, please rank each variable in terms of its influence on food prices in Canada according to the following scale:\n\n\
         {SCALE}\n\n\
         Variables:\n\n",
        persona.description(),
        variables.len(),
        persona.role(),
    );
    for v in variables {
        out.push_str(&format!("{} ({}): {}\n\n", v.id, v.label, v.description.trim()));
    }
    out.push_str("Answer with one line per variable in the form `name: score`, using the variable names exactly as given above.\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSheet {
    pub persona: Persona,
    pub ratings: BTreeMap<String, u8>,
}

/// Reads `name: score` lines. Names match ids or labels, ignoring case,
/// list bullets and emphasis markers; scores must be integers in 1..=9.
pub fn parse_ratings(persona: Persona, response: &str, variables: &[Variable]) -> Result<RatingSheet> {
    let mut ratings = BTreeMap::new();
    for line in response.lines() {
        let Some((name, score)) = line.rsplit_once(':') else { continue };
        let name = name
            .trim()
            .trim_start_matches(|c: char| c == '-' || c == '*' || c == '•' || c.is_ascii_digit() || c == '.' || c == ' ')
            .trim_matches(|c: char| c == '*' || c == '`' || c.is_whitespace());
        let Some(var) = variables
            .iter()
            .find(|v| v.id.eq_ignore_ascii_case(name) || v.label.eq_ignore_ascii_case(name))
        else {
            continue;
        };
        let Ok(score) = score.trim().trim_matches(|c| c == '*' || c == '`').parse::<i64>() else {
            continue;
        };
        if !(1..=9).contains(&score) {
            return Err(Error::RatingRange {
                variable: var.id.clone(),
                score,
            });
        }
        if let Some(prev) = ratings.insert(var.id.clone(), score as u8) {
            if prev != score as u8 {
                return Err(Error::Input(format!("`{}` rated both {prev} and {score}", var.id)));
            }
        }
    }
    if let Some(v) = variables.iter().find(|v| !ratings.contains_key(&v.id)) {
        return Err(Error::RatingMissing(v.id.clone()));
    }
    Ok(RatingSheet { persona, ratings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusRule {
    /// Selected when any persona rates at or above the threshold.
    #[default]
    Any,
    /// Selected when the mean rating reaches the threshold.
    Mean,
}

impl FromStr for ConsensusRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "any" => Ok(ConsensusRule::Any),
            "mean" => Ok(ConsensusRule::Mean),
            _ => Err(Error::Config(format!("unknown consensus rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub variable: String,
    pub ratings: BTreeMap<Persona, u8>,
    pub mean: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub manifest: GroupManifest,
    pub log: Vec<SelectionRow>,
}

impl Selection {
    pub fn selected(&self) -> Vec<&str> {
        self.log.iter().filter(|r| r.selected).map(|r| r.variable.as_str()).collect()
    }

    pub fn log_csv(&self) -> String {
        let mut out = String::from("variable");
        for p in Persona::ALL {
            out.push(',');
            out.push_str(p.as_str());
        }
        out.push_str(",mean,selected\n");
        for row in &self.log {
            out.push_str(&row.variable);
            for p in Persona::ALL {
                out.push(',');
                if let Some(r) = row.ratings.get(&p) {
                    out.push_str(&r.to_string());
                }
            }
            out.push_str(&format!(",{:?},{}\n", row.mean, row.selected));
        }
        out
    }
}

pub fn consensus_select(sheets: &[RatingSheet], threshold: u8, rule: ConsensusRule) -> Result<Selection> {
    let first = sheets
        .first()
        .ok_or_else(|| Error::Input("consensus needs at least one rating sheet".into()))?;
    for s in sheets {
        if !s.ratings.keys().eq(first.ratings.keys()) {
            return Err(Error::SheetMismatch(format!(
                "{} and {} rated different variables",
                first.persona, s.persona
            )));
        }
    }
    let log: Vec<SelectionRow> = first
        .ratings
        .keys()
        .map(|var| {
            let ratings: BTreeMap<Persona, u8> = sheets.iter().map(|s| (s.persona, s.ratings[var])).collect();
            let all: Vec<u8> = sheets.iter().map(|s| s.ratings[var]).collect();
            let mean = all.iter().map(|&r| r as f64).sum::<f64>() / all.len() as f64;
            let selected = match rule {
                ConsensusRule::Any => all.iter().any(|&r| r >= threshold),
                ConsensusRule::Mean => mean >= threshold as f64,
            };
            SelectionRow {
                variable: var.clone(),
                ratings,
                mean,
                selected,
            }
        })
        .collect();
    let members = log.iter().filter(|r| r.selected).map(|r| r.variable.clone()).collect();
    Ok(Selection {
        manifest: GroupManifest::shared(GroupName::LlmSelected, members)?,
        log,
    })
}

#[derive(Debug, Clone)]
pub struct CurationOutcome {
    pub sheets: Vec<RatingSheet>,
    pub selection: Selection,
}

/// One independent provider call per persona, then consensus.
pub fn curate(
    client: &LlmClient,
    personas: &[Persona],
    variables: &[Variable],
    threshold: u8,
    rule: ConsensusRule,
) -> Result<CurationOutcome> {
    let sheets = personas
        .par_iter()
        .map(|&p| {
            let prompt = render_persona_prompt(p, variables)?;
            let reply = client.complete(&prompt)?;
            parse_ratings(p, &reply.text, variables).inspect_err(|e| {
                let _ = client.mark_unparseable(&prompt, &e.to_string());
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let selection = consensus_select(&sheets, threshold, rule)?;
    Ok(CurationOutcome { sheets, selection })
}
