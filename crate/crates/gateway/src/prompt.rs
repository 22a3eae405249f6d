//! Prompt builders for paraphrasing, formulation generation and listwise
//! annotation. A prompt is an ordered list of tagged sections and renders to
//! their plain concatenation.

use std::fmt::Write as _;

use apf_core::RequirementSet;
use apf_core::TestInstance;
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

pub const TEMPLATE_VERSION: &str = "v1";

const PARAPHRASE_TEMPLATE: &str = include_str!("../assets/paraphrase_v1.txt");
const GENERATION_TEMPLATE: &str = include_str!("../assets/generation_v1.txt");
const ANNOTATION_TEMPLATE: &str = include_str!("../assets/annotation_v1.txt");

const RESPONSE_FORMAT: &str = "Response Format:\n\
Your response MUST be a single JSON array of the curve identifiers, ordered from best to worst, \
e.g. [\"curve_b\", \"curve_a\"]. List every curve exactly once and output nothing outside the JSON array.\n";

pub const DEFAULT_PROMPT_BUDGET: usize = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SectionTag {
    Task,
    ExpertExample,
    InstanceTable,
    RequirementsQuery,
    Rules,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptKind {
    Paraphrase { versions: usize },
    Generation,
    Annotation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub tag: SectionTag,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub kind: PromptKind,
    sections: Vec<Section>,
}

impl Prompt {
    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn section(&self, tag: SectionTag) -> Option<&str> {
        self.sections.iter().find(|s| s.tag == tag).map(|s| s.text.as_str())
    }

    pub fn render(&self) -> String {
        self.sections.iter().map(|s| s.text.as_str()).collect()
    }

    pub fn char_len(&self) -> usize {
        self.sections.iter().map(|s| s.text.chars().count()).sum()
    }
}

/// Replaces placeholders in one left-to-right pass; substituted values are
/// never rescanned, so braces in requirement text come through literally.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'outer: while !rest.is_empty() {
        for (key, value) in values {
            if let Some(after) = rest.strip_prefix(key) {
                out.push_str(value);
                rest = after;
                continue 'outer;
            }
        }
        let ch = rest.chars().next().expect("non-empty");
        out.push(ch);
        rest = &rest[ch.len_utf8()..];
    }
    out
}

/// Splits `template` just before each marker, in order.
fn split_at_markers<'a>(template: &'a str, markers: &[&str]) -> Vec<&'a str> {
    let mut parts = Vec::with_capacity(markers.len() + 1);
    let mut rest = template;
    for marker in markers {
        let at = rest
            .find(marker)
            .unwrap_or_else(|| panic!("template marker {marker:?} missing"));
        parts.push(&rest[..at]);
        rest = &rest[at..];
    }
    parts.push(rest);
    parts
}

pub fn build_paraphrase_prompt(reqs: &RequirementSet, versions: usize) -> Result<Prompt, GatewayError> {
    if versions == 0 {
        return Err(GatewayError::InvalidVersions(versions));
    }
    if reqs.is_empty() {
        return Err(GatewayError::EmptyRequirementSet);
    }
    let v = versions.to_string();
    let list = reqs.numbered_text();
    let values = [("{num_versions}", v.as_str()), ("{requirements_text}", list.as_str())];
    let parts = split_at_markers(PARAPHRASE_TEMPLATE, &["Critical Rules:", "Now, please generate"]);
    Ok(Prompt {
        kind: PromptKind::Paraphrase { versions },
        sections: vec![
            Section {
                tag: SectionTag::Task,
                text: fill(parts[0], &values),
            },
            Section {
                tag: SectionTag::Rules,
                text: fill(parts[1], &values),
            },
            Section {
                tag: SectionTag::RequirementsQuery,
                text: fill(parts[2], &values),
            },
        ],
    })
}

pub fn build_generation_prompt(reqs: &RequirementSet) -> Result<Prompt, GatewayError> {
    if reqs.is_empty() {
        return Err(GatewayError::EmptyRequirementSet);
    }
    let list = reqs.numbered_text();
    let values = [("{requirements_text}", list.as_str())];
    let parts = split_at_markers(
        GENERATION_TEMPLATE,
        &["Following requirements:", "You should adhere to the following rules"],
    );
    Ok(Prompt {
        kind: PromptKind::Generation,
        sections: vec![
            Section {
                tag: SectionTag::Task,
                text: fill(parts[0], &values),
            },
            Section {
                tag: SectionTag::RequirementsQuery,
                text: fill(parts[1], &values),
            },
            Section {
                tag: SectionTag::Rules,
                text: fill(parts[2], &values),
            },
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotationOptions {
    pub expert_role: String,
    /// One-shot expert example; the section is omitted when absent.
    pub expert_example: Option<String>,
    pub axis_x_name: String,
    pub axis_y_name: String,
    pub data_description: String,
    pub budget_chars: usize,
    pub decimals: usize,
}

impl Default for AnnotationOptions {
    fn default() -> Self {
        AnnotationOptions {
            expert_role: "an expert antenna systems engineer".into(),
            expert_example: None,
            axis_x_name: "frequency (GHz)".into(),
            axis_y_name: "radiation efficiency (dB)".into(),
            data_description: "Points are sorted by frequency.".into(),
            budget_chars: DEFAULT_PROMPT_BUDGET,
            decimals: 4,
        }
    }
}

/// `[{"curve": id, "data": [[z, v], ...]}, ...]`, one curve per line.
pub fn render_instance_table(insts: &[TestInstance], decimals: usize) -> String {
    let mut out = String::from("[\n");
    for (k, inst) in insts.iter().enumerate() {
        let id = serde_json::to_string(&inst.id).expect("string serializes");
        let _ = write!(out, "  {{\"curve\": {id}, \"data\": [");
        for (j, (z, v)) in inst.samples().iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "[{z:.decimals$}, {v:.decimals$}]");
        }
        out.push_str("]}");
        if k + 1 < insts.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push(']');
    out
}

fn numbered_or_none<'a>(texts: impl Iterator<Item = &'a str>) -> String {
    let list = apf_core::requirement::numbered(texts);
    if list.is_empty() {
        "None.".to_string()
    } else {
        list
    }
}

/// Sections in the order task, expert example, instance table,
/// requirements, ranking rules.
pub fn build_annotation_prompt(
    reqs: &RequirementSet,
    insts: &[TestInstance],
    opts: &AnnotationOptions,
) -> Result<Prompt, GatewayError> {
    if reqs.is_empty() {
        return Err(GatewayError::EmptyRequirementSet);
    }
    if insts.len() < 2 {
        return Err(GatewayError::TooFewInstances(insts.len()));
    }
    let objectives = numbered_or_none(
        reqs.requirements()
            .iter()
            .filter(|r| r.intent.is_objective())
            .map(|r| r.text.as_str()),
    );
    let constraints = numbered_or_none(
        reqs.requirements()
            .iter()
            .filter(|r| !r.intent.is_objective())
            .map(|r| r.text.as_str()),
    );
    let table = render_instance_table(insts, opts.decimals);
    let example = opts.expert_example.clone().unwrap_or_default();
    let values = [
        ("{{Expert_Role}}", opts.expert_role.as_str()),
        ("{{Example_Section}}", example.as_str()),
        ("{{List_of_Objectives}}", objectives.as_str()),
        ("{{List_of_Constraints}}", constraints.as_str()),
        ("{{Axis_X_Name}}", opts.axis_x_name.as_str()),
        ("{{Axis_Y_Name}}", opts.axis_y_name.as_str()),
        ("{{Data_Description}}", opts.data_description.as_str()),
        ("{{JSON_Data_of_Curves}}", table.as_str()),
    ];
    let parts = split_at_markers(
        ANNOTATION_TEMPLATE,
        &[
            "[Optional: Few-Shot Example]",
            "Now, please evaluate",
            "Evaluation Strategy:",
            "Curve Data (JSON Format):",
        ],
    );
    let mut sections = vec![Section {
        tag: SectionTag::Task,
        text: fill(parts[0], &values),
    }];
    if opts.expert_example.is_some() {
        sections.push(Section {
            tag: SectionTag::ExpertExample,
            text: fill(parts[1], &values),
        });
    }
    let mut table_text = fill(parts[4], &values);
    table_text.push_str("```\n\n");
    sections.push(Section {
        tag: SectionTag::InstanceTable,
        text: table_text,
    });
    sections.push(Section {
        tag: SectionTag::RequirementsQuery,
        text: fill(parts[2], &values),
    });
    let mut rules = fill(parts[3], &values);
    rules.push_str(RESPONSE_FORMAT);
    sections.push(Section {
        tag: SectionTag::Rules,
        text: rules,
    });
    let prompt = Prompt {
        kind: PromptKind::Annotation,
        sections,
    };
    let size = prompt.char_len();
    if size > opts.budget_chars {
        return Err(GatewayError::PromptBudgetExceeded {
            size,
            budget: opts.budget_chars,
        });
    }
    Ok(prompt)
}

/// Numbered `k. text` lines of a section, in order.
pub fn numbered_lines(section: &str) -> Vec<(usize, String)> {
    section
        .lines()
        .filter_map(|line| {
            let (num, text) = line.split_once(". ")?;
            let k: usize = num.trim().parse().ok()?;
            Some((k, text.to_string()))
        })
        .collect()
}
