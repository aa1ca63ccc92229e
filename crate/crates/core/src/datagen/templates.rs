//! Versioned paraphrase tables for dataset questions.
//!
//! Object and mob templates carry `{subject}`; spatial ones carry `{a}` and
//! `{b}`; scene-field templates carry no placeholder. Rendered text can be
//! parsed back to its `(category, subject)` so answers can be replayed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::percipient::Category;
use crate::world::{BlockKind, MobKind};

const STANDARD: &str = include_str!("../../data/templates.json");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("no templates for category {0:?}")]
    MissingCategory(Category),
    #[error("no caption prompts")]
    NoCaptionPrompts,
    #[error("template index {index} out of range for {category:?}")]
    Index { category: Category, index: usize },
    #[error("{category:?} template `{template}` has the wrong placeholders")]
    Placeholders { category: Category, template: String },
    #[error("cannot read templates: {0}")]
    Read(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateTable {
    pub version: u32,
    pub questions: BTreeMap<Category, Vec<String>>,
    pub caption: Vec<String>,
}

fn placeholders(category: Category) -> &'static [&'static str] {
    match category {
        Category::Object | Category::Mob => &["{subject}"],
        Category::Spatial => &["{a}", "{b}"],
        _ => &[],
    }
}

fn known_identity(id: &str) -> bool {
    matches!(id, "sky" | "tree") || BlockKind::from_name(id).is_some() || MobKind::from_name(id).is_some()
}

/// Splits `text` against a template with the given placeholders, in order.
fn capture<'t>(template: &str, names: &[&str], text: &'t str) -> Option<Vec<&'t str>> {
    if names.is_empty() {
        return (template == text).then(Vec::new);
    }
    let mut literals = Vec::with_capacity(names.len() + 1);
    let mut rest = template;
    for name in names {
        let (lit, after) = rest.split_once(name)?;
        literals.push(lit);
        rest = after;
    }
    literals.push(rest);
    let mut cursor = text.strip_prefix(literals[0])?;
    let last = literals[literals.len() - 1];
    cursor = cursor.strip_suffix(last)?;
    let mut caps = Vec::with_capacity(names.len());
    for lit in &literals[1..literals.len() - 1] {
        let (cap, after) = cursor.split_once(lit)?;
        caps.push(cap);
        cursor = after;
    }
    caps.push(cursor);
    caps.iter().all(|c| !c.is_empty()).then_some(caps)
}

impl TemplateTable {
    /// The bundled table.
    pub fn standard() -> TemplateTable {
        TemplateTable::from_json(STANDARD).expect("bundled templates are valid")
    }

    pub fn from_json(text: &str) -> Result<TemplateTable, TemplateError> {
        let t: TemplateTable = serde_json::from_str(text).map_err(|e| TemplateError::Read(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<TemplateTable, TemplateError> {
        let text = fs::read_to_string(path).map_err(|e| TemplateError::Read(format!("{}: {e}", path.display())))?;
        TemplateTable::from_json(&text)
    }

    /// Every category has templates, each with exactly its placeholders.
    pub fn validate(&self) -> Result<(), TemplateError> {
        for category in Category::ALL {
            let list = self
                .questions
                .get(&category)
                .filter(|l| !l.is_empty())
                .ok_or(TemplateError::MissingCategory(category))?;
            let names = placeholders(category);
            for template in list {
                let braces = template.matches('{').count();
                if braces != names.len() || !names.iter().all(|n| template.contains(n)) {
                    return Err(TemplateError::Placeholders {
                        category,
                        template: template.clone(),
                    });
                }
            }
        }
        if self.caption.is_empty() {
            return Err(TemplateError::NoCaptionPrompts);
        }
        Ok(())
    }

    pub fn count(&self, category: Category) -> Result<usize, TemplateError> {
        self.questions
            .get(&category)
            .map(Vec::len)
            .filter(|&n| n > 0)
            .ok_or(TemplateError::MissingCategory(category))
    }

    pub fn caption_count(&self) -> usize {
        self.caption.len()
    }

    /// Renders paraphrase `index` for a fact.
    pub fn question(&self, category: Category, subject: &str, index: usize) -> Result<String, TemplateError> {
        let list = self
            .questions
            .get(&category)
            .ok_or(TemplateError::MissingCategory(category))?;
        let t = list.get(index).ok_or(TemplateError::Index { category, index })?;
        let spaced = subject.replace('_', " ");
        Ok(match category {
            Category::Object | Category::Mob => t.replace("{subject}", &spaced),
            Category::Spatial => {
                let (a, b) = spaced.split_once(" near ").unwrap_or((spaced.as_str(), ""));
                t.replace("{a}", a).replace("{b}", b)
            }
            _ => t.clone(),
        })
    }

    pub fn caption_prompt(&self, index: usize) -> Result<String, TemplateError> {
        self.caption.get(index).cloned().ok_or(TemplateError::NoCaptionPrompts)
    }

    pub fn is_caption_prompt(&self, text: &str) -> bool {
        self.caption.iter().any(|c| c == text)
    }

    /// Recovers `(category, subject)` from rendered text. Relations are tried
    /// first since their text embeds an object-shaped question.
    pub fn parse_question(&self, text: &str) -> Option<(Category, String)> {
        let ident = |s: &str| s.replace(' ', "_");
        let order = std::iter::once(Category::Spatial).chain(Category::ALL.into_iter().filter(|c| *c != Category::Spatial));
        for category in order {
            for t in self.questions.get(&category).into_iter().flatten() {
                let Some(caps) = capture(t, placeholders(category), text) else { continue };
                let subject = match category {
                    Category::Spatial => {
                        let (a, b) = (ident(caps[0]), ident(caps[1]));
                        if !(known_identity(&a) && known_identity(&b)) {
                            continue;
                        }
                        format!("{a} near {b}")
                    }
                    Category::Object | Category::Mob => {
                        let s = ident(caps[0]);
                        if !known_identity(&s) {
                            continue;
                        }
                        s
                    }
                    _ => String::new(),
                };
                return Some((category, subject));
            }
        }
        None
    }
}
