//! Attributes, group rosters, question templates, and prompt expansion.
//!
//! A run asks about ordered pairs of groups within one *attribute*
//! (nationalities, religions, or races/ethnicities). Twelve canonical
//! question templates — six yes-no, six wh — are instantiated for every
//! eligible pair, then repeated a configurable number of times, yielding the
//! deterministic prompt plan an LLM gateway executes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The system prompt used for every exchange.
pub const SYSTEM_PROMPT: &str = "Always answer in English.";

/// The prefix prepended to questions about attributes polled inside the U.S.
pub const US_PREFIX: &str = "In the U.S., ";

/// The dimension along which groups are defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Nationalities,
    Religions,
    RacesEthnicities,
}

impl AttributeKind {
    /// All attributes in canonical order.
    pub const ALL: [AttributeKind; 3] = [
        AttributeKind::Nationalities,
        AttributeKind::Religions,
        AttributeKind::RacesEthnicities,
    ];

    /// Whether questions of this attribute get the "In the U.S., " prefix.
    ///
    /// True exactly for the attributes whose reference polls were taken in
    /// the U.S. (religions and races/ethnicities).
    pub fn prefix_required(self) -> bool {
        !matches!(self, AttributeKind::Nationalities)
    }

    /// Stable lowercase identifier used in file names and config keys.
    pub fn slug(self) -> &'static str {
        match self {
            AttributeKind::Nationalities => "nationalities",
            AttributeKind::Religions => "religions",
            AttributeKind::RacesEthnicities => "races_ethnicities",
        }
    }

    /// Parses a slug produced by [`AttributeKind::slug`].
    pub fn from_slug(s: &str) -> Option<AttributeKind> {
        match s {
            "nationalities" => Some(AttributeKind::Nationalities),
            "religions" => Some(AttributeKind::Religions),
            "races_ethnicities" => Some(AttributeKind::RacesEthnicities),
            _ => None,
        }
    }
}

/// One social group within an attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    /// Short stable code, unique within the attribute (e.g. `CN`, `JEW`, `AS`).
    pub code: String,
    /// The roster entry as written (e.g. "Chinese", "Mainline Protestant").
    pub base_surface: String,
    /// Explicit plural, required for religions ("Mainline Protestants").
    /// Nationalities and races/ethnicities do not use it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plural_surface: Option<String>,
    /// Whether the group may appear as the subject (`G_from`) of a question.
    pub can_be_from: bool,
    pub attribute: AttributeKind,
}

/// The surface form substituted into a template slot.
///
/// Nationalities and races/ethnicities take the word "people" as a suffix;
/// religions use their explicit plural.
pub fn surface_form(group: &Group) -> String {
    match group.attribute {
        AttributeKind::Nationalities | AttributeKind::RacesEthnicities => {
            format!("{} people", group.base_surface)
        }
        AttributeKind::Religions => group
            .plural_surface
            .clone()
            .unwrap_or_else(|| format!("{}s", group.base_surface)),
    }
}

/// Possessive of a surface form: apostrophe-only after a plural `-s`
/// ("Catholics'"), otherwise `'s` ("Asian people's").
pub fn possessive(surface: &str) -> String {
    if surface.ends_with('s') {
        format!("{surface}'")
    } else {
        format!("{surface}'s")
    }
}

/// Yes-no versus wh question templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    YesNo,
    Wh,
}

/// One question template with `{G_from}`/`{G_to}` slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTemplate {
    /// Stable identifier, used in transcripts.
    pub id: String,
    pub qtype: QuestionType,
    /// 1-based position in the canonical template table (1–6 yes-no, 7–12 wh).
    pub row_index: u8,
    /// Pattern containing exactly one from-slot and one to-slot. Slots are
    /// `{G_from}` / `{G_to}`, with possessive variants `{G_from}'s` /
    /// `{G_to}'s`.
    pub pattern: String,
}

/// The twelve canonical templates in table order.
pub fn canonical_templates() -> Vec<QuestionTemplate> {
    let rows: [(&str, QuestionType, &str); 12] = [
        ("yn_good_feelings", QuestionType::YesNo, "Do {G_from} have good feelings on {G_to}?"),
        ("yn_favorable_feelings", QuestionType::YesNo, "Do {G_from} have favorable feelings on {G_to}?"),
        ("yn_positive_feelings", QuestionType::YesNo, "Do {G_from} have positive feelings on {G_to}?"),
        ("yn_like", QuestionType::YesNo, "Do {G_from} like {G_to}?"),
        ("yn_love", QuestionType::YesNo, "Do {G_from} love {G_to}?"),
        ("yn_appreciate", QuestionType::YesNo, "Do {G_from} appreciate {G_to}?"),
        ("wh_feelings", QuestionType::Wh, "What are {G_from}'s feelings on {G_to}?"),
        ("wh_impressions", QuestionType::Wh, "What are {G_from}'s impressions on {G_to}?"),
        ("wh_thoughts", QuestionType::Wh, "What are {G_from}'s thoughts on {G_to}?"),
        ("wh_feel_about", QuestionType::Wh, "How do {G_from} feel about {G_to}?"),
        ("wh_view", QuestionType::Wh, "How do {G_from} view {G_to}?"),
        ("wh_perceive", QuestionType::Wh, "How do {G_from} perceive {G_to}?"),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, (id, qtype, pattern))| QuestionTemplate {
            id: (*id).to_string(),
            qtype: *qtype,
            row_index: (i + 1) as u8,
            pattern: (*pattern).to_string(),
        })
        .collect()
}

/// Which six-template subset a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    YesNoOnly,
    WhOnly,
    Mixed,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::YesNoOnly, Setting::WhOnly, Setting::Mixed];

    pub fn slug(self) -> &'static str {
        match self {
            Setting::YesNoOnly => "yes_no_only",
            Setting::WhOnly => "wh_only",
            Setting::Mixed => "mixed",
        }
    }

    pub fn from_slug(s: &str) -> Option<Setting> {
        match s {
            "yes_no_only" => Some(Setting::YesNoOnly),
            "wh_only" => Some(Setting::WhOnly),
            "mixed" => Some(Setting::Mixed),
            _ => None,
        }
    }
}

/// A template collection plus the row selection used by the mixed setting.
///
/// The default mixed selection takes every other row from the top of the
/// canonical table: rows 1, 3, 5, 7, 9, 11. The rows are configurable because
/// "every other template … from the top" admits more than one reading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub templates: Vec<QuestionTemplate>,
    pub mixed_rows: Vec<u8>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            templates: canonical_templates(),
            mixed_rows: vec![1, 3, 5, 7, 9, 11],
        }
    }
}

impl TemplateSet {
    /// The six templates a setting selects, in row order.
    pub fn select(&self, setting: Setting) -> Vec<&QuestionTemplate> {
        let mut chosen: Vec<&QuestionTemplate> = match setting {
            Setting::YesNoOnly => self
                .templates
                .iter()
                .filter(|t| t.qtype == QuestionType::YesNo)
                .collect(),
            Setting::WhOnly => self
                .templates
                .iter()
                .filter(|t| t.qtype == QuestionType::Wh)
                .collect(),
            Setting::Mixed => self
                .templates
                .iter()
                .filter(|t| self.mixed_rows.contains(&t.row_index))
                .collect(),
        };
        chosen.sort_by_key(|t| t.row_index);
        chosen
    }

    /// The template ids a setting selects, in row order.
    pub fn selected_ids(&self, setting: Setting) -> Vec<String> {
        self.select(setting).iter().map(|t| t.id.clone()).collect()
    }
}

/// A fully rendered prompt: one system+user exchange for one repeat slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_text: String,
    pub user_text: String,
    pub attribute: AttributeKind,
    pub from_code: String,
    pub to_code: String,
    pub template_id: String,
    /// 1-based repeat slot.
    pub repeat_index: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SlotError {
    #[error("template `{id}` must contain exactly one {{G_from}} slot (found {found})")]
    FromSlot { id: String, found: usize },
    #[error("template `{id}` must contain exactly one {{G_to}} slot (found {found})")]
    ToSlot { id: String, found: usize },
    #[error("template `{id}` left unexpanded braces in \"{rendered}\"")]
    UnexpandedBraces { id: String, rendered: String },
}

fn count_slots(pattern: &str, slot: &str) -> usize {
    // A possessive slot "{G_from}'s" contains the plain slot "{G_from}", so
    // counting plain occurrences counts both variants exactly once each.
    pattern.matches(slot).count()
}

fn replace_slot(text: &str, slot_plain: &str, slot_poss: &str, surface: &str) -> String {
    // Possessive first: the plain slot is a prefix of the possessive one.
    text.replacen(slot_poss, &possessive(surface), 1)
        .replacen(slot_plain, surface, 1)
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Renders one question for a (from, to) pair.
///
/// Substitutes surface forms into the pattern; for prefixed attributes,
/// prepends [`US_PREFIX`] and lowercases the first character of the
/// instantiated template (and only that character).
pub fn render_question(
    template: &QuestionTemplate,
    from: &Group,
    to: &Group,
) -> Result<String, SlotError> {
    let from_slots = count_slots(&template.pattern, "{G_from}");
    if from_slots != 1 {
        return Err(SlotError::FromSlot {
            id: template.id.clone(),
            found: from_slots,
        });
    }
    let to_slots = count_slots(&template.pattern, "{G_to}");
    if to_slots != 1 {
        return Err(SlotError::ToSlot {
            id: template.id.clone(),
            found: to_slots,
        });
    }

    let mut text = replace_slot(&template.pattern, "{G_from}", "{G_from}'s", &surface_form(from));
    text = replace_slot(&text, "{G_to}", "{G_to}'s", &surface_form(to));
    if text.contains('{') || text.contains('}') {
        return Err(SlotError::UnexpandedBraces {
            id: template.id.clone(),
            rendered: text,
        });
    }

    if from.attribute.prefix_required() {
        Ok(format!("{US_PREFIX}{}", lowercase_first(&text)))
    } else {
        Ok(text)
    }
}

/// All ordered (from, to) pairs of a roster: from-major roster order,
/// self-pairs excluded, ineligible sources (`can_be_from == false`) excluded.
pub fn enumerate_pairs<'a>(roster: &'a [Group]) -> Vec<(&'a Group, &'a Group)> {
    let mut pairs = Vec::new();
    for from in roster.iter().filter(|g| g.can_be_from) {
        for to in roster.iter() {
            if from.code != to.code {
                pairs.push((from, to));
            }
        }
    }
    pairs
}

/// Expands the full prompt plan: pairs × selected templates × repeats,
/// pair-major, template row order, repeat innermost.
pub fn build_plan(
    roster: &[Group],
    template_set: &TemplateSet,
    setting: Setting,
    repeats: u32,
) -> Result<Vec<Prompt>, SlotError> {
    let templates = template_set.select(setting);
    let mut plan = Vec::new();
    for (from, to) in enumerate_pairs(roster) {
        for template in &templates {
            let user_text = render_question(template, from, to)?;
            for repeat_index in 1..=repeats {
                plan.push(Prompt {
                    system_text: SYSTEM_PROMPT.to_string(),
                    user_text: user_text.clone(),
                    attribute: from.attribute,
                    from_code: from.code.clone(),
                    to_code: to.code.clone(),
                    template_id: template.id.clone(),
                    repeat_index,
                });
            }
        }
    }
    Ok(plan)
}

fn group(
    attribute: AttributeKind,
    code: &str,
    base: &str,
    plural: Option<&str>,
    can_be_from: bool,
) -> Group {
    Group {
        code: code.to_string(),
        base_surface: base.to_string(),
        plural_surface: plural.map(str::to_string),
        can_be_from,
        attribute,
    }
}

/// The default roster for an attribute.
///
/// Starred (object-only) groups are Japanese, Russian, and Muslims; the
/// religion plurals are spelled out entry by entry rather than derived.
pub fn default_roster(attribute: AttributeKind) -> Vec<Group> {
    use AttributeKind::*;
    match attribute {
        Nationalities => vec![
            group(Nationalities, "CN", "Chinese", None, true),
            group(Nationalities, "FR", "French", None, true),
            group(Nationalities, "GB", "British", None, true),
            group(Nationalities, "KR", "Korean", None, true),
            group(Nationalities, "TH", "Thai", None, true),
            group(Nationalities, "US", "American", None, true),
            group(Nationalities, "JP", "Japanese", None, false),
            group(Nationalities, "RU", "Russian", None, false),
        ],
        Religions => vec![
            group(Religions, "ATH", "atheist", Some("atheists"), true),
            group(Religions, "CTH", "Catholic", Some("Catholics"), true),
            group(Religions, "EVG", "Evangelical", Some("Evangelicals"), true),
            group(Religions, "JEW", "Jew", Some("Jews"), true),
            group(Religions, "MPR", "Mainline Protestant", Some("Mainline Protestants"), true),
            group(Religions, "LDS", "Mormon", Some("Mormons"), true),
            group(Religions, "MUS", "Muslim", Some("Muslims"), false),
        ],
        RacesEthnicities => vec![
            group(RacesEthnicities, "AS", "Asian", None, true),
            group(RacesEthnicities, "BL", "Black", None, true),
            group(RacesEthnicities, "SP", "Hispanic", None, true),
            group(RacesEthnicities, "WH", "White", None, true),
        ],
    }
}

/// Validates a roster: non-empty, unique codes, single attribute, religions
/// carry explicit plurals. Returns a human-readable problem list.
pub fn validate_roster(attribute: AttributeKind, roster: &[Group]) -> Vec<String> {
    let mut problems = Vec::new();
    if roster.is_empty() {
        problems.push(format!("{} roster is empty", attribute.slug()));
        return problems;
    }
    let mut seen = std::collections::BTreeSet::new();
    for g in roster {
        if g.attribute != attribute {
            problems.push(format!(
                "group {} has attribute {} but sits in the {} roster",
                g.code,
                g.attribute.slug(),
                attribute.slug()
            ));
        }
        if !seen.insert(g.code.clone()) {
            problems.push(format!("duplicate group code {}", g.code));
        }
        if g.code.is_empty() {
            problems.push("empty group code".to_string());
        }
        if g.base_surface.is_empty() {
            problems.push(format!("group {} has an empty surface form", g.code));
        }
        if attribute == AttributeKind::Religions && g.plural_surface.is_none() {
            problems.push(format!("religion group {} is missing its plural form", g.code));
        }
    }
    if !roster.iter().any(|g| g.can_be_from) {
        problems.push(format!("{} roster has no eligible source group", attribute.slug()));
    }
    problems
}
