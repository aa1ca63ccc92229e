//! Objective-conditioned questions about frames and the backends that answer them.

pub mod remote;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observation::{EntryKind, Frame};
use crate::world::{Biome, MobKind};

pub use remote::{BackendConfig, FallbackPercipient, FallbackPolicy, RemoteClient, RemotePercipient};

/// Entries closer than this are "near" each other.
pub const NEAR_RADIUS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Object,
    Mob,
    Ecology,
    Time,
    Weather,
    Brightness,
    Spatial,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Object,
        Category::Mob,
        Category::Ecology,
        Category::Time,
        Category::Weather,
        Category::Brightness,
        Category::Spatial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Object => "Object",
            Category::Mob => "Mob",
            Category::Ecology => "Ecology",
            Category::Time => "Time",
            Category::Weather => "Weather",
            Category::Brightness => "Brightness",
            Category::Spatial => "Spatial",
        }
    }

    pub fn from_name(name: &str) -> Option<Category> {
        Category::ALL.iter().copied().find(|c| c.name().eq_ignore_ascii_case(name))
    }

    /// Categories answered with yes/no rather than a value.
    pub fn is_binary(self) -> bool {
        matches!(self, Category::Object | Category::Mob | Category::Spatial)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A required fact: `(Mob, "pig")`, `(Time, "night")`, `(Spatial, "grass near pig")`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub category: Category,
    pub subject: String,
}

impl Condition {
    pub fn new(category: Category, subject: impl Into<String>) -> Self {
        Condition {
            category,
            subject: subject.into(),
        }
    }

    /// Category implied by a bare subject word.
    pub fn infer(subject: &str) -> Condition {
        let category = if subject.contains(" near ") {
            Category::Spatial
        } else if Biome::from_name(subject).is_some() {
            Category::Ecology
        } else if matches!(subject, "day" | "night") {
            Category::Time
        } else if matches!(subject, "sunny" | "rainy") {
            Category::Weather
        } else if matches!(subject, "sufficient" | "insufficient") {
            Category::Brightness
        } else if MobKind::from_name(subject).is_some() {
            Category::Mob
        } else {
            Category::Object
        };
        Condition::new(category, subject)
    }

    /// `("grass", "pig")` for `grass near pig`.
    pub fn spatial_operands(&self) -> Option<(&str, &str)> {
        if self.category != Category::Spatial {
            return None;
        }
        self.subject.split_once(" near ")
    }

    /// Whether `answer` satisfies this condition.
    pub fn satisfied_by(&self, answer: &Answer) -> bool {
        match &answer.verdict {
            Verdict::Yes => self.category.is_binary(),
            Verdict::No => false,
            Verdict::Value(v) => !self.category.is_binary() && v.eq_ignore_ascii_case(&self.subject),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.category, self.subject)
    }
}

/// Does a frame entry count as `subject`? `tree` covers logs and leaves.
pub fn identity_matches(identity: &str, subject: &str) -> bool {
    match subject {
        "tree" => identity == "log" || identity == "leaves",
        other => identity == other,
    }
}

fn entry_kind_for(category: Category) -> Option<EntryKind> {
    match category {
        Category::Object => Some(EntryKind::Block),
        Category::Mob => Some(EntryKind::Mob),
        _ => None,
    }
}

/// Index of the first entry matching a subject, in any kind.
fn first_match(frame: &Frame, subject: &str, kind: Option<EntryKind>) -> Option<usize> {
    frame
        .entries
        .iter()
        .position(|e| kind.is_none_or(|k| e.kind == k) && identity_matches(&e.identity, subject))
}

/// First pair of entries matching the two operands within the near radius.
pub fn near_pair(frame: &Frame, a: &str, b: &str) -> Option<(usize, usize)> {
    for (i, ea) in frame.entries.iter().enumerate() {
        if !identity_matches(&ea.identity, a) {
            continue;
        }
        let pa = ea.local_position();
        for (j, eb) in frame.entries.iter().enumerate() {
            if i == j || !identity_matches(&eb.identity, b) {
                continue;
            }
            let pb = eb.local_position();
            let d2 = (pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2);
            if d2 <= NEAR_RADIUS * NEAR_RADIUS {
                return Some((i, j));
            }
        }
    }
    None
}

/// Ground-truth evaluation of a condition directly on a frame.
pub fn holds(condition: &Condition, frame: &Frame) -> bool {
    let s = &frame.scene;
    let subject = condition.subject.as_str();
    match condition.category {
        Category::Object if subject == "sky" => s.sky_visible,
        Category::Object | Category::Mob => {
            first_match(frame, subject, entry_kind_for(condition.category)).is_some()
        }
        Category::Ecology => s.biome.name() == subject,
        Category::Time => s.time.name() == subject,
        Category::Weather => s.weather.name() == subject,
        Category::Brightness => s.brightness.name() == subject,
        Category::Spatial => match condition.spatial_operands() {
            Some((a, b)) => near_pair(frame, a, b).is_some(),
            None => false,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub q: String,
    pub a: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub category: Category,
    pub subject: String,
    pub text: String,
    pub history: Vec<Exchange>,
}

impl Query {
    pub fn new(category: Category, subject: impl Into<String>, history: Vec<Exchange>) -> Query {
        let subject = subject.into();
        let text = question_text(category, &subject);
        Query {
            category,
            subject,
            text,
            history,
        }
    }

    pub fn for_condition(c: &Condition, history: Vec<Exchange>) -> Query {
        Query::new(c.category, c.subject.clone(), history)
    }

    pub fn condition(&self) -> Condition {
        Condition::new(self.category, self.subject.clone())
    }
}

/// The canonical template table.
pub fn question_text(category: Category, subject: &str) -> String {
    let subject = subject.replace('_', " ");
    match category {
        Category::Object => format!("Is there a {subject} in the image?"),
        Category::Mob => format!("Can you see a {subject} in the image?"),
        Category::Ecology => "What biome is shown in the image?".to_string(),
        Category::Time => "Is it day or night in the image?".to_string(),
        Category::Weather => "Is the weather sunny or rainy in the image?".to_string(),
        Category::Brightness => "Is the brightness in the image sufficient or insufficient?".to_string(),
        Category::Spatial => {
            let (a, b) = subject.split_once(" near ").unwrap_or((subject.as_str(), ""));
            format!("Is there a {a} near a {b} in the image?")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    Value(String),
}

impl Verdict {
    /// Plain-text form used in histories and datasets.
    pub fn text(&self) -> String {
        match self {
            Verdict::Yes => "yes".into(),
            Verdict::No => "no".into(),
            Verdict::Value(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ref", rename_all = "snake_case")]
pub enum Evidence {
    Entry { index: usize },
    Pair { first: usize, second: usize },
    Scene { field: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub verdict: Verdict,
    pub evidence: Option<Evidence>,
}

impl Answer {
    pub fn yes(evidence: Evidence) -> Answer {
        Answer {
            verdict: Verdict::Yes,
            evidence: Some(evidence),
        }
    }

    pub fn no() -> Answer {
        Answer {
            verdict: Verdict::No,
            evidence: None,
        }
    }

    pub fn value(v: &str, field: &str) -> Answer {
        Answer {
            verdict: Verdict::Value(v.to_string()),
            evidence: Some(Evidence::Scene { field: field.into() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum BackendError {
    #[error("backend timed out")]
    Timeout,
    #[error("backend transport error: {0}")]
    Transport(String),
    #[error("backend returned HTTP {0}")]
    Status(u16),
    #[error("malformed backend reply: {0}")]
    Malformed(String),
    #[error("backend not configured: {0}")]
    NotConfigured(String),
}

/// Something that answers questions about frames.
pub trait Percipient: Send + Sync {
    fn answer(&self, query: &Query, frame: &Frame) -> Result<Answer, BackendError>;
}

/// Answers from frame ground truth.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePercipient;

impl Percipient for OraclePercipient {
    fn answer(&self, query: &Query, frame: &Frame) -> Result<Answer, BackendError> {
        let s = &frame.scene;
        let subject = query.subject.as_str();
        let yes_no = |found: Option<Evidence>| match found {
            Some(e) => Answer::yes(e),
            None => Answer::no(),
        };
        Ok(match query.category {
            Category::Object if subject == "sky" => yes_no(
                s.sky_visible
                    .then(|| Evidence::Scene { field: "sky_visible".into() }),
            ),
            Category::Object | Category::Mob => yes_no(
                first_match(frame, subject, entry_kind_for(query.category))
                    .map(|index| Evidence::Entry { index }),
            ),
            Category::Ecology => Answer::value(s.biome.name(), "biome"),
            Category::Time => Answer::value(s.time.name(), "time"),
            Category::Weather => Answer::value(s.weather.name(), "weather"),
            Category::Brightness => Answer::value(s.brightness.name(), "brightness"),
            Category::Spatial => {
                let pair = subject
                    .split_once(" near ")
                    .and_then(|(a, b)| near_pair(frame, a, b));
                yes_no(pair.map(|(first, second)| Evidence::Pair { first, second }))
            }
        })
    }
}

/// Exhaustive dump: five scene facts then one fact per entry.
pub fn caption(frame: &Frame, backend: &dyn Percipient) -> Result<Vec<(Query, Answer)>, BackendError> {
    let mut queries = vec![
        Query::new(Category::Ecology, "", vec![]),
        Query::new(Category::Time, "", vec![]),
        Query::new(Category::Weather, "", vec![]),
        Query::new(Category::Brightness, "", vec![]),
        Query::new(Category::Object, "sky", vec![]),
    ];
    for e in &frame.entries {
        let cat = match e.kind {
            EntryKind::Block => Category::Object,
            EntryKind::Mob => Category::Mob,
        };
        queries.push(Query::new(cat, e.identity.clone(), vec![]));
    }
    queries
        .into_iter()
        .map(|q| backend.answer(&q, frame).map(|a| (q, a)))
        .collect()
}

/// Maps a free-text reply to a verdict: a leading yes/no token, else the first line.
pub fn normalize_reply(text: &str) -> Verdict {
    let trimmed = text.trim();
    let first_token: String = trimmed
        .split(|c: char| c.is_whitespace() || c == ',' || c == '.' || c == '!' || c == ':' || c == ';')
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    match first_token.as_str() {
        "yes" => Verdict::Yes,
        "no" => Verdict::No,
        _ => {
            let line = trimmed.lines().next().unwrap_or("").trim();
            let line = line.trim_end_matches(['.', '!']).trim();
            Verdict::Value(line.to_ascii_lowercase())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::{Brightness, FrameEntry, Scene};
    use crate::world::{TimeOfDay, Weather};
    use proptest::prelude::*;

    fn scene() -> Scene {
        Scene {
            biome: Biome::Plains,
            time: TimeOfDay::Day,
            weather: Weather::Sunny,
            brightness: Brightness::Sufficient,
            sky_visible: true,
        }
    }

    fn e(kind: EntryKind, id: &str, distance: f64, bearing: f64) -> FrameEntry {
        FrameEntry {
            kind,
            identity: id.into(),
            distance,
            bearing,
            elevation: 0.0,
        }
    }

    #[test]
    fn pig_membership_with_evidence() {
        let frame = Frame {
            entries: vec![e(EntryKind::Mob, "pig", 5.0, 0.0)],
            scene: scene(),
            tick_stamp: 0,
        };
        let a = OraclePercipient
            .answer(&Query::new(Category::Mob, "pig", vec![]), &frame)
            .unwrap();
        assert_eq!(a.verdict, Verdict::Yes);
        assert_eq!(a.evidence, Some(Evidence::Entry { index: 0 }));
    }

    #[test]
    fn night_value() {
        let mut s = scene();
        s.time = TimeOfDay::Night;
        let frame = Frame { entries: vec![], scene: s, tick_stamp: 0 };
        let a = OraclePercipient
            .answer(&Query::new(Category::Time, "", vec![]), &frame)
            .unwrap();
        assert_eq!(a.verdict, Verdict::Value("night".into()));
    }

    #[test]
    fn grass_near_pig_by_separation() {
        // Pig 5 ahead, grass 6 away at the bearing that puts it 3 from the pig:
        // law of cosines, 9 = 25 + 36 - 60 cos(theta).
        let theta = ((25.0 + 36.0 - 9.0) / 60.0f64).acos().to_degrees();
        let frame = Frame {
            entries: vec![
                e(EntryKind::Mob, "pig", 5.0, 0.0),
                e(EntryKind::Block, "grass", 6.0, theta),
            ],
            scene: scene(),
            tick_stamp: 0,
        };
        let a = OraclePercipient
            .answer(&Query::new(Category::Spatial, "grass near pig", vec![]), &frame)
            .unwrap();
        assert_eq!(a.verdict, Verdict::Yes);
    }

    #[test]
    fn caption_counts_and_agrees_with_answers() {
        let frame = Frame {
            entries: vec![
                e(EntryKind::Mob, "pig", 5.0, 0.0),
                e(EntryKind::Block, "grass", 6.0, 10.0),
                e(EntryKind::Block, "log", 8.0, -20.0),
            ],
            scene: scene(),
            tick_stamp: 0,
        };
        let cap = caption(&frame, &OraclePercipient).unwrap();
        assert_eq!(cap.len(), 3 + 5);
        let values: Vec<Verdict> = cap.iter().map(|(_, a)| a.verdict.clone()).collect();
        assert!(values.contains(&Verdict::Value("plains".into())));
        assert!(values.contains(&Verdict::Value("day".into())));
        assert!(values.contains(&Verdict::Value("sunny".into())));
        for (q, a) in &cap {
            let again = OraclePercipient.answer(q, &frame).unwrap();
            assert_eq!(again.verdict, a.verdict);
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_reply("Yes, there is a pig."), Verdict::Yes);
        assert_eq!(normalize_reply("  no."), Verdict::No);
        assert_eq!(normalize_reply("Night.\nThe sky is dark"), Verdict::Value("night".into()));
        assert_eq!(normalize_reply("Nothing here"), Verdict::Value("nothing here".into()));
    }

    #[test]
    fn infer_categories() {
        assert_eq!(Condition::infer("pig").category, Category::Mob);
        assert_eq!(Condition::infer("tree").category, Category::Object);
        assert_eq!(Condition::infer("forest").category, Category::Ecology);
        assert_eq!(Condition::infer("night").category, Category::Time);
        assert_eq!(Condition::infer("rainy").category, Category::Weather);
        assert_eq!(Condition::infer("sufficient").category, Category::Brightness);
        assert_eq!(Condition::infer("grass near pig").category, Category::Spatial);
    }

    fn arb_frame() -> impl Strategy<Value = Frame> {
        let ids = prop::sample::select(vec!["pig", "cow", "grass", "log", "leaves", "water", "stone", "sand"]);
        let entry = (ids, 1.0f64..16.0, -35.0f64..35.0, -30.0f64..30.0).prop_map(|(id, d, b, el)| FrameEntry {
            kind: if MobKind::from_name(id).is_some() { EntryKind::Mob } else { EntryKind::Block },
            identity: id.into(),
            distance: d,
            bearing: b,
            elevation: el,
        });
        let biome = prop::sample::select(Biome::ALL.to_vec());
        (prop::collection::vec(entry, 0..12), biome, any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
            |(mut entries, biome, night, rain, sky)| {
                crate::observation::sort_entries(&mut entries);
                let time = if night { TimeOfDay::Night } else { TimeOfDay::Day };
                Frame {
                    entries,
                    scene: Scene {
                        biome,
                        time,
                        weather: if rain { Weather::Rainy } else { Weather::Sunny },
                        brightness: if sky && !night { Brightness::Sufficient } else { Brightness::Insufficient },
                        sky_visible: sky,
                    },
                    tick_stamp: 0,
                }
            },
        )
    }

    /// Brute-force predicate written independently of the oracle.
    fn brute(c: &Condition, f: &Frame) -> bool {
        let ids = |s: &str| -> Vec<[f64; 3]> {
            f.entries
                .iter()
                .filter(|e| if s == "tree" { e.identity == "log" || e.identity == "leaves" } else { e.identity == s })
                .map(|e| {
                    let (b, el) = (e.bearing.to_radians(), e.elevation.to_radians());
                    [e.distance * el.cos() * b.sin(), e.distance * el.sin(), e.distance * el.cos() * b.cos()]
                })
                .collect()
        };
        match c.category {
            Category::Object if c.subject == "sky" => f.scene.sky_visible,
            Category::Object | Category::Mob => !ids(&c.subject).is_empty(),
            Category::Ecology => format!("{:?}", f.scene.biome).to_lowercase() == c.subject,
            Category::Time => format!("{:?}", f.scene.time).to_lowercase() == c.subject,
            Category::Weather => format!("{:?}", f.scene.weather).to_lowercase() == c.subject,
            Category::Brightness => format!("{:?}", f.scene.brightness).to_lowercase() == c.subject,
            Category::Spatial => {
                let (a, b) = c.subject.split_once(" near ").unwrap();
                let (pa, pb) = (ids(a), ids(b));
                pa.iter().any(|x| {
                    pb.iter().any(|y| {
                        x != y && ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt() <= 4.0
                    })
                })
            }
        }
    }

    proptest! {
        #[test]
        fn oracle_is_sound(frame in arb_frame(), pick in 0usize..14) {
            let conds = [
                Condition::new(Category::Mob, "pig"), Condition::new(Category::Mob, "cow"),
                Condition::new(Category::Object, "tree"), Condition::new(Category::Object, "grass"),
                Condition::new(Category::Object, "water"), Condition::new(Category::Object, "sky"),
                Condition::new(Category::Ecology, "forest"), Condition::new(Category::Ecology, "desert"),
                Condition::new(Category::Time, "night"), Condition::new(Category::Weather, "rainy"),
                Condition::new(Category::Brightness, "sufficient"),
                Condition::new(Category::Spatial, "grass near pig"),
                Condition::new(Category::Spatial, "cow near water"),
                Condition::new(Category::Spatial, "pig near tree"),
            ];
            let c = &conds[pick];
            let a = OraclePercipient.answer(&Query::for_condition(c, vec![]), &frame).unwrap();
            prop_assert_eq!(c.satisfied_by(&a), brute(c, &frame));
            prop_assert_eq!(holds(c, &frame), brute(c, &frame));
            if a.verdict == Verdict::Yes {
                prop_assert!(a.evidence.is_some());
            }
        }
    }
}
