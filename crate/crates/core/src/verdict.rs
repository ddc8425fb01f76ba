//! Parsing of the model's sectioned rationale into a label.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::road::TruthLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictLabel {
    Yes,
    No,
    Unparseable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Section {
    PositiveSigns,
    NegativeSigns,
    Risks,
    Crosswalk,
    Reason,
}

impl Section {
    fn from_header(h: &str) -> Section {
        let h: String = h.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_uppercase();
        match h.as_str() {
            "POSITIVE SIGNS" => Section::PositiveSigns,
            "NEGATIVE SIGNS" => Section::NegativeSigns,
            "RISKS" => Section::Risks,
            "CROSSWALK" => Section::Crosswalk,
            _ => Section::Reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: VerdictLabel,
    pub positive_signs: String,
    pub negative_signs: String,
    pub risks: String,
    pub reason: String,
    /// Text after the CROSSWALK header, e.g. `No (based on ...)`.
    pub crosswalk_line: String,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(\*\*)?[ \t]*\b(positive[ \t]+signs|negative[ \t]+signs|risks|crosswalk|reason)\b[ \t]*(\*\*)?[ \t]*((?::|-[ \t])[ \t]*(\*\*)?)?")
        .expect("valid header pattern")
});

static ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)^[\s*_"'`>\[(]*(yes|no)\b"#).expect("valid answer pattern"));

struct Header {
    section: Section,
    start: usize,
    end: usize,
}

/// Finds header occurrences that actually open a section.
///
/// At the start of a line (after bullets, `#`, `>` or whitespace) a header
/// needs a colon, a dash, or bold markers. Mid-line it needs bold markers
/// around it or an exact upper-case name followed by a colon.
fn headers(text: &str) -> Vec<Header> {
    let mut out = Vec::new();
    for c in HEADER.captures_iter(text) {
        let m = c.get(0).expect("whole match");
        let name = c.get(2).expect("name group");
        let bold_open = c.get(1).is_some();
        let bold_close = c.get(3).is_some() || c.get(5).is_some();
        let sep = c.get(4).map(|s| s.as_str().trim_start());
        let colon = sep.is_some_and(|s| s.starts_with(':'));
        let line_start = text[..m.start()].rfind('\n').map_or(0, |i| i + 1);
        let prefix = &text[line_start..m.start()];
        let at_line_start = prefix.chars().all(|ch| ch.is_whitespace() || "-*#>+•".contains(ch));
        let ok = if at_line_start {
            sep.is_some() || (bold_open && bold_close)
        } else {
            (bold_open && bold_close && colon) || (colon && name.as_str() == name.as_str().to_ascii_uppercase())
        };
        if ok {
            out.push(Header {
                section: Section::from_header(name.as_str()),
                start: if at_line_start { line_start } else { m.start() },
                end: m.end(),
            });
        }
    }
    out
}

fn clean(s: &str) -> String {
    let t = s.trim();
    let t = t.trim_start_matches("**").trim_end_matches("**").trim();
    t.to_string()
}

/// Never fails; unrecognised text yields [`VerdictLabel::Unparseable`] with a
/// diagnostic.
pub fn parse_response(text: &str) -> Verdict {
    let found = headers(text);
    let mut v = Verdict {
        label: VerdictLabel::Unparseable,
        positive_signs: String::new(),
        negative_signs: String::new(),
        risks: String::new(),
        reason: String::new(),
        crosswalk_line: String::new(),
        raw: text.to_string(),
        diagnostic: None,
    };
    let mut seen = std::collections::BTreeSet::new();
    for (k, h) in found.iter().enumerate() {
        if !seen.insert(h.section) {
            continue;
        }
        let stop = found.get(k + 1).map_or(text.len(), |n| n.start);
        let body = clean(&text[h.end..stop]);
        match h.section {
            Section::PositiveSigns => v.positive_signs = body,
            Section::NegativeSigns => v.negative_signs = body,
            Section::Risks => v.risks = body,
            Section::Reason => v.reason = body,
            Section::Crosswalk => v.crosswalk_line = body,
        }
    }
    if !seen.contains(&Section::Crosswalk) {
        v.diagnostic = Some("no CROSSWALK line".into());
        return v;
    }
    match ANSWER.captures(&v.crosswalk_line) {
        Some(c) if c[1].eq_ignore_ascii_case("yes") => v.label = VerdictLabel::Yes,
        Some(_) => v.label = VerdictLabel::No,
        None => {
            v.diagnostic = Some(format!(
                "CROSSWALK line has no Yes/No answer: {:?}",
                v.crosswalk_line.chars().take(60).collect::<String>()
            ))
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionPolicy {
    Strict,
    #[default]
    Lenient,
}

impl fmt::Display for PredictionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictionPolicy::Strict => "strict",
            PredictionPolicy::Lenient => "lenient",
        })
    }
}

impl FromStr for PredictionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(PredictionPolicy::Strict),
            "lenient" => Ok(PredictionPolicy::Lenient),
            _ => Err(format!("unknown policy `{s}` (expected strict or lenient)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prediction {
    Crosswalk,
    NotCrosswalk,
    Excluded,
}

impl Prediction {
    pub fn as_label(&self) -> Option<TruthLabel> {
        match self {
            Prediction::Crosswalk => Some(TruthLabel::Crosswalk),
            Prediction::NotCrosswalk => Some(TruthLabel::NotCrosswalk),
            Prediction::Excluded => None,
        }
    }
}

pub fn to_prediction(v: &Verdict, policy: PredictionPolicy) -> Prediction {
    match (v.label, policy) {
        (VerdictLabel::Yes, _) => Prediction::Crosswalk,
        (VerdictLabel::No, _) => Prediction::NotCrosswalk,
        (VerdictLabel::Unparseable, PredictionPolicy::Strict) => Prediction::Excluded,
        (VerdictLabel::Unparseable, PredictionPolicy::Lenient) => Prediction::NotCrosswalk,
    }
}
