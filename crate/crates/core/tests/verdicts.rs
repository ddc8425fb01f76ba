use xwalk_core::verdict::{parse_response, to_prediction, Prediction, PredictionPolicy, VerdictLabel};

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/rationales/{name}.txt", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn plain_rationale_with_inline_reason() {
    let v = parse_response(&fixture("plain"));
    assert_eq!(v.label, VerdictLabel::Yes);
    assert!(v.diagnostic.is_none());
    assert!(!v.positive_signs.is_empty());
    assert!(!v.reason.is_empty());
    assert!(!v.crosswalk_line.contains("REASON"));
}

#[test]
fn separated_rationale_with_preamble_and_parenthetical() {
    let v = parse_response(&fixture("separated"));
    assert_eq!(v.label, VerdictLabel::No);
    assert!(v.crosswalk_line.starts_with("No (based on"), "{}", v.crosswalk_line);
    assert!(!v.positive_signs.starts_with("I'm unable"));
    assert!(v.risks.contains("two combined"));
}

#[test]
fn overlaid_and_blurred_rationales() {
    for name in ["overlaid", "blurred"] {
        let v = parse_response(&fixture(name));
        assert_eq!(v.label, VerdictLabel::Yes, "{name}");
        for s in [&v.positive_signs, &v.negative_signs, &v.risks, &v.reason] {
            assert!(!s.is_empty(), "{name}: empty section");
            assert!(!s.contains("**"), "{name}: markup left in {s:?}");
        }
        assert_eq!(to_prediction(&v, PredictionPolicy::Strict), Prediction::Crosswalk);
    }
}

#[test]
fn refusal_without_headers() {
    let v = parse_response("I'm unable to help with that image.");
    assert_eq!(v.label, VerdictLabel::Unparseable);
    assert!(v.diagnostic.as_deref().unwrap().contains("CROSSWALK"));
    assert_eq!(to_prediction(&v, PredictionPolicy::Strict), Prediction::Excluded);
    assert_eq!(to_prediction(&v, PredictionPolicy::Lenient), Prediction::NotCrosswalk);
}

#[test]
fn header_variants() {
    for text in [
        "CROSSWALK: yes",
        "### Crosswalk: Yes\nreason: painted bars",
        "- **Crosswalk**: **Yes**",
        "crosswalk - yes, clearly",
        "> **CROSSWALK:** \"Yes\"",
    ] {
        assert_eq!(parse_response(text).label, VerdictLabel::Yes, "{text:?}");
    }
    assert_eq!(parse_response("CROSSWALK: maybe").label, VerdictLabel::Unparseable);
    assert_eq!(parse_response("There is no crosswalk: none").label, VerdictLabel::Unparseable);
}
