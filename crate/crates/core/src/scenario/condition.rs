use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlu::YesNoLabel;

/// Guard on a transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg")]
pub enum Condition {
    Matches(String),
    YesNoIs(YesNoLabel),
    SentimentAtLeast(f64),
    SentimentBelow(f64),
    FrameHas(String),
    Default,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error("empty condition")]
    Empty,
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("invalid yes/no label `{0}` (expected yes, no or other)")]
    BadLabel(String),
    #[error("malformed argument in `{0}`")]
    BadArgument(String),
}

/// What the engine knows when a transition is being chosen.
pub struct Signals<'a> {
    pub matched: Option<&'a str>,
    pub yes_no: YesNoLabel,
    pub sentiment: f64,
    pub frame_has: &'a dyn Fn(&str) -> bool,
}

impl Condition {
    pub fn holds(&self, signals: &Signals<'_>) -> bool {
        match self {
            Condition::Matches(set) => signals.matched == Some(set.as_str()),
            Condition::YesNoIs(label) => signals.yes_no == *label,
            Condition::SentimentAtLeast(t) => signals.sentiment >= *t,
            Condition::SentimentBelow(t) => signals.sentiment < *t,
            Condition::FrameHas(key) => (signals.frame_has)(key),
            Condition::Default => true,
        }
    }

    pub fn is_default(&self) -> bool {
        matches!(self, Condition::Default)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Matches(set) => write!(f, "matches({set})"),
            Condition::YesNoIs(label) => write!(f, "yes_no = {}", label.as_str().to_lowercase()),
            Condition::SentimentAtLeast(t) => write!(f, "sentiment >= {t}"),
            Condition::SentimentBelow(t) => write!(f, "sentiment < {t}"),
            Condition::FrameHas(key) => write!(f, "frame_has({key})"),
            Condition::Default => f.write_str("default"),
        }
    }
}

/// Compiles the condition column of a transition row.
///
/// Grammar: `matches(<id>)` | `yes_no = <yes|no|other>` |
/// `sentiment >= <x>` | `sentiment < <x>` | `frame_has(<key>)` | `default`.
pub fn compile_condition(expr: &str) -> Result<Condition, ConditionError> {
    let expr = expr.trim();
    if expr.is_empty() {
        return Err(ConditionError::Empty);
    }
    if expr == "default" {
        return Ok(Condition::Default);
    }
    if let Some(arg) = call_argument(expr, "matches")? {
        return Ok(Condition::Matches(arg));
    }
    if let Some(arg) = call_argument(expr, "frame_has")? {
        return Ok(Condition::FrameHas(arg));
    }
    if let Some(rest) = expr.strip_prefix("yes_no") {
        let rest = rest.trim_start();
        let label = rest
            .strip_prefix('=')
            .ok_or_else(|| ConditionError::BadArgument(expr.to_string()))?
            .trim();
        let label = YesNoLabel::parse(label).ok_or_else(|| ConditionError::BadLabel(label.to_string()))?;
        return Ok(Condition::YesNoIs(label));
    }
    if let Some(rest) = expr.strip_prefix("sentiment") {
        let rest = rest.trim_start();
        let (at_least, number) = if let Some(n) = rest.strip_prefix(">=") {
            (true, n)
        } else if let Some(n) = rest.strip_prefix('<') {
            (false, n)
        } else {
            return Err(ConditionError::BadArgument(expr.to_string()));
        };
        let threshold: f64 = number
            .trim()
            .parse()
            .map_err(|_| ConditionError::BadArgument(expr.to_string()))?;
        if !(0.0..=1.0).contains(&threshold) {
            return Err(ConditionError::ThresholdOutOfRange(threshold));
        }
        return Ok(if at_least {
            Condition::SentimentAtLeast(threshold)
        } else {
            Condition::SentimentBelow(threshold)
        });
    }
    let head = expr
        .split(|c: char| c == '(' || c.is_whitespace() || c == '=' || c == '<' || c == '>')
        .next()
        .unwrap_or(expr);
    Err(ConditionError::UnknownPredicate(head.to_string()))
}

/// `name(arg)` with a non-empty identifier argument.
fn call_argument(expr: &str, name: &str) -> Result<Option<String>, ConditionError> {
    let Some(rest) = expr.strip_prefix(name) else {
        return Ok(None);
    };
    let rest = rest.trim_start();
    let Some(inner) = rest.strip_prefix('(') else {
        // `matchesfoo` is some other (unknown) predicate.
        return Ok(None);
    };
    let arg = inner
        .strip_suffix(')')
        .ok_or_else(|| ConditionError::BadArgument(expr.to_string()))?
        .trim();
    let valid = !arg.is_empty()
        && arg
            .chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.');
    if !valid {
        return Err(ConditionError::BadArgument(expr.to_string()));
    }
    Ok(Some(arg.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        assert_eq!(compile_condition("default"), Ok(Condition::Default));
        assert_eq!(compile_condition("sentiment >= 0.6"), Ok(Condition::SentimentAtLeast(0.6)));
        assert_eq!(compile_condition("sentiment<0.25"), Ok(Condition::SentimentBelow(0.25)));
        assert_eq!(
            compile_condition("matches(affirm_patterns)"),
            Ok(Condition::Matches("affirm_patterns".into()))
        );
        assert_eq!(compile_condition("yes_no = yes"), Ok(Condition::YesNoIs(YesNoLabel::Yes)));
        assert_eq!(compile_condition("yes_no=Other"), Ok(Condition::YesNoIs(YesNoLabel::Other)));
        assert_eq!(
            compile_condition("frame_has(desired_spot)"),
            Ok(Condition::FrameHas("desired_spot".into()))
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(compile_condition("  "), Err(ConditionError::Empty));
        assert_eq!(
            compile_condition("sentiment >= 1.5"),
            Err(ConditionError::ThresholdOutOfRange(1.5))
        );
        assert_eq!(
            compile_condition("sentiment < -0.1"),
            Err(ConditionError::ThresholdOutOfRange(-0.1))
        );
        assert!(matches!(compile_condition("weather(rain)"), Err(ConditionError::UnknownPredicate(p)) if p == "weather"));
        assert!(matches!(compile_condition("yes_no = maybe"), Err(ConditionError::BadLabel(_))));
        assert!(matches!(compile_condition("matches()"), Err(ConditionError::BadArgument(_))));
        assert!(matches!(compile_condition("matches(a b)"), Err(ConditionError::BadArgument(_))));
        assert!(matches!(compile_condition("sentiment > 0.5"), Err(ConditionError::BadArgument(_))));
        assert!(matches!(compile_condition("sentiment >= lots"), Err(ConditionError::BadArgument(_))));
    }

    #[test]
    fn display_round_trips() {
        for expr in [
            "default",
            "matches(x)",
            "frame_has(theme)",
            "yes_no = no",
            "sentiment >= 0.6",
            "sentiment < 0.3",
        ] {
            let c = compile_condition(expr).unwrap();
            assert_eq!(c.to_string(), expr);
            assert_eq!(compile_condition(&c.to_string()).unwrap(), c);
        }
    }
}
