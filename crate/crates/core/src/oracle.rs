//! Simulated respondent whose helpfulness decays with every question, plus a
//! terminal-driven human respondent for debugging sessions.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{AttributeKind, ObjectInstance};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle queried after the episode ended")]
    EpisodeEnded,
    #[error("invalid oracle configuration: {0}")]
    Config(String),
}

/// What the agent asks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Query {
    /// "What is its color?" and friends.
    Attribute(AttributeKind),
    /// "Which one do you mean?"; the respondent picks what to tell.
    Open,
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Attribute(k) => f.write_str(k.as_str()),
            Query::Open => f.write_str("open"),
        }
    }
}

impl From<Query> for String {
    fn from(q: Query) -> String {
        q.to_string()
    }
}

impl TryFrom<String> for Query {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("open") {
            return Ok(Query::Open);
        }
        AttributeKind::parse(&s)
            .map(Query::Attribute)
            .ok_or_else(|| format!("unknown query {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Per-question decay exponent of the usefulness probability.
    pub eta: f64,
    /// Usefulness never drops below this probability.
    pub p_floor: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { eta: 0.5, p_floor: 0.05 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(OracleError::Config(format!("eta {} must be nonnegative", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.p_floor) {
            return Err(OracleError::Config(format!("p_floor {} outside [0, 1]", self.p_floor)));
        }
        Ok(())
    }

    /// Probability that question number `n` (1-based) gets a useful answer.
    pub fn usefulness(&self, n: u32) -> f64 {
        usefulness_probability(n, self.eta, self.p_floor)
    }
}

/// `max(p_floor, exp(-eta * (n - 1)))` for the 1-based question index `n`.
pub fn usefulness_probability(n: u32, eta: f64, p_floor: f64) -> f64 {
    let k = n.saturating_sub(1) as f64;
    p_floor.max((-eta * k).exp()).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disclosure {
    pub kind: AttributeKind,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReply {
    pub useful: bool,
    pub disclosed: Option<Disclosure>,
    pub text: String,
}

impl OracleReply {
    pub fn no_information() -> Self {
        Self {
            useful: false,
            disclosed: None,
            text: "Sorry, I'm not sure which one I meant.".into(),
        }
    }

    pub fn disclosing(kind: AttributeKind, value: &str) -> Self {
        let text = match kind {
            AttributeKind::Color => format!("It's the {value} one."),
            AttributeKind::Size => format!("It's the {value} one."),
            AttributeKind::Landmark => format!("It's the one near the {value}."),
        };
        Self {
            useful: true,
            disclosed: Some(Disclosure {
                kind,
                value: value.to_string(),
            }),
            text,
        }
    }
}

/// The attribute kind whose value, taken from `target`, excludes the most of
/// `remaining`. Ties go to the earliest kind in registry order.
pub fn most_discriminating(target: &ObjectInstance, remaining: &[&ObjectInstance]) -> AttributeKind {
    let mut best = AttributeKind::ALL[0];
    let mut best_pruned = 0usize;
    for (i, kind) in AttributeKind::ALL.iter().enumerate() {
        let value = target.attribute(*kind);
        let pruned = remaining.iter().filter(|c| c.attribute(*kind) != value).count();
        if i == 0 || pruned > best_pruned {
            best = *kind;
            best_pruned = pruned;
        }
    }
    best
}

/// The reply a respondent gives when it is being helpful.
pub fn useful_reply(query: Query, target: &ObjectInstance, remaining: &[&ObjectInstance]) -> OracleReply {
    let kind = match query {
        Query::Attribute(k) => k,
        Query::Open => most_discriminating(target, remaining),
    };
    match target.attribute(kind) {
        Some(v) => OracleReply::disclosing(kind, v),
        None => OracleReply::no_information(),
    }
}

/// Per-episode respondent state. Fatigue accumulates across questions of one
/// episode and starts fresh with every new state.
#[derive(Debug, Clone)]
pub struct OracleState {
    target: Arc<ObjectInstance>,
    n_answered: u32,
    config: OracleConfig,
    rng: ChaCha8Rng,
    forced: Option<bool>,
    ended: bool,
}

impl OracleState {
    pub fn new(target: ObjectInstance, config: OracleConfig, seed: u64) -> Self {
        Self {
            target: Arc::new(target),
            n_answered: 0,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            forced: None,
            ended: false,
        }
    }

    pub fn n_answered(&self) -> u32 {
        self.n_answered
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn target(&self) -> &ObjectInstance {
        &self.target
    }

    /// Probability that the next question is answered usefully.
    pub fn next_usefulness(&self) -> f64 {
        self.config.usefulness(self.n_answered + 1)
    }

    /// Answer on behalf of a different target from now on; fatigue and the
    /// random stream carry over.
    pub fn retarget(&mut self, target: ObjectInstance) {
        self.target = Arc::new(target);
    }

    /// Fix the usefulness of the next answer instead of sampling it. Planners
    /// use this to enumerate chance outcomes.
    pub fn force_next(&mut self, useful: bool) {
        self.forced = Some(useful);
    }

    pub fn end(&mut self) {
        self.ended = true;
    }

    pub fn answer(&mut self, query: Query, remaining: &[&ObjectInstance]) -> Result<OracleReply, OracleError> {
        if self.ended {
            return Err(OracleError::EpisodeEnded);
        }
        let p = self.next_usefulness();
        // Always draw so the stream stays aligned whether or not outcomes are forced.
        let u: f64 = self.rng.gen();
        let useful = self.forced.take().unwrap_or(u < p);
        self.n_answered += 1;
        Ok(if useful {
            useful_reply(query, &self.target, remaining)
        } else {
            OracleReply::no_information()
        })
    }

    /// Count a question answered by someone else (e.g. a human at the terminal).
    pub fn record_external_answer(&mut self) -> Result<(), OracleError> {
        if self.ended {
            return Err(OracleError::EpisodeEnded);
        }
        self.forced = None;
        let _: f64 = self.rng.gen();
        self.n_answered += 1;
        Ok(())
    }
}

/// Parsed form of one typed human answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypedAnswer {
    Pass,
    Disclose(AttributeKind, String),
}

/// Grammar: `attribute-kind=value` or `pass`.
pub fn parse_typed_answer(line: &str) -> Option<TypedAnswer> {
    let line = line.trim();
    if line.eq_ignore_ascii_case("pass") {
        return Some(TypedAnswer::Pass);
    }
    let (k, v) = line.split_once('=')?;
    let kind = AttributeKind::parse(k)?;
    let value = v.trim().to_ascii_lowercase();
    if value.is_empty() || value.contains(char::is_whitespace) && kind != AttributeKind::Landmark {
        return None;
    }
    Some(TypedAnswer::Disclose(kind, value))
}

/// Maximum number of unparseable lines before giving up on a question.
pub const MAX_REPROMPTS: usize = 3;

/// Ask a human at the terminal. Unparseable input is re-prompted up to
/// [`MAX_REPROMPTS`] times before falling back to a no-information reply.
pub fn interactive_answer<R: BufRead, W: Write>(
    query: Query,
    remaining: &[&ObjectInstance],
    input: &mut R,
    output: &mut W,
) -> std::io::Result<OracleReply> {
    writeln!(output, "Agent asks: {}", match query {
        Query::Attribute(k) => format!("what is its {k}?"),
        Query::Open => "which one do you mean?".to_string(),
    })?;
    writeln!(output, "Remaining candidates:")?;
    for c in remaining {
        let attrs: Vec<String> = c.attributes.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(output, "  {} {} [{}]", c.id, c.category, attrs.join(", "))?;
    }
    for _ in 0..MAX_REPROMPTS {
        write!(output, "answer (kind=value | pass)> ")?;
        output.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        match parse_typed_answer(&line) {
            Some(TypedAnswer::Pass) => return Ok(OracleReply::no_information()),
            Some(TypedAnswer::Disclose(kind, value)) => return Ok(OracleReply::disclosing(kind, &value)),
            None => writeln!(output, "could not parse {:?}", line.trim())?,
        }
    }
    Ok(OracleReply::no_information())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::fixtures::line_scene;

    #[test]
    fn schedule_values() {
        assert_eq!(usefulness_probability(1, 0.5, 0.0), 1.0);
        assert!((usefulness_probability(3, 0.5, 0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((usefulness_probability(3, 0.5, 0.0) - 0.368).abs() < 1e-3);
        for n in 1..30 {
            assert_eq!(usefulness_probability(n, 0.0, 0.0), 1.0);
            assert!(usefulness_probability(n + 1, 0.5, 0.05) <= usefulness_probability(n, 0.5, 0.05));
            assert!(usefulness_probability(n, 3.0, 0.05) >= 0.05);
        }
    }

    #[test]
    fn first_answer_always_useful() {
        let scene = line_scene();
        let target = scene.objects[1].clone();
        let remaining: Vec<&ObjectInstance> = scene.objects[..3].iter().collect();
        for seed in 0..200 {
            let mut o = OracleState::new(target.clone(), OracleConfig::default(), seed);
            assert!(o.answer(Query::Open, &remaining).unwrap().useful);
        }
    }

    #[test]
    fn no_fatigue_means_always_useful() {
        let scene = line_scene();
        let target = scene.objects[1].clone();
        let remaining: Vec<&ObjectInstance> = scene.objects[..3].iter().collect();
        let mut o = OracleState::new(target, OracleConfig { eta: 0.0, p_floor: 0.0 }, 3);
        for _ in 0..50 {
            assert!(o.answer(Query::Open, &remaining).unwrap().useful);
        }
    }

    #[test]
    fn empirical_rate_matches_schedule() {
        let scene = line_scene();
        let target = scene.objects[1].clone();
        let remaining: Vec<&ObjectInstance> = scene.objects[..3].iter().collect();
        let trials = 4000;
        let mut useful_third = 0;
        for seed in 0..trials {
            let mut o = OracleState::new(target.clone(), OracleConfig { eta: 0.5, p_floor: 0.0 }, seed);
            o.answer(Query::Open, &remaining).unwrap();
            o.answer(Query::Open, &remaining).unwrap();
            if o.answer(Query::Open, &remaining).unwrap().useful {
                useful_third += 1;
            }
        }
        let p = (-1.0f64).exp();
        let rate = useful_third as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((rate - p).abs() < 4.0 * sigma, "rate {rate} vs {p}");
    }

    #[test]
    fn useful_replies_are_true_of_target() {
        let scene = line_scene();
        let remaining: Vec<&ObjectInstance> = scene.objects[..3].iter().collect();
        for t in 0..3 {
            let target = scene.objects[t].clone();
            for q in [
                Query::Open,
                Query::Attribute(AttributeKind::Color),
                Query::Attribute(AttributeKind::Size),
                Query::Attribute(AttributeKind::Landmark),
            ] {
                let reply = useful_reply(q, &target, &remaining);
                let d = reply.disclosed.unwrap();
                assert_eq!(target.attribute(d.kind), Some(d.value.as_str()));
            }
        }
    }

    #[test]
    fn open_question_picks_most_pruning_kind() {
        let scene = line_scene();
        let remaining: Vec<&ObjectInstance> = scene.objects[..3].iter().collect();
        // red/small/door vs blue/small vs blue/large: color prunes 2, landmark prunes 2 -> color.
        assert_eq!(most_discriminating(&scene.objects[0], &remaining), AttributeKind::Color);
        // blue/large/sink: color prunes 1, size prunes 2, landmark prunes 2 -> size.
        assert_eq!(most_discriminating(&scene.objects[2], &remaining), AttributeKind::Size);
        // blue/small/workbench: landmark prunes 2.
        assert_eq!(most_discriminating(&scene.objects[1], &remaining), AttributeKind::Landmark);
    }

    #[test]
    fn draws_reproducible_and_end_is_enforced() {
        let scene = line_scene();
        let target = scene.objects[1].clone();
        let remaining: Vec<&ObjectInstance> = scene.objects[..3].iter().collect();
        let run = |seed| {
            let mut o = OracleState::new(target.clone(), OracleConfig::default(), seed);
            (0..10).map(|_| o.answer(Query::Open, &remaining).unwrap().useful).collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        let mut o = OracleState::new(target.clone(), OracleConfig::default(), 1);
        o.end();
        assert_eq!(o.answer(Query::Open, &remaining), Err(OracleError::EpisodeEnded));
    }

    #[test]
    fn forced_outcome_overrides_draw() {
        let scene = line_scene();
        let target = scene.objects[1].clone();
        let remaining: Vec<&ObjectInstance> = scene.objects[..3].iter().collect();
        let mut o = OracleState::new(target, OracleConfig::default(), 1);
        o.force_next(false);
        assert!(!o.answer(Query::Open, &remaining).unwrap().useful);
        assert_eq!(o.n_answered(), 1);
    }

    #[test]
    fn typed_answers() {
        let scene = line_scene();
        let remaining: Vec<&ObjectInstance> = scene.objects[..3].iter().collect();
        let mut out = Vec::new();
        let reply = interactive_answer(Query::Open, &remaining, &mut "color=red\n".as_bytes(), &mut out).unwrap();
        assert_eq!(reply, OracleReply::disclosing(AttributeKind::Color, "red"));
        let reply = interactive_answer(Query::Open, &remaining, &mut "pass\n".as_bytes(), &mut out).unwrap();
        assert!(!reply.useful);
        let reply = interactive_answer(Query::Open, &remaining, &mut "??\nblah\ncolour red\ncolor=red\n".as_bytes(), &mut out).unwrap();
        assert!(!reply.useful, "three garbage lines exhaust the prompt budget");
        let reply = interactive_answer(Query::Open, &remaining, &mut "oops\nsize=large\n".as_bytes(), &mut out).unwrap();
        assert_eq!(reply.disclosed.unwrap().value, "large");
    }

    #[test]
    fn query_wire_format() {
        assert_eq!(serde_json::to_string(&Query::Open).unwrap(), "\"open\"");
        assert_eq!(
            serde_json::from_str::<Query>("\"size\"").unwrap(),
            Query::Attribute(AttributeKind::Size)
        );
        assert!(serde_json::from_str::<Query>("\"smell\"").is_err());
    }
}
