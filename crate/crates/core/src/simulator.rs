//! Persona-driven simulated users for batch runs and metrics.
//!
//! Each turn the simulator draws an intent (question, affirm or negate)
//! from the persona's rates with a seeded RNG, then takes the next scripted
//! answer for the current phase if one is left, or asks the user-side LLM
//! to phrase the intent. [`persona_responder`] is a deterministic stand-in
//! for that LLM.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tracing::{debug, warn};

use crate::dialogue::{DialogueEngine, SessionFrame, SessionMeta};
use crate::llm::{ChatBackend, ChatExchange, PromptLibrary, Responder};
use crate::plan::PlanExport;
use crate::response::ResponseSource;
use crate::scenario::Phase;
use crate::text::fnv1a64;
use crate::wire::JsonClient;

pub const DEFAULT_TURN_CAP: usize = 40;
pub const USER_PROMPT: &str = "user_simulator";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("persona {path}: {message}")]
    Persona { path: String, message: String },
    #[error("endpoint error: {0}")]
    Endpoint(String),
    #[error("dialogue error: {0}")]
    Dialogue(String),
    #[error("no logs to summarize")]
    NoLogs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerStyle {
    pub affirm_rate: f64,
    pub question_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub age: u32,
    pub gender: String,
    pub traits: String,
    pub answer_style: AnswerStyle,
    #[serde(default)]
    pub scripted_answers: BTreeMap<Phase, Vec<String>>,
}

impl Persona {
    pub fn parse(toml_text: &str, origin: &str) -> Result<Self, SimError> {
        let persona: Persona = toml::from_str(toml_text).map_err(|e| SimError::Persona {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        let style = persona.answer_style;
        for (name, rate) in [("affirm_rate", style.affirm_rate), ("question_rate", style.question_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(SimError::Persona {
                    path: origin.to_string(),
                    message: format!("{name} {rate} is outside [0, 1]"),
                });
            }
        }
        Ok(persona)
    }

    /// Loads every `*.toml` file in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Persona>, SimError> {
        let io = |e: std::io::Error| SimError::Persona {
            path: dir.display().to_string(),
            message: e.to_string(),
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        paths
            .iter()
            .map(|p| Persona::parse(&std::fs::read_to_string(p).map_err(io)?, &p.display().to_string()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Intent {
    Affirm,
    Negate,
    Question,
}

impl Intent {
    pub fn as_str(self) -> &'static str {
        match self {
            Intent::Affirm => "affirm",
            Intent::Negate => "negate",
            Intent::Question => "question",
        }
    }

    fn instruction(self) -> &'static str {
        match self {
            Intent::Affirm => "a clearly positive, agreeing answer.",
            Intent::Negate => "a clearly negative, declining answer.",
            Intent::Question => "a short question back to the guide about what they just said.",
        }
    }

    fn draw(style: &AnswerStyle, rng: &mut ChaCha8Rng) -> Intent {
        let (q, a): (f64, f64) = (rng.gen(), rng.gen());
        if q < style.question_rate {
            Intent::Question
        } else if a < style.affirm_rate {
            Intent::Affirm
        } else {
            Intent::Negate
        }
    }
}

/// One simulated exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTurn {
    pub turn: usize,
    /// Phase after the system replied.
    pub phase: Phase,
    pub user_utterance: String,
    pub system_utterance: String,
    pub source: ResponseSource,
    pub ended: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueLog {
    pub persona_id: String,
    pub seed: u64,
    pub opening: String,
    pub opening_phase: Phase,
    pub turns: Vec<SimTurn>,
    pub completed: bool,
    pub plan: Option<PlanExport>,
}

impl DialogueLog {
    /// One JSON object per turn.
    pub fn to_jsonl(&self) -> String {
        self.turns
            .iter()
            .map(|t| serde_json::to_string(t).expect("sim turns serialize") + "\n")
            .collect()
    }
}

/// What the simulator sees of the system after each turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetReply {
    pub system_utterance: String,
    pub phase: Phase,
    pub ended: bool,
    pub plan: Option<PlanExport>,
    pub source: ResponseSource,
}

/// A dialogue system the simulator can talk to.
pub trait DialogueTarget {
    /// Starts a session; returns the opening utterance and its phase.
    fn start(&mut self, persona: &Persona) -> Result<(String, Phase), SimError>;
    fn turn(&mut self, text: &str) -> Result<TargetReply, SimError>;
}

/// Talks to a [`DialogueEngine`] directly.
pub struct InProcessTarget<'a> {
    engine: &'a DialogueEngine,
    frame: Option<SessionFrame>,
    session_counter: u64,
}

impl<'a> InProcessTarget<'a> {
    pub fn new(engine: &'a DialogueEngine) -> Self {
        InProcessTarget {
            engine,
            frame: None,
            session_counter: 0,
        }
    }

    /// The frame of the current session.
    pub fn frame(&self) -> Option<&SessionFrame> {
        self.frame.as_ref()
    }
}

impl DialogueTarget for InProcessTarget<'_> {
    fn start(&mut self, persona: &Persona) -> Result<(String, Phase), SimError> {
        self.session_counter += 1;
        let (frame, opening) = self
            .engine
            .create_session(format!("sim-{}-{}", persona.id, self.session_counter), &SessionMeta::with_age(persona.age))
            .map_err(|e| SimError::Dialogue(e.to_string()))?;
        let phase = frame.phase;
        self.frame = Some(frame);
        Ok((opening, phase))
    }

    fn turn(&mut self, text: &str) -> Result<TargetReply, SimError> {
        let frame = self
            .frame
            .as_mut()
            .ok_or_else(|| SimError::Dialogue("no session started".into()))?;
        let r = self.engine.advance(frame, text).map_err(|e| SimError::Dialogue(e.to_string()))?;
        Ok(TargetReply {
            system_utterance: r.system_utterance,
            phase: r.phase,
            ended: r.ended,
            plan: r.plan,
            source: r.source,
        })
    }
}

/// Talks to the HTTP service.
pub struct HttpTarget {
    client: JsonClient,
    base_url: String,
    session_id: Option<String>,
}

impl HttpTarget {
    pub fn new(base_url: &str, timeout: std::time::Duration) -> Self {
        HttpTarget {
            client: JsonClient::new(timeout),
            base_url: base_url.trim_end_matches('/').to_string(),
            session_id: None,
        }
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, SimError> {
        let url = format!("{}{path}", self.base_url);
        let (status, value) = self
            .client
            .post_raw(&url, body)
            .map_err(|e| SimError::Endpoint(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(SimError::Endpoint(format!("{url} answered {status}: {value}")));
        }
        Ok(value)
    }
}

fn field<T: serde::de::DeserializeOwned>(value: &Value, key: &str) -> Result<T, SimError> {
    serde_json::from_value(value.get(key).cloned().unwrap_or(Value::Null))
        .map_err(|e| SimError::Endpoint(format!("bad `{key}` in response: {e}")))
}

impl DialogueTarget for HttpTarget {
    fn start(&mut self, persona: &Persona) -> Result<(String, Phase), SimError> {
        let v = self.post("/sessions", &json!({ "age": persona.age }))?;
        self.session_id = Some(field(&v, "session_id")?);
        Ok((field(&v, "system_utterance")?, field(&v, "phase")?))
    }

    fn turn(&mut self, text: &str) -> Result<TargetReply, SimError> {
        let id = self
            .session_id
            .clone()
            .ok_or_else(|| SimError::Endpoint("no session started".into()))?;
        let v = self.post(&format!("/sessions/{id}/utterance"), &json!({ "text": text }))?;
        Ok(TargetReply {
            system_utterance: field(&v, "system_utterance")?,
            phase: field(&v, "phase")?,
            ended: field(&v, "ended")?,
            plan: field(&v, "plan")?,
            source: field(&v, "source")?,
        })
    }
}

/// The user side of a simulation.
pub struct UserSimulator {
    llm: Arc<dyn ChatBackend>,
    prompts: Arc<PromptLibrary>,
    pub turn_cap: usize,
}

impl UserSimulator {
    pub fn new(llm: Arc<dyn ChatBackend>, prompts: Arc<PromptLibrary>) -> Self {
        UserSimulator {
            llm,
            prompts,
            turn_cap: DEFAULT_TURN_CAP,
        }
    }

    fn generate(&self, persona: &Persona, intent: Intent, system_utterance: &str) -> String {
        let vars = BTreeMap::from([
            ("persona_age".to_string(), persona.age.to_string()),
            ("persona_gender".to_string(), persona.gender.clone()),
            ("persona_traits".to_string(), persona.traits.clone()),
            ("intent".to_string(), intent.as_str().to_string()),
            ("intent_instruction".to_string(), intent.instruction().to_string()),
            ("system_utterance".to_string(), system_utterance.to_string()),
        ]);
        let reply = self
            .prompts
            .render(USER_PROMPT, &vars)
            .map_err(|e| e.to_string())
            .and_then(|exchange| self.llm.chat(&exchange).map_err(|e| e.to_string()));
        match reply {
            Ok(text) if !text.trim().is_empty() => text.trim().to_string(),
            Ok(_) => canned(intent, 0).to_string(),
            Err(err) => {
                warn!(%err, "user simulator LLM failed; using a canned answer");
                canned(intent, 0).to_string()
            }
        }
    }

    /// Runs one dialogue until it ends or the turn cap is reached.
    pub fn run(&self, persona: &Persona, target: &mut dyn DialogueTarget, seed: u64) -> Result<DialogueLog, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(persona.id.as_bytes()));
        let (opening, opening_phase) = target.start(persona)?;
        let mut log = DialogueLog {
            persona_id: persona.id.clone(),
            seed,
            opening: opening.clone(),
            opening_phase,
            turns: Vec::new(),
            completed: false,
            plan: None,
        };
        let mut system_utterance = opening;
        let mut phase = opening_phase;
        let mut used: HashMap<Phase, usize> = HashMap::new();
        while log.turns.len() < self.turn_cap {
            let intent = Intent::draw(&persona.answer_style, &mut rng);
            let k = used.entry(phase).or_default();
            let scripted = persona.scripted_answers.get(&phase).and_then(|answers| answers.get(*k));
            *k += 1;
            let user = match scripted {
                Some(text) => text.clone(),
                None => self.generate(persona, intent, &system_utterance),
            };
            debug!(persona = %persona.id, ?intent, %user, "simulated user turn");
            let reply = target.turn(&user)?;
            system_utterance = reply.system_utterance.clone();
            phase = reply.phase;
            log.turns.push(SimTurn {
                turn: log.turns.len() + 1,
                phase,
                user_utterance: user,
                system_utterance: reply.system_utterance,
                source: reply.source,
                ended: reply.ended,
                plan: reply.plan.clone(),
            });
            if reply.ended {
                log.completed = true;
                log.plan = reply.plan;
                break;
            }
        }
        if !log.completed {
            warn!(persona = %persona.id, cap = self.turn_cap, "turn cap reached before the dialogue ended");
        }
        Ok(log)
    }
}

const AFFIRM: [&str; 6] = ["Yes, definitely.", "Sure, that sounds great.", "Yes please!", "Of course, I'd love to.", "Yeah, sounds good.", "Absolutely."];
const NEGATE: [&str; 6] = ["No, not really.", "No thanks.", "Not really, sorry.", "Nope.", "I'd rather not.", "Not for me."];
const QUESTION: [&str; 6] = [
    "How much is the entrance fee?",
    "What time does it open?",
    "Is it crowded on weekends?",
    "How long does it take to get there?",
    "Can you tell me more about it?",
    "Which season is best?",
];

fn canned(intent: Intent, hash: u64) -> &'static str {
    let pool = match intent {
        Intent::Affirm => &AFFIRM,
        Intent::Negate => &NEGATE,
        Intent::Question => &QUESTION,
    };
    pool[(hash % pool.len() as u64) as usize]
}

/// A deterministic user-side "LLM" for the `user_simulator` prompt.
///
/// It reads the intent and the guide's utterance from the prompt
/// variables. Open questions about visited or wished-for places are
/// answered by naming spots from `spot_names`; other questions get a canned
/// phrase for the intent.
pub fn persona_responder(spot_names: Vec<String>) -> Responder {
    Arc::new(move |exchange: &ChatExchange, hash: u64| {
        let intent = match exchange.vars.get("intent").map(String::as_str) {
            Some("affirm") => Intent::Affirm,
            Some("question") => Intent::Question,
            _ => Intent::Negate,
        };
        let said = exchange.vars.get("system_utterance").map(|s| s.to_lowercase()).unwrap_or_default();
        let spot = |offset: u64| -> Option<&str> {
            (!spot_names.is_empty()).then(|| spot_names[((hash >> 8).wrapping_add(offset) % spot_names.len() as u64) as usize].as_str())
        };
        if intent != Intent::Question {
            if said.contains("already visited") {
                if let (Intent::Affirm, Some(a), Some(b)) = (intent, spot(0), spot(7)) {
                    return format!("I've been to {a} and {b}.");
                }
                return "Nowhere yet, to be honest.".to_string();
            }
            if said.contains("most like") {
                if let (Intent::Affirm, Some(a)) = (intent, spot(3)) {
                    return format!("I'd really like to see {a}.");
                }
                return "Not sure, anywhere is fine.".to_string();
            }
            if said.contains("enjoy most") || said.contains("memorable") {
                return match intent {
                    Intent::Affirm => "I love trying local food and walking old streets, it's wonderful!".to_string(),
                    _ => "Nothing special, I just rest.".to_string(),
                };
            }
        }
        canned(intent, hash).to_string()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub runs: usize,
    pub completion_rate: f64,
    pub mean_turns: f64,
    pub llm_fallback_rate: f64,
    /// Mean number of turns per run that ended in each phase.
    pub per_phase_turns: BTreeMap<Phase, f64>,
}

/// Aggregates logs. Only integer totals are summed, so the result does not
/// depend on log order.
pub fn compute_metrics(logs: &[DialogueLog]) -> Result<SimMetrics, SimError> {
    if logs.is_empty() {
        return Err(SimError::NoLogs);
    }
    let runs = logs.len();
    let completed = logs.iter().filter(|l| l.completed).count();
    let turns: usize = logs.iter().map(|l| l.turns.len()).sum();
    let llm_turns = logs
        .iter()
        .flat_map(|l| &l.turns)
        .filter(|t| t.source == ResponseSource::Llm)
        .count();
    let mut per_phase: BTreeMap<Phase, usize> = Phase::ALL.into_iter().map(|p| (p, 0)).collect();
    for turn in logs.iter().flat_map(|l| &l.turns) {
        *per_phase.entry(turn.phase).or_default() += 1;
    }
    Ok(SimMetrics {
        runs,
        completion_rate: completed as f64 / runs as f64,
        mean_turns: turns as f64 / runs as f64,
        llm_fallback_rate: if turns == 0 { 0.0 } else { llm_turns as f64 / turns as f64 },
        per_phase_turns: per_phase.into_iter().map(|(p, n)| (p, n as f64 / runs as f64)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(completed: bool, sources: &[ResponseSource]) -> DialogueLog {
        DialogueLog {
            persona_id: "p".into(),
            seed: 0,
            opening: "Hi".into(),
            opening_phase: Phase::Icebreaker,
            turns: sources
                .iter()
                .enumerate()
                .map(|(i, &source)| SimTurn {
                    turn: i + 1,
                    phase: Phase::Icebreaker,
                    user_utterance: "u".into(),
                    system_utterance: "s".into(),
                    source,
                    ended: false,
                    plan: None,
                })
                .collect(),
            completed,
        plan: None,
        }
    }

    use ResponseSource::{Llm, Rule};

    #[test]
    fn metrics_examples() {
        let m = compute_metrics(&[log(true, &[Rule; 5])]).unwrap();
        assert_eq!((m.completion_rate, m.llm_fallback_rate, m.mean_turns), (1.0, 0.0, 5.0));
        let m = compute_metrics(&[log(true, &[Rule]), log(false, &[Rule])]).unwrap();
        assert_eq!(m.completion_rate, 0.5);
        let mut sources = vec![Rule; 7];
        sources.extend([Llm; 3]);
        assert_eq!(compute_metrics(&[log(true, &sources)]).unwrap().llm_fallback_rate, 0.3);
        assert!(matches!(compute_metrics(&[]), Err(SimError::NoLogs)));
    }

    #[test]
    fn persona_rates_are_checked() {
        let text = "id = \"x\"\nage = 30\ngender = \"f\"\ntraits = \"t\"\n[answer_style]\naffirm_rate = 1.5\nquestion_rate = 0.0\n";
        assert!(matches!(Persona::parse(text, "x.toml"), Err(SimError::Persona { .. })));
        let ok = text.replace("1.5", "0.5") + "[scripted_answers]\nIcebreaker = [\"Yes\"]\n";
        let p = Persona::parse(&ok, "x.toml").unwrap();
        assert_eq!(p.scripted_answers[&Phase::Icebreaker], ["Yes"]);
    }

    #[test]
    fn intent_draw_respects_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let never = AnswerStyle { affirm_rate: 0.0, question_rate: 0.0 };
        let always = AnswerStyle { affirm_rate: 1.0, question_rate: 0.0 };
        for _ in 0..100 {
            assert_eq!(Intent::draw(&never, &mut rng), Intent::Negate);
            assert_eq!(Intent::draw(&always, &mut rng), Intent::Affirm);
        }
    }
}
