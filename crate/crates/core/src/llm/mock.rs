use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::{ChatBackend, ChatExchange, LlmError};
use crate::text::fnv1a64;

/// Custom reply generator: gets the exchange and a seed-mixed hash of it.
pub type Responder = Arc<dyn Fn(&ChatExchange, u64) -> String + Send + Sync>;

const ACKNOWLEDGEMENTS: [&str; 6] = [
    "I see.",
    "That's a good question.",
    "Thank you for telling me.",
    "How interesting!",
    "I understand.",
    "Good point.",
];

/// Deterministic stand-in for a chat model.
///
/// Reply lookup order: scripted text for the exchange's `prompt_id`, then
/// the custom responder, then a seeded template built from the exchange's
/// variables. Identical seed and exchange always give identical output.
pub struct MockLlm {
    seed: u64,
    scripted: HashMap<String, String>,
    responder: Option<Responder>,
    failure_rate: f64,
    latency: Duration,
    timeout: Duration,
    calls: AtomicUsize,
    history: Mutex<Vec<ChatExchange>>,
}

impl MockLlm {
    pub fn new(seed: u64) -> Self {
        MockLlm {
            seed,
            scripted: HashMap::new(),
            responder: None,
            failure_rate: 0.0,
            latency: Duration::ZERO,
            timeout: Duration::from_secs(15),
            calls: AtomicUsize::new(0),
            history: Mutex::new(Vec::new()),
        }
    }

    pub fn script(mut self, prompt_id: &str, reply: &str) -> Self {
        self.scripted.insert(prompt_id.to_string(), reply.to_string());
        self
    }

    pub fn with_responder(mut self, responder: Responder) -> Self {
        self.responder = Some(responder);
        self
    }

    /// Fraction of exchanges (chosen by hash, so deterministic) that fail
    /// with a transport error.
    pub fn with_failure_rate(mut self, rate: f64) -> Self {
        self.failure_rate = rate.clamp(0.0, 1.0);
        self
    }

    pub fn with_latency(mut self, latency: Duration, timeout: Duration) -> Self {
        self.latency = latency;
        self.timeout = timeout;
        self
    }

    /// Number of `chat` calls so far, failed ones included.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn history(&self) -> Vec<ChatExchange> {
        self.history.lock().expect("mock history poisoned").clone()
    }

    fn exchange_hash(&self, exchange: &ChatExchange) -> u64 {
        let mut bytes = self.seed.to_le_bytes().to_vec();
        bytes.extend_from_slice(exchange.prompt_id.as_bytes());
        for m in &exchange.messages {
            bytes.push(0);
            bytes.extend_from_slice(m.content.as_bytes());
        }
        fnv1a64(&bytes)
    }

    fn templated_reply(exchange: &ChatExchange, hash: u64) -> String {
        let vars = &exchange.vars;
        let ack = ACKNOWLEDGEMENTS[(hash % ACKNOWLEDGEMENTS.len() as u64) as usize];
        if let Some(next) = vars.get("next_question") {
            return format!("{ack} {next}");
        }
        if let (Some(name), Some(description)) = (vars.get("spot_name"), vars.get("description")) {
            return format!("{name}: {description}");
        }
        if let Some(reason) = vars.get("reason") {
            return reason.clone();
        }
        ack.to_string()
    }
}

impl ChatBackend for MockLlm {
    fn chat(&self, exchange: &ChatExchange) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.history
            .lock()
            .expect("mock history poisoned")
            .push(exchange.clone());
        exchange.validate()?;
        let hash = self.exchange_hash(exchange);
        if self.latency >= self.timeout {
            std::thread::sleep(self.timeout);
            return Err(LlmError::Timeout(self.timeout));
        }
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        // Top 53 bits as a uniform draw in [0, 1).
        let draw = (hash >> 11) as f64 / (1u64 << 53) as f64;
        if draw < self.failure_rate {
            return Err(LlmError::Transport("injected failure".into()));
        }
        if let Some(reply) = self.scripted.get(&exchange.prompt_id) {
            return Ok(reply.clone());
        }
        if let Some(responder) = &self.responder {
            return Ok(responder(exchange, hash));
        }
        Ok(Self::templated_reply(exchange, hash))
    }
}
