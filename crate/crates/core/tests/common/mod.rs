#![allow(dead_code)]

use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use crewroom_core::provider::{
    ChatProvider, ChatReply, ChatRequest, Gateway, HashEmbedder, ProviderError, ScriptedBehavior,
    ScriptedProvider,
};
use crewroom_core::studio::{AgentPersona, PersonaSeed, StagePrompts};

/// Scripted chat that keeps every request it receives.
pub struct RecordingChat {
    inner: ScriptedProvider,
    log: Mutex<Vec<ChatRequest>>,
}

impl RecordingChat {
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn clear(&self) {
        self.log.lock().unwrap().clear();
    }
}

#[async_trait]
impl ChatProvider for RecordingChat {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        self.log.lock().unwrap().push(request.clone());
        self.inner.complete(request).await
    }
}

pub fn recording_gateway(behavior: ScriptedBehavior) -> (Gateway, Arc<RecordingChat>) {
    let dim = behavior.embedding_dim;
    let chat = Arc::new(RecordingChat {
        inner: ScriptedProvider::new(behavior).unwrap(),
        log: Mutex::new(Vec::new()),
    });
    (
        Gateway::new(chat.clone(), Arc::new(HashEmbedder::new(dim))),
        chat,
    )
}

pub fn persona(id: &str, name: &str, collection: Option<&str>) -> AgentPersona {
    AgentPersona {
        agent_id: id.into(),
        seed: PersonaSeed::new(name).occupation("tester"),
        description: format!("{name} helps out."),
        stage_prompts: StagePrompts {
            gating_prompt: format!("Decide whether {name} should reply."),
            response_prompt: format!("Reply as {name}."),
        },
        collection_id: collection.map(str::to_string),
    }
}

pub fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .unwrap()
}

/// Which agent a response request was built for, from its system prompt.
pub fn respond_target(request: &ChatRequest) -> Option<String> {
    let rest = request.system_prompt.strip_prefix("Agent: ")?;
    let (name, tail) = rest.split_once('\n')?;
    tail.starts_with("Stage: respond").then(|| name.to_string())
}

pub fn gate_target(request: &ChatRequest) -> Option<String> {
    let rest = request.system_prompt.strip_prefix("Agent: ")?;
    let (name, tail) = rest.split_once('\n')?;
    tail.starts_with("Stage: gate").then(|| name.to_string())
}

// ---------------------------------------------------------------------------
// Reference seeded shuffle, written from the published algorithms: PCG32
// seed expansion, the ChaCha block function with 8 rounds, and a
// Fisher–Yates pass from the last index down using next_u64 % (i + 1).

pub struct RefChaCha8 {
    key: [u32; 8],
    counter: u64,
    buf: [u32; 16],
    idx: usize,
}

fn quarter(s: &mut [u32; 16], a: usize, b: usize, c: usize, d: usize) {
    s[a] = s[a].wrapping_add(s[b]);
    s[d] = (s[d] ^ s[a]).rotate_left(16);
    s[c] = s[c].wrapping_add(s[d]);
    s[b] = (s[b] ^ s[c]).rotate_left(12);
    s[a] = s[a].wrapping_add(s[b]);
    s[d] = (s[d] ^ s[a]).rotate_left(8);
    s[c] = s[c].wrapping_add(s[d]);
    s[b] = (s[b] ^ s[c]).rotate_left(7);
}

impl RefChaCha8 {
    pub fn from_u64(mut state: u64) -> Self {
        const MUL: u64 = 6_364_136_223_846_793_005;
        const INC: u64 = 11_634_580_027_462_260_723;
        let mut key = [0u32; 8];
        for word in key.iter_mut() {
            state = state.wrapping_mul(MUL).wrapping_add(INC);
            let xorshifted = (((state >> 18) ^ state) >> 27) as u32;
            let rot = (state >> 59) as u32;
            *word = xorshifted.rotate_right(rot);
        }
        RefChaCha8 {
            key,
            counter: 0,
            buf: [0; 16],
            idx: 16,
        }
    }

    fn refill(&mut self) {
        let mut input = [0u32; 16];
        input[..4].copy_from_slice(&[0x6170_7865, 0x3320_646e, 0x7962_2d32, 0x6b20_6574]);
        input[4..12].copy_from_slice(&self.key);
        input[12] = self.counter as u32;
        input[13] = (self.counter >> 32) as u32;
        let mut s = input;
        for _ in 0..4 {
            quarter(&mut s, 0, 4, 8, 12);
            quarter(&mut s, 1, 5, 9, 13);
            quarter(&mut s, 2, 6, 10, 14);
            quarter(&mut s, 3, 7, 11, 15);
            quarter(&mut s, 0, 5, 10, 15);
            quarter(&mut s, 1, 6, 11, 12);
            quarter(&mut s, 2, 7, 8, 13);
            quarter(&mut s, 3, 4, 9, 14);
        }
        for i in 0..16 {
            self.buf[i] = s[i].wrapping_add(input[i]);
        }
        self.counter += 1;
        self.idx = 0;
    }

    fn next_u32(&mut self) -> u32 {
        if self.idx == 16 {
            self.refill();
        }
        let v = self.buf[self.idx];
        self.idx += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        lo | (hi << 32)
    }
}

pub fn reference_shuffle<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut out = items.to_vec();
    let mut rng = RefChaCha8::from_u64(seed);
    let mut i = out.len();
    while i > 1 {
        i -= 1;
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        out.swap(i, j);
    }
    out
}

// ---------------------------------------------------------------------------
// Paired-t oracle by numeric integration of the t density.
//
// With x = sqrt(v) tan(theta) the density becomes proportional to
// cos^(v-1)(theta) on (-pi/2, pi/2), so the two-sided tail mass beyond |t|
// is the integral from atan(|t|/sqrt(v)) to pi/2 divided by the integral
// from 0 to pi/2. Both are evaluated with composite Simpson's rule.

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    sum * h / 3.0
}

pub fn t_two_tailed_oracle(t: f64, df: f64) -> f64 {
    let f = |theta: f64| theta.cos().powf(df - 1.0);
    let half = std::f64::consts::FRAC_PI_2;
    let theta0 = (t.abs() / df.sqrt()).atan();
    simpson(f, theta0, half, 200_000) / simpson(f, 0.0, half, 200_000)
}

/// Paired t statistic computed directly from the definition.
pub fn paired_t_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = d.iter().sum::<f64>() / n;
    let ss: f64 = d.iter().map(|x| (x - m).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    let t = m / (sd / n.sqrt());
    (t, t_two_tailed_oracle(t, n - 1.0))
}
