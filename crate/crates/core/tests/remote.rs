//! The chat-completions client against a local HTTP stub.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use negotiation_core::agent::{
    Agent, AgentError, AgentRequest, GenerationParams, Phase, RemoteAgent, RemoteEndpoint, RetryPolicy,
};
use negotiation_core::orchestrator::{run_session, SessionSettings};
use negotiation_core::prompt::TemplateSet;
use negotiation_core::synthetic::synthetic_game;
use negotiation_core::transcript::JsonlSink;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Captured {
    headers: Vec<(String, String)>,
    body: Value,
}

impl Captured {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

struct Stub {
    url: String,
    captured: Arc<Mutex<Vec<Captured>>>,
    _handle: JoinHandle<()>,
}

/// Serves `responses` in order, one connection each; the last one repeats.
fn stub(responses: Vec<(u16, String)>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let captured = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&captured);
    let handle = std::thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            loop {
                line.clear();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                if let Some((k, v)) = l.split_once(':') {
                    headers.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            let len: usize = headers
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
                .map(|(_, v)| v.parse().unwrap())
                .unwrap_or(0);
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Captured {
                headers,
                body: serde_json::from_slice(&body).unwrap_or(Value::Null),
            });
            let (status, text) = responses[i.min(responses.len() - 1)].clone();
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    Stub {
        url,
        captured,
        _handle: handle,
    }
}

fn completion(text: &str) -> String {
    json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 7, "total_tokens": 18}
    })
    .to_string()
}

fn endpoint(url: &str) -> RemoteEndpoint {
    let mut params = GenerationParams::new("stub-model");
    params.temperature = 0.0;
    params.max_tokens = 321;
    let mut e = RemoteEndpoint::new(url, params);
    e.retry = RetryPolicy {
        max_attempts: 3,
        initial_backoff_ms: 1,
        max_backoff_ms: 2,
    };
    e.timeout_secs = 10;
    e
}

fn call(agent: &RemoteAgent, seed: u64) -> Result<String, AgentError> {
    let config = synthetic_game();
    let request = AgentRequest {
        config: &config,
        party: 0,
        system: "system text",
        prompt: "user text",
        seed,
        phase: Phase::Negotiation,
    };
    agent.complete(&request).map(|c| c.text)
}

#[test]
fn sends_model_params_and_session_seed() {
    let s = stub(vec![(200, completion("hello"))]);
    let agent = RemoteAgent::new(endpoint(&s.url)).unwrap();
    assert_eq!(call(&agent, 42).unwrap(), "hello");
    let got = s.captured.lock().unwrap()[0].clone();
    assert_eq!(got.body["model"], "stub-model");
    assert_eq!(got.body["temperature"], 0.0);
    assert_eq!(got.body["seed"], 42);
    assert_eq!(got.body["max_tokens"], 321);
    assert_eq!(
        got.body["messages"][0],
        json!({"role": "system", "content": "system text"})
    );
    assert_eq!(got.body["messages"][1], json!({"role": "user", "content": "user text"}));
    assert!(got.header("authorization").is_none());
}

#[test]
fn fixed_decoding_seed_overrides_session_seed() {
    let s = stub(vec![(200, completion("ok"))]);
    let mut e = endpoint(&s.url);
    e.params.seed = Some(7);
    let agent = RemoteAgent::new(e).unwrap();
    call(&agent, 42).unwrap();
    assert_eq!(s.captured.lock().unwrap()[0].body["seed"], 7);
}

#[test]
fn retries_server_errors_and_rate_limits() {
    let s = stub(vec![
        (500, "{}".into()),
        (429, "{}".into()),
        (200, completion("third time")),
    ]);
    let agent = RemoteAgent::new(endpoint(&s.url)).unwrap();
    assert_eq!(call(&agent, 1).unwrap(), "third time");
    assert_eq!(s.captured.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_max_attempts() {
    let s = stub(vec![(503, "{}".into())]);
    let agent = RemoteAgent::new(endpoint(&s.url)).unwrap();
    let err = call(&agent, 1).unwrap_err();
    assert!(matches!(err, AgentError::Transport { attempts: 3, .. }), "{err:?}");
    assert_eq!(s.captured.lock().unwrap().len(), 3);
}

#[test]
fn auth_and_client_errors_are_not_retried() {
    let s = stub(vec![(401, "{}".into())]);
    let agent = RemoteAgent::new(endpoint(&s.url)).unwrap();
    assert!(matches!(call(&agent, 1), Err(AgentError::Auth(401))));
    assert_eq!(s.captured.lock().unwrap().len(), 1);

    let s = stub(vec![(400, "bad request body".into())]);
    let agent = RemoteAgent::new(endpoint(&s.url)).unwrap();
    match call(&agent, 1) {
        Err(AgentError::Status { status: 400, message }) => assert_eq!(message, "bad request body"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_and_malformed_completions() {
    let s = stub(vec![(200, completion("   "))]);
    let agent = RemoteAgent::new(endpoint(&s.url)).unwrap();
    assert!(matches!(call(&agent, 1), Err(AgentError::EmptyCompletion)));

    let s = stub(vec![(200, json!({"choices": []}).to_string())]);
    let agent = RemoteAgent::new(endpoint(&s.url)).unwrap();
    assert!(matches!(call(&agent, 1), Err(AgentError::Response(_))));
}

#[test]
fn missing_credential_is_reported_by_name() {
    let mut e = endpoint("http://127.0.0.1:9");
    e.api_key_env = Some("NEGOTIATION_TEST_UNSET_KEY_4711".into());
    let agent = RemoteAgent::new(e).unwrap();
    let err = call(&agent, 1).unwrap_err();
    assert!(matches!(err, AgentError::MissingCredential(ref v) if v == "NEGOTIATION_TEST_UNSET_KEY_4711"));
}

#[test]
fn credential_is_sent_but_never_written_to_transcripts() {
    const VAR: &str = "NEGOTIATION_TEST_KEY_CREDENTIAL_SCAN";
    const SECRET: &str = "sk-test-8c1f0e5d2b7a49";
    std::env::set_var(VAR, SECRET);

    let reply =
        "<SCRATCHPAD>fine</SCRATCHPAD><ANSWER>I propose <DEAL>A5, B1, C3, D1, E1</DEAL></ANSWER><PLAN>hold</PLAN>";
    let s = stub(vec![(200, completion(reply))]);
    let mut e = endpoint(&s.url);
    e.api_key_env = Some(VAR.into());
    let agent = RemoteAgent::new(e).unwrap();

    let config = synthetic_game();
    let templates = TemplateSet::load_default().unwrap();
    let agents: Vec<&dyn Agent> = vec![&agent; config.n_parties()];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seed-0001.jsonl");
    let mut sink = JsonlSink::create(&path).unwrap();
    let record = run_session(&config, &templates, &agents, 1, &SessionSettings::default(), &mut sink).unwrap();
    drop(sink);
    assert!(record.final_success);

    let captured = s.captured.lock().unwrap();
    assert!(!captured.is_empty());
    for c in captured.iter() {
        assert_eq!(c.header("authorization"), Some(format!("Bearer {SECRET}").as_str()));
    }
    let transcript = std::fs::read_to_string(&path).unwrap();
    assert!(!transcript.contains(SECRET));
    assert!(!transcript.contains(VAR));
    assert!(transcript.contains("\"total_tokens\":18"));
}
