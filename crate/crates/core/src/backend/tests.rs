use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::time::Duration;

use super::*;
use crate::fixtures;
use crate::prompts::parse_response;
use crate::scenarios::replay_plan;

fn context(scenario: &Scenario, executed: usize, kind: RequestKind) -> RequestContext {
    let history = scenario.reference_plan[..executed].to_vec();
    RequestContext {
        scenario: Arc::new(scenario.clone()),
        state: replay_plan(&scenario.initial_state, &history).final_state,
        iteration: executed as u32 + 1,
        history,
        feedback: FeedbackLog::default(),
        labels: SkillLabels::for_state(&scenario.initial_state),
        kind,
    }
}

fn request(ctx: Option<RequestContext>) -> ModelRequest {
    ModelRequest {
        system_text: "system".into(),
        user_text: "user".into(),
        image: None,
        temperature: 0.0,
        max_tokens: 64,
        context: ctx,
    }
}

fn planned(backend: &dyn Backend, ctx: &RequestContext) -> Vec<Skill> {
    let reply = backend.complete(&request(Some(ctx.clone()))).unwrap();
    parse_response(&reply.text, &ctx.labels, ctx.iteration)
        .unwrap()
        .steps
        .into_iter()
        .map(|s| s.skill)
        .collect()
}

#[test]
fn spec_strings_parse_and_print_back() {
    for text in [
        "oracle",
        "scripted:/tmp/s.json",
        "faulty:oracle:swap@3",
        "faulty:oracle:swap@2=stir,omit-done,garbage@4",
        "faulty:/tmp/dir:omit-done",
        "remote:http://localhost:8080/v1/chat/completions:gpt-4o",
    ] {
        let spec: BackendSpec = text.parse().unwrap();
        assert_eq!(spec.to_string().parse::<BackendSpec>().unwrap(), spec);
    }
    // a bare path inside faulty is shorthand for a scripted backend
    assert_eq!(
        "faulty:/tmp/dir:omit-done".parse::<BackendSpec>().unwrap().to_string(),
        "faulty:scripted:/tmp/dir:omit-done"
    );
    match "remote:https://h/v1/chat/completions:m1".parse::<BackendSpec>().unwrap() {
        BackendSpec::Remote(cfg) => {
            assert_eq!(cfg.url, "https://h/v1/chat/completions");
            assert_eq!(cfg.model, "m1");
            assert_eq!(cfg.api_key_env, DEFAULT_API_KEY_ENV);
        }
        other => panic!("{other:?}"),
    }
    for bad in ["", "oracles", "scripted:", "faulty:oracle", "faulty:oracle:swap", "remote:http://h/x"] {
        assert!(bad.parse::<BackendSpec>().is_err(), "{bad}");
    }
}

#[test]
fn scripted_replies_verbatim_then_runs_dry() {
    let backend = ScriptedBackend::new("s", vec!["one".into(), "two".into()]);
    assert_eq!(backend.complete(&request(None)).unwrap().text, "one");
    assert_eq!(backend.complete(&request(None)).unwrap().text, "two");
    assert_eq!(backend.complete(&request(None)), Err(BackendError::ScriptExhausted(2)));
    assert_eq!(backend.consumed(), 2);
}

#[test]
fn scripted_spec_picks_per_scenario_file_in_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let s = fixtures::two_scoops();
    std::fs::write(dir.path().join(format!("{}.json", s.id)), r#"["hello"]"#).unwrap();
    let backend = BackendSpec::Scripted(dir.path().to_path_buf()).instantiate(&s).unwrap();
    assert_eq!(backend.complete(&request(None)).unwrap().text, "hello");
    let other = fixtures::far_source();
    assert!(matches!(
        BackendSpec::Scripted(dir.path().to_path_buf()).instantiate(&other),
        Err(BackendError::Script { .. })
    ));
}

#[test]
fn oracle_answers_with_the_reference_suffix() {
    let s = fixtures::two_scoops();
    let ctx = context(&s, 0, RequestKind::Plan);
    assert_eq!(planned(&OracleBackend, &ctx), s.reference_plan);
    let ctx = context(&s, 2, RequestKind::Plan);
    assert_eq!(planned(&OracleBackend, &ctx), s.reference_plan[2..]);
    assert!(OracleBackend.complete(&request(None)).is_err());
}

#[test]
fn oracle_replans_off_the_reference_path() {
    let s = fixtures::two_scoops();
    let mut ctx = context(&s, 0, RequestKind::Plan);
    ctx.history = vec![Skill::move_to("purple")];
    ctx.state = replay_plan(&s.initial_state, &ctx.history).final_state;
    ctx.iteration = 2;
    let plan = planned(&OracleBackend, &ctx);
    assert_eq!(plan[0], Skill::GraspSpoon);
    assert_eq!(plan.last(), Some(&Skill::Done));
}

#[test]
fn oracle_resolves_toward_its_own_next_step() {
    let s = fixtures::two_scoops();
    let labels = SkillLabels::for_state(&s.initial_state);
    let options = [Skill::Scoop, Skill::DropFood];
    let ask = |proposed: Skill, majority: Skill| {
        let ctx = context(&s, 2, RequestKind::Resolve { proposed, majority });
        let reply = OracleBackend.complete(&request(Some(ctx))).unwrap();
        crate::prompts::parse_choice(&reply.text, &labels, &options).unwrap()
    };
    assert_eq!(ask(Skill::Scoop, Skill::DropFood), Skill::Scoop);
    assert_eq!(ask(Skill::DropFood, Skill::Scoop), Skill::Scoop);
}

#[test]
fn faulty_swap_changes_only_the_targeted_iteration() {
    let s = fixtures::two_scoops();
    let faulty = FaultyBackend::new(Box::new(OracleBackend), vec!["swap@3".parse().unwrap()]);
    let at3 = planned(&faulty, &context(&s, 2, RequestKind::Plan));
    let honest = &s.reference_plan[2..];
    assert_eq!(at3[0], Skill::Done);
    assert_eq!(at3[1..], honest[1..]);
    // other iterations are untouched
    assert_eq!(planned(&faulty, &context(&s, 1, RequestKind::Plan)), s.reference_plan[1..]);

    let stir = FaultyBackend::new(Box::new(OracleBackend), vec!["swap@3=stir".parse().unwrap()]);
    assert_eq!(planned(&stir, &context(&s, 2, RequestKind::Plan))[0], Skill::Stir);
}

#[test]
fn faulty_omit_done_and_garbage() {
    let s = fixtures::two_scoops();
    let omit = FaultyBackend::new(Box::new(OracleBackend), vec![FaultRule::OmitDone]);
    let plan = planned(&omit, &context(&s, 0, RequestKind::Plan));
    assert_eq!(plan, s.reference_plan[..9]);

    let garbage = FaultyBackend::new(Box::new(OracleBackend), vec!["garbage@2".parse().unwrap()]);
    let reply = garbage.complete(&request(Some(context(&s, 1, RequestKind::Plan)))).unwrap();
    assert_eq!(reply.text, faulty::GARBAGE_REPLY);
    let reply = garbage.complete(&request(Some(context(&s, 0, RequestKind::Plan)))).unwrap();
    assert_ne!(reply.text, faulty::GARBAGE_REPLY);
}

#[test]
fn fault_rules_round_trip() {
    for text in ["swap@3", "swap@12=put_spoon_back", "omit-done", "garbage@1"] {
        let rule: FaultRule = text.parse().unwrap();
        assert_eq!(rule.to_string(), text);
    }
    assert!("swap@x".parse::<FaultRule>().is_err());
    assert!("explode".parse::<FaultRule>().is_err());
}

/// Serves one canned (status, body) per connection and forwards each
/// request's authorization header and JSON body.
fn mock_endpoint(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, serde_json::Value)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for (status, body) in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut length, mut auth) = (0usize, String::new());
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap_or((line, ""));
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => auth = value.trim().to_string(),
                    _ => {}
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            tx.send((auth, serde_json::from_slice(&buf).unwrap())).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn completion(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn remote(url: &str, key_env: &str) -> RemoteBackend {
    let mut cfg = RemoteConfig::new(url, "test-model");
    cfg.api_key_env = key_env.into();
    cfg.backoff = Duration::from_millis(5);
    cfg.timeout = Duration::from_secs(10);
    RemoteBackend::new(cfg)
}

#[test]
fn remote_sends_chat_body_with_png_data_url() {
    std::env::set_var("KP_TEST_KEY_IMAGE", "secret-1");
    let (url, rx) = mock_endpoint(vec![(200, completion("Description: ok"))]);
    let backend = remote(&url, "KP_TEST_KEY_IMAGE");
    let s = fixtures::far_source();
    let mut req = request(None);
    req.image = Some(crate::world::render_topdown(&s.initial_state, crate::world::RenderConfig::default()));
    let reply = backend.complete(&req).unwrap();
    assert_eq!(reply.text, "Description: ok");
    assert_eq!(reply.backend_id, "remote:test-model");
    let (auth, body) = rx.recv().unwrap();
    assert_eq!(auth, "Bearer secret-1");
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], "system");
    let content = &body["messages"][1]["content"];
    assert_eq!(content[0]["text"], "user");
    let data_url = content[1]["image_url"]["url"].as_str().unwrap();
    let b64 = data_url.strip_prefix("data:image/png;base64,").unwrap();
    let png = base64::Engine::decode(&base64::engine::general_purpose::STANDARD, b64).unwrap();
    assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
}

#[test]
fn remote_retries_server_errors_then_succeeds() {
    std::env::set_var("KP_TEST_KEY_RETRY", "k");
    let (url, rx) = mock_endpoint(vec![
        (500, "{}".into()),
        (429, "{}".into()),
        (200, completion("fine")),
    ]);
    let reply = remote(&url, "KP_TEST_KEY_RETRY").complete(&request(None)).unwrap();
    assert_eq!(reply.text, "fine");
    assert_eq!(rx.try_iter().count(), 3);
}

#[test]
fn remote_gives_up_after_the_attempt_budget() {
    std::env::set_var("KP_TEST_KEY_EXHAUST", "k");
    let (url, _rx) = mock_endpoint(vec![(503, "a".into()), (503, "b".into()), (503, "c".into())]);
    match remote(&url, "KP_TEST_KEY_EXHAUST").complete(&request(None)) {
        Err(BackendError::RetriesExhausted { attempts: 3, last }) => {
            assert_eq!(*last, BackendError::Http { status: 503, body: "c".into() })
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn remote_does_not_retry_client_errors() {
    std::env::set_var("KP_TEST_KEY_400", "k");
    let (url, rx) = mock_endpoint(vec![(400, "bad request".into()), (200, completion("unused"))]);
    let err = remote(&url, "KP_TEST_KEY_400").complete(&request(None)).unwrap_err();
    assert_eq!(err, BackendError::Http { status: 400, body: "bad request".into() });
    let (_, body) = rx.recv().unwrap();
    assert!(body["messages"][1]["content"].is_string());
    assert!(rx.recv_timeout(Duration::from_millis(100)).is_err());
}

#[test]
fn remote_needs_its_credential_and_a_well_formed_reply() {
    let backend = remote("http://127.0.0.1:9/none", "KP_TEST_KEY_UNSET_VARIABLE");
    assert_eq!(
        backend.complete(&request(None)),
        Err(BackendError::MissingCredential("KP_TEST_KEY_UNSET_VARIABLE".into()))
    );
    std::env::set_var("KP_TEST_KEY_MALFORMED", "k");
    let (url, _rx) = mock_endpoint(vec![(200, r#"{"choices": []}"#.into())]);
    assert!(matches!(
        remote(&url, "KP_TEST_KEY_MALFORMED").complete(&request(None)),
        Err(BackendError::Malformed(_))
    ));
}

#[test]
fn ppm_conversion_checks_its_input() {
    let ppm = b"P6\n2 1\n255\n\x00\x00\x00\xff\xff\xff".to_vec();
    let png = remote::ppm_to_png(&ppm).unwrap();
    let decoder = ::png::Decoder::new(std::io::Cursor::new(png));
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    reader.next_frame(&mut buf).unwrap();
    assert_eq!(buf, [0, 0, 0, 255, 255, 255]);
    assert!(remote::ppm_to_png(b"P5\n2 1\n255\n\x00\x00").is_none());
    assert!(remote::ppm_to_png(b"P6\n2 1\n255\n\x00").is_none());
    assert!(remote::ppm_to_png(b"").is_none());
}
