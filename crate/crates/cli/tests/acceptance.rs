//! One check per acceptance criterion, each printing a PASS or FAIL line.
//! Run with `--nocapture` to see the lines.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use lazyseq_core::engine::{compile_expression, Budget, EngineError, Heap, Node, NodeId, Reducer, RuleSet, Term};
use lazyseq_core::highlight::HighlightSet;
use lazyseq_core::store::{load_dir, load_program};
use lazyseq_core::stream::{
    format_event, Advance, Control, ExecutionMode, Machine, MidiKind, Observer, OutputEvent, Outcome, Payload,
    Player, RunConfig, Status,
};
use lazyseq_core::syntax::{render_term, SourceRange};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

const GOLDEN: &str = "\
0 on 0 60 64
200 wait 200
200 off 0 60 64
200 on 0 62 64
400 wait 200
400 off 0 62 64
400 on 0 64 64
600 wait 200
600 off 0 64 64
600 on 0 65 64
800 wait 200
800 off 0 65 64
800 on 0 67 64
1200 wait 400
1200 off 0 67 64
1200 on 0 67 64
1600 wait 400
1600 off 0 67 64
";

fn programs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn lazyseq(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lazyseq"))
        .args(args)
        .current_dir(programs())
        .output()
        .unwrap()
}

fn check(ok: bool, message: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, format!("took {took:?}, limit {limit:?}"))
}

/// Plays `machine` for `n` elements, returning log lines without their
/// timestamps.
fn play(machine: &mut Machine, n: usize) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for _ in 0..n {
        match machine.advance().map_err(|e| e.to_string())?.0 {
            Advance::Event(event) => out.push(without_time(&event)),
            Advance::Finished => return Err("the list ended".into()),
        }
    }
    Ok(out)
}

fn without_time(event: &OutputEvent) -> String {
    let line = format_event(event);
    line.split_once(' ').unwrap().1.to_string()
}

fn melody_golden() -> Result<(), String> {
    let start = Instant::now();
    let output = lazyseq(&["run", "melody", "--mode", "slow", "--slow-pause", "0", "--max-elements", "18", "--log", "-"]);
    within(start, Duration::from_secs(1))?;
    check(output.status.success(), format!("exit status {}", output.status))?;
    let log = String::from_utf8(output.stdout).unwrap();
    check(log == GOLDEN, format!("log differs:\n{log}"))
}

fn loop_period() -> Result<(), String> {
    let start = Instant::now();
    let output = lazyseq(&["run", "melody-loop", "--max-elements", "72", "--log", "-"]);
    within(start, Duration::from_secs(1))?;
    check(output.status.success(), format!("exit status {}", output.status))?;
    let log = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    check(lines.len() == 72, format!("{} lines", lines.len()))?;
    let golden: Vec<&str> = GOLDEN.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let (time, rest) = line.split_once(' ').unwrap();
        let (golden_time, golden_rest) = golden[i % 18].split_once(' ').unwrap();
        let shift = 1600 * (i / 18) as u64;
        let expected = golden_time.parse::<u64>().unwrap() + shift;
        check(rest == golden_rest, format!("line {i} is `{line}`"))?;
        check(time.parse::<u64>().unwrap() == expected, format!("line {i} at {time}, expected {expected}"))?;
    }
    Ok(())
}

fn hot_swap() -> Result<(), String> {
    let dir = programs().join("melody-loop");
    let mut state = load_dir(&dir).map_err(|e| e.to_string())?;
    let reference = play(&mut Machine::new(state.rules().clone(), Budget::default()), 36)?;
    let mut machine = Machine::new(state.rules().clone(), Budget::default());
    let before = play(&mut machine, 20)?;
    check(before == reference[..20], "events before the swap changed")?;
    let text = std::fs::read_to_string(dir.join("Melody.lhsq")).unwrap();
    let old = "note hn g ++ note hn g ++ main ;";
    check(text.contains(old), "unexpected melody-loop source")?;
    let swapped = text.replace(old, "note qn g ++ note qn e ++ note hn g ++ main ;");
    state.swap_module("Melody", &swapped).map_err(|e| e.to_string())?;
    machine.set_rules(state.rules().clone());
    let rest_of_refrain = play(&mut machine, 16)?;
    check(rest_of_refrain == reference[20..36], "the refrain in flight did not complete")?;
    let cycle = play(&mut Machine::new(state.rules().clone(), Budget::default()), 21)?;
    for round in 0..3 {
        let next = play(&mut machine, 21)?;
        check(next == cycle, format!("cycle {round} after the swap differs: {next:?}"))?;
    }
    Ok(())
}

fn no_sharing() -> Result<(), String> {
    let state = load_program(&[("Main".into(), "module Main where\nf x = x:x:[] ;\nmain = f (2+3) ;\n".into())])
        .map_err(|d| format!("{d:?}"))?;
    let mut heap = Heap::new();
    let root = heap.import(&Term::global("main"));
    let mut reducer = Reducer::new(state.rules(), Budget::default());
    reducer.whnf(&mut heap, root).map_err(|e| e.to_string())?;
    let mut fields = Vec::new();
    heap.spine(root, &mut fields);
    reducer.normal_form(&mut heap, fields[0]).map_err(|e| e.to_string())?;
    check(heap.get(fields[0]) == Node::Int(5), "first element is not 5")?;
    let rendered = render_term(&heap.export(root), None);
    check(rendered.contains("2 + 3"), format!("term is `{rendered}`"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Item {
    Wait(u64),
    Note(u8, u8),
}

fn items_source(items: &[Item]) -> String {
    let parts: Vec<String> = items
        .iter()
        .map(|item| match *item {
            Item::Wait(ms) => format!("Wait {ms}"),
            Item::Note(ch, p) => format!("Event (Channel {ch} (On {p} 64))"),
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

/// Left events before right events at the same instant; each wait lasts
/// until the nearer next boundary.
fn timeline(left: &[Item], right: &[Item]) -> Vec<Item> {
    let mut lanes = [left.to_vec(), right.to_vec()];
    lanes.iter_mut().for_each(|l| l.reverse());
    let mut out = Vec::new();
    loop {
        for lane in &mut lanes {
            while let Some(Item::Note(..)) = lane.last() {
                out.push(lane.pop().unwrap());
            }
        }
        let step = lanes
            .iter()
            .filter_map(|l| match l.last() {
                Some(Item::Wait(ms)) => Some(*ms),
                _ => None,
            })
            .min();
        let Some(step) = step else { return out };
        out.push(Item::Wait(step));
        for lane in &mut lanes {
            if let Some(Item::Wait(ms)) = lane.last_mut() {
                *ms -= step;
                if *ms == 0 {
                    lane.pop();
                }
            }
        }
    }
}

fn random_track(rng: &mut StdRng, channel: u8) -> Vec<Item> {
    let len = rng.gen_range(0..=12);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Item::Wait(rng.gen_range(1..=50))
            } else {
                Item::Note(channel, rng.gen_range(0..=127))
            }
        })
        .collect()
}

fn waits(items: &[Item]) -> u64 {
    items.iter().map(|i| if let Item::Wait(ms) = i { *ms } else { 0 }).sum()
}

fn notes(items: &[Item], channel: u8) -> Vec<Item> {
    items.iter().copied().filter(|i| matches!(i, Item::Note(c, _) if *c == channel)).collect()
}

fn merge_oracle() -> Result<(), String> {
    let start = Instant::now();
    let rules = load_program(&[]).map_err(|d| format!("{d:?}"))?.rules().clone();
    let mut rng = StdRng::seed_from_u64(2024);
    for case in 0..100 {
        let (left, right) = (random_track(&mut rng, 0), random_track(&mut rng, 1));
        let text = format!("{} =:= {}", items_source(&left), items_source(&right));
        let term = compile_expression(&text).map_err(|d| d.to_string())?;
        let mut machine = Machine::with_term(term, rules.clone(), Budget::default()).without_trace();
        let mut merged = Vec::new();
        while let Advance::Event(event) = machine.advance().map_err(|e| e.to_string())?.0 {
            merged.push(match event.payload {
                Payload::Wait(ms) => Item::Wait(ms),
                Payload::Emit(m) => match m.kind {
                    MidiKind::NoteOn { pitch, .. } => Item::Note(m.channel, pitch),
                    _ => return Err("unexpected message".into()),
                },
            });
        }
        let context = || format!("case {case}: {text}");
        check(merged == timeline(&left, &right), format!("{} differs from the timeline", context()))?;
        check(waits(&merged) == waits(&left).max(waits(&right)), format!("{} wait sum", context()))?;
        check(
            notes(&merged, 0) == notes(&left, 0) && notes(&merged, 1) == notes(&right, 1),
            format!("{} order", context()),
        )?;
    }
    within(start, Duration::from_secs(5))
}

fn next_number(reducer: &mut Reducer<'_>, heap: &mut Heap, list: NodeId) -> Result<(i64, NodeId), EngineError> {
    reducer.whnf(heap, list)?;
    let mut fields = Vec::new();
    heap.spine(list, &mut fields);
    reducer.normal_form(heap, fields[0])?;
    match heap.get(fields[0]) {
        Node::Int(n) => Ok((n, fields[1])),
        other => panic!("not a number: {other:?}"),
    }
}

fn fibonacci_growth() -> Result<(), String> {
    let start = Instant::now();
    let rules: Arc<RuleSet> = load_program(&[]).map_err(|d| format!("{d:?}"))?.rules().clone();
    let term = compile_expression("fix (\\fibs -> 0 : 1 : zipWith (+) fibs (tail fibs))").unwrap();
    let mut heap = Heap::new();
    let mut list = heap.import(&term);
    let mut sizes = vec![heap.size(list)];
    let (mut a, mut b) = (0i64, 1i64);
    for k in 0..30 {
        let mut reducer = Reducer::new(&rules, Budget::new(u64::MAX)).untraced();
        let (value, tail) = next_number(&mut reducer, &mut heap, list).map_err(|e| e.to_string())?;
        check(value == a, format!("element {k} is {value}, expected {a}"))?;
        (a, b) = (b, a + b);
        list = tail;
        sizes.push(heap.size(list));
    }
    for k in 5..30 {
        check(sizes[k + 1] > sizes[k], format!("size after {} elements did not grow: {sizes:?}", k + 1))?;
    }
    within(start, Duration::from_secs(5))
}

struct Highlights(Vec<HighlightSet>);

impl Observer for Highlights {
    fn highlights(&mut self, set: &HighlightSet) {
        self.0.push(set.clone());
    }
}

fn inside(inner: &SourceRange, outer: &SourceRange) -> bool {
    inner.module == outer.module
        && (inner.start_line, inner.start_col) >= (outer.start_line, outer.start_col)
        && (inner.end_line, inner.end_col) <= (outer.end_line, outer.end_col)
}

fn highlights() -> Result<(), String> {
    let dir = programs().join("melody");
    let state = load_dir(&dir).map_err(|e| e.to_string())?;
    let source = std::fs::read_to_string(dir.join("Melody.lhsq")).unwrap();
    let main_body = state
        .get_module("Melody")
        .unwrap()
        .ast
        .declarations
        .iter()
        .find(|d| &*d.name == "main")
        .map(|d| d.range.clone())
        .ok_or("no main")?;
    let (_tx, rx) = mpsc::channel();
    let mut sink = Vec::new();
    let mut observer = Highlights(Vec::new());
    let config = RunConfig {
        exit_on_finish: true,
        exit_on_error: true,
        ..RunConfig::default()
    };
    let machine = Machine::new(state.rules().clone(), Budget::default());
    let mode = ExecutionMode::SlowMotion { pause_ms: 0 };
    let (_, outcome) = Player::new(machine, mode, rx, &mut sink, &mut observer, config).run();
    check(outcome == Outcome::Finished, format!("{outcome:?}"))?;
    check(observer.0.len() == 6, format!("{} highlight sets", observer.0.len()))?;
    // `note` occurrences in main, in textual order
    let notes: Vec<(u32, u32)> = source
        .lines()
        .enumerate()
        .map(|(i, line)| (i as u32 + 1, line))
        .filter(|(n, _)| (main_body.start_line..=main_body.end_line).contains(n))
        .flat_map(|(n, line)| line.match_indices("note ").map(move |(col, _)| (n, col as u32 + 1)))
        .collect();
    check(notes.len() == 6, format!("main has {} note calls", notes.len()))?;
    for (i, set) in observer.0.iter().enumerate() {
        let in_main: Vec<_> = set.ranges.iter().filter(|r| inside(r, &main_body)).collect();
        let called: Vec<_> = in_main
            .iter()
            .filter(|r| r.slice(&source) == Some("note"))
            .map(|r| (r.start_line, r.start_col))
            .collect();
        check(called == [notes[i]], format!("set {i} highlights note calls at {called:?}"))?;
        // the previous call's pitch is reduced again for its note-off, since
        // arguments are copied, never shared
        let from = if i == 0 { (0, 0) } else { notes[i - 1] };
        let to = notes.get(i + 1).copied().unwrap_or((u32::MAX, 0));
        for r in &in_main {
            let at = (r.start_line, r.start_col);
            check(from <= at && at < to, format!("set {i} highlights {r:?}, away from its note call"))?;
        }
    }
    Ok(())
}

fn live_edit() -> Result<(), String> {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    runtime.block_on(live_edit_session())
}

async fn live_edit_session() -> Result<(), String> {
    use lazyseq_server::{Session, SessionConfig, TOKEN_HEADER};
    let log_path = std::env::temp_dir().join(format!("lazyseq-acceptance-{}.log", std::process::id()));
    let state = load_dir(&programs().join("session")).map_err(|e| e.to_string())?;
    let config = SessionConfig {
        mode: ExecutionMode::SingleStep,
        token: Some("conductor".into()),
        log: Some(Box::new(std::fs::File::create(&log_path).unwrap())),
        ..SessionConfig::default()
    };
    let session = Session::start(state, config).map_err(|e| e.to_string())?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let router = session.router();
    tokio::spawn(async move { axum::serve(listener, router).await });
    let client = reqwest::Client::new();
    let get = |path: &str| {
        let request = client.get(format!("{base}{path}"));
        async move { request.send().await.unwrap().json::<Value>().await.unwrap() }
    };
    let step = |n: usize| {
        let request = client
            .post(format!("{base}/api/control"))
            .header(TOKEN_HEADER, "conductor")
            .json(&json!({ "command": "step" }));
        async move {
            for _ in 0..n {
                let response = request.try_clone().unwrap().send().await.unwrap();
                assert!(response.status().is_success());
            }
        }
    };
    let settle = |count: u64| {
        let get = &get;
        async move {
            let deadline = Instant::now() + Duration::from_secs(5);
            loop {
                let snapshot = get("/api/snapshot").await;
                if snapshot["elementCount"] == count || Instant::now() > deadline {
                    return snapshot;
                }
                tokio::time::sleep(Duration::from_millis(5)).await;
            }
        }
    };

    step(5).await;
    let before = settle(5).await;
    let module_before = get("/api/modules/Melody").await;
    let bad = client
        .post(format!("{base}/api/modules/Melody/editable"))
        .json(&json!({ "editableText": "main =\n   note qn c ++ ;\n", "baseVersion": 1 }))
        .send()
        .await
        .unwrap();
    check(bad.status() == 422, format!("invalid edit answered {}", bad.status()))?;
    let body: Value = bad.json().await.unwrap();
    let diag = &body["diagnostics"][0];
    check(diag["line"] == 2 && diag["col"].as_u64().is_some(), format!("diagnostic {diag}"))?;
    check(get("/api/modules/Melody").await == module_before, "module text changed")?;
    let after = get("/api/snapshot").await;
    check(after["programVersion"] == before["programVersion"], "rules changed")?;
    check(after["renderedTerm"] == before["renderedTerm"], "machine term changed")?;

    let good = client
        .post(format!("{base}/api/modules/Melody/editable"))
        .json(&json!({ "editableText": "main = note hn c ++ main ;\n", "baseVersion": 1 }))
        .send()
        .await
        .unwrap();
    check(good.status() == 200, format!("valid edit answered {}", good.status()))?;
    let body: Value = good.json().await.unwrap();
    check(body["newVersion"] == 2, format!("new version {}", body["newVersion"]))?;
    step(13 + 6).await;
    settle(24).await;
    drop(session);
    let log = std::fs::read_to_string(&log_path).unwrap();
    let _ = std::fs::remove_file(&log_path);
    let lines: Vec<&str> = log.lines().collect();
    check(lines.len() == 24, format!("{} log lines", lines.len()))?;
    check(lines[..18] == GOLDEN.lines().collect::<Vec<_>>()[..], "the first cycle changed")?;
    let expected = ["1600 on 0 60 64", "2000 wait 400", "2000 off 0 60 64", "2000 on 0 60 64", "2400 wait 400", "2400 off 0 60 64"];
    check(lines[18..] == expected, format!("next cycle is {:?}", &lines[18..]))
}

struct Statuses(mpsc::Sender<&'static str>);

impl Observer for Statuses {
    fn changed(&mut self, machine: &Machine, _mode: ExecutionMode) {
        let _ = self.0.send(machine.status().name());
    }
}

fn budget_and_recovery() -> Result<(), String> {
    let output = lazyseq(&["run", "diverge", "--budget", "1000"]);
    check(output.status.code() == Some(2), format!("exit status {}", output.status))?;
    let stderr = String::from_utf8_lossy(&output.stderr);
    check(stderr.contains("BudgetExhausted"), format!("stderr: {stderr}"))?;

    let mut state = load_dir(&programs().join("diverge")).map_err(|e| e.to_string())?;
    let mut machine = Machine::new(state.rules().clone(), Budget::new(1000));
    let before = machine.term();
    let err = machine.advance().err().ok_or("diverging program produced an element")?;
    check(matches!(err, EngineError::BudgetExhausted { limit: 1000 }), format!("{err}"))?;
    check(matches!(machine.status(), Status::Errored(_)), "status is not errored")?;
    check(machine.term() == before, "term was not preserved")?;

    state
        .swap_module("Main", "module Main where\n\nloop = [] ;\nmain = loop ;\n")
        .map_err(|e| e.to_string())?;
    let (tx, rx) = mpsc::channel();
    let (status_tx, statuses) = mpsc::channel();
    let handle = thread::spawn(move || {
        let mut sink = Vec::new();
        let mut observer = Statuses(status_tx);
        let config = RunConfig {
            exit_on_finish: true,
            ..RunConfig::default()
        };
        let mode = ExecutionMode::SlowMotion { pause_ms: 0 };
        Player::new(machine, mode, rx, &mut sink, &mut observer, config).run().1
    });
    let deadline = Instant::now() + Duration::from_secs(5);
    while statuses.recv_timeout(Duration::from_secs(5)).map_err(|e| e.to_string())? != "errored" {
        check(Instant::now() < deadline, "never saw the error")?;
    }
    tx.send(Control::Swap(state.rules().clone())).unwrap();
    tx.send(Control::Resume).unwrap();
    let outcome = handle.join().map_err(|_| "run loop panicked")?;
    check(outcome == Outcome::Finished, format!("{outcome:?}"))
}

type Check = fn() -> Result<(), String>;

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Check); 9] = [
        ("melody golden trace", melody_golden),
        ("loop period", loop_period),
        ("hot swap of main", hot_swap),
        ("arguments are copied, not shared", no_sharing),
        ("parallel merge against the timeline oracle", merge_oracle),
        ("fibonacci term growth", fibonacci_growth),
        ("one note highlighted per wait", highlights),
        ("participant edits", live_edit),
        ("budget exhaustion and recovery", budget_and_recovery),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(()) => println!("criterion {}: PASS {name}", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
