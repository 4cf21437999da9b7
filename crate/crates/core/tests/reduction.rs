use std::sync::Arc;

use lazyseq_core::engine::{compile_expression, Budget, Heap, Node, Reducer, RuleSet, Term};
use lazyseq_core::store::{load_dir, load_program};
use lazyseq_core::stream::{format_event, ExecutionMode, NoObserver, Player, RunConfig};
use lazyseq_core::syntax::render_term;
use proptest::prelude::*;

fn prelude() -> Arc<RuleSet> {
    load_program(&[]).unwrap().rules().clone()
}

fn programs() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

#[test]
fn arguments_are_not_shared() {
    let state = load_program(&[("Main".into(), "module Main where\nf x = x:x:[] ;\nmain = f (2+3) ;\n".into())])
        .unwrap();
    let mut heap = Heap::new();
    let root = heap.import(&Term::global("main"));
    let mut reducer = Reducer::new(state.rules(), Budget::default());
    reducer.whnf(&mut heap, root).unwrap();
    let mut fields = Vec::new();
    heap.spine(root, &mut fields);
    reducer.normal_form(&mut heap, fields[0]).unwrap();
    assert_eq!(heap.get(fields[0]), Node::Int(5));
    assert_eq!(render_term(&heap.export(root), None), "5 : ((2 + 3) : [])");
}

#[derive(Debug, Clone)]
enum Expr {
    Lit(i64),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Head(Box<Expr>),
    Count(Box<Expr>, i64),
    Second(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn source(&self) -> String {
        match self {
            Expr::Lit(n) => n.to_string(),
            Expr::Add(a, b) => format!("({} + {})", a.source(), b.source()),
            Expr::Mul(a, b) => format!("({} * {})", a.source(), b.source()),
            Expr::Head(a) => format!("head ({} : [])", a.source()),
            Expr::Count(a, n) => format!("length (take {n} (repeat ({})))", a.source()),
            Expr::Second(a, b) => format!("head (tail ([{}] ++ [{}]))", a.source(), b.source()),
        }
    }

    fn value(&self) -> i64 {
        match self {
            Expr::Lit(n) => *n,
            Expr::Add(a, b) => a.value() + b.value(),
            Expr::Mul(a, b) => a.value() * b.value(),
            Expr::Head(a) => a.value(),
            Expr::Count(_, n) => *n,
            Expr::Second(_, b) => b.value(),
        }
    }
}

fn arithmetic() -> impl Strategy<Value = Expr> {
    let leaf = (0i64..100).prop_map(Expr::Lit);
    leaf.prop_recursive(4, 24, 3, |inner| {
        let pair = || (inner.clone(), inner.clone());
        prop_oneof![
            pair().prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            pair().prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expr::Head(Box::new(a))),
            (inner.clone(), 1i64..4).prop_map(|(a, n)| Expr::Count(Box::new(a), n)),
            pair().prop_map(|(a, b)| Expr::Second(Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #[test]
    fn whnf_is_idempotent(expr in arithmetic()) {
        let rules = prelude();
        let term = compile_expression(&expr.source()).unwrap();
        let mut heap = Heap::new();
        let id = heap.import(&term);
        Reducer::new(&rules, Budget::default()).whnf(&mut heap, id).unwrap();
        let before = heap.export(id);
        let mut again = Reducer::new(&rules, Budget::default());
        again.whnf(&mut heap, id).unwrap();
        prop_assert_eq!(again.steps_used(), 0);
        prop_assert_eq!(heap.export(id), before);
    }

    #[test]
    fn arithmetic_agrees_with_direct_evaluation(expr in arithmetic()) {
        let rules = prelude();
        let term = compile_expression(&expr.source()).unwrap();
        let mut heap = Heap::new();
        let id = heap.import(&term);
        Reducer::new(&rules, Budget::default()).normal_form(&mut heap, id).unwrap();
        prop_assert_eq!(heap.get(id), Node::Int(expr.value()));
    }
}

fn run_log(dir: &str, elements: u64) -> Vec<String> {
    let state = load_dir(&programs().join(dir)).unwrap();
    let machine = lazyseq_core::stream::Machine::new(state.rules().clone(), Budget::default());
    let (_tx, rx) = std::sync::mpsc::channel();
    let mut events = Vec::new();
    let config = RunConfig {
        max_elements: Some(elements),
        exit_on_error: true,
        exit_on_finish: true,
    };
    let mode = ExecutionMode::SlowMotion { pause_ms: 0 };
    Player::new(machine, mode, rx, &mut events, &mut NoObserver, config).run();
    events.iter().map(format_event).collect()
}

#[test]
fn melody_plays_the_six_notes() {
    let log = run_log("melody", 100);
    assert_eq!(log.len(), 18);
    assert_eq!(log[0], "0 on 0 60 64");
    assert_eq!(log[17], "1600 off 0 67 64");
}

#[test]
fn runs_are_deterministic() {
    assert_eq!(run_log("melody-loop", 90), run_log("melody-loop", 90));
}
