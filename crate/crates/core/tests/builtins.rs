use spencerkit::scenario::{builtin, builtin_names, emit_text, run, RunOptions, Scenario};

fn run_builtin(name: &str) -> spencerkit::scenario::RunResult {
    let s = Scenario::parse(builtin(name).unwrap()).unwrap();
    run(&s, &RunOptions::default()).unwrap()
}

#[test]
fn builtins_pass_their_suites() {
    for name in builtin_names() {
        let r = run_builtin(name);
        assert!(r.passed(), "{}", emit_text(&r));
        assert_eq!(r.exit_code(), 0);
    }
}
