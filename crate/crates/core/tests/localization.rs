mod common;

use gridaudit::audit::{audit, validate, AuditOptions, Verdict};
use gridaudit::compare::ToleranceSpec;
use gridaudit::faultlab::{build_consistent_gridbook, diff_cells, inject, FaultKind, FaultSpec};
use gridaudit::{open_workbook, BindingSpec, Node};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> ToleranceSpec {
    ToleranceSpec::default()
}

fn is_ancestor(a: Node, b: Node) -> bool {
    b.ancestors().contains(&a)
}

#[test]
fn two_independent_faults_are_both_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut pairs_seen = 0;
    for trial in 0..60 {
        let inputs = common::random_inputs(&mut rng, 10);
        let layout = common::random_layout(&mut rng, inputs.clone());
        let book = build_consistent_gridbook(&inputs, &layout).unwrap();
        let a = Node::ALL[rng.random_range(0..7)];
        let b = Node::ALL[rng.random_range(0..7)];
        // a parent-child pair hides the child; see the chained test below
        if a == b || a.parents().any(|p| p == b) || b.parents().any(|p| p == a) {
            continue;
        }
        pairs_seen += 1;
        let once = inject(
            &book,
            &FaultSpec::new(FaultKind::ScaleError, a).seed(trial),
            &layout,
            &tol(),
        )
        .unwrap();
        let twice = inject(
            &once.book,
            &FaultSpec::new(FaultKind::ConstantOverwrite, b)
                .seed(trial + 1000)
                .parameter(-1.0),
            &layout,
            &tol(),
        )
        .unwrap();
        let report = audit(&twice.book, &layout, &AuditOptions::default());
        let mut want = vec![a, b];
        want.sort();
        assert_eq!(report.culprit_nodes(), want, "trial {trial}");

        let mut reported: Vec<String> = report
            .culprits
            .iter()
            .flat_map(|c| common::expand_ranges(&c.sheet, &c.error_ranges))
            .collect();
        reported.sort();
        let mut diffed = diff_cells(&book, &twice.book);
        diffed.sort();
        assert_eq!(reported, diffed, "trial {trial}");
        assert!(!is_ancestor(a, b) || report.culprits.len() == 2);
    }
    assert!(pairs_seen >= 20, "only {pairs_seen} usable pairs");
}

#[test]
fn fault_chained_below_a_failing_parent_is_not_blamed() {
    let inputs = common::sample_inputs();
    let layout = common::fixture_layout(inputs.clone());
    let book = build_consistent_gridbook(&inputs, &layout).unwrap();
    let one = inject(
        &book,
        &FaultSpec::new(FaultKind::ScaleError, Node::NomGen).indices(0, 59),
        &layout,
        &tol(),
    )
    .unwrap();
    let two = inject(
        &one.book,
        &FaultSpec::new(FaultKind::ScaleError, Node::NetGen).indices(0, 59),
        &layout,
        &tol(),
    )
    .unwrap();
    let report = audit(&two.book, &layout, &AuditOptions::default());
    assert_eq!(report.culprit_nodes(), vec![Node::NomGen]);
    assert_eq!(report.node(Node::NetGen).unwrap().pass, Some(false));
}

#[test]
fn unbound_nodes_are_transparent() {
    let inputs = common::sample_inputs();
    let full = common::fixture_layout(inputs.clone());
    let book = build_consistent_gridbook(&inputs, &full).unwrap();
    let inj = inject(
        &book,
        &FaultSpec::new(FaultKind::StaleFill, Node::NetGen).indices(1, 59),
        &full,
        &tol(),
    )
    .unwrap();

    // only the terminal and net_gen bound: blame stops at net_gen, whose
    // ancestors were never checked
    let mut sparse = full.clone();
    sparse
        .bindings
        .retain(|b| matches!(b.node, Node::NetGen | Node::EbitdaN));
    let report = audit(&inj.book, &sparse, &AuditOptions::default());
    assert_eq!(report.culprit_nodes(), vec![Node::NetGen]);
    assert!(report.culprits[0].upstream_unverified);
    assert!(!report.node(Node::NomGen).unwrap().bound);
    assert_eq!(report.node(Node::NomGen).unwrap().pass, None);
    assert!(report.to_text().contains("(upstream unverified)"));

    // fully bound: not flagged
    let report = audit(&inj.book, &full, &AuditOptions::default());
    assert!(!report.culprits[0].upstream_unverified);
}

#[test]
fn terminal_only_binding_blames_the_terminal() {
    // the stale fixture carries the bad net generation through to EBITDA
    let mut spec = BindingSpec::load(&common::fixture("solar_model_stale.spec.json")).unwrap();
    let book = open_workbook(spec.workbook.as_ref().unwrap()).unwrap();
    spec.bindings.retain(|b| b.node == Node::EbitdaN);
    let report = audit(&book, &spec, &AuditOptions::default());
    assert_eq!(report.culprit_nodes(), vec![Node::EbitdaN]);
    assert_eq!(report.culprits[0].error_ranges, vec!["$H$56:$BN$56"]);
    assert!(report.culprits[0].upstream_unverified);
}

#[test]
fn offsets_shift_reported_ranges() {
    let inputs = common::sample_inputs();
    let mut layout = common::fixture_layout(inputs.clone());
    for b in &mut layout.bindings {
        *b = b.clone().with_offset(3);
    }
    let book = build_consistent_gridbook(&inputs, &layout).unwrap();
    let inj = inject(
        &book,
        &FaultSpec::new(FaultKind::StaleFill, Node::NetGen).indices(1, 59),
        &layout,
        &tol(),
    )
    .unwrap();
    let report = audit(&inj.book, &layout, &AuditOptions::default());
    // G..I hold pre-operations zeros, month 1 is J
    assert_eq!(report.culprits[0].correct_ranges, vec!["$J$43"]);
    assert_eq!(report.culprits[0].error_ranges, vec!["$K$43:$BQ$43"]);
}

#[test]
fn fixture_inputs_are_read_from_the_workbook() {
    let spec = BindingSpec::load(&common::fixture("solar_model.spec.json")).unwrap();
    let book = open_workbook(spec.workbook.as_ref().unwrap()).unwrap();
    let inputs = gridaudit::audit::resolve_inputs(&book, &spec).unwrap();
    assert_eq!(inputs, common::sample_inputs());
    let sheet = book.sheet("Model").unwrap();
    assert_eq!(
        sheet.formula(gridaudit::grid::CellAddr::new(43, 8).unwrap()),
        Some("H41/H42")
    );
}

#[test]
fn model_years_source_overrides_the_input_reference() {
    let text = std::fs::read_to_string(common::fixture("solar_model.spec.json")).unwrap();
    let mut spec: serde_json::Value = serde_json::from_str(&text).unwrap();
    spec["inputs"]["from_workbook"]
        .as_object_mut()
        .unwrap()
        .remove("model_years");
    spec["model_years_source"] = "cell:Model!D8".into();
    let mut spec = BindingSpec::from_json(&spec.to_string()).unwrap();
    spec.workbook = Some(common::fixture("solar_model.xlsx"));
    let book = open_workbook(spec.workbook.as_ref().unwrap()).unwrap();
    assert_eq!(
        gridaudit::audit::resolve_inputs(&book, &spec)
            .unwrap()
            .model_years,
        5
    );
    assert_eq!(
        validate(&book, &spec, &AuditOptions::default()).verdict,
        Verdict::Pass
    );

    // pointing it at a non-integer cell is reported
    spec.model_years_source = Some("name:derate".into());
    let report = validate(&book, &spec, &AuditOptions::default());
    assert_eq!(report.verdict, Verdict::Error);
    assert!(report.error.unwrap().contains("whole number"));
}

#[test]
fn short_ranges_are_length_errors_not_truncations() {
    let inputs = common::sample_inputs();
    let layout = common::fixture_layout(inputs.clone());
    let book = build_consistent_gridbook(&inputs, &layout).unwrap();
    let mut b = book.to_builder();
    b.set(
        &gridaudit::grid::CellRef::new("Model", gridaudit::grid::CellAddr::new(56, 66).unwrap()),
        gridaudit::grid::CellValue::Empty,
    );
    let report = validate(&b.build().unwrap(), &layout, &AuditOptions::default());
    assert_eq!(report.verdict, Verdict::Error);
    let msg = report.error.unwrap();
    assert!(msg.contains("59 cells, needed 60"), "{msg}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn validate_pass_implies_audit_pass_and_reports_are_deterministic(seed in any::<u64>(), tamper in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = common::random_inputs(&mut rng, 8);
        let layout = common::random_layout(&mut rng, inputs.clone());
        let mut book = build_consistent_gridbook(&inputs, &layout).unwrap();
        if tamper {
            let kind = FaultKind::ALL[rng.random_range(1..3)];
            let node = Node::ALL[rng.random_range(0..7)];
            book = inject(&book, &FaultSpec::new(kind, node).seed(seed), &layout, &tol()).unwrap().book;
        }
        let opts = AuditOptions::default();
        let v = validate(&book, &layout, &opts);
        let a = audit(&book, &layout, &opts);
        if v.verdict == Verdict::Pass {
            prop_assert_eq!(a.verdict, Verdict::Pass);
        }
        prop_assert_eq!(v.verdict, a.verdict);
        prop_assert_eq!(a.to_json(), audit(&book, &layout, &opts).to_json());
        prop_assert_eq!(a.culprits.is_empty(), !tamper);
    }
}
