use procmatch_cli::stats::annealing_check;

#[test]
fn dynamic_f_beats_accepting_everything_for_unbiased_matchers() {
    let check = annealing_check(300, 21, 4).unwrap();
    println!("{check:?}");
    assert!(check.passes(0.05), "{check:?}");
}
