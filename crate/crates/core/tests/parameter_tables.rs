mod common;

#[test]
fn defaults_match_transcribed_tables() {
    let bad = common::parameter_table_mismatches();
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn headline_parameters() {
    for (what, ok) in common::parameter_spot_checks() {
        assert!(ok, "{what}");
    }
}
