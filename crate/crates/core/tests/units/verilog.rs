use bespoke_core::hdl::*;

#[test]
fn identifiers() {
    assert!(is_identifier("mlp_redwine_3"));
    assert!(!is_identifier("3mlp"));
    assert!(!is_identifier("module"));
    assert!(!is_identifier("a-b"));
    assert!(!is_identifier(""));
}

#[test]
fn summand_wiring() {
    let s = Summand {
        input: 0,
        shift: 2,
        kept: 0b1011,
        src_bits: 4,
    };
    assert_eq!(summand_expr("x0", &s), "{x0[3], 1'b0, x0[1], x0[0], {2{1'b0}}}");
    let s = Summand {
        kept: 0b1111,
        shift: 0,
        ..s
    };
    assert_eq!(summand_expr("x0", &s), "x0");
}
