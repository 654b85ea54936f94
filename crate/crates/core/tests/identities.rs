mod common;

use common::*;
use cuspidal::exact::{sym_name, Poly};
use cuspidal::hamiltonian::FormulaBank;

fn expand(bank: &FormulaBank, t: &str) -> Poly {
    bank.expand(t, &keep_chain_symbols).unwrap()
}

/// Difference of the two sides that the flagged terms predict.
fn predicted_gap(left: &str, right: &str) -> Poly {
    let printed = FormulaBank::global();
    let fixed = printed.corrected();
    let a = expand(printed, left).sub(&expand(&fixed, left));
    let b = expand(printed, right).sub(&expand(&fixed, right));
    a.sub(&b)
}

#[test]
fn seven_identities_hold_after_errata() {
    let fixed = FormulaBank::global().corrected();
    for (l, r) in IDENTITIES {
        let d = expand(&fixed, l).sub(&expand(&fixed, r));
        assert!(d.is_zero(), "{l} - {r} = {d}");
    }
}

#[test]
fn printed_gaps_are_exactly_the_flagged_terms() {
    let bank = FormulaBank::global();
    for (l, r) in IDENTITIES {
        let d = expand(bank, l).sub(&expand(bank, r));
        assert_eq!(d, predicted_gap(l, r), "{l} vs {r}");
    }
}

#[test]
fn only_the_eighth_order_pair_is_touched() {
    let bank = FormulaBank::global();
    for (l, r) in IDENTITIES {
        let d = expand(bank, l).sub(&expand(bank, r));
        assert_eq!(d.is_zero(), l != "rt_8_0", "{l}");
    }
}

#[test]
fn identities_are_linear_in_alpha() {
    let fixed = FormulaBank::global().corrected();
    for (l, _) in IDENTITIES {
        for (m, _) in expand(&fixed, l).terms() {
            let deg: i32 = m.pairs().iter().filter(|(s, _)| sym_name(*s).starts_with("alpha_")).map(|p| p.1).sum();
            assert_eq!(deg, 1, "{l}: {m}");
        }
    }
}
