use fgmc_wasm::{dual_json, exact_json, traces_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn exact_summary_round_trips() {
    let v = parse(exact_json("pm(1)", 3).unwrap());
    assert_eq!(v["bins"]["plus"]["count"], "256");
    assert!(exact_json("neg13", 12).is_err());
}

#[test]
fn traces_carry_every_chain_and_the_reference() {
    let v = parse(traces_json("neg13", 4, "uniform_z", "plus", 500, 3, 1).unwrap());
    assert_eq!(v["chains"].as_array().unwrap().len(), 3);
    let exact = v["exact"].as_f64().unwrap();
    let last = v["chains"][0].as_array().unwrap().last().unwrap()[1].as_f64().unwrap();
    assert!((last - exact).abs() < 0.1);
    assert_eq!(
        traces_json("neg13", 4, "uniform_z", "plus", 500, 3, 1).unwrap(),
        traces_json("neg13", 4, "uniform_z", "plus", 500, 3, 1).unwrap()
    );
    assert!(traces_json("cplx15i", 3, "count_absgibbs", "plus", 10, 1, 0).is_err());
}

#[test]
fn dual_check_reports_zero_equivalence() {
    let v = parse(dual_json("pm(1)", 3).unwrap());
    assert_eq!(v["zero_equivalence"], true);
    assert!(v["ratio"].is_null());
}
