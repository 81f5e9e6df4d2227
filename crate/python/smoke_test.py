"""Smoke test for the pyclipaudit extension module.

Build and put the module on the path, then run:

    cargo build --release -p clipaudit-py
    cp target/release/libpyclipaudit.so python/pyclipaudit.so
    python3 python/smoke_test.py

or install it with `maturin develop -m crates/py/Cargo.toml`.
"""

import json
import math

import pyclipaudit as ca


def check_beta():
    assert ca.beta_lookup(10_000, 0.05) == 2.770
    assert ca.beta_lookup(500, 0.07) == 2.546
    assert abs(ca.beta_formula(50_000, 0.10) - 2.5686) < 1e-4
    assert ca.beta_formula_upper(100, 0.5) >= 1.155
    assert round(ca.exhaustive_beta(4, 0.5), 4) == 0.5774
    (sim,) = ca.simulate_beta(4, [0.5], trials=100_000, seed=1)
    assert abs(sim - 0.5774) <= 0.02, sim
    try:
        ca.beta_lookup(4_000_000, 0.05)
    except ca.ClipAuditError as e:
        assert "outside the reference table" in str(e)
    else:
        raise AssertionError("lookup beyond the table should fail")


def check_rule_and_estimates():
    assert not ca.stops(9, 0, 3.0) and ca.stops(10, 0, 3.0)
    assert math.isclose(ca.threshold(5, 0, 2.236), 2.236 * math.sqrt(5))
    expected, ceiled = ca.expected_sample_size_clip(2.568, 0.2)
    assert abs(expected - 164.87) < 0.005 and ceiled == 165
    expected, ceiled = ca.expected_sample_size_bravo(0.10, 0.2)
    assert int(expected) == 115 and ceiled == 116
    report = ca.measure_asn(100, 1.0, 0.05, 2.236, trials=20, seed=3)
    assert report.mean == 5.0 and report.accepted_fraction == 1.0
    assert len(report.sample_sizes) == 20


def check_audit():
    rows = ["ballot_id,contest_id,choice"] + [f"b{i:03},mayor,A" for i in range(20)]
    spec = {"contest_id": "mayor", "candidates": ["A", "B"], "winner_count": 1,
            "reported_winners": ["A"], "n": 20}
    audit = ca.Audit("\n".join(rows) + "\n", json.dumps(spec), alpha=0.1, seed=3, beta=2.236)
    try:
        audit.submit("not-announced", {"mayor": "A"})
    except ca.ClipAuditError:
        pass
    else:
        raise AssertionError("only the announced ballot may be submitted")
    while audit.announced is not None:
        ballot = audit.announced
        assert audit.contests_to_interpret(ballot) == ["mayor"]
        report = audit.submit(ballot, {"mayor": "A"})
    assert audit.draws == 5 and audit.verdict == "all_accepted"
    assert report["newly_accepted"] == [("mayor", "A", "B")]
    snapshot = json.loads(audit.snapshot_json())
    assert snapshot["subaudits"][0]["threshold"] == 4.9998

    tied = ["ballot_id,contest_id,choice"] + [f"b{i:03},mayor,{'AB'[i % 2]}" for i in range(10)]
    spec["n"] = 10
    audit = ca.Audit("\n".join(tied) + "\n", json.dumps([spec]), alpha=0.1, seed=3, beta=2.236)
    while audit.submit_recorded() is not None:
        pass
    assert audit.draws == 10 and audit.verdict == "full_count"


if __name__ == "__main__":
    check_beta()
    check_rule_and_estimates()
    check_audit()
    print(f"pyclipaudit smoke test passed ({ca.GENERATOR_ID})")
