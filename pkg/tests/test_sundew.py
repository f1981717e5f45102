import os
import re
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aisette.corpus import load, source
from aisette.lang import check_source
from aisette.runtime.interp import Interpreter
from aisette.runtime.values import Fault, IntV
from aisette.sundew import (
    Bounds, SolverError, SolverNotFound, Unsupported, check_api_call_site, check_error_reachability, emit_smt,
    replay_obligation, run_chktest,
)
from aisette.sundew.smt import read_sexps

SIGN = load("sign")
MUTANT = check_source(source("sign").replace("y = -1i;", "y = 2i;"))
GUARDED = source("payments").replace(
    "  api transfer(",
    "  if(amt > env.PAYMENT_LIMIT) {\n    return fail(\"over limit\");\n  }\n"
    "  if(amt <= 0.0<USD>) {\n    return fail(\"nothing to pay\");\n  }\n\n  api transfer(",
)

REACH = check_source(source("temperature") + """
function mk(lo: Fahrenheit, hi: Fahrenheit): TempRange { return TempRange{lo, hi}; }
function mz(s: CString): ZipCode { return ZipCode{s}; }
function id(x: Int): Int { return x; }
""")


def fig6_shape(text):
    return re.sub(r"@\d+", "", text)


def test_sign_define_fun_matches_reference_shape():
    text = emit_smt(SIGN, "signRange").text
    line = next(ln for ln in text.splitlines() if ln.startswith("(define-fun sign "))
    assert fig6_shape(line) == "(define-fun sign ((x Int)) Int (let ((y 1)) (ite (< x 0) (let ((y (- 1))) y) y)))"


def test_chktest_asserts_negated_property():
    text = emit_smt(SIGN, "signRange").text
    assert "(let ((sgn (sign x)))" in text
    assert "(not (and (<= (- 1) sgn) (<= sgn 1)))" in text
    assert text.rstrip().endswith("(check-sat)")


def test_body_hole_becomes_constrained_function():
    text = emit_smt(load("holes"), "abs").text
    assert "(declare-fun hole!_absbody (Int) Int)" in text
    assert re.search(r"\(forall \(\(x Int\)\).*\(>= \(hole!_absbody x\) 0\)", text)


def test_emitted_script_parses_and_symbols_are_mapped():
    for tm, target in [(SIGN, "signRange"), (SIGN, "sign"), (REACH, "mk"),
                       (load("payments"), ("splitBill", "transfer")), (load("holes"), "abs")]:
        script = emit_smt(tm, target)
        read_sexps(script.text)
        declared = re.findall(r"\(declare-(?:const|fun) (\S+)", script.text)
        assert declared and set(declared) <= set(script.symbols)


def test_zero_bounds_rejected():
    with pytest.raises(Unsupported):
        Bounds(string_len=0)


def test_sign_range_is_valid():
    res = run_chktest(SIGN, "signRange")
    assert res.status == "valid" and res.valid


def enumerate_failures(tm, name, lo, hi):
    bad = []
    interp = Interpreter(tm)
    for x in range(lo, hi + 1):
        try:
            ok = interp.run_chktest(name, [IntV(x)])
        except Fault:
            ok = False
        if ok is False:
            bad.append(x)
    return bad


def test_mutated_sign_has_replayed_counterexample():
    res = run_chktest(MUTANT, "signRange")
    assert res.status == "counterexample"
    x = res.witness["x"].value
    assert x < 0
    assert res.fault.kind == "assert"
    assert enumerate_failures(MUTANT, "signRange", -1000, 1000) == list(range(-1000, 0))


def test_zero_timeout_is_unknown():
    res = run_chktest(SIGN, "signRange", timeout_ms=0)
    assert (res.status, res.reason) == ("unknown", "timeout")


def test_solver_not_found():
    with pytest.raises(SolverNotFound):
        run_chktest(SIGN, "signRange", solver="/nonexistent/solver")


def test_solver_garbage_is_protocol_error():
    with pytest.raises(SolverError):
        run_chktest(SIGN, "signRange", solver="sh -c 'cat >/dev/null; echo garbage'")


# -- error reachability ------------------------------------------------------------------


def by_kind(results):
    return {r.kind: r for r in results}


def test_negation_overflow_in_sign_is_impossible():
    results = check_error_reachability(SIGN, ["sign"])
    assert results and all(r.status == "impossible" for r in results)


def test_invariant_witness_replays():
    r = by_kind(check_error_reachability(REACH, ["mk"]))["invariant"]
    assert r.status == "witness"
    assert r.witness["lo"].inner.value > r.witness["hi"].inner.value
    assert r.clause == "$low <= $high"


def test_constraint_witness_replays():
    r = by_kind(check_error_reachability(REACH, ["mz"]))["constraint"]
    assert r.status == "witness"
    with pytest.raises(Fault):
        Interpreter(REACH).make_alias("ZipCode", r.witness["s"])


def test_contract_free_function_has_no_sites():
    assert check_error_reachability(REACH, ["id"]) == []


def test_increment_overflow_witness():
    (r,) = check_error_reachability(load("lists"), ["increment"])
    assert (r.kind, r.status) == ("overflow", "witness")
    with pytest.raises(Fault):
        Interpreter(load("lists")).call("increment", [r.witness["l"]])


def test_hole_dependent_sites_are_unknown():
    results = check_error_reachability(load("holes"), ["sign"])
    assert all(r.status != "witness" for r in results)


# -- call-site obligations ------------------------------------------------------------------

PAY = load("payments")


def test_split_bill_reports_limit_clause_missing():
    report = check_api_call_site(PAY, "splitBill", "transfer")
    assert not report.satisfied
    by_clause = {m.clause: m for m in report.missing}
    assert set(by_clause) <= set(report.checked)
    for text in by_clause:
        assert text in source("payments")
    limit = next(m for m in report.missing if "PAYMENT_LIMIT" in m.clause)
    assert limit.summary == "amt may exceed PAYMENT_LIMIT in env"
    w = limit.witness
    assert w["amt"].inner.scaled > w["env.PAYMENT_LIMIT"].inner.scaled
    fault = replay_obligation(PAY, "splitBill", "transfer", w)
    assert fault is not None and fault.kind == "precondition" and fault.clause == limit.clause


def test_all_missing_clauses_replay():
    for m in check_api_call_site(PAY, "splitBill", "transfer").missing:
        assert m.status == "missing"
        fault = replay_obligation(PAY, "splitBill", "transfer", m.witness)
        assert fault is not None and fault.clause == m.clause


def test_guarded_split_bill_is_satisfied():
    report = check_api_call_site(check_source(GUARDED), "splitBill", "transfer")
    assert report.satisfied and report.missing == []


def test_literal_zero_amount_misses_positivity():
    tm = check_source(source("payments") + """
action payNothing(payee: Account)
  env={ PAYMENT_AUTHORIZATION: OAUTH_TOKEN, PAYMENT_LIMIT: USD, account: Account }
{
  api transfer(env{...}, 0.0<USD>, env.account, payee);
}
""")
    report = check_api_call_site(tm, "payNothing", "transfer")
    (m,) = [m for m in report.missing if m.clause == "0.0<USD> < amt"]
    assert m.witness["amt"].inner.scaled == 0
    assert replay_obligation(tm, "payNothing", "transfer", m.witness).clause == "0.0<USD> < amt"


def test_unknown_call_site_is_unsupported():
    with pytest.raises(Unsupported):
        check_api_call_site(PAY, "splitBill", "nosuchapi")


# -- cross-checks against the evaluator ---------------------------------------------------------

SNIPPET = [
    "from aisette.corpus import load",
    "from aisette.sundew import emit_smt",
    "print(emit_smt(load('payments'), ('splitBill', 'transfer')).text)",
    "print(emit_smt(load('sign'), 'signRange').text)",
    "print(emit_smt(load('holes'), 'abs').text)",
]


def test_emission_is_deterministic_across_processes():
    outs = set()
    for seed in ("0", "1", "12345"):
        env = dict(os.environ, PYTHONHASHSEED=seed)
        outs.add(subprocess.run([sys.executable, "-c", "\n".join(SNIPPET)], env=env,
                                capture_output=True, text=True, check=True).stdout)
    assert len(outs) == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=-300, max_value=300), st.sampled_from([2, 3, 7]))
def test_bounded_completeness_against_enumeration(c, k):
    n = 100
    lit = f"{c}i" if c >= 0 else f"-{-c}i"
    tm = check_source(f"chktest t(x: Int): Bool {{ assert x * {k}i !== {lit}; }}")
    res = run_chktest(tm, "t", input_range=(-n, n))
    bad = enumerate_failures(tm, "t", -n, n)
    assert (res.status == "valid") == (bad == [])
    if res.status == "counterexample":
        assert res.witness["x"].value in bad


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=-5, max_value=5))
def test_witnesses_replay_for_mutated_sign(k):
    lit = f"{k}i" if k >= 0 else f"-{-k}i"
    tm = check_source(source("sign").replace("y = -1i;", f"y = {lit};"))
    res = run_chktest(tm, "signRange")
    if -1 <= k <= 1:
        assert res.status == "valid"
    else:
        assert res.status == "counterexample"
        with pytest.raises(Fault):
            Interpreter(tm).run_chktest("signRange", [res.witness["x"]])
