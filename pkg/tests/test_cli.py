import json
import subprocess
import sys

import pytest

from aisette.cli import main
from aisette.corpus import source

ACCOUNT = "Account{ routing = '111000025'<RoutingNumber>, account = '22233344'<AccountNumber> }"
PAYEE = "Account{ routing = '021000021'<RoutingNumber>, account = '99998888'<AccountNumber> }"
STUB = ".*\\$45\\.50.*\tWhat is half of the bill\\?\t22.75\n"
ORDER_VERBOSE = "Order{ orderid = 'A53'<OrderId>, amount = 45.50d, customer = '123456789'<TIN> }"
GUARD = (
    "  if(amt > env.PAYMENT_LIMIT) {\n    return fail(\"over limit\");\n  }\n"
    "  if(amt <= 0.0<USD>) {\n    return fail(\"nothing to pay\");\n  }\n\n  api transfer("
)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def split(tmp_path, capsys, limit, *extra):
    (tmp_path / "chat.tsv").write_text(STUB)
    return run(
        capsys, "run", "payments", "splitBill", '"lunch was $45.50"', PAYEE, "--no-prompt",
        "--stub", str(tmp_path / "chat.tsv"),
        "--env", "PAYMENT_AUTHORIZATION='tok-abc'<OAUTH_TOKEN>",
        "--env", f"PAYMENT_LIMIT={limit}d<USD>",
        "--env", f"account={ACCOUNT}",
        *extra,
    )


# -- check -------------------------------------------------------------------------


def test_check_sign_file(tmp_path, capsys):
    (tmp_path / "sign.bsq").write_text(source("sign"))
    code, out, _ = run(capsys, "check", str(tmp_path / "sign.bsq"))
    assert code == 0 and out.startswith("ok ")


def test_check_bare_literal(tmp_path, capsys):
    (tmp_path / "bad.bsq").write_text("function f(): Int { return 1; }\n")
    code, out, _ = run(capsys, "check", str(tmp_path / "bad.bsq"))
    assert code == 1
    assert "suffix" in out


def test_check_bare_literal_json(tmp_path, capsys):
    (tmp_path / "bad.bsq").write_text("function f(): Int { return 1; }\n")
    code, out, _ = run(capsys, "check", "--format", "json", str(tmp_path / "bad.bsq"))
    [rec] = json.loads(out)
    assert code == 1 and not rec["ok"] and rec["diagnostics"][0]["span"]["col"] == 28


def test_check_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "check", str(tmp_path / "nope.bsq"))
    assert code == 2 and "no such module" in err


# -- test ---------------------------------------------------------------------------


def test_sign_range_valid(capsys):
    code, out, _ = run(capsys, "test", "sign")
    assert code == 0
    assert out.splitlines() == ["VALID signRange", "1 tests run"]


def test_mutated_sign_counterexample(tmp_path, capsys):
    (tmp_path / "m.bsq").write_text(source("sign").replace("y = -1i;", "y = -2i;"))
    code, out, _ = run(capsys, "test", str(tmp_path / "m.bsq"))
    assert code == 1
    line = out.splitlines()[0]
    assert line.startswith("COUNTEREXAMPLE signRange x = -")
    assert int(line.split("= ")[1].rstrip("i")) < 0


def test_filter_without_match(capsys):
    code, out, _ = run(capsys, "test", "sign", "--filter", "nomatch")
    assert code == 0 and out.strip() == "0 tests run"


def test_solver_missing(capsys):
    code, _, err = run(capsys, "test", "sign", "--solver", "/nonexistent/z3")
    assert code == 2 and err


def test_timeout_reports_unknown(capsys):
    code, out, _ = run(capsys, "test", "sign", "--timeout", "0")
    assert code == 1
    assert out.startswith("UNKNOWN signRange (")


def test_errors_and_emit(tmp_path, capsys):
    code, out, _ = run(capsys, "test", "sign", "--errors", "--emit", str(tmp_path), "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["run"] == 1
    assert {s["status"] for s in data["sites"]} == {"impossible"}
    assert "(check-sat)" in (tmp_path / "signRange.smt2").read_text()


# -- run ----------------------------------------------------------------------------


def test_split_bill_within_limit(tmp_path, capsys):
    code, out, _ = split(tmp_path, capsys, "100.00")
    assert code == 0
    assert out.startswith("CALL transfer(amt = 22.75d<USD>")
    assert "OK splitBill" in out
    assert "22233344" not in out and "99998888" not in out


def test_split_bill_over_limit(tmp_path, capsys):
    code, out, _ = split(tmp_path, capsys, "10.00")
    assert code == 1
    assert out.startswith("FAULT precondition in transfer")
    assert "tok-abc" not in out


def test_split_bill_with_approval_event(tmp_path, capsys):
    code, out, _ = split(tmp_path, capsys, "10.00", "--format", "json",
                         "--event", f"Approve{{ payee = {PAYEE}, amt = 22.75d<USD> }}")
    data = json.loads(out)
    assert code == 0 and data["ok"]
    assert data["calls"][0]["args"]["amt"] == 22.75
    assert data["calls"][0]["args"]["payee"]["account"] == "********"


def test_hole_answer_is_stored(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", __import__("io").StringIO("3i\n"))
    code, out, err = run(capsys, "run", "holes", "abs", "-3i", "--examples", str(tmp_path))
    assert code == 0 and out.strip() == "OK abs => 3i"
    assert "hole _absbody" in err
    rows = (tmp_path / "_absbody.examples").read_text().splitlines()
    assert rows == ["HoleExample{ hole = '_absbody', args = HoleArgs{ x = -3i }, result = 3i }"]
    code, out, _ = run(capsys, "run", "holes", "abs", "--no-prompt", "--examples", str(tmp_path), "-3i")
    assert code == 0 and out.strip() == "OK abs => 3i"


def test_unfilled_hole_without_prompt(tmp_path, capsys):
    code, out, _ = run(capsys, "run", "holes", "abs", "--no-prompt", "--examples", str(tmp_path), "--format", "json", "-4i")
    data = json.loads(out)
    assert code == 1 and data["fault"]["kind"] == "unfilled-hole"


def test_run_bad_arity(capsys):
    code, _, err = run(capsys, "run", "sign", "sign")
    assert code == 2 and "takes 1 argument" in err


def test_run_unknown_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "sign", "sign", "--bogus", "1i"])
    assert info.value.code == 2


# -- encode / decode ---------------------------------------------------------------------


def test_json_to_minimal(capsys):
    code, out, _ = run(capsys, "encode", "order", "Order", "--to", "minimal",
                       "--text", '{"orderid": "A53", "amount": 45.50, "customer": "123456789"}')
    assert code == 0 and out.strip() == "Order{ 'A53', 45.50d, '123456789' }"


def test_verbose_to_redacted(capsys):
    code, out, _ = run(capsys, "encode", "order", "Order", "--to", "redacted", "--text", ORDER_VERBOSE)
    assert code == 0
    assert "customer = '*********'<TIN>" in out and "123456789" not in out


def test_decode_field_count(capsys):
    code, out, _ = run(capsys, "decode", "order", "Order", "--text", "Order{ 'A53', 45.50d }")
    assert code == 1 and "field-count" in out


def test_decode_reads_stdin(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", __import__("io").StringIO(ORDER_VERBOSE))
    code, out, _ = run(capsys, "decode", "order", "Order", "--format", "json")
    assert code == 0 and json.loads(out)["value"]["customer"] == "*********"


# -- introspect -------------------------------------------------------------------------------


def test_introspect_reports_missing_obligation(capsys):
    code, out, _ = run(capsys, "introspect", "payments", "--api", "transfer", "--format", "json")
    data = json.loads(out)
    assert code == 1 and not data["satisfied"] and data["action"] == "splitBill"
    limit = [m for m in data["missing"] if "PAYMENT_LIMIT" in m["clause"]]
    assert limit
    w = limit[0]["witness"]
    assert float(w["amt"]) > float(w["env.PAYMENT_LIMIT"])


def test_introspect_with_guarded_prefix(tmp_path, capsys):
    guarded = source("payments").replace("  api transfer(", GUARD)
    start = guarded.index("/**\n * Given")
    (tmp_path / "prefix.bsq").write_text(guarded[start:])
    code, out, _ = run(capsys, "introspect", "payments", "--api", "transfer", "--prefix", str(tmp_path / "prefix.bsq"))
    assert code == 0 and out.startswith("SATISFIED transfer in splitBill")


def test_introspect_unknown_api(capsys):
    code, _, _ = run(capsys, "introspect", "payments", "--api", "nope")
    assert code == 2


# -- lint / serve ------------------------------------------------------------------------------


def shop(tmp_path, visibility, ceiling):
    (tmp_path / "order.bsq").write_text(source("order") + "\naction echo(o: Order): Order { return o; }\n")
    cfg = {"source": "order.bsq", "routes": [{"path": "/echo", "task": "echo", "visibility": visibility, "ceiling": ceiling}]}
    (tmp_path / "mint.json").write_text(json.dumps(cfg))
    return str(tmp_path / "mint.json")


def test_lint_flags_public_sensitive_route(tmp_path, capsys):
    code, out, _ = run(capsys, "lint", "--config", shop(tmp_path, "public", "none"), "--format", "json")
    [finding] = json.loads(out)
    assert code == 1 and "TIN" in finding["message"]


def test_lint_clean(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MINT_CONFIG", shop(tmp_path, "private", "sensitive"))
    code, out, _ = run(capsys, "lint")
    assert code == 0 and out.strip() == "clean"


def test_serve_blocked_by_lint(tmp_path, capsys):
    code, _, err = run(capsys, "serve", "--config", shop(tmp_path, "public", "none"))
    assert code == 2 and "blocked" in err


def test_serve_without_config(capsys, monkeypatch):
    monkeypatch.delenv("MINT_CONFIG", raising=False)
    code, _, _ = run(capsys, "serve")
    assert code == 2


def test_bad_config_is_usage_error(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"source": "x.bsq", "routes": [{"path": "nope"}]}')
    code, _, _ = run(capsys, "lint", "--config", str(tmp_path / "bad.json"))
    assert code == 2


def test_console_script_exit_codes(tmp_path):
    ok = subprocess.run([sys.executable, "-m", "aisette.cli", "test", "sign", "--format", "json"],
                        capture_output=True, text=True, timeout=60)
    assert ok.returncode == 0 and json.loads(ok.stdout)["tests"][0]["status"] == "valid"
    missing = subprocess.run([sys.executable, "-m", "aisette.cli", "check", str(tmp_path / "x.bsq")],
                             capture_output=True, text=True, timeout=60)
    assert missing.returncode == 2
