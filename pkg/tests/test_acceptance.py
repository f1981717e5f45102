"""One test per acceptance criterion; each records a single PASS/FAIL line (see conftest)."""

import io
import json
import logging
import random
import subprocess
import sys
import time
from contextlib import redirect_stderr, redirect_stdout

from aisette import regex
from aisette.bapi import decode, encode, redact
from aisette.cli import main
from aisette.corpus import load, source
from aisette.lang import check_source
from aisette.mint import MintApp, make_token, parse_config
from aisette.runtime.interp import Interpreter
from aisette.runtime.values import INT_MAX, INT_MIN, AliasV, DecV, EntityV, Fault, IntV, ListV, StrV, dec_from_text
from aisette.sandbox import SandboxPolicy
from aisette.sundew import check_error_reachability, run_chktest
from oracles import naive_fullmatch, random_pair, render

# pinned tolerances and sample sizes
SIGN_BUDGET_S = 5.0
SIGN_ENUM_RANGE = (-1000, 1000)
ROUND_TRIP_VALUES = 1000
SANDBOX_PROBES = 100
REGEX_PAIRS = 500
REGEX_BUDGET_S = 0.100
REGEX_REPEAT = 10_000
NEGATION_SAMPLES = 10_000
SEED = 20240611

SECRET = "acceptance-secret"
ACCOUNT = "Account{ routing = '111000025'<RoutingNumber>, account = '22233344'<AccountNumber> }"
PAYEE = "Account{ routing = '021000021'<RoutingNumber>, account = '99998888'<AccountNumber> }"
STUB = ".*\\$45\\.50.*\tWhat is half of the bill\\?\t22.75\n"
LIMIT_CLAUSE = "amt <= env.PAYMENT_LIMIT ||\n    $events.contains(Approve{|payee=payee, amt=amt|})"


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def bearer(*globs):
    return {"Authorization": "Bearer " + make_token(SECRET, globs)}


def pay_app(tmp_path, limit):
    tmp_path.mkdir(parents=True, exist_ok=True)
    (tmp_path / "payments.bsq").write_text(source("payments"))
    (tmp_path / "chat.tsv").write_text(STUB)
    cfg = {
        "source": "payments.bsq",
        "routes": [
            {"path": "/pay/transfer", "task": "transfer", "ceiling": "sensitive"},
            {"path": "/pay/split", "task": "splitBill", "ceiling": "sensitive"},
        ],
        "bindings": {"PAYMENT_AUTHORIZATION": "'tok-abc'<OAUTH_TOKEN>", "PAYMENT_LIMIT": f"{limit}d<USD>", "account": ACCOUNT},
        "agents": {"Chat::compute": "table:chat.tsv"},
        "faultlog": "faults.jsonl",
    }
    return MintApp(parse_config(json.dumps(cfg), tmp_path), secret=SECRET)


def replay_site(tm, result) -> bool:
    """The witness, run through the evaluator, faults with the same kind at the same span."""
    decl = tm.functions[result.entry]
    try:
        Interpreter(tm).call(decl.name, [result.witness[p.name] for p in decl.params])
    except Fault as f:
        return (f.kind, f.span.offset, f.span.end) == (result.kind, result.span.offset, result.span.end)
    return False


def replay_chktest(tm, name, res) -> bool:
    args = [res.witness[p.name] for p in tm.chktests[name].params]
    try:
        outcome = Interpreter(tm).run_chktest(name, args)
    except Fault as f:
        return res.fault is not None and f.site() == res.fault.site()
    return outcome is False and res.fault is None


# -- 1 -----------------------------------------------------------------------------------


def test_criterion_1_sign_range_verified(verdict):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "aisette.cli", "test", "sign", "--format", "json"],
                          capture_output=True, text=True, timeout=60)
    wall = time.perf_counter() - start
    data = json.loads(proc.stdout)
    valid = proc.returncode == 0 and data["tests"] == [{"test": "signRange", "status": "valid", "elapsed": data["tests"][0]["elapsed"]}]

    tm = load("sign")
    interp = Interpreter(tm)
    lo, hi = SIGN_ENUM_RANGE
    violations = [x for x in range(lo, hi + 1) if interp.run_chktest("signRange", [IntV(x)]) is not True]
    solver_ms = data["tests"][0]["elapsed"] * 1000
    ok = valid and wall <= SIGN_BUDGET_S and not violations
    verdict(1, "signRange verification", ok,
            f"VALID={valid}, end-to-end {wall:.2f}s (budget {SIGN_BUDGET_S}s, solver {solver_ms:.0f}ms), "
            f"{len(violations)} violations over x in [{lo}, {hi}]")


# -- 2 -----------------------------------------------------------------------------------

ABS = """
function abs(x: Int): Int
    ensures $result >= 0i;
{
  if (x < 0i) {
    return -x;
  }
  return x;
}
"""
MK = "\nfunction mk(lo: Fahrenheit, hi: Fahrenheit): TempRange requires lo <= hi; { return TempRange{lo, hi}; }\n"


def test_criterion_2_witness_soundness(verdict):
    sign = source("sign")
    temp = source("temperature")
    mutants = {
        "sign: negative branch yields -2": ("chktest", sign.replace("y = -1i;", "y = -2i;"), "signRange"),
        "sign: default yields 2": ("chktest", sign.replace("var y = 1i;", "var y = 2i;"), "signRange"),
        "abs: negation dropped": ("site", ABS.replace("return -x;", "return x;"), "abs"),
        "abs: off by one": ("site", ABS.replace("  return x;\n}", "  return x - 1i;\n}"), "abs"),
        "TempRange: strict invariant": ("site", temp.replace("$low <= $high", "$low < $high") + MK, "mk"),
    }
    reproduced = []
    for label, (kind, text, target) in mutants.items():
        tm = check_source(text)
        if kind == "chktest":
            res = run_chktest(tm, target)
            good = res.status == "counterexample" and replay_chktest(tm, target, res)
        else:
            witnesses = [r for r in check_error_reachability(tm, [target]) if r.status == "witness"]
            good = bool(witnesses) and all(replay_site(tm, r) for r in witnesses)
        if good:
            reproduced.append(label)
    ok = len(reproduced) == len(mutants) == 5
    missing = sorted(set(mutants) - set(reproduced))
    verdict(2, "witness soundness", ok, f"{len(reproduced)}/{len(mutants)} mutants replayed exactly" +
            (f"; failed: {missing}" if missing else ""))


# -- 3 -----------------------------------------------------------------------------------

GUARD = (
    "  if(amt > env.PAYMENT_LIMIT) {\n    return fail(\"over limit\");\n  }\n"
    "  if(amt <= 0.0<USD>) {\n    return fail(\"nothing to pay\");\n  }\n\n  api transfer("
)


def test_criterion_3_obligation_detection(verdict, tmp_path):
    code, out, _ = cli("introspect", "payments", "--api", "transfer", "--format", "json")
    before = json.loads(out)
    limit = [m for m in before["missing"] if "PAYMENT_LIMIT" in m["clause"]]
    detected = code == 1 and bool(limit) and (
        float(limit[0]["witness"]["amt"]) > float(limit[0]["witness"]["env.PAYMENT_LIMIT"])
    )

    guarded = source("payments").replace("  api transfer(", GUARD)
    (tmp_path / "prefix.bsq").write_text(guarded[guarded.index("/**\n * Given"):])
    code2, out2, _ = cli("introspect", "payments", "--api", "transfer", "--prefix", str(tmp_path / "prefix.bsq"))
    satisfied = code2 == 0 and out2.startswith("SATISFIED")
    detail = (f"before guard: limit clause missing={detected}"
              + (f" (witness amt={limit[0]['witness']['amt']} > limit={limit[0]['witness']['env.PAYMENT_LIMIT']})" if limit else "")
              + f"; after guard: satisfied={satisfied}")
    verdict(3, "obligation detection", detected and satisfied, detail)


# -- 4 -----------------------------------------------------------------------------------


def gen_int(rng):
    return rng.choice([rng.randint(-100, 100), rng.randint(INT_MIN, INT_MAX), INT_MIN, INT_MAX, 0])


def gen_order(rng):
    oid = rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ") + str(rng.randint(0, 10**rng.randint(1, 12)))
    amount = DecV(rng.randint(-(10**12), 10**12))
    tin = "".join(rng.choice("0123456789") for _ in range(9))
    return EntityV("Order", (("orderid", AliasV("OrderId", StrV(oid, True), False)), ("amount", amount),
                             ("customer", AliasV("TIN", StrV(tin, True), True))))


def gen_range(rng):
    a, b = sorted((gen_int(rng), gen_int(rng)))
    return EntityV("TempRange", (("low", AliasV("Fahrenheit", IntV(a), False)), ("high", AliasV("Fahrenheit", IntV(b), False))))


def gen_forecast(rng):
    z = "".join(rng.choice("0123456789") for _ in range(5))
    if rng.random() < 0.5:
        z += "-" + "".join(rng.choice("0123456789") for _ in range(4))
    return EntityV("TempForecast", (("location", AliasV("ZipCode", StrV(z, True), False)), ("temp", gen_range(rng))))


def test_criterion_4_bapi_round_trip(verdict):
    order_tm, temp_tm = load("order"), load("temperature")
    kinds = [
        (order_tm, "Order", gen_order),
        (temp_tm, "TempForecast", gen_forecast),
        (temp_tm, "List<TempRange>", lambda r: ListV(tuple(gen_range(r) for _ in range(r.randint(0, 4))))),
    ]
    rng = random.Random(SEED)
    failures = 0
    for i in range(ROUND_TRIP_VALUES):
        tm, t, gen = kinds[i % len(kinds)]
        v = gen(rng)
        for form in ("verbose", "minimal", "json"):
            try:
                failures += decode(tm, encode(tm, v, t, form), t, form) != v
            except Exception:
                failures += 1
    order = decode(order_tm, "Order{ 'A53', 45.50d, '123456789' }", "Order")
    sizes = {f: len(encode(order_tm, order, "Order", f).encode()) for f in ("minimal", "verbose", "json")}
    compact = sizes["minimal"] < sizes["verbose"] and sizes["minimal"] < sizes["json"]
    verdict(4, "BAPI round trip", failures == 0 and compact,
            f"{failures} failures over {ROUND_TRIP_VALUES} values x 3 forms; Order bytes {sizes}")


# -- 5 -----------------------------------------------------------------------------------

SHOP = source("order") + """
action echo(o: Order): Order { return o; }
action refund(o: Order): Order
  requires o.amount < 0.0d;
{
  return o;
}
"""


def test_criterion_5_redaction(verdict, tmp_path, caplog):
    rng = random.Random(SEED + 5)
    tins = ["".join(rng.choice("0123456789") for _ in range(9)) for _ in range(20)]
    bad_tins = ["".join(rng.choice("0123456789") for _ in range(8)) for _ in range(5)]
    (tmp_path / "shop.bsq").write_text(SHOP)
    routes = [{"path": "/echo", "task": "echo", "ceiling": "sensitive"}, {"path": "/refund", "task": "refund", "ceiling": "sensitive"}]
    cfg = parse_config(json.dumps({"source": "shop.bsq", "routes": routes, "faultlog": "faults.jsonl"}), tmp_path)
    app = MintApp(cfg, secret=SECRET)
    tm = app.tm
    auth = {**bearer("/**"), "Content-Type": "application/bapi+verbose"}
    outputs = []
    caplog.set_level(logging.DEBUG)
    for tin in tins + bad_tins:
        order = f"Order{{ orderid = 'A53'<OrderId>, amount = 45.50d, customer = '{tin}'<TIN> }}"
        for route, task in (("/echo", "echo"), ("/refund", "refund")):
            resp = app.handle("POST", route, auth, f"{task}{{ o = {order} }}".encode())
            if resp.status != 200:
                outputs.append(resp.text)  # error bodies are redacted records
        outputs += list(cli("decode", "order", "Order", "--text", order))[1:]
        outputs += list(cli("run", str(tmp_path / "shop.bsq"), "refund", order))[1:]
        if len(tin) == 9:
            v = decode(tm, order, "Order")
            outputs.append(encode(tm, v, "Order", "redacted"))
            outputs.append(encode(tm, redact(v), "Order", "json"))
    logs = "\n".join(r.getMessage() for r in caplog.records)
    records = json.dumps(app.faults.records) + (tmp_path / "faults.jsonl").read_text()
    haystack = "\n".join([logs, records, *outputs])
    leaks = [t for t in tins + bad_tins if t in haystack]

    order_tm = load("order")
    fig = encode(order_tm, decode(order_tm, "Order{ 'A53', 45.50d, '123456789' }", "Order"), "Order", "redacted")
    nine = "customer = '*********'<TIN>" in fig
    faulted = len(app.faults.records)
    verdict(5, "redaction", not leaks and nine and faulted >= len(tins),
            f"{len(leaks)} of {len(tins) + len(bad_tins)} TINs found across {len(caplog.records)} log lines, "
            f"{faulted} fault records, {len(outputs)} outputs; Order customer masked to 9 asterisks={nine}")


# -- 6 -----------------------------------------------------------------------------------


def rand_uri(rng):
    scheme = rng.choice(["file", "account", "https", "s3"])
    path = "/".join("".join(rng.choice("abcxyz0129") for _ in range(rng.randint(1, 6))) for _ in range(rng.randint(1, 4)))
    return f"{scheme}://{path}" if scheme != "account" else f"account:{path}"


def test_criterion_6_sandbox(verdict):
    rng = random.Random(SEED + 6)
    tm = load("payments")
    payer, payee = decode(tm, ACCOUNT, "Account"), decode(tm, PAYEE, "Account")
    policy = Interpreter(tm).permissions(tm.apis["transfer"], {"payer": payer, "payee": payee})
    payer_ok = policy.check("account:111000025/22233344")
    others = set()
    while len(others) < SANDBOX_PROBES:
        uri = f"account:{rng.randint(0, 10**9 - 1):09d}/{rng.randint(0, 10**8 - 1):08d}"
        if uri != "account:111000025/22233344":
            others.add(uri)
    others |= {"account:021000021/99998888", "account:111000025/22233345", "account:111000025/22233344/x"}
    other_denied = sum(not policy.check(u) for u in others)

    files = SandboxPolicy(("file:///tmp/app_name/**",))
    nested = ["file:///tmp/app_name/a.txt", "file:///tmp/app_name/x/y/z.log", "file:///tmp/app_name/deep/er/still/ok"]
    probes = [f"file:///home/{rand_uri(rng).split('//')[-1]}" for _ in range(SANDBOX_PROBES)] + ["file:///home/user/.ssh/id_rsa"]
    nested_ok = all(files.check(u) for u in nested)
    home_denied = sum(not files.check(u) for u in probes)

    empty = SandboxPolicy(())
    random_uris = [rand_uri(rng) for _ in range(SANDBOX_PROBES)]
    empty_denied = sum(not empty.check(u) for u in random_uris)
    ok = payer_ok and other_denied == len(others) and nested_ok and home_denied == len(probes) and empty_denied == SANDBOX_PROBES
    verdict(6, "sandbox", ok,
            f"payer allowed={payer_ok}, other accounts denied {other_denied}/{len(others)}, nested allowed={nested_ok}, "
            f"/home probes denied {home_denied}/{len(probes)}, empty policy denied {empty_denied}/{SANDBOX_PROBES}")


# -- 7 -----------------------------------------------------------------------------------


def test_criterion_7_split_bill_end_to_end(verdict, tmp_path):
    body = f'splitBill{{ msg = "lunch was $45.50", payee = {PAYEE} }}'.encode()
    headers = {**bearer("/pay/**"), "Content-Type": "application/bapi+verbose"}

    def kinds(app):
        return [e.type for e in app.events.entries]

    ok_app = pay_app(tmp_path / "a", "100.00")
    calls = []
    ok_app.apis["transfer"] = lambda ctx: calls.append(ctx.args["amt"])
    r1 = ok_app.handle("POST", "/pay/split", headers, body)
    first = r1.status == 200 and kinds(ok_app) == ["TaskCompleted"] and calls == [AliasV("USD", DecV(dec_from_text("22.75")), False)]

    low = pay_app(tmp_path / "b", "10.00")
    r2 = low.handle("POST", "/pay/split", headers, body)
    rec = low.faults.records[0] if low.faults.records else {}
    second = r2.status == 412 and rec.get("clause") == LIMIT_CLAUSE and "TaskCompleted" not in kinds(low)

    approved = pay_app(tmp_path / "c", "10.00")
    approved.events.append(EntityV("Approve", (("payee", decode(approved.tm, PAYEE, "Account")),
                                               ("amt", AliasV("USD", DecV(dec_from_text("22.75")), False)))))
    r3 = approved.handle("POST", "/pay/split", headers, body)
    third = r3.status == 200 and kinds(approved) == ["Approve", "TaskCompleted"]
    verdict(7, "end-to-end splitBill", first and second and third,
            f"limit 100 -> {r1.status} ({kinds(ok_app)}, transfer amt 22.75={bool(calls)}); "
            f"limit 10 -> {r2.status} on requires clause={rec.get('clause') == LIMIT_CLAUSE}; "
            f"limit 10 + Approve -> {r3.status}")


# -- 8 -----------------------------------------------------------------------------------


def test_criterion_8_discovery(verdict, tmp_path):
    app = pay_app(tmp_path, "100.00")
    narrow, wide = bearer("/pay/transfer"), bearer("/pay/transfer", "/pay/*")

    def names(h):
        return {e["name"] for e in app.handle("GET", "/actions", h).json()["endpoints"]}

    anon, a, b = names({}), names(narrow), names(wide)
    subset = anon <= a <= b and a == {"transfer"} and b == {"transfer", "splitBill"}
    env = app.handle("GET", "/actions/transfer", wide).json()["endpoint"]["environment"]
    has_env = {"PAYMENT_AUTHORIZATION", "PAYMENT_LIMIT"} <= set(env)
    hits = app.handle("GET", "/search?q=payment", wide).json()["hits"]
    first = bool(hits) and hits[0]["name"] == "transfer"
    verdict(8, "discovery routes", subset and has_env and first,
            f"index anon={sorted(anon)} narrow={sorted(a)} wide={sorted(b)}; transfer env={env}; "
            f"search 'payment' -> {[(h['name'], h['score']) for h in hits]}")


# -- 9 -----------------------------------------------------------------------------------


def test_criterion_9_safe_regex(verdict):
    rng = random.Random(SEED + 9)
    disagreements = 0
    for _ in range(REGEX_PAIRS):
        tree, text = random_pair(rng)
        disagreements += regex.compile(render(tree)).matches(text) != naive_fullmatch(tree, text)
    r = regex.compile("(a|a)*b")
    text = "a" * REGEX_REPEAT
    start = time.perf_counter()
    matched = r.matches(text)
    elapsed = time.perf_counter() - start
    ok = disagreements == 0 and not matched and elapsed < REGEX_BUDGET_S
    verdict(9, "safe regex", ok,
            f"{disagreements} disagreements over {REGEX_PAIRS} pairs; (a|a)*b on {REGEX_REPEAT} a's "
            f"in {elapsed * 1000:.2f}ms (budget {REGEX_BUDGET_S * 1000:.0f}ms)")


# -- 10 ----------------------------------------------------------------------------------

ARITH = check_source("""
function neg(x: Int): Int { return -x; }
function add(x: Int, y: Int): Int { return x + y; }
""")


def test_criterion_10_negation_and_overflow(verdict):
    rng = random.Random(SEED + 10)
    interp = Interpreter(ARITH)
    xs = [INT_MIN, INT_MAX, 0, 1, -1] + [rng.randint(INT_MIN, INT_MAX) for _ in range(NEGATION_SAMPLES - 5)]
    faults = mismatches = 0
    for x in xs:
        try:
            once = interp.call("neg", [IntV(x)])
            twice = interp.call("neg", [once])
        except Fault:
            faults += 1
            continue
        mismatches += twice != IntV(x) or once != IntV(-x)

    def overflows(a, b):
        try:
            interp.call("add", [IntV(a), IntV(b)])
        except Fault as f:
            return f.kind == "overflow"
        return False

    boundary = overflows(INT_MAX, 1) and overflows(INT_MIN, -1) and overflows(INT_MAX, INT_MAX)
    in_range = interp.call("add", [IntV(INT_MAX), IntV(-1)]) == IntV(INT_MAX - 1)
    ok = faults == 0 and mismatches == 0 and boundary and in_range
    verdict(10, "negation and overflow", ok,
            f"{len(xs)} Ints: {faults} negation faults, {mismatches} double-negation mismatches; "
            f"boundary addition faults={boundary}")
