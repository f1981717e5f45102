import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aisette.agents import AgentMiss, AgentRequest, ChildProcessAgent, HttpAgent, ScriptedTable, invoke_agent, load_binding
from aisette.bapi import parse_type
from aisette.corpus import load
from aisette.runtime.interp import EnvRecord
from aisette.runtime.values import NONE, AliasV, DecV, Fault, SomeV, conforms, dec_from_text

PAY = load("payments")
USD = parse_type("Option<USD>")
TABLE = ScriptedTable.parse("# comment\n.*lunch.*\t.*half.*\t22.75\n.*\t.*\taround twenty\n")


def usd(text):
    return SomeV(AliasV("USD", DecV(dec_from_text(text)), False))


def ask(binding, text, shape=USD):
    return invoke_agent(binding, EnvRecord(), text, "What is half of the bill?", shape, PAY, "Chat::compute")


def test_table_first_match_wins():
    assert ask(TABLE, "lunch was $45.50") == usd("22.75")


def test_undecodable_answer_is_none_for_option_shapes():
    assert ask(TABLE, "dinner") == NONE


def test_undecodable_answer_faults_for_plain_shapes():
    with pytest.raises(Fault) as exc:
        ask(TABLE, "dinner", parse_type("USD"))
    assert exc.value.kind == "shape"


def test_table_miss():
    table = ScriptedTable.parse("x\ty\tz\n")
    with pytest.raises(AgentMiss):
        table(AgentRequest("a", EnvRecord(), "q", "p", USD))
    assert ask(table, "q") == NONE


def test_table_rejects_malformed_rows():
    with pytest.raises(ValueError):
        ScriptedTable.parse("only\ttwo\n")


AGENT_SCRIPT = "import json,sys; r=json.load(sys.stdin); print('45.50' if r['env'] == {} else 'leak')"


def test_child_process_agent():
    agent = ChildProcessAgent([sys.executable, "-c", AGENT_SCRIPT])
    assert ask(agent, "anything") == usd("45.50")


def test_child_process_failure_is_agent_fault():
    agent = ChildProcessAgent([sys.executable, "-c", "raise SystemExit(3)"])
    with pytest.raises(Fault) as exc:
        ask(agent, "x")
    assert exc.value.kind == "agent"


def test_http_agent_posts_request():
    seen = {}

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = self.rfile.read(int(self.headers["Content-Length"]))
            seen.update(json.loads(body))
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b"12.00")

        def log_message(self, *a):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=server.handle_request, daemon=True).start()
    try:
        got = ask(HttpAgent(f"http://127.0.0.1:{server.server_port}/"), "split it")
    finally:
        server.server_close()
    assert got == usd("12.00")
    assert seen["input"] == "split it" and seen["shape"] == "Option<USD>"


def test_load_binding(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text(".*\t.*\t1.00\n")
    assert isinstance(load_binding(f"table:{path}"), ScriptedTable)
    assert isinstance(load_binding("exec:cat"), ChildProcessAgent)
    assert isinstance(load_binding("http://localhost:1/"), HttpAgent)
    with pytest.raises(ValueError):
        load_binding("carrier-pigeon")


SPLIT_RULE = ScriptedTable.parse(".*\\$45\\.50.*\tWhat is half of the bill\\?\t22.75\n")


def test_split_bill_stub_rule():
    assert ask(SPLIT_RULE, "lunch was $45.50") == usd("22.75")
    assert ask(SPLIT_RULE, "lunch was $12.00") == NONE


def probe(names):
    """A binding that tries to read each env name before answering."""

    def binding(req):
        for n in names:
            req.env.get(n)
        return "1.00"

    return binding


def test_agent_with_empty_env_cannot_read_authorization():
    with pytest.raises(Fault) as exc:
        ask(probe(["PAYMENT_AUTHORIZATION"]), "lunch")
    assert exc.value.kind == "env-missing"


@settings(max_examples=50)
@given(st.lists(st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,12}", fullmatch=True), min_size=1, max_size=4))
def test_empty_env_blocks_every_read(names):
    with pytest.raises(Fault) as exc:
        ask(probe(names), "lunch")
    assert exc.value.kind == "env-missing"


@settings(max_examples=200)
@given(st.text(max_size=24))
def test_option_shaping_is_total(answer):
    v = ask(lambda req: answer, "lunch")
    assert v == NONE or (isinstance(v, SomeV) and conforms(PAY, v, USD))
