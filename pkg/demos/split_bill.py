"""Serve the payments module in-process and walk splitBill through its three outcomes.

Run with ``python3 demos/split_bill.py``; everything happens in a temp directory.
"""

import json
import logging
import sys
import tempfile
from pathlib import Path

from aisette.bapi import decode
from aisette.corpus import source
from aisette.mint import MintApp, make_token, parse_config
from aisette.runtime.values import AliasV, DecV, EntityV, dec_from_text

SECRET = "demo-secret"
ACCOUNT = "Account{ routing = '111000025'<RoutingNumber>, account = '22233344'<AccountNumber> }"
PAYEE = "Account{ routing = '021000021'<RoutingNumber>, account = '99998888'<AccountNumber> }"
STUB = ".*\\$45\\.50.*\tWhat is half of the bill\\?\t22.75\n"


def make_app(root: Path, limit: str) -> MintApp:
    root.mkdir()
    (root / "payments.bsq").write_text(source("payments"))
    (root / "chat.tsv").write_text(STUB)
    cfg = {
        "source": "payments.bsq",
        "routes": [{"path": "/pay/split", "task": "splitBill", "ceiling": "sensitive"},
                   {"path": "/pay/transfer", "task": "transfer", "ceiling": "sensitive"}],
        "bindings": {"PAYMENT_AUTHORIZATION": "'tok-abc'<OAUTH_TOKEN>", "PAYMENT_LIMIT": f"{limit}d<USD>", "account": ACCOUNT},
        "agents": {"Chat::compute": "table:chat.tsv"},
    }
    app = MintApp(parse_config(json.dumps(cfg), root), secret=SECRET)
    app.apis["transfer"] = lambda ctx: print(f"    bank: transfer of {ctx.args['amt'].inner} accepted")
    return app


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="    log: %(message)s", stream=sys.stdout)
    headers = {"Authorization": "Bearer " + make_token(SECRET, ["/pay/**"]), "Content-Type": "application/bapi+verbose"}
    body = f'splitBill{{ msg = "lunch was $45.50", payee = {PAYEE} }}'.encode()
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        app = make_app(root / "discover", "100.00")
        print("GET /search?q=payment")
        for hit in app.handle("GET", "/search?q=payment", headers).json()["hits"]:
            print(f"    {hit['name']} (score {hit['score']}) -> {hit['link']}")

        print("\nlimit 100.00: agent answers 22.75, under the limit")
        resp = make_app(root / "a", "100.00").handle("POST", "/pay/split", headers, body)
        print(f"    {resp.status} {resp.text or '(void)'}")

        print("\nlimit 10.00, no approval on record")
        low = make_app(root / "b", "10.00")
        resp = low.handle("POST", "/pay/split", headers, body)
        print(f"    {resp.status} {resp.text}")
        print(f"    fault record: {low.faults.records[0]}")

        print("\nlimit 10.00 with Approve{payee, 22.75} already in the event log")
        approved = make_app(root / "c", "10.00")
        amt = AliasV("USD", DecV(dec_from_text("22.75")), False)
        approved.events.append(EntityV("Approve", (("payee", decode(approved.tm, PAYEE, "Account")), ("amt", amt))))
        resp = approved.handle("POST", "/pay/split", headers, body)
        print(f"    {resp.status} {resp.text or '(void)'}")
        print(f"    events: {[e.type for e in approved.events.entries]}")


if __name__ == "__main__":
    main()
