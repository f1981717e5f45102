"""A generate/check/repair loop: introspect splitBill's transfer call, add guards, check again.

Stands in for an agent using the validator as a tool; needs z3 on PATH.
"""

from aisette.bapi import encode
from aisette.corpus import source
from aisette.lang import check_source
from aisette.sundew import check_api_call_site

GUARD = (
    "  if(amt > env.PAYMENT_LIMIT) {\n    return fail(\"over limit\");\n  }\n"
    "  if(amt <= 0.0<USD>) {\n    return fail(\"nothing to pay\");\n  }\n\n  api transfer("
)


def report(tm) -> bool:
    rep = check_api_call_site(tm, "splitBill", "transfer")
    if rep.satisfied:
        print("    SATISFIED: every requires clause of transfer holds at the call")
    for m in rep.missing:
        print(f"    missing: requires {' '.join(m.clause.split())}")
        print(f"      {m.summary}; witness amt = {encode(tm, m.witness['amt'], 'USD')}")
    return rep.satisfied


def main() -> None:
    draft = source("payments")
    print("draft as written:")
    report(check_source(draft))
    print("\nafter inserting limit and positivity guards before the call:")
    report(check_source(draft.replace("  api transfer(", GUARD)))


if __name__ == "__main__":
    main()
