import json
import re

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from aisette.bapi import DecodeError, decode, decode_lenient, encode, from_json_bridge, redact, to_json_bridge
from aisette.corpus import load
from aisette.lang import check_source
from aisette.runtime.values import INT_MAX, INT_MIN, NONE, AliasV, DecV, EntityV, IntV, ListV, SomeV, StrV, dec_from_text

ORDER = load("order")
TEMP = load("temperature")


def order(oid="A53", amount="45.50", tin="123456789"):
    return EntityV("Order", (
        ("orderid", AliasV("OrderId", StrV(oid, True), False)),
        ("amount", DecV(dec_from_text(amount))),
        ("customer", AliasV("TIN", StrV(tin, True), True)),
    ))


def norm(text):
    return re.sub(r"\s+", " ", text).strip()


def test_order_verbose_form():
    assert norm(encode(ORDER, order(), "Order", "verbose")) == \
        "Order{ orderid = 'A53'<OrderId>, amount = 45.50d, customer = '123456789'<TIN> }"


def test_order_minimal_form():
    assert encode(ORDER, order(), "Order", "minimal") == "Order{ 'A53', 45.50d, '123456789' }"


def test_order_redacted_form():
    text = encode(ORDER, order(), "Order", "redacted")
    assert "customer = '*********'<TIN>" in text
    assert "123456789" not in text


def test_order_json_form():
    assert json.loads(encode(ORDER, order(), "Order", "json")) == \
        {"orderid": "A53", "amount": 45.50, "customer": "123456789"}


def test_minimal_decodes_to_value():
    assert decode(ORDER, "Order{ 'A53', 45.50d, '123456789' }", "Order") == order()


def test_mixed_verbose_and_minimal_nesting():
    text = "TempForecast{ location = '98052'<ZipCode>, temp = TempRange{ 1i, 2i } }"
    v = decode(TEMP, text, "TempForecast")
    assert v.get("temp").get("high").inner == IntV(2)


@pytest.mark.parametrize("text,code", [
    ("Order{ 'A53', 45.50d }", "field-count"),
    ("Order{ '53A', 45.50d, '123456789' }", "constraint"),
    ("Order{ 'A53', 45.50d, '12345' }", "constraint"),
    ("Order{ 'A53' 45.50d, '123456789' }", "syntax"),
])
def test_decode_errors(text, code):
    with pytest.raises(DecodeError) as exc:
        decode(ORDER, text, "Order")
    assert exc.value.code == code


def test_decode_invariant_violation():
    with pytest.raises(DecodeError) as exc:
        decode(TEMP, "TempRange{ 3i, 1i }", "TempRange")
    assert exc.value.code == "invariant"


def test_lenient_agent_answers():
    pay = load("payments")
    got = decode_lenient(pay, "22.75", "Option<USD>")
    assert got == SomeV(AliasV("USD", DecV(dec_from_text("22.75")), False))
    with pytest.raises(DecodeError):
        decode_lenient(pay, "around twenty", "Option<USD>")


def test_json_bridge_big_ints_and_none():
    tm = check_source("type Big = Int;")
    v = IntV(2**60)
    text = to_json_bridge(tm, v, "Int")
    assert json.loads(text) == "#n:1152921504606846976"
    assert from_json_bridge(tm, text, "Int") == v
    assert to_json_bridge(tm, NONE, "Option<Int>") == "null"
    assert from_json_bridge(tm, "null", "Option<Int>") == NONE
    assert to_json_bridge(tm, IntV(2**53 - 1), "Int") == str(2**53 - 1)


def test_json_bridge_rejects_wrong_shape():
    with pytest.raises(DecodeError):
        from_json_bridge(ORDER, '{"orderid": "A53", "amount": 1}', "Order")
    with pytest.raises(DecodeError):
        from_json_bridge(ORDER, '[1, 2]', "Order")


def test_redact_is_identity_without_sensitive_leaves():
    v = TempRange(1, 2)
    assert redact(v) == v


def TempRange(lo, hi):
    return EntityV("TempRange", (("low", AliasV("Fahrenheit", IntV(lo), False)),
                                 ("high", AliasV("Fahrenheit", IntV(hi), False))))


# -- generated values ------------------------------------------------------------------

ints = st.integers(min_value=INT_MIN, max_value=INT_MAX)
decs = st.integers(min_value=-(10**12), max_value=10**12).map(DecV)
digits = st.text(alphabet="0123456789", min_size=1, max_size=12)
tins = st.text(alphabet="0123456789", min_size=9, max_size=9)
order_ids = st.builds(lambda c, d: c + d, st.sampled_from("ABCDEFGHIJKLMNOPQRSTUVWXYZ"), digits)
orders = st.builds(
    lambda o, a, t: EntityV("Order", (("orderid", AliasV("OrderId", StrV(o, True), False)), ("amount", a),
                                      ("customer", AliasV("TIN", StrV(t, True), True)))),
    order_ids, decs, tins)
zips = st.builds(lambda a, b: a + b, st.text(alphabet="0123456789", min_size=5, max_size=5),
                 st.one_of(st.just(""), st.text(alphabet="0123456789", min_size=4, max_size=4).map(lambda s: "-" + s)))
ranges = st.tuples(ints, ints).map(lambda p: TempRange(min(p), max(p)))
forecasts = st.builds(
    lambda z, r: EntityV("TempForecast", (("location", AliasV("ZipCode", StrV(z, True), False)), ("temp", r))),
    zips, ranges)

CASES = [(ORDER, "Order", orders), (TEMP, "TempForecast", forecasts), (TEMP, "List<TempRange>", st.lists(ranges, max_size=4).map(lambda xs: ListV(tuple(xs))))]


@pytest.mark.parametrize("tm,t,strategy", CASES, ids=["order", "forecast", "ranges"])
@pytest.mark.parametrize("form", ["verbose", "minimal", "json"])
def test_round_trip(tm, t, strategy, form):
    @settings(max_examples=150, deadline=None)
    @given(strategy)
    def check(v):
        assert decode(tm, encode(tm, v, t, form), t, form) == v

    check()


@settings(max_examples=200, deadline=None)
@given(orders)
def test_minimal_never_longer_than_verbose(v):
    assert len(encode(ORDER, v, "Order", "minimal").encode()) <= len(encode(ORDER, v, "Order", "verbose").encode())


@settings(max_examples=200, deadline=None)
@given(orders)
def test_redacted_never_leaks_and_is_idempotent(v):
    tin = v.get("customer").inner.value
    assume(tin not in encode(ORDER, v, "Order", "verbose").replace(tin + "'<TIN>", ""))
    text = encode(ORDER, v, "Order", "redacted")
    assert tin not in text
    assert redact(redact(v)) == redact(v)
    assert "'" + "*" * len(tin) + "'<TIN>" in text


@settings(max_examples=100, deadline=None)
@given(st.lists(ints, max_size=5))
def test_optional_list_minimal_round_trip(xs):
    tm = check_source("type N = Int;")
    v = SomeV(ListV(tuple(IntV(x) for x in xs)))
    for form in ("verbose", "minimal", "json"):
        assert decode(tm, encode(tm, v, "Option<List<Int>>", form), "Option<List<Int>>", form) == v
