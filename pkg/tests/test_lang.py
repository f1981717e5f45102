import pytest
from hypothesis import given, settings, strategies as st

from aisette import corpus
from aisette.diagnostics import AisetteError, LexError, ParseError, TypeCheckError
from aisette.lang import ast as A
from aisette.lang import check_source, parse_module, print_module, tokenize


def kinds(src):
    return [repr(t) for t in tokenize(src)]


def codes(exc):
    return [d.code for d in exc.value.diagnostics]


def test_tokenize_var_decl():
    assert kinds("var y = 1i;") == ["kw_var", "ident(y)", "eq", "int_lit(1)", "semi"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_bare_literal_needs_suffix():
    with pytest.raises(LexError) as exc:
        tokenize("return 1;")
    assert "missing type suffix" in str(exc.value)
    assert exc.value.diagnostics[0].span.col == 8


def test_tokens_carry_spans():
    toks = tokenize("let a = 'x'<Z>;\n  b")
    assert toks[3].alias == "Z" and toks[3].value == "x"
    last = toks[-1]
    assert (last.span.line, last.span.col, last.span.offset) == (2, 3, 18)


@pytest.mark.parametrize("src,code", [
    ("'abc", "unterminated-string"),
    ("type Z = CString of /abc", "unterminated-regex"),
    ("x # y", "unknown-char"),
])
def test_lex_errors(src, code):
    with pytest.raises(LexError) as exc:
        tokenize(src)
    assert code in codes(exc)


def test_parse_sign():
    m = parse_module(corpus.source("sign"))
    (f,) = m.functions
    assert f.name == "sign" and f.ret == A.INT
    assert [type(s) for s in f.body] == [A.VarDecl, A.If, A.Return]


def test_parse_temperature():
    m = parse_module(corpus.source("temperature"))
    assert len(m.aliases) == 2 and len(m.entities) == 2
    tr = m.entities[0]
    assert tr.name == "TempRange" and len(tr.invariants) == 1
    assert tr.invariants[0].text == "$low <= $high"


def test_parse_body_hole():
    m = parse_module(corpus.source("holes"))
    absf = m.functions[1]
    assert isinstance(absf.body, A.Hole)
    assert absf.body.name == "_absbody" and absf.body.examples


def test_parse_error_has_expected_set():
    with pytest.raises(ParseError) as exc:
        parse_module("function f(x: Int): Int { return x }")
    d = exc.value.diagnostics[0]
    assert "semi" in d.expected
    assert d.span.line == 1


@pytest.mark.parametrize("name", corpus.NAMES)
def test_round_trip_corpus(name):
    m = parse_module(corpus.source(name))
    assert parse_module(print_module(m)) == m


def test_clause_text_is_verbatim():
    m = parse_module(corpus.source("payments"))
    assert m.apis[0].requires[0].text == "0.0<USD> < amt"


# -- checker -------------------------------------------------------------


@pytest.mark.parametrize("name", corpus.NAMES)
def test_corpus_typechecks(name):
    corpus.load(name)


def test_sign_return_type():
    tm = corpus.load("sign")
    assert tm.functions["sign"].return_type == A.INT
    ret = tm.functions["sign"].body[-1]
    assert ret.expr.ty == A.INT


WAIT = """
type MilliSeconds = Int;
function wait(duration: MilliSeconds): Int { return 0i; }
"""


def test_alias_is_not_its_base():
    with pytest.raises(TypeCheckError) as exc:
        check_source(WAIT + "function g(n: Int): Int { return wait(n); }")
    assert "type-mismatch" in codes(exc)


def test_bare_int_literal_is_not_an_alias():
    with pytest.raises(TypeCheckError):
        check_source(WAIT + "function g(): Int { return wait(5i); }")


def test_alias_literal_form_accepted():
    check_source(WAIT + "function g(): Int { return wait(5i<MilliSeconds>); }")
    check_source(WAIT + "function g(): Int { return wait(MilliSeconds{5i}); }")


def test_aliases_do_not_mix():
    src = "type F = Int; type C = Int;\nfunction g(a: F, b: C): Bool { return a < b; }"
    with pytest.raises(TypeCheckError):
        check_source(src)


def test_let_reassignment_rejected():
    with pytest.raises(TypeCheckError) as exc:
        check_source("function g(): Int { let y = 1i; y = 2i; return y; }")
    assert "immutable binding" in str(exc.value)


def test_invariant_must_be_bool():
    with pytest.raises(TypeCheckError):
        check_source("entity E { field a: Int; invariant $a + 1i; }")


def test_events_outside_api_requires():
    src = corpus.source("payments").replace("return fail(", "assert $events.contains(Approve{|amt=0.0<USD>|});\n    return fail(")
    with pytest.raises(TypeCheckError) as exc:
        check_source(src)
    assert "bad-special" in codes(exc)


def test_unknown_identifier():
    with pytest.raises(TypeCheckError) as exc:
        check_source("function g(): Int { return zz; }")
    assert "unknown-name" in codes(exc)


def test_result_only_in_ensures():
    with pytest.raises(TypeCheckError):
        check_source("function g(x: Int): Int requires $result > 0i; { return x; }")


def test_recursion_rejected():
    with pytest.raises(TypeCheckError) as exc:
        check_source("function g(x: Int): Int { return h(x); }\nfunction h(x: Int): Int { return g(x); }")
    assert "recursion" in codes(exc)


def test_missing_return():
    with pytest.raises(TypeCheckError) as exc:
        check_source("function g(x: Int): Int { if (x < 0i) { return x; } }")
    assert "missing-return" in codes(exc)


def test_option_narrowing_after_exit():
    tm = corpus.load("payments")
    call = tm.functions["splitBill"].body[-1].expr
    assert call.args[0].narrowed and call.args[0].ty == A.TypeRef("USD")


def test_option_used_without_narrowing():
    src = corpus.source("payments").replace("return fail(\"Could not get amount from message.\");", "let z = 1i;")
    with pytest.raises(TypeCheckError):
        check_source(src)


def test_pure_function_cannot_call_api():
    src = corpus.source("payments") + "\nfunction f(a: Account): Int { api transfer(env{...}, 1.0<USD>, a, a); return 1i; }\n"
    with pytest.raises(TypeCheckError) as exc:
        check_source(src)
    assert "impure" in codes(exc)


def test_permission_slot_must_resolve():
    src = corpus.source("payments").replace("${payer.account}", "${payer.iban}")
    with pytest.raises(TypeCheckError) as exc:
        check_source(src)
    assert "bad-permission" in codes(exc)


def test_alias_literal_checked_against_pattern():
    with pytest.raises(TypeCheckError) as exc:
        check_source(corpus.source("order") + "function f(): OrderId { return '53A'<OrderId>; }")
    assert "constraint" in codes(exc)


def test_holes_get_scope_and_ids():
    tm = corpus.load("holes")
    h = tm.holes["sign@4:9"]
    assert h.ty == A.INT and ("x", A.INT) in h.scope and ("y", A.INT) in h.scope
    assert tm.holes["_absbody"].ty == A.INT


def test_sensitivity_marks():
    tm = corpus.load("order")
    assert tm.is_sensitive(A.TypeRef("TIN"))
    assert tm.contains_sensitive(A.TypeRef("Order"))
    assert not tm.contains_sensitive(A.TypeRef("OrderId"))


# -- span totality -------------------------------------------------------

_fragments = st.sampled_from([
    "function", "f", "(", ")", "{", "}", "x", ":", "Int", ";", "return", "1i", "1", "'a", "\"b\"",
    "let", "=", "+", "if", "else", "#", "?_", "$r", "entity", "type", "<", ">", "\n", " ", "/", "of",
])


@settings(max_examples=300, deadline=None)
@given(st.lists(_fragments, max_size=25))
def test_diagnostic_spans_lie_within_input(parts):
    src = " ".join(parts)
    try:
        check_source(src)
    except AisetteError as exc:
        for d in exc.diagnostics:
            assert 0 <= d.span.offset <= len(src)
            assert d.span.offset <= d.span.end <= len(src) + 1
            assert d.span.line >= 1 and d.span.col >= 1
