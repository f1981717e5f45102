import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aisette.corpus import load
from aisette.runtime.interp import Interpreter
from aisette.runtime.values import AliasV, EntityV, Fault, StrV
from aisette.sandbox import GlobError, SandboxPolicy, glob_to_regex, globs_overlap, interpolate, literal_prefix, sandbox_check

FILES = SandboxPolicy(("file:///tmp/app_name/**",))


def account(routing, number):
    return EntityV("Account", (("routing", AliasV("RoutingNumber", StrV(routing, True), False)),
                               ("account", AliasV("AccountNumber", StrV(number, True), True))))


def test_recursive_glob_allows_nested_paths():
    assert sandbox_check(FILES, "file:///tmp/app_name/a.txt") == "allow"
    assert sandbox_check(FILES, "file:///tmp/app_name/x/y/z.log") == "allow"
    assert sandbox_check(FILES, "file:///home/user/.ssh/id_rsa") == "deny"
    assert sandbox_check(FILES, "file:///tmp/app_name_other/a") == "deny"


def test_single_star_stays_in_segment():
    p = SandboxPolicy(("file:///tmp/*.txt",))
    assert p.check("file:///tmp/a.txt")
    assert not p.check("file:///tmp/d/a.txt")


def test_escaped_star_is_literal():
    p = SandboxPolicy((r"file:///tmp/\*",))
    assert p.check("file:///tmp/*")
    assert not p.check("file:///tmp/a")


def test_glob_needs_scheme():
    with pytest.raises(GlobError):
        glob_to_regex("/tmp/**")


@settings(max_examples=100)
@given(st.text(min_size=0, max_size=40))
def test_empty_policy_denies_everything(uri):
    assert sandbox_check(SandboxPolicy(()), uri) == "deny"


def test_denial_message_names_policy():
    with pytest.raises(Fault) as exc:
        FILES.require("file:///home/x")
    assert exc.value.kind == "permission-denied"
    assert "file:///tmp/app_name/**" in exc.value.message


def test_interpolation_masks_sensitive_slots():
    values = {"p.routing": ("111000025", False), "p.account": ("22233344", True)}
    glob, shown = interpolate("account:${p.routing}/${p.account}", values.__getitem__)
    assert glob == "account:111000025/22233344"
    assert shown == "account:111000025/********"


def test_interpolated_stars_match_literally():
    glob, _ = interpolate("file:///tmp/${x}", lambda _: ("*", False))
    p = SandboxPolicy((glob,))
    assert p.check("file:///tmp/*")
    assert not p.check("file:///tmp/anything")


def test_transfer_policy_allows_only_payer():
    tm = load("payments")
    interp = Interpreter(tm)
    payer, payee = account("111000025", "22233344"), account("021000021", "99998888")
    policy = interp.permissions(tm.apis["transfer"], {"payer": payer, "payee": payee})
    assert policy.check("account:111000025/22233344")
    assert not policy.check("account:021000021/99998888")
    assert not policy.check("account:111000025/22233345")
    assert "22233344" not in policy.summary()


@pytest.mark.parametrize("a,b,expected", [
    ("file:///tmp/**", "file:///tmp/a/*.txt", True),
    ("file:///tmp/*", "file:///home/*", False),
    ("file:///tmp/*", "file:///tmp/a/b", False),
    ("account:*", "account:1/2", False),
    ("account:**", "account:1/2", True),
])
def test_glob_overlap(a, b, expected):
    assert globs_overlap(a, b) is expected
    assert globs_overlap(b, a) is expected


SEG = st.text(alphabet="ab/", max_size=6)
GLOB = st.lists(st.sampled_from(["a", "b", "/", "*", "**"]), max_size=5).map("".join)


@settings(max_examples=300)
@given(GLOB, GLOB, SEG)
def test_overlap_is_sound(a, b, s):
    ra, rb = glob_to_regex("x:" + a), glob_to_regex("x:" + b)
    if ra.fullmatch("x:" + s) and rb.fullmatch("x:" + s):
        assert globs_overlap("x:" + a, "x:" + b)


def test_literal_prefix():
    assert literal_prefix("file:///tmp/app/**") == len("file:///tmp/app/")
    assert literal_prefix("file:///tmp") == len("file:///tmp")


def test_glob_regex_is_anchored_by_fullmatch():
    assert isinstance(glob_to_regex("file:///a"), re.Pattern)
    assert not FILES.check("xfile:///tmp/app_name/a")
