"""Bearer tokens carrying a caller's permission globs, signed with a shared HMAC secret.

Token text is ``<base64url JSON payload>.<hex HMAC-SHA256 of the payload part>``.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json


class TokenError(ValueError):
    pass


def make_token(secret: bytes | str, permissions) -> str:
    key = secret.encode() if isinstance(secret, str) else secret
    payload = base64.urlsafe_b64encode(json.dumps({"permissions": list(permissions)}).encode()).decode().rstrip("=")
    sig = hmac.new(key, payload.encode(), hashlib.sha256).hexdigest()
    return f"{payload}.{sig}"


def verify_token(secret: bytes | str, token: str) -> tuple[str, ...]:
    """Permission globs in a correctly signed token; anything else raises :class:`TokenError`."""
    key = secret.encode() if isinstance(secret, str) else secret
    payload, _, sig = token.partition(".")
    want = hmac.new(key, payload.encode(), hashlib.sha256).hexdigest()
    if not sig or not hmac.compare_digest(want, sig):
        raise TokenError("bad token signature")
    try:
        data = json.loads(base64.urlsafe_b64decode(payload + "=" * (-len(payload) % 4)))
        perms = data["permissions"]
    except (ValueError, KeyError, TypeError):
        raise TokenError("malformed token payload") from None
    if not isinstance(perms, list) or not all(isinstance(p, str) for p in perms):
        raise TokenError("token permissions must be a list of globs")
    return tuple(perms)
