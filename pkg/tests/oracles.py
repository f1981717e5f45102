"""Independent reference implementations the tests compare against."""

import random

ALPHABET = "abcd"


# A pattern tree is one of:
#   ("chr", c)  ("any",)  ("cls", chars, negated)  ("cat", a, b)  ("alt", a, b)
#   ("rep", node, lo, hi)   where hi is None for unbounded


def render(node) -> str:
    """Pattern text for a tree, with parentheses around every compound piece."""
    kind = node[0]
    if kind == "chr":
        return node[1]
    if kind == "any":
        return "."
    if kind == "cls":
        return "[" + ("^" if node[2] else "") + node[1] + "]"
    if kind == "cat":
        return render(node[1]) + render(node[2])
    if kind == "alt":
        return "(" + render(node[1]) + "|" + render(node[2]) + ")"
    inner = "(" + render(node[1]) + ")"
    lo, hi = node[2], node[3]
    if (lo, hi) == (0, None):
        return inner + "*"
    if (lo, hi) == (1, None):
        return inner + "+"
    if (lo, hi) == (0, 1):
        return inner + "?"
    if hi is None:
        return inner + "{%d,}" % lo
    if lo == hi:
        return inner + "{%d}" % lo
    return inner + "{%d,%d}" % (lo, hi)


def random_tree(rng: random.Random, depth: int = 3):
    if depth == 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.7:
            return ("chr", rng.choice(ALPHABET))
        if r < 0.8:
            return ("any",)
        chars = "".join(sorted(rng.sample(ALPHABET, rng.randint(1, 3))))
        return ("cls", chars, rng.random() < 0.3)
    kind = rng.choice(["cat", "cat", "alt", "rep"])
    if kind == "rep":
        lo = rng.randint(0, 2)
        hi = rng.choice([None, lo, lo + 1, lo + 2])
        return ("rep", random_tree(rng, depth - 1), lo, hi)
    return (kind, random_tree(rng, depth - 1), random_tree(rng, depth - 1))


def backtrack(node, text: str, i: int, k) -> bool:
    """Continuation-passing backtracking matcher: try every way ``node`` can match at ``i``."""
    kind = node[0]
    if kind == "chr":
        return i < len(text) and text[i] == node[1] and k(i + 1)
    if kind == "any":
        return i < len(text) and k(i + 1)
    if kind == "cls":
        return i < len(text) and ((text[i] in node[1]) != node[2]) and k(i + 1)
    if kind == "cat":
        return backtrack(node[1], text, i, lambda j: backtrack(node[2], text, j, k))
    if kind == "alt":
        return backtrack(node[1], text, i, k) or backtrack(node[2], text, i, k)
    _, sub, lo, hi = node

    def go(count, j):
        if count >= lo and k(j):
            return True
        if hi is not None and count >= hi:
            return False
        # an iteration that consumes nothing cannot lead anywhere new
        return backtrack(sub, text, j, lambda m: m > j and go(count + 1, m)) or (
            count < lo and backtrack(sub, text, j, lambda m: m == j and go(count + 1, m))
        )

    return go(0, i)


def naive_fullmatch(node, text: str) -> bool:
    return backtrack(node, text, 0, lambda j: j == len(text))


def random_input(rng: random.Random, max_len: int = 32) -> str:
    return "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, max_len)))


def sample(node, rng: random.Random) -> str:
    """A string in the tree's language, so oracle comparisons see positive cases too."""
    kind = node[0]
    if kind == "chr":
        return node[1]
    if kind == "any":
        return rng.choice(ALPHABET)
    if kind == "cls":
        pool = [c for c in ALPHABET if (c in node[1]) != node[2]]
        return rng.choice(pool) if pool else ""
    if kind == "cat":
        return sample(node[1], rng) + sample(node[2], rng)
    if kind == "alt":
        return sample(rng.choice(node[1:]), rng)
    _, sub, lo, hi = node
    return "".join(sample(sub, rng) for _ in range(rng.randint(lo, lo + 2 if hi is None else hi)))


def random_pair(rng: random.Random):
    """(tree, input): half sampled from the pattern (occasionally mutated), half random."""
    tree = random_tree(rng)
    if rng.random() < 0.5:
        text = sample(tree, rng)[:32]
        if text and rng.random() < 0.3:
            pos = rng.randrange(len(text))
            text = text[:pos] + rng.choice(ALPHABET) + text[pos + 1:]
        return tree, text
    return tree, random_input(rng)
