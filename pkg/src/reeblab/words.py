"""Words in free groups and in the genus-2 surface group.

Generators are lowercase letters; the inverse of a generator is the matching
uppercase letter, so ``"aB"`` means ``a * b^-1``.  Plain ``str`` is the working
representation; :class:`Word` wraps it for typed interfaces.

The surface group ``<a,b,c,d | [a,b][c,d]>`` satisfies the C'(1/7)
small-cancellation condition, so Dehn's algorithm decides the word problem.
Conjugacy is decided by reducing cyclic words with Dehn moves and then closing
under the length-preserving half-relator swaps.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import BudgetExceeded

SURFACE_RELATOR = "abABcdCD"


def inverse(w: str) -> str:
    return w[::-1].swapcase()


def free_reduce(w: str) -> str:
    out: list[str] = []
    for x in w:
        if out and out[-1] == x.swapcase():
            out.pop()
        else:
            out.append(x)
    return "".join(out)


def cyclic_reduce(w: str) -> str:
    w = free_reduce(w)
    i, j = 0, len(w) - 1
    while i < j and w[i] == w[j].swapcase():
        i += 1
        j -= 1
    return w[i : j + 1]


def is_reduced(w: str) -> bool:
    return all(x != y.swapcase() for x, y in zip(w, w[1:]))


def is_cyclically_reduced(w: str) -> bool:
    return is_reduced(w) and not (len(w) > 1 and w[0] == w[-1].swapcase())


def least_rotation(w: str) -> str:
    """Lexicographically least rotation (Booth's algorithm)."""
    n = len(w)
    if n < 2:
        return w
    s = w + w
    fail = [-1] * (2 * n)
    k = 0
    for j in range(1, 2 * n):
        c = s[j]
        i = fail[j - k - 1]
        while i != -1 and c != s[k + i + 1]:
            if c < s[k + i + 1]:
                k = j - i - 1
            i = fail[i]
        if i == -1 and c != s[k + i + 1]:
            if c < s[k + i + 1]:
                k = j
            fail[j - k] = -1
        else:
            fail[j - k] = i + 1
    return s[k : k + n]


def canonical_cyclic(w: str, unoriented: bool = True) -> str:
    """Canonical free-group conjugacy representative.

    With ``unoriented`` the word and its inverse are identified, matching the
    census convention that a closed geodesic is counted once.
    """
    w = cyclic_reduce(w)
    best = least_rotation(w)
    if unoriented:
        best = min(best, least_rotation(inverse(w)))
    return best


def primitive_root(w: str) -> tuple[str, int]:
    """Return ``(root, k)`` with ``w == root * k`` and ``k`` maximal."""
    n = len(w)
    if n == 0:
        return w, 1
    p = (w + w).find(w, 1)
    return w[:p], n // p


def is_proper_power(w: str) -> bool:
    return primitive_root(w)[1] > 1


def letters_of(w: str) -> set[str]:
    return {x.lower() for x in w}


@dataclass(frozen=True)
class Word:
    """Group word over lowercase generators with uppercase inverses."""

    letters: str = ""

    @property
    def reduced(self) -> bool:
        return is_reduced(self.letters)

    def reduce(self) -> Word:
        return Word(free_reduce(self.letters))

    def inverse(self) -> Word:
        return Word(inverse(self.letters))

    def __mul__(self, other: Word) -> Word:
        return Word(self.letters + other.letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return self.letters


def _relator_tables(relator: str):
    """Tables of relator pieces: long pieces shorten, half pieces swap."""
    conjugates = set()
    for r in (relator, inverse(relator)):
        for i in range(len(r)):
            conjugates.add(r[i:] + r[:i])
    n = len(relator)
    shorten: dict[str, str] = {}
    swap: dict[str, str] = {}
    for r in conjugates:
        for k in range(n // 2, n + 1):
            piece, rest = r[:k], r[k:]
            if 2 * k > n:
                shorten[piece] = inverse(rest)
            elif 2 * k == n:
                swap.setdefault(piece, set()).add(inverse(rest))
    return shorten, {k: sorted(v) for k, v in swap.items()}


class SurfaceGroup:
    """One-relator group with Dehn-algorithm word and conjugacy routines."""

    def __init__(self, relator: str = SURFACE_RELATOR, closure_budget: int = 20000):
        self.relator = relator
        self.generators = sorted(letters_of(relator))
        self.closure_budget = closure_budget
        self._shorten, self._swap = _relator_tables(relator)
        self._lengths = sorted({len(k) for k in self._shorten}, reverse=True)
        self._canon_cache: dict[tuple[str, bool], str] = {}

    def dehn_reduce(self, w: str) -> str:
        """Shortest-first Dehn reduction of a linear word."""
        w = free_reduce(w)
        changed = True
        while changed:
            changed = False
            for i in range(len(w)):
                for k in self._lengths:
                    piece = w[i : i + k]
                    if len(piece) == k and piece in self._shorten:
                        w = free_reduce(w[:i] + self._shorten[piece] + w[i + k :])
                        changed = True
                        break
                if changed:
                    break
        return w

    def is_trivial(self, w: str) -> bool:
        return self.dehn_reduce(w) == ""

    def equal(self, u: str, v: str) -> bool:
        return self.is_trivial(u + inverse(v))

    def cyclic_dehn_reduce(self, w: str) -> str:
        w = cyclic_reduce(self.dehn_reduce(w))
        changed = True
        while changed and w:
            changed = False
            n = len(w)
            for i in range(n):
                rot = w[i:] + w[:i]
                for k in self._lengths:
                    if k <= n and rot[:k] in self._shorten:
                        w = cyclic_reduce(self.dehn_reduce(self._shorten[rot[:k]] + rot[k:]))
                        changed = True
                        break
                if changed:
                    break
        return w

    def _swaps(self, w: str):
        n = len(w)
        half = len(self.relator) // 2
        if n < half:
            return
        for i in range(n):
            rot = w[i:] + w[:i]
            for repl in self._swap.get(rot[:half], ()):
                yield repl + rot[half:]

    def conjugacy_closure(self, w: str) -> set[str]:
        """All minimal-length cyclic words reachable by Dehn moves and half swaps.

        Words are stored as least rotations.
        """
        start = self.cyclic_dehn_reduce(w)
        while True:
            seen = {least_rotation(start)}
            queue = deque([start])
            shorter = None
            while queue and shorter is None:
                u = queue.popleft()
                for v in self._swaps(u):
                    v = cyclic_reduce(v)
                    if len(v) < len(start):
                        shorter = v
                        break
                    v2 = self.cyclic_dehn_reduce(v)
                    if len(v2) < len(start):
                        shorter = v2
                        break
                    key = least_rotation(v)
                    if key not in seen:
                        seen.add(key)
                        if len(seen) > self.closure_budget:
                            raise BudgetExceeded(f"conjugacy closure of {w!r} exceeds budget")
                        queue.append(v)
            if shorter is None:
                return seen
            start = self.cyclic_dehn_reduce(shorter)

    def canonical_class(self, w: str, unoriented: bool = False) -> str:
        key = (w, unoriented)
        hit = self._canon_cache.get(key)
        if hit is not None:
            return hit
        closure = self.conjugacy_closure(w)
        best = min(closure)
        if unoriented:
            best = min(best, min(least_rotation(inverse(u)) for u in closure))
        self._canon_cache[key] = best
        return best

    def conjugate_eq(self, u: str, v: str) -> bool:
        return self.canonical_class(u) == self.canonical_class(v)

    def handle_form(self, w: str, handle: str) -> str | None:
        """A minimal cyclic word for the class of ``w`` using only ``handle`` letters."""
        allowed = set(handle.lower())
        closure = self.conjugacy_closure(w)
        found = [u for u in closure if letters_of(u) <= allowed]
        return min(found) if found else None


def free_conjugate_eq(u: str, v: str) -> bool:
    return canonical_cyclic(u, unoriented=False) == canonical_cyclic(v, unoriented=False)


def conjugate_eq(w1: Word | str, w2: Word | str, group: SurfaceGroup | str = "free") -> bool:
    """Decide conjugacy in a free group (``group="free"``) or a surface group."""
    a, b = str(w1), str(w2)
    if isinstance(group, SurfaceGroup):
        return group.conjugate_eq(a, b)
    if group == "surface":
        return default_surface_group().conjugate_eq(a, b)
    return free_conjugate_eq(a, b)


_DEFAULT: SurfaceGroup | None = None


def default_surface_group() -> SurfaceGroup:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = SurfaceGroup()
    return _DEFAULT
