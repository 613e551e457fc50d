"""Finite words over an alphabet, stored as plain tuples."""
from __future__ import annotations

from itertools import product
from typing import Iterable, Iterator, Sequence

Word = tuple

EMPTY: Word = ()


def word(digits: Iterable) -> Word:
    return tuple(digits)


def concat(a: Word, b: Word) -> Word:
    return tuple(a) + tuple(b)


def is_prefix(a: Word, b: Word) -> bool:
    """True when ``a`` is a (not necessarily proper) prefix of ``b``."""
    return len(a) <= len(b) and tuple(b[: len(a)]) == tuple(a)


def meet(a: Word, b: Word) -> Word:
    """Maximal common prefix ``a ∧ b`` (empty word if none)."""
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return tuple(a[:n])


def power(a: Word, n: int) -> Word:
    if n < 0:
        raise ValueError("negative power")
    return tuple(a) * n


def shift(a: Word, n: int = 1) -> Word:
    return tuple(a[n:])


def words_of_length(alphabet: Sequence, n: int) -> Iterator[Word]:
    """All words of length n in lexicographic order of ``alphabet``."""
    return product(alphabet, repeat=n)


def compatible_words(subsets: Sequence[Sequence], prefix: Sequence) -> Iterator[Word]:
    """Words in ∏_j A_{b_j} for the selector digits ``prefix``."""
    return product(*(subsets[b] for b in prefix))
