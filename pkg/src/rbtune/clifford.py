"""The single-qubit Clifford group <H, S> as an explicit multiplication table.

Generator index 0 is the target gate S, index 1 is H. A word lists generator
indices in application order: ``(1, 0)`` applies H first and then S, so its
unitary is ``S @ H``.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

S_GATE = np.diag([1.0, 1.0j])
H_GATE = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
GENERATORS = (S_GATE, H_GATE)
GENERATOR_NAMES = ("S", "H")
TARGET = 0

# Search expands H before S, so among equally ranked words the one with H
# earliest wins.
_EXPANSION_ORDER = (1, 0)
_RANK = {g: r for r, g in enumerate(_EXPANSION_ORDER)}

ORDERINGS = ("shortest", "min-target")


def canonical_phase(U: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Remove the global phase by making the first nonzero entry positive real."""
    flat = U.reshape(-1)
    k = int(np.flatnonzero(np.abs(flat) > tol)[0])
    return U * (np.conj(flat[k]) / abs(flat[k]))


def word_unitary(word, generators=GENERATORS) -> np.ndarray:
    U = np.eye(generators[0].shape[0], dtype=complex)
    for g in word:
        U = generators[g] @ U
    return U


def word_to_string(word) -> str:
    """Human-readable form in application order, e.g. (1, 0, 1) -> 'HSH'."""
    return "".join(GENERATOR_NAMES[g] for g in word) or "I"


def equal_up_to_phase(U: np.ndarray, V: np.ndarray, tol: float = 1e-9) -> bool:
    d = U.shape[0]
    return abs(abs(np.trace(U.conj().T @ V)) - d) <= tol


@dataclass(frozen=True, eq=False)
class GroupElement:
    id: int
    unitary: np.ndarray
    word: tuple
    target_count: int

    @property
    def name(self) -> str:
        return word_to_string(self.word)


@dataclass(frozen=True, eq=False)
class GroupTable:
    """Immutable multiplication table.

    ``product[i, j]`` is the id of ``U_i @ U_j`` (apply j, then i).
    """

    elements: tuple
    product: np.ndarray
    inverse: np.ndarray
    partition_sizes: tuple
    ordering: str = "shortest"

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def identity(self) -> int:
        return 0

    def index_of(self, U: np.ndarray) -> int:
        for el in self.elements:
            if equal_up_to_phase(el.unitary, U):
                return el.id
        raise KeyError("unitary is not an element of the group")

    def element_for_word(self, word) -> GroupElement:
        return self.elements[self.index_of(word_unitary(word))]

    def word_lengths(self) -> np.ndarray:
        return np.array([len(el.word) for el in self.elements])

    def to_dict(self) -> dict:
        return {
            "ordering": self.ordering,
            "order": len(self),
            "generators": list(GENERATOR_NAMES),
            "target": GENERATOR_NAMES[TARGET],
            "word_convention": "application order",
            "n_bar": str(n_bar(self)),
            "partition_sizes": list(self.partition_sizes),
            "elements": [
                {
                    "id": el.id,
                    "word": list(el.word),
                    "name": el.name,
                    "target_count": el.target_count,
                    "inverse": int(self.inverse[el.id]),
                }
                for el in self.elements
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _word_key(word, ordering: str):
    lex = tuple(_RANK[g] for g in word)
    if ordering == "shortest":
        return (len(word), lex)
    if ordering == "min-target":
        return (word.count(TARGET), len(word), lex)
    raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")


def _search_words(ordering: str):
    """Best-first search over words, keeping the first word reaching each element.

    Both orderings are compatible with appending generators (the key of
    ``w + (g,)`` compares like the key of ``w``), so only canonical words need
    to be expanded.
    """
    unitaries: list = []
    words: list = []
    heap = [(_word_key((), ordering), ())]
    while heap:
        _, word = heapq.heappop(heap)
        U = canonical_phase(word_unitary(word))
        if any(np.allclose(U, V, atol=1e-9) for V in unitaries):
            continue
        unitaries.append(U)
        words.append(word)
        for g in _EXPANSION_ORDER:
            child = word + (g,)
            heapq.heappush(heap, (_word_key(child, ordering), child))
    return unitaries, words


def enumerate_group(ordering: str = "shortest") -> GroupTable:
    """Enumerate <H, S> modulo global phase with canonical generator words.

    ``ordering="shortest"`` picks, for each element, the shortest word (ties
    broken lexicographically with H before S); its partition by S-count is
    (2, 4, 6, 8, 4). ``ordering="min-target"`` minimises the number of S first
    and gives the tighter partition (2, 4, 8, 8, 2).
    """
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")
    unitaries, words = _search_words(ordering)
    n = len(unitaries)
    elements = tuple(
        GroupElement(id=i, unitary=U, word=w, target_count=w.count(TARGET))
        for i, (U, w) in enumerate(zip(unitaries, words))
    )

    def lookup(V):
        V = canonical_phase(V)
        for j, U in enumerate(unitaries):
            if np.allclose(U, V, atol=1e-9):
                return j
        raise RuntimeError("group is not closed under multiplication")

    product = np.empty((n, n), dtype=int)
    for i, j in itertools.product(range(n), repeat=2):
        product[i, j] = lookup(unitaries[i] @ unitaries[j])
    inverse = np.array([int(np.flatnonzero(product[i] == 0)[0]) for i in range(n)])
    counts = [el.target_count for el in elements]
    sizes = tuple(counts.count(k) for k in range(max(counts) + 1))
    product.setflags(write=False)
    inverse.setflags(write=False)
    return GroupTable(elements, product, inverse, sizes, ordering)


@lru_cache(maxsize=None)
def clifford_group(ordering: str = "shortest") -> GroupTable:
    """Shared, cached table."""
    return enumerate_group(ordering)


def n_bar(table: GroupTable) -> Fraction:
    """Mean number of target gates per canonical word, as an exact rational."""
    return Fraction(sum(el.target_count for el in table.elements), len(table))


def invert(table: GroupTable, id: int) -> int:
    if not 0 <= id < len(table):
        raise IndexError(f"element id {id} out of range [0, {len(table)})")
    return int(table.inverse[id])


def compose_ids(table: GroupTable, ids) -> int:
    """Id of the product of elements applied in the given order."""
    acc = table.identity
    for i in ids:
        acc = int(table.product[i, acc])
    return acc


def min_target_counts(table: GroupTable, max_length: int = 10) -> list:
    """Exhaustive minimum S-count per element over all words up to ``max_length``."""
    best = [None] * len(table)
    for length in range(max_length + 1):
        for word in itertools.product((0, 1), repeat=length):
            i = table.index_of(word_unitary(word))
            c = word.count(TARGET)
            if best[i] is None or c < best[i]:
                best[i] = c
    return best
