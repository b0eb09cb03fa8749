"""Deterministic strategy and encoding enumeration.

Enumeration order is lexicographic over response tables (input 0 is the most
significant digit). Certificates record this order, so it is part of the
file-format contract and must not change.
"""

import numpy as np

from ..errors import ScenarioTooLarge

MAX_PRODUCT_STRATEGIES = 10**6
MAX_RESPONSE_FUNCTIONS = 10**5


def response_tables(n_inputs: int, n_outcomes: int, cap: int | None = None) -> np.ndarray:
    """All deterministic response tables, shape (n_outcomes**n_inputs, n_inputs).

    Row lam is the lam-th table in lexicographic order: entry [lam, x] is the
    response to input x.
    """
    count = n_outcomes**n_inputs
    if cap is not None and count > cap:
        raise ScenarioTooLarge(
            f"{count} deterministic strategies exceed the cap of {cap}"
        )
    lam = np.arange(count)
    tables = np.empty((count, n_inputs), dtype=np.int64)
    for x in range(n_inputs):
        tables[:, x] = (lam // n_outcomes ** (n_inputs - 1 - x)) % n_outcomes
    return tables


def canonical_encodings(n_inputs: int, n_messages: int, cap: int | None = None) -> np.ndarray:
    """Encodings x -> message, canonical under message relabeling.

    Two encodings related by a permutation of message labels simulate the
    same behaviors (responses absorb the relabeling), so only the
    first-occurrence canonical form of each class is kept: message 0 appears
    first, message 1 next, and so on. These are exactly the restricted-growth
    strings over n_inputs positions with fewer than n_messages distinct values.
    """
    rows: list[list[int]] = []

    def grow(prefix: list[int], used: int):
        if len(prefix) == n_inputs:
            rows.append(list(prefix))
            return
        limit = min(used + 1, n_messages)
        for m in range(limit):
            prefix.append(m)
            grow(prefix, max(used, m + 1))
            prefix.pop()

    grow([], 0)
    if cap is not None and len(rows) > cap:
        raise ScenarioTooLarge(f"{len(rows)} canonical encodings exceed the cap of {cap}")
    return np.array(rows, dtype=np.int64)


def all_encodings(n_inputs: int, n_messages: int, cap: int | None = None) -> np.ndarray:
    """Every encoding x -> message, without relabeling reduction."""
    return response_tables(n_inputs, n_messages, cap=cap)
