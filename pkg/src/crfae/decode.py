"""Best-parse decoders over a per-arc potential matrix.

``eisner_decode`` searches projective single-root trees with the classic
O(n^3) span dynamic program; ``cle_decode`` searches all single-root
arborescences with greedy selection plus cycle contraction. Both take the
(n+1) x n potential matrix convention of the model module (row = head
position, column j-1 = child j) and return the head array together with
the summed potential of its arcs.

Tie-breaking is structural and deterministic: candidate splits, heads and
root children are scanned in increasing index order and only strictly
better scores replace the incumbent, so reruns reproduce the same tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NEG_INF = float("-inf")


class DecodeError(ValueError):
    """Empty input or an internal consistency failure."""


@dataclass(frozen=True)
class ParseTree:
    """Head index per token; heads[j-1] is the head position of token j."""

    heads: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.heads)


def is_projective(heads: Sequence[int]) -> bool:
    """No two arcs cross when drawn over positions 0..n."""
    arcs = [(min(h, j), max(h, j)) for j, h in enumerate(heads, start=1)]
    for a in range(len(arcs)):
        la, ra = arcs[a]
        for b in range(a + 1, len(arcs)):
            lb, rb = arcs[b]
            if la < lb < ra < rb or lb < la < rb < ra:
                return False
    return True


def check_tree(heads: Sequence[int], projective: bool = False) -> None:
    """Independent validity checker: single root, acyclic (head-chasing),
    and optionally projective (crossing-arc scan). Raises on violation."""
    n = len(heads)
    if n == 0:
        raise DecodeError("empty head array")
    roots = [j for j, h in enumerate(heads, start=1) if h == 0]
    if len(roots) != 1:
        raise DecodeError(f"expected exactly one root child, found {len(roots)}")
    for j, h in enumerate(heads, start=1):
        if not (0 <= h <= n):
            raise DecodeError(f"head {h} of token {j} out of range [0..{n}]")
        if h == j:
            raise DecodeError(f"token {j} is its own head")
    for j in range(1, n + 1):
        seen = set()
        v = j
        while v != 0:
            if v in seen:
                raise DecodeError(f"cycle through token {j}")
            seen.add(v)
            v = heads[v - 1]
    if projective and not is_projective(heads):
        raise DecodeError("tree is not projective")


def tree_score(pot: np.ndarray, heads: Sequence[int]) -> float:
    """Sum of arc potentials of the tree."""
    return float(sum(pot[h, j - 1] for j, h in enumerate(heads, start=1)))


def _require_sentence(pot: np.ndarray) -> int:
    pot = np.asarray(pot)
    if pot.ndim != 2 or pot.shape[0] != pot.shape[1] + 1 or pot.shape[1] < 1:
        raise DecodeError(f"potential matrix must be (n+1) x n with n >= 1, got {pot.shape}")
    return pot.shape[1]


def eisner_decode(pot: np.ndarray) -> tuple[ParseTree, float]:
    """Maximum-potential projective single-root tree.

    Span items: inc_r/inc_l hold the best incomplete span with a right/left
    arc over its endpoints, com_r/com_l the best complete span headed at
    the left/right endpoint. Position 0 is the root; its incomplete item
    is restricted to the split r=0 so the root takes exactly one child.
    """
    n = _require_sentence(pot)
    m = n + 1
    inc_r = np.full((m, m), NEG_INF)
    inc_l = np.full((m, m), NEG_INF)
    com_r = np.full((m, m), NEG_INF)
    com_l = np.full((m, m), NEG_INF)
    np.fill_diagonal(com_r, 0.0)
    np.fill_diagonal(com_l, 0.0)
    b_inc = np.zeros((m, m), dtype=int)
    b_com_r = np.zeros((m, m), dtype=int)
    b_com_l = np.zeros((m, m), dtype=int)

    for width in range(1, m):
        for i in range(0, m - width):
            j = i + width
            if i == 0:
                inc_r[0, j] = com_l[1, j] + pot[0, j - 1]
                b_inc[0, j] = 0
            else:
                span = com_r[i, i:j] + com_l[i + 1 : j + 1, j]
                r = int(np.argmax(span))
                inc_r[i, j] = span[r] + pot[i, j - 1]
                inc_l[i, j] = span[r] + pot[j, i - 1]
                b_inc[i, j] = i + r
            cand = inc_r[i, i + 1 : j + 1] + com_r[i + 1 : j + 1, j]
            r = int(np.argmax(cand))
            com_r[i, j] = cand[r]
            b_com_r[i, j] = i + 1 + r
            if i >= 1:
                cand = com_l[i, i:j] + inc_l[i:j, j]
                r = int(np.argmax(cand))
                com_l[i, j] = cand[r]
                b_com_l[i, j] = i + r

    if not np.isfinite(com_r[0, n]):
        raise DecodeError("no projective tree with finite potential")

    heads = [0] * m

    def bt_com_r(i: int, j: int) -> None:
        if i == j:
            return
        r = b_com_r[i, j]
        bt_inc_r(i, r)
        bt_com_r(r, j)

    def bt_com_l(i: int, j: int) -> None:
        if i == j:
            return
        r = b_com_l[i, j]
        bt_com_l(i, r)
        bt_inc_l(r, j)

    def bt_inc_r(i: int, j: int) -> None:
        heads[j] = i
        if i == 0:
            bt_com_l(1, j)
            return
        r = b_inc[i, j]
        bt_com_r(i, r)
        bt_com_l(r + 1, j)

    def bt_inc_l(i: int, j: int) -> None:
        heads[i] = j
        r = b_inc[i, j]
        bt_com_r(i, r)
        bt_com_l(r + 1, j)

    bt_com_r(0, n)
    tree = ParseTree(heads=tuple(int(h) for h in heads[1:]))
    check_tree(tree.heads, projective=True)
    score = tree_score(pot, tree.heads)
    if abs(score - float(com_r[0, n])) > 1e-6:
        raise DecodeError(
            f"chart score {com_r[0, n]} disagrees with arc sum {score}"
        )
    return tree, score


def _greedy_heads(scores: np.ndarray) -> np.ndarray:
    m = scores.shape[0]
    heads = np.zeros(m, dtype=int)
    for c in range(1, m):
        heads[c] = int(np.argmax(scores[:, c]))
    return heads


def _find_cycle(heads: np.ndarray) -> list[int] | None:
    m = len(heads)
    color = [0] * m  # 0 unseen, 1 on current path, 2 finished
    color[0] = 2
    for start in range(1, m):
        if color[start]:
            continue
        path = []
        v = start
        while color[v] == 0:
            color[v] = 1
            path.append(v)
            v = int(heads[v])
        if color[v] == 1:
            return path[path.index(v):]
        for u in path:
            color[u] = 2
    return None


def _max_arborescence(scores: np.ndarray) -> np.ndarray:
    """Maximum spanning arborescence rooted at node 0 by greedy selection
    and recursive cycle contraction. ``scores[h, c]`` is the arc weight;
    column 0 and the diagonal must be -inf."""
    heads = _greedy_heads(scores)
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads
    m = scores.shape[0]
    in_cycle = np.zeros(m, dtype=bool)
    in_cycle[cycle] = True
    noncycle = [v for v in range(m) if not in_cycle[v]]
    cycle_weight = float(sum(scores[heads[v], v] for v in cycle))

    k = len(noncycle)
    contracted = np.full((k + 1, k + 1), NEG_INF)
    for a, va in enumerate(noncycle):
        for b, vb in enumerate(noncycle):
            if a != b:
                contracted[a, b] = scores[va, vb]

    # Best cycle-internal head for each outside dependent.
    out_src = np.zeros(m, dtype=int)
    for b, vb in enumerate(noncycle):
        if vb == 0:
            continue
        col = scores[cycle, vb]
        best = int(np.argmax(col))
        contracted[k, b] = col[best]
        out_src[vb] = cycle[best]

    # Best entry point into the cycle for each outside head: swapping the
    # cycle arc into node c for an external arc changes the total by
    # scores[h, c] - scores[cycle_head(c), c].
    entry_for = np.zeros(k, dtype=int)
    for a, va in enumerate(noncycle):
        gains = np.array(
            [
                scores[va, vc] - scores[heads[vc], vc]
                if np.isfinite(scores[va, vc])
                else NEG_INF
                for vc in cycle
            ]
        )
        best = int(np.argmax(gains))
        contracted[a, k] = gains[best] + cycle_weight
        entry_for[a] = cycle[best]

    sub = _max_arborescence(contracted)

    result = np.zeros(m, dtype=int)
    for vc in cycle:
        result[vc] = heads[vc]
    for b, vb in enumerate(noncycle):
        if vb == 0:
            continue
        h = int(sub[b])
        result[vb] = noncycle[h] if h < k else out_src[vb]
    head_of_cycle = int(sub[k])
    result[entry_for[head_of_cycle]] = noncycle[head_of_cycle]
    return result


def cle_decode(pot: np.ndarray) -> tuple[ParseTree, float]:
    """Maximum-potential single-root arborescence.

    The single-root constraint is enforced by trying each candidate root
    child in turn with all other root arcs masked; the contraction
    algorithm itself permits any number of root arcs.
    """
    n = _require_sentence(pot)
    m = n + 1
    base = np.full((m, m), NEG_INF)
    base[:, 1:] = np.asarray(pot)
    np.fill_diagonal(base, NEG_INF)

    best_heads: np.ndarray | None = None
    best_score = NEG_INF
    for root_child in range(1, m):
        scores = base.copy()
        scores[0, :] = NEG_INF
        scores[0, root_child] = pot[0, root_child - 1]
        heads = _max_arborescence(scores)
        score = float(sum(scores[heads[c], c] for c in range(1, m)))
        if best_heads is None or score > best_score:
            best_heads = heads
            best_score = score

    assert best_heads is not None
    tree = ParseTree(heads=tuple(int(h) for h in best_heads[1:]))
    check_tree(tree.heads, projective=False)
    return tree, tree_score(pot, tree.heads)


def parse_sentence(
    sent,
    wts,
    dec,
    prior,
    alpha: float,
    idx,
    vocab,
    decoder: str = "eisner",
    tag_map=None,
) -> tuple[ParseTree, float]:
    """Best parse of one sentence under the full per-arc potential."""
    from .model import potential_matrix

    if decoder not in ("eisner", "cle"):
        raise DecodeError(f"unknown decoder {decoder!r}")
    pot = potential_matrix(
        sent, wts, dec, prior, alpha, include="full", idx=idx, vocab=vocab, tag_map=tag_map
    )
    return eisner_decode(pot) if decoder == "eisner" else cle_decode(pot)


def parse_treebank(
    tb,
    wts,
    dec,
    prior,
    alpha: float,
    idx,
    decoder: str = "eisner",
    tag_map=None,
) -> list[ParseTree]:
    """Best parse of every sentence; sentence order is preserved."""
    return [
        parse_sentence(
            sent, wts, dec, prior, alpha, idx, tb.vocab, decoder=decoder, tag_map=tag_map
        )[0]
        for sent in tb.sentences
    ]
