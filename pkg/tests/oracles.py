"""Independent reference implementations used to freeze expected test values.

Everything here works on plain pair sets and dicts, on purpose: these oracles
must not share code (or bugs) with the package under test.
"""

from __future__ import annotations

import itertools


def closure_pairs(pairs, nodes):
    """Transitive closure of a pair set by plain Warshall iteration."""
    reach = {x: set() for x in nodes}
    for x, y in pairs:
        reach[x].add(y)
    for k in nodes:
        for i in nodes:
            if k in reach[i]:
                reach[i] |= reach[k]
    return {(x, y) for x in nodes for y in reach[x]}


def is_acyclic_pairs(pairs, nodes):
    """Three-color DFS, no relation machinery involved."""
    succ = {x: [] for x in nodes}
    for x, y in pairs:
        succ[x].append(y)
    color = {x: 0 for x in nodes}

    def visit(x):
        color[x] = 1
        for y in succ[x]:
            if color[y] == 1:
                return False
            if color[y] == 0 and not visit(y):
                return False
        color[x] = 2
        return True

    return all(color[x] != 0 or visit(x) for x in nodes)


def compose_pairs(r1, r2):
    by_src = {}
    for z, y in r2:
        by_src.setdefault(z, set()).add(y)
    return {(x, y) for x, z in r1 for y in by_src.get(z, ())}


def candidate_pairs(cand):
    """Pull the raw pair sets out of a Candidate without using its algebra."""
    n = len(cand.events)
    nodes = range(n)
    po = set(cand.po.pairs())
    rf = set(cand.rf.pairs())
    co = set(cand.co.pairs())
    loc = {e.id: e.action.loc for e in cand.events}
    thread = {e.id: e.thread for e in cand.events}
    writes = {e.id for e in cand.events if type(e.action).__name__ == "MemWrite"}
    reads = {e.id for e in cand.events if type(e.action).__name__ == "MemRead"}
    fr = set()
    for w0, r in rf:
        for w0_, w1 in co:
            if w0_ == w0:
                fr.add((r, w1))
    po_loc = {(x, y) for x, y in po if loc[x] == loc[y]}
    return {
        "n": n,
        "nodes": nodes,
        "po": po,
        "rf": rf,
        "co": co,
        "fr": fr,
        "po_loc": po_loc,
        "com": co | rf | fr,
        "loc": loc,
        "thread": thread,
        "writes": writes,
        "reads": reads,
    }


def sc_allowed(cand):
    """Validity on SC: acyclic(po u com)."""
    p = candidate_pairs(cand)
    return is_acyclic_pairs(p["po"] | p["com"], p["nodes"])


def tso_allowed(cand, mfence_pairs):
    """Validity on TSO: acyclic(ppo u co u rfe u fr u fences), ppo = po \\ WR,
    conjoined with the per-location coherence requirement it presupposes."""
    p = candidate_pairs(cand)
    ppo = {
        (x, y)
        for x, y in p["po"]
        if not (x in p["writes"] and y in p["reads"])
    }
    rfe = {(x, y) for x, y in p["rf"] if p["thread"][x] != p["thread"][y]}
    big = ppo | p["co"] | rfe | p["fr"] | set(mfence_pairs)
    uniproc = is_acyclic_pairs(p["po_loc"] | p["com"], p["nodes"])
    return uniproc and is_acyclic_pairs(big, p["nodes"])


def brute_fr(rf, co):
    """Definition of fr, written as the double loop."""
    return {(r, w1) for w0, r in rf for w0_, w1 in co if w0_ == w0}


def count_expected_candidates(writes_per_loc, reads_choices):
    """Closed-form candidate count: per-location write permutations times
    per-read same-location write counts."""
    total = 1
    for k in writes_per_loc:
        total *= _factorial(k)
    for c in reads_choices:
        total *= c
    return total


def _factorial(k):
    return 1 if k <= 1 else k * _factorial(k - 1)
