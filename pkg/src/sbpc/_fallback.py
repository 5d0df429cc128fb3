"""Pure-Python branch-and-bound search (reference for the compiled kernel).

Visit order, pruning rules, node counting and floating-point operation order
match ``_kernel.pyx`` exactly; the two must stay in lockstep.
"""
from __future__ import annotations

import math


def bnb_search(spec):
    """Return ``(best_objective, best_index_sequence | None, nodes_explored)``."""
    model = spec.model
    step = model.step_scalar
    cost_fn = model.cost_scalar
    viol_fn = model.violation_scalar
    cruise_fn = getattr(model, "cruise_scalar", None)
    actions = [float(a) for a in spec.actions]
    is_cruise = [math.isnan(a) for a in actions]
    lengths = [int(n) for n in spec.lengths]
    nblk = len(lengths)
    nact = len(actions)
    mode = spec.mode
    gamma_limit = spec.gamma_limit
    omega = spec.omega
    center = [float(c) for c in spec.center]
    halfw = [float(h) for h in spec.halfw]
    weights = [float(w) for w in spec.weights]

    state = {
        "best": spec.inc_obj if spec.inc_seq is not None else math.inf,
        "best_seq": list(spec.inc_seq) if spec.inc_seq is not None else None,
        "nodes": 0,
    }
    cur = [0] * nblk

    def delta(y1, y2):
        d = 0.0
        for xi, c, h, w in ((y1, center[0], halfw[0], weights[0]), (y2, center[1], halfw[1], weights[1])):
            e = abs(xi - c) - h
            if e > 0.0:
                v = w * e
                if v > d:
                    d = v
        return d

    def prefix_cmp(depth):
        bs = state["best_seq"]
        for i in range(depth):
            if cur[i] != bs[i]:
                return -1 if cur[i] < bs[i] else 1
        return 0

    def dfs(depth, x1, x2, partial):
        for a in range(nact):
            bs = state["best_seq"]
            has_best = bs is not None
            ccmp = 0
            if has_best:
                ccmp = prefix_cmp(depth)
                if ccmp == 0:
                    ccmp = -1 if a < bs[depth] else (1 if a > bs[depth] else 0)
                lb = partial if mode != 1 else 0.0
                best = state["best"]
                if lb > best or (lb == best and ccmp > 0):
                    continue
            state["nodes"] += 1
            y1, y2, cost = x1, x2, partial
            ok = True
            for _ in range(lengths[depth]):
                if is_cruise[a]:
                    if not y2 > 0.0:
                        ok = False
                        break
                    u = cruise_fn(y1, y2)
                else:
                    u = actions[a]
                cost += cost_fn(y1, y2, u)
                y1, y2 = step(y1, y2, u)
                if viol_fn(y1, y2) > 0.0:
                    ok = False
                    break
            if not ok:
                continue
            if has_best:
                lb = cost if mode != 1 else 0.0
                best = state["best"]
                if lb > best or (lb == best and ccmp > 0):
                    continue
            cur[depth] = a
            if depth == nblk - 1:
                cost += cost_fn(y1, y2, 0.0)
                d = delta(y1, y2)
                if mode == 0:
                    if d > gamma_limit:
                        continue
                    obj = cost
                elif mode == 1:
                    obj = d
                else:
                    obj = cost + omega * d
                if not has_best or obj < state["best"] or (obj == state["best"] and ccmp < 0):
                    state["best"] = obj
                    state["best_seq"] = cur.copy()
            else:
                dfs(depth + 1, y1, y2, cost)

    x1, x2 = (float(v) for v in spec.x0)
    dfs(0, x1, x2, 0.0)
    seq = state["best_seq"]
    if seq is None:
        return math.inf, None, state["nodes"]
    return state["best"], tuple(seq), state["nodes"]
