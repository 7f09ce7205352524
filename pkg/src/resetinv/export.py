"""Solution files: ``solution.json`` and the plot-ready ``policy.csv`` table."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .model import NotStronglyConvexError
from .structure import extract_thresholds, gamma_bounds

CSV_HEADER = ("t", "x", "action", "order_up_to")


def fmt(v: float) -> str:
    return f"{v:.9g}"


def certificate_dict(spec) -> dict:
    try:
        return gamma_bounds(spec).to_dict()
    except NotStronglyConvexError as exc:
        return {"certified": False, "gamma": spec.gamma, "reason": f"uncertifiable: {exc}"}


def solution_dict(spec, solution, n: int) -> dict:
    sw = solution.sweep
    policy = extract_thresholds(solution, spec)
    return {
        "problem": spec.kind,
        "k": spec.k,
        "gamma": spec.gamma,
        "grid": {"c_max": sw.grid.c_max, "n": sw.grid.n},
        "v_star": solution.v_star,
        "upsilon": solution.upsilon,
        "epsilon": solution.epsilon,
        "v_upper0": solution.v_upper0,
        "iterations": solution.iterations,
        "bracket_history": [list(b) for b in solution.bracket_history],
        "phi": solution.phi,
        "structure_certified": policy.certified,
        "violations": [{"t": t, "problem": msg} for t, msg in policy.violations],
        "thresholds": [policy.thresholds(t) for t in range(spec.k)],
        "gamma_certificate": certificate_dict(spec),
        "V": sw.V.tolist(),
        "reset_action": sw.reset_action.astype(int).tolist(),
        "order_target": sw.order_target.tolist(),
    }


def dumps_json(doc: dict) -> str:
    return json.dumps(doc, indent=1) + "\n"


def policy_rows(doc: dict):
    """Yield CSV rows for epochs ``t = 1..k`` (the reset-state epoch t = 0 lives in the JSON)."""
    n, c_max = doc["grid"]["n"], doc["grid"]["c_max"]
    x = np.linspace(0.0, c_max, n)
    reset = doc["reset_action"]
    target = doc["order_target"]
    for t in range(1, doc["k"] + 1):
        for i in range(n):
            if reset[t][i]:
                yield (str(t), fmt(x[i]), "reset", "")
            elif target[t][i] > x[i]:
                yield (str(t), fmt(x[i]), "order", fmt(target[t][i]))
            else:
                yield (str(t), fmt(x[i]), "hold", "")


def policy_csv(doc: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(policy_rows(doc))
    return buf.getvalue()
