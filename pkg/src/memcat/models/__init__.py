"""Bundled models, loading, and per-test verdicts."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..cat import Empty, Let, Model, parse_cat, run_model
from ..executions import (
    enumerate_candidates,
    evaluate_final,
    observed_state,
    passes_uniproc,
)
from ..litmus import ProjectedTest

BUILTIN_MODELS = ("sc", "tso", "cpp-ra", "power", "power-as-arm", "arm", "arm-llh")

MODELS_DIR_VAR = "MEMCAT_MODELS_DIR"


def models_dir() -> Path:
    override = os.environ.get(MODELS_DIR_VAR)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent


def available_models() -> list:
    return sorted(p.stem for p in models_dir().glob("*.cat"))


def _drop_dynamic_ppo(model: Model) -> Model:
    # drop the execution-dependent ppo ingredients, keeping only what
    # is derivable from the program text
    return Model(
        tuple(
            Let(s.name, Empty())
            if isinstance(s, Let) and s.name in ("rdw", "detour")
            else s
            for s in model.statements
        )
    )


def load_builtin(name: str, static_ppo: bool = False) -> Model:
    path = models_dir() / f"{name}.cat"
    if not path.is_file():
        raise FileNotFoundError(
            f"no model {name!r} in {models_dir()} (available: {', '.join(available_models())})"
        )
    model = parse_cat(path.read_text())
    return _drop_dynamic_ppo(model) if static_ppo else model


def load_model(spec: str, static_ppo: bool = False) -> Model:
    """Resolve a builtin model name or a path to a .cat file."""
    path = Path(spec)
    if path.suffix == ".cat" and path.is_file():
        model = parse_cat(path.read_text())
        return _drop_dynamic_ppo(model) if static_ppo else model
    return load_builtin(spec, static_ppo)


def golden_table() -> dict:
    return json.loads((Path(__file__).resolve().parent / "golden.json").read_text())


@dataclass(frozen=True)
class TestResult:
    name: str
    model: str
    verdict: str  # "allowed" | "forbidden"
    candidates: int
    passing: int
    satisfying: int
    witness: Optional[object] = None  # a Candidate hitting the final, if any
    states: tuple = ()  # observed states over model-passing candidates
    check_failures: dict = field(default_factory=dict)  # check name -> count


def evaluate_test(
    t: ProjectedTest,
    model: Model,
    model_name: str = "?",
    prune_uniproc: bool = False,
) -> TestResult:
    total = passing = satisfying = 0
    witness = None
    all_passing_satisfy = True
    states = set()
    failures: dict = {}
    for cand in enumerate_candidates(t):
        total += 1
        if prune_uniproc and not passes_uniproc(cand):
            continue
        result = run_model(model, cand)
        for check in result.checks:
            if not check.ok:
                key = check.name or check.kind
                failures[key] = failures.get(key, 0) + 1
        if not result.passed:
            continue
        passing += 1
        states.add("; ".join(observed_state(cand)))
        if evaluate_final(cand):
            satisfying += 1
            if witness is None:
                witness = cand
        else:
            all_passing_satisfy = False
    if t.final.quant == "forall":
        allowed = passing > 0 and all_passing_satisfy
    else:  # exists and observed ask whether the final is reachable
        allowed = satisfying > 0
    return TestResult(
        t.name,
        model_name,
        "allowed" if allowed else "forbidden",
        total,
        passing,
        satisfying,
        witness,
        tuple(sorted(states)),
        failures,
    )


def verdict(t: ProjectedTest, model: Model, prune_uniproc: bool = False) -> str:
    return evaluate_test(t, model, prune_uniproc=prune_uniproc).verdict
