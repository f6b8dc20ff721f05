"""Operational machine: acceptance, witness paths, path derivation."""

import pytest

from memcat import suite
from memcat.cat import run_model
from memcat.executions import enumerate_candidates, evaluate_final
from memcat.machine import (
    WitnessCycleError,
    derive_from_path,
    label_str,
    machine_accepts,
    machine_context,
    replay_path,
    witness_path,
)
from memcat.models import load_builtin


@pytest.fixture(scope="module")
def power():
    return load_builtin("power")


def contexts(name, power, **kw):
    t = suite.load(name)
    for cand in enumerate_candidates(t):
        env = run_model(power, cand).env
        yield cand, machine_context(cand, env, **kw), run_model(power, cand).passed


def test_machine_matches_model_on_mp(power):
    seen = set()
    for cand, ctx, model_ok in contexts("mp", power):
        assert machine_accepts(ctx) == model_ok
        seen.add(model_ok)
    assert seen == {True}  # every mp candidate is coherent and allowed


def test_machine_rejects_write_order_against_po(power):
    verdicts = []
    for cand, ctx, model_ok in contexts("coWW", power):
        verdicts.append((machine_accepts(ctx), model_ok))
    assert sorted(verdicts) == [(False, False), (True, True)]


def test_machine_blocks_stale_second_read(power):
    # the coRR shape: an earlier local read saw a newer write
    for cand, ctx, model_ok in contexts("coRR", power):
        assert machine_accepts(ctx) == model_ok


def test_corr_strengthening_is_load_bearing(power):
    # with the check off, the machine commits the reads out of order and
    # wrongly accepts the execution the model forbids
    t = suite.load("coRR")
    weak_accepts = []
    for cand in enumerate_candidates(t):
        env = run_model(power, cand).env
        model_ok = run_model(power, cand).passed
        ctx = machine_context(cand, env, strengthen_coRR=False)
        if not model_ok and evaluate_final(cand):
            weak_accepts.append(machine_accepts(ctx))
    assert weak_accepts == [True]


def test_machine_rejects_fenced_store_buffering(power):
    for cand, ctx, model_ok in contexts("sb+syncs", power):
        assert machine_accepts(ctx) == model_ok
        if evaluate_final(cand):
            assert not machine_accepts(ctx)


def test_machine_equivalence_on_assorted_tests(power):
    names = (
        "sb", "lb", "r", "s", "2+2w", "wrc", "mp+lwsyncs",
        "rwc+syncs", "r+syncs", "iriw+syncs", "r+lwsync+sync",
        "coRW1", "coRW2", "coWR",
    )
    for name in names:
        for cand, ctx, model_ok in contexts(name, power):
            assert machine_accepts(ctx) == model_ok, (name, cand.rf.pairs())


def test_witness_path_replays_for_every_passing_candidate(power):
    for name in ("mp", "sb", "r", "coWW", "mp+lwsync+addr",
                 "r+lwsync+sync", "rwc+syncs", "iriw+syncs"):
        checked = 0
        for cand, ctx, model_ok in contexts(name, power):
            if not model_ok:
                continue
            path = witness_path(ctx)
            ok, blocked_at = replay_path(ctx, path)
            assert ok, (name, blocked_at, [label_str(ctx, l) for l in path])
            checked += 1
        assert checked


def test_witness_roundtrip_recovers_rf_and_co(power):
    for name in ("mp", "s", "2+2w"):
        for cand, ctx, model_ok in contexts(name, power):
            if not model_ok:
                continue
            rf, co = derive_from_path(cand, witness_path(ctx))
            assert rf == frozenset(cand.rf.pairs())
            assert co == frozenset(cand.co.pairs())


def test_witness_cycle_on_forbidden_candidate(power):
    t = suite.load("2+2w+lwsyncs")
    hit = False
    for cand in enumerate_candidates(t):
        if not evaluate_final(cand):
            continue
        env = run_model(power, cand).env
        ctx = machine_context(cand, env)
        with pytest.raises(WitnessCycleError):
            witness_path(ctx)
        hit = True
    assert hit


def test_path_labels_render_with_event_names(power):
    for cand, ctx, model_ok in contexts("mp", power):
        if not model_ok:
            continue
        rendered = [label_str(ctx, l) for l in witness_path(ctx)]
        for s in rendered:
            assert s[0:2] in ("c(", "cp", "s(")
        # every program event shows up somewhere
        joined = " ".join(rendered)
        for nm in ("a", "b", "c", "d"):
            assert f"({nm})" in joined or f",{nm})" in joined
        break


def test_replay_reports_block_position(power):
    for cand, ctx, model_ok in contexts("mp", power):
        path = witness_path(ctx)
        # force an illegal prefix: commit a read before satisfying it
        bad = [l for l in path if l[0] == "cr"][:1] + path
        ok, blocked_at = replay_path(ctx, bad)
        assert not ok and blocked_at == 0
        break
