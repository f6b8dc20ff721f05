"""Bundled model verdicts on the bundled suite."""

import pytest

from memcat import suite
from memcat.cat import parse_cat, run_model
from memcat.executions import enumerate_candidates
from memcat.litmus import parse_litmus, project
from memcat.models import (
    BUILTIN_MODELS,
    available_models,
    evaluate_test,
    golden_table,
    load_builtin,
    verdict,
)

from oracles import sc_allowed, tso_allowed, candidate_pairs


@pytest.fixture(scope="module")
def tests():
    return {n: suite.load(n) for n in suite.names()}


@pytest.fixture(scope="module")
def models():
    return {n: load_builtin(n) for n in BUILTIN_MODELS}


def test_all_builtin_models_present():
    assert set(BUILTIN_MODELS) <= set(available_models())


def test_suite_has_enough_tests():
    assert len(suite.names()) >= 30


def test_power_verdicts_match_golden_table(tests, models):
    table = golden_table()["power"]
    got = {
        name: verdict(tests[name], models["power"]) for name in table
    }
    assert got == table


def test_arm_model_diverges_from_power_shaped_arm(tests, models):
    fri_rfi = (
        "mp+dmb+fri-rfi-ctrlisb",
        "lb+data+fri-rfi-ctrl",
        "s+dmb+fri-rfi-data",
    )
    for name in fri_rfi:
        assert verdict(tests[name], models["arm"]) == "allowed", name
        assert verdict(tests[name], models["power-as-arm"]) == "forbidden", name


def test_arm_llh_relaxes_exactly_read_read_coherence(tests, models):
    coherence = ("coWW", "coRW1", "coRW2", "coWR", "coRR")
    for name in coherence:
        assert verdict(tests[name], models["arm"]) == "forbidden", name
        want = "allowed" if name == "coRR" else "forbidden"
        assert verdict(tests[name], models["arm-llh"]) == want, name


def test_sc_and_tso_on_classic_shapes(tests, models):
    assert verdict(tests["sb"], models["sc"]) == "forbidden"
    assert verdict(tests["sb"], models["tso"]) == "allowed"
    assert verdict(tests["sb+ffences"], models["tso"]) == "forbidden"
    assert verdict(tests["mp"], models["tso"]) == "forbidden"
    assert verdict(tests["lb"], models["tso"]) == "forbidden"


def test_release_acquire_orders_message_passing_but_not_stores(tests, models):
    assert verdict(tests["mp"], models["cpp-ra"]) == "forbidden"
    assert verdict(tests["lb"], models["cpp-ra"]) == "forbidden"
    assert verdict(tests["sb"], models["cpp-ra"]) == "allowed"
    # independent reads stay unordered without a total store order
    assert verdict(tests["iriw"], models["cpp-ra"]) == "allowed"


def test_sc_model_agrees_with_acyclicity_oracle(tests, models):
    for name in ("mp", "sb", "lb", "r", "2+2w", "coWW", "coRR"):
        for cand in enumerate_candidates(tests[name]):
            assert run_model(models["sc"], cand).passed == sc_allowed(cand), name


def test_tso_model_agrees_with_store_order_oracle(tests, models):
    for name in ("sb", "sb+ffences", "mp", "lb", "coWR"):
        for cand in enumerate_candidates(tests[name]):
            mfence = cand.fences["mfence"].pairs()
            assert run_model(models["tso"], cand).passed == tso_allowed(
                cand, mfence
            ), name


def test_ppo_fixpoint_inclusions_on_a_fenced_test(tests, models):
    for cand in enumerate_candidates(tests["mp+lwsync+addr"]):
        env = run_model(models["power"], cand).env
        ii, ic, ci, cc = env["ii"], env["ic"], env["ci"], env["cc"]
        assert not (ci - ii)
        assert not ((ii | cc) - ic)
        assert not (ci - cc)
        assert not (env["ii0"] - ii)
        assert not (env["cc0"] - cc)


def test_static_ppo_drops_execution_dependent_parts():
    src = """\
rdwtest power
init { x=0; rx=&x; r1=1; }
thread T0 { st [rx], r1 }
thread T1 {
  ld r2, [rx]
  ld r3, [rx]
}
final exists (T1:r2=0 /\\ T1:r3=1)
"""
    t = project(parse_litmus(src))
    full = load_builtin("power")
    static = load_builtin("power", static_ppo=True)
    saw_rdw = False
    for cand in enumerate_candidates(t):
        env_full = run_model(full, cand).env
        env_static = run_model(static, cand).env
        saw_rdw |= bool(env_full["rdw"])
        assert not env_static["rdw"]
        assert not env_static["detour"]
    assert saw_rdw


def test_models_dir_override(tmp_path, monkeypatch):
    (tmp_path / "trivial.cat").write_text("(* everything goes *)\nacyclic 0\n")
    monkeypatch.setenv("MEMCAT_MODELS_DIR", str(tmp_path))
    assert available_models() == ["trivial"]
    model = load_builtin("trivial")
    t = project(parse_litmus(
        "tiny sc\ninit { x=0; rx=&x; r1=1; }\nthread T0 { st [rx], r1 }\n"
        "final exists (x=1)"
    ))
    assert verdict(t, model) == "allowed"
    with pytest.raises(FileNotFoundError):
        load_builtin("power")


def test_evaluate_test_counts_are_consistent(tests, models):
    r = evaluate_test(tests["mp"], models["sc"], model_name="sc")
    assert r.candidates == 4
    assert 0 < r.passing <= r.candidates
    assert r.satisfying == 0  # sc forbids the stale read
    assert r.verdict == "forbidden"
    assert r.witness is None
