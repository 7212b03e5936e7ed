import numpy as np
import pytest

from qerasure.errors import PreconditionError, SampleSizeError, SchemaError, ValidationError
from qerasure.inference import (
    compare_machines,
    erased_info_of_partition,
    estimate_morphs,
    history_machine,
    partition_from_assignment,
    reconstruct,
    require_predictive,
)
from qerasure.simulation import RedactedTrace, SimulationConfig, simulate
from qerasure.transducer import Transducer, build_exact, dumps_transducer, loads_transducer, output_determinism_check


@pytest.fixture(scope="module")
def n1_trace():
    return simulate(SimulationConfig(n=1, steps=10**5, seed=21)).redacted()


@pytest.fixture(scope="module")
def n1_long():
    return simulate(SimulationConfig(n=1, steps=4 * 10**5, seed=22)).redacted()


def coin_trace(steps=20000, seed=0):
    rng = np.random.default_rng(seed)
    return RedactedTrace(None, np.zeros(steps, dtype=np.int64), rng.choice([1, -1], steps).astype(np.int8))


def test_morph_table_n1(n1_trace):
    mt = estimate_morphs(n1_trace, L=1)
    assert sorted(mt.keys) == [((0, -1),), ((0, 1),), ((1, -1),), ((1, 1),)]
    assert not mt.excluded
    assert np.all(mt.counts.sum(axis=2) >= mt.min_count)
    assert np.all((mt.probs >= 0) & (mt.probs <= 1))
    m = mt.morph(((0, 1),))
    # after sigma_z = +1 the state is |0>: sigma_z again gives +1, sigma_x is a fair coin
    assert m[0][1] == 1.0
    assert abs(m[1][1] - 0.5) < 0.02
    for x in m:
        assert abs(sum(m[x].values()) - 1) < 1e-9


def test_morph_table_excludes_rare_histories(n1_trace):
    mt = estimate_morphs(n1_trace, L=3, min_count=1200)
    assert mt.excluded
    assert all(v < 1200 for v in mt.excluded.values())
    assert set(mt.keys).isdisjoint(mt.excluded)


def test_morphs_need_samples():
    tr = simulate(SimulationConfig(n=1, steps=1100, seed=0))
    with pytest.raises(SampleSizeError) as info:
        estimate_morphs(tr, L=1)
    assert len(info.value.deficient) == 4


def test_reconstruct_n1(n1_trace):
    pm = reconstruct(n1_trace)
    assert pm.n_clusters == 4
    rep = compare_machines(pm, build_exact(1))
    assert rep.state_count_match and rep.max_row_tv < 0.05
    assert not rep.unmatched_exact and not rep.unmatched_inferred
    assert output_determinism_check(pm.to_transducer())


def test_reconstruct_is_deterministic(n1_trace):
    a, b = reconstruct(n1_trace, L=2), reconstruct(n1_trace, L=2)
    assert a.assignment == b.assignment
    assert np.array_equal(a.kernel_counts, b.kernel_counts)


def test_longer_histories_give_same_partition(n1_long):
    pm = reconstruct(n1_long, L=2)
    assert pm.n_clusters == 4
    # histories sharing their last pair share a cluster
    by_last = {}
    for key, c in pm.assignment.items():
        by_last.setdefault(key[-1], set()).add(c)
    assert all(len(cs) == 1 for cs in by_last.values())


def test_tolerance_monotone(n1_long):
    counts = [reconstruct(n1_long, L=2, tol=tol).n_clusters for tol in (0.0, 0.001, 0.01, 0.05, 0.3, 0.6, 1.0)]
    assert counts == sorted(counts, reverse=True)
    assert counts[-1] == 1


def test_under_merged_is_flagged(n1_long):
    pm = reconstruct(n1_long, L=2, tol=0.0)
    rep = compare_machines(pm, build_exact(1))
    assert not rep.state_count_match
    assert rep.unmatched_inferred


def test_coin_is_one_state():
    pm = reconstruct(coin_trace())
    assert pm.n_clusters == 1
    t = pm.to_transducer()
    assert t.inputs == (0,)


def test_negative_tol():
    with pytest.raises(ValidationError):
        reconstruct(coin_trace(), tol=-0.1)


def test_machine_document_uses_cluster_ids(n1_trace, tmp_path):
    t = reconstruct(n1_trace).to_transducer()
    back = loads_transducer(dumps_transducer(t))
    assert back.states == (0, 1, 2, 3)
    assert compare_machines(back, build_exact(1)).max_row_tv < 0.05


def test_compare_exact_with_itself():
    for n in (1, 2, 3):
        rep = compare_machines(build_exact(n), build_exact(n))
        assert rep.max_row_tv == 0.0 and rep.state_count_match
        assert all(a == b for a, b in rep.matching.items())


def test_compare_alphabet_mismatch():
    with pytest.raises(SchemaError):
        compare_machines(build_exact(1), build_exact(2))
    other = Transducer(["a"], [0, 1], {("a", 0): [("a", 0, 1.0)], ("a", 1): [("a", 0, 1.0)]}, outputs=(0,))
    with pytest.raises(SchemaError):
        compare_machines(other, build_exact(1))


@pytest.mark.parametrize("L", [1, 2, 3])
def test_history_machines_erase_at_least_the_minimum(n1_long, L):
    res = erased_info_of_partition(history_machine(n1_long, L=L), n1_long)
    assert res.sufficient
    assert require_predictive(res) >= 1.5 - 0.02


def test_merged_machine_erases_three_halves(n1_long):
    res = erased_info_of_partition(reconstruct(n1_long), n1_long)
    assert abs(res.bits - 1.5) < 0.02
    assert abs(res.bits - (res.cond_next + res.mutual_next_input)) < 1e-12


def test_degenerate_partition_flagged(n1_trace):
    p = partition_from_assignment(n1_trace, lambda key: 0)
    res = erased_info_of_partition(p, n1_trace)
    assert not res.sufficient and res.bits is None
    assert res.max_member_distance > 0.4
    with pytest.raises(PreconditionError):
        require_predictive(res)


def test_partition_from_mapping(n1_trace):
    exact_labels = {((0, 1),): "z+", ((0, -1),): "z-", ((1, 1),): "x+", ((1, -1),): "x-"}
    p = partition_from_assignment(n1_trace, exact_labels)
    assert p.n_clusters == 4
    assert erased_info_of_partition(p, n1_trace).sufficient


def test_reconstruct_n2():
    tr = simulate(SimulationConfig(n=2, steps=10**6, seed=3)).redacted()
    pm = reconstruct(tr, tol=0.03)
    assert pm.n_clusters == 8
    assert compare_machines(pm, build_exact(2)).max_row_tv < 0.05
