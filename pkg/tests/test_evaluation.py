import json
import pathlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparse_online.data_io import SparseExample, SyntheticSpec, generate_synthetic, to_csr
from sparse_online.evaluation import (
    ConfusionCounts,
    ImbalanceSpec,
    evaluate,
    example_losses,
    hinge_objective,
    metrics,
    offline_comparator,
    record,
    regret_trace,
    rho_from_priors,
    run_cell,
    sparsity_sweep,
)
from sparse_online.learners import LearnerConfig, SparseOnlineLearner
from sparse_online.sparse_core import DenseWeights, SparseVector

GOLDEN = pathlib.Path(__file__).parent / "golden" / "comparator_200.json"


def ex(y, pairs):
    return SparseExample(y, SparseVector.from_pairs(pairs))


def test_record_examples():
    c = record(ConfusionCounts(), 1, -1)
    assert (c.t_pos, c.m_pos, c.t_neg, c.m_neg) == (1, 1, 0, 0)
    c = record(ConfusionCounts(), -1, -1)
    assert (c.t_pos, c.m_pos, c.t_neg, c.m_neg) == (0, 0, 1, 0)
    c = record(ConfusionCounts(), -1, 1)
    assert (c.t_neg, c.m_neg) == (1, 1)
    with pytest.raises(ValueError):
        record(ConfusionCounts(), 0, 1)


def test_metrics_examples():
    m = metrics(ConfusionCounts(t_pos=100, t_neg=1000, m_pos=10, m_neg=20))
    assert m.sensitivity == pytest.approx(0.9)
    assert m.specificity == pytest.approx(0.98)
    assert m.weighted_sum == pytest.approx(0.94)
    assert metrics(ConfusionCounts(5, 7, 0, 0)).weighted_sum == 1.0
    m = metrics(ConfusionCounts(t_pos=4, t_neg=10, m_pos=4, m_neg=3))
    assert m.weighted_sum == 0.5 * m.specificity
    with pytest.raises(ValueError):
        metrics(ConfusionCounts())


def test_metrics_undefined_class():
    m = metrics(ConfusionCounts(t_pos=3, t_neg=0, m_pos=1, m_neg=0))
    assert m.specificity is None and m.weighted_sum is None
    assert m.error_rate == pytest.approx(1 / 3)


@given(st.integers(0, 500), st.integers(0, 500), st.data())
def test_metric_identities(tp, tn, data):
    if tp + tn == 0:
        return
    mp = data.draw(st.integers(0, tp))
    mn = data.draw(st.integers(0, tn))
    m = metrics(ConfusionCounts(tp, tn, mp, mn))
    assert m.error_rate * (tp + tn) == pytest.approx(mp + mn, abs=1e-9)
    assert round(m.error_rate * (tp + tn)) == mp + mn
    if tp and tn:
        assert m.weighted_sum == (m.sensitivity + m.specificity) / 2


def test_rho_examples():
    assert rho_from_priors(ImbalanceSpec(0.5, 0.5, 10_000, 990_000)) == pytest.approx(99)
    assert rho_from_priors(ImbalanceSpec(0.5, 0.5, 40, 40)) == 1.0
    assert rho_from_priors(ImbalanceSpec(0.9, 0.1, 7, 7)) == pytest.approx(9)
    with pytest.raises(ValueError):
        rho_from_priors(ImbalanceSpec())
    with pytest.raises(ValueError):
        ImbalanceSpec(0.6, 0.6)


def test_comparator_separable_singleton():
    data = [ex(1, [(0, 1.0)])]
    w = offline_comparator(data)
    assert w[0] >= 1.0 - 1e-9
    assert example_losses(w, data).sum() == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("method", ["lp", "subgradient"])
def test_comparator_contradictory_duplicates(method):
    # three copies labelled +1, one labelled -1, same x = 2
    data = [ex(1, [(0, 2.0)])] * 3 + [ex(-1, [(0, 2.0)])]
    X, y = to_csr(data)
    grid = np.linspace(-3, 3, 60001)
    brute = min(hinge_objective(np.array([g]), X, y, lam=0.5) for g in grid)
    w = offline_comparator(data, lam=0.5, method=method)
    got = hinge_objective(w.to_array(1), X, y, lam=0.5)
    assert got <= brute * 1.01 + 1e-12
    assert got >= 2.0  # one (+1, -1) pair alone costs [1-2w]+ + [1+2w]+ >= 2


def test_comparator_golden_objective():
    g = json.loads(GOLDEN.read_text())
    tr, _, _ = generate_synthetic(SyntheticSpec(**g["synthetic"]))
    dim = g["synthetic"]["ambient_dim"]
    X, y = to_csr(tr, dim)
    w = offline_comparator(tr, lam=g["lam"], dim=dim)
    assert hinge_objective(w.to_array(dim), X, y, g["lam"]) == pytest.approx(g["objective"], rel=1e-7)


def test_comparator_cost_weighting():
    data = [ex(1, [(0, 1.0)]), ex(-1, [(0, 1.0)])]
    # heavy positive cost pulls w to +1, heavy negative cost to -1
    assert offline_comparator(data, c_pos=5.0)[0] == pytest.approx(1.0)
    assert offline_comparator(data, c_neg=5.0)[0] == pytest.approx(-1.0)


def test_regret_trace_examples():
    a = np.array([1.0, 0.5, 0.0, 2.0])
    r = regret_trace(a, a, [1, 2, 4])
    assert r.regret == [0.0, 0.0, 0.0]
    r = regret_trace([3.0], [1.25], [1])
    assert r.regret == [1.75]
    with pytest.raises(ValueError):
        regret_trace([1.0, 2.0], [1.0], [1])
    with pytest.raises(ValueError):
        regret_trace([1.0], [1.0], [2])


@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=50),
       st.sampled_from([0.5, 2.0, 4.0]))
def test_regret_linearity_and_monotone_cumulatives(pairs, alpha):
    on = np.array([p[0] for p in pairs])
    cm = np.array([p[1] for p in pairs])
    cps = list(range(1, len(pairs) + 1))
    base = regret_trace(on, cm, cps)
    scaled = regret_trace(alpha * on, alpha * cm, cps)
    np.testing.assert_allclose(scaled.regret, alpha * np.array(base.regret), rtol=1e-12, atol=1e-12)
    assert np.all(np.diff(base.online_cumulative) >= 0)
    assert np.all(np.diff(base.comparator_cumulative) >= 0)


def test_evaluation_does_not_mutate_state():
    rng = np.random.default_rng(0)
    data = [ex(int(rng.choice([-1, 1])), [(0, rng.normal()), (2, rng.normal())]) for _ in range(50)]
    learner = SparseOnlineLearner(LearnerConfig("ssol-diag", lam=0.01), 3)
    for e in data[:30]:
        learner.step(e.x, e.y)

    def digest():
        s = learner.state
        return (s.theta.to_array().tobytes(), s.a_inv.to_array().tobytes(), s.t, s.updates)

    before = digest()
    evaluate(learner.weights(), data[30:], 3)
    for e in data[30:]:
        learner.predict(e.x)
    assert digest() == before


def test_evaluate_tie_rule():
    conf = evaluate(DenseWeights([0.0]), [ex(1, [(0, 1.0)]), ex(-1, [(0, 1.0)])], 1)
    assert (conf.m_pos, conf.m_neg) == (0, 1)


@pytest.fixture(scope="module")
def small_synth():
    spec = SyntheticSpec(n_train=600, n_test=300, ambient_dim=80, n_effective=8, n_noise=10, seed=3)
    return generate_synthetic(spec)


def test_sweep_lambda_zero_counts_never_active(small_synth):
    tr, te, _ = small_synth
    cell = run_cell(LearnerConfig("fsol", eta=0.5), tr, te, 120, seed=0)
    active = set()
    for e in tr:
        active.update(e.x.indices.tolist())
    # with no thresholding, only never-active features (or ones seen solely in
    # non-violating rounds) can stay at zero
    assert cell.nonzeros <= len(active)
    assert cell.sparsity == pytest.approx((120 - cell.nonzeros) / 120)
    assert cell.sparsity >= (120 - len(active)) / 120


def test_sweep_huge_lambda_gives_zero_model(small_synth):
    tr, te, _ = small_synth
    cell = run_cell(LearnerConfig("fsol", lam=1e12), tr, te, 80, seed=0)
    assert cell.sparsity == 1.0 and cell.nonzeros == 0
    neg_rate = sum(e.y == -1 for e in te) / len(te)
    assert cell.test_error == pytest.approx(neg_rate)


def test_sparsity_sweep_aggregates(small_synth):
    tr, te, _ = small_synth
    pts = sparsity_sweep(LearnerConfig("fsol"), tr, te, [0.0, 5.0], seeds=[0, 1], ambient_dim=80)
    assert [p.lam for p in pts] == [0.0, 5.0]
    assert all(len(p.cells) == 2 for p in pts)
    assert pts[1].sparsity_mean >= pts[0].sparsity_mean
    with pytest.raises(ValueError):
        sparsity_sweep(LearnerConfig("fsol"), tr, te, [], seeds=[0], ambient_dim=80)
