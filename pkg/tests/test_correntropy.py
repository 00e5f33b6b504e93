import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cslr.ard import ArdConfig, RelevanceState, omega_step_slr, train_slr
from cslr.correntropy import (
    CslrConfig,
    HqState,
    correntropy_estimate,
    cslr_gradient,
    cslr_hessian,
    cslr_objective,
    hq_inner_solve,
    hq_update_auxiliaries,
    omega_step_cslr,
    train_cslr,
)
from cslr.data import Dataset
from cslr.logistic import LinearModel, augment, predict_label, sigmoid, train_mle

from .conftest import make_linear_toy


def _random_problem(seed, n=20, d=5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    t = rng.integers(0, 2, n)
    t[:2] = [0, 1]
    data = Dataset(X, t)
    model = LinearModel.from_vector(rng.normal(size=d + 1))
    state = RelevanceState.initial(d + 1)
    state.alphas[:] = rng.uniform(0.0, 2.0, d + 1)
    return data, model, state


def _zero_penalty(p):
    state = RelevanceState.initial(p)
    state.alphas[:] = 0.0
    return state


def _rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


def _fd_gradient(f, w, h=1e-5):
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2 * h)
    return g


def _clean_toy(seed, n=50):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    t = (X @ np.array([1.0, -1.0, 0.5]) + 0.2 > 0).astype(int)
    return Dataset(X, t)


def _cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


# ---------------------------------------------------------------------------
# correntropy estimate and objective


def test_estimate_unit_error():
    v = correntropy_estimate(np.array([1.0]), np.array([0.0]), 1.0)
    assert v == pytest.approx(float(mpmath.exp(-0.5)), abs=1e-8)


def test_estimate_identical_is_one():
    t = np.array([0.0, 1.0, 1.0])
    assert correntropy_estimate(t, t, 0.3) == 1.0


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=30),
       st.lists(st.floats(-1, 1), min_size=1, max_size=30))
def test_estimate_large_bandwidth_limit(a, b):
    n = min(len(a), len(b))
    v = correntropy_estimate(np.array(a[:n]), np.array(b[:n]), 1e6)
    assert abs(v - 1.0) < 1e-6


def test_estimate_validates():
    with pytest.raises(ValueError):
        correntropy_estimate(np.zeros(3), np.zeros(3), 0.0)
    with pytest.raises(ValueError):
        correntropy_estimate(np.zeros(3), np.zeros(2), 1.0)


@pytest.mark.parametrize("sigma", [0.3, 1.0, 2.5])
def test_objective_at_zero_weights(sigma):
    # every prediction is 0.5, so every error is +-0.5
    data = Dataset(np.random.default_rng(0).normal(size=(10, 3)), [0, 1] * 5)
    model = LinearModel.zeros(3)
    got = cslr_objective(data, model, RelevanceState.initial(4), sigma)
    assert got == pytest.approx(np.exp(-1.0 / (8 * sigma ** 2)), rel=1e-12)


def test_objective_without_penalty_is_estimate():
    data, model, _ = _random_problem(3)
    y = sigmoid(augment(data.attributes) @ model.vector)
    want = correntropy_estimate(data.labels.astype(float), y, 0.7)
    assert cslr_objective(data, model, _zero_penalty(6), 0.7) == pytest.approx(want, rel=1e-14)
    assert cslr_objective(data, model, None, 0.7) == pytest.approx(want, rel=1e-14)


def test_sum_reduction_scales_data_term():
    data, model, _ = _random_problem(4)
    mean = cslr_objective(data, model, None, 1.0, reduction="mean")
    total = cslr_objective(data, model, None, 1.0, reduction="sum")
    assert total == pytest.approx(data.n_samples * mean, rel=1e-13)
    scaled = cslr_objective(data, model, None, 0.5, reduction="scaled")
    mean_half = cslr_objective(data, model, None, 0.5, reduction="mean")
    assert scaled == pytest.approx(data.n_samples * 0.25 * mean_half, rel=1e-13)
    with pytest.raises(ValueError):
        cslr_objective(data, model, None, 1.0, reduction="median")


def test_penalty_only_on_active_coordinates():
    data, model, state = _random_problem(5)
    pruned = state.copy()
    pruned.pruned[2] = True
    full_vec = model.vector.copy()
    full_vec[2] = 0.0
    reduced = LinearModel.from_vector(full_vec)
    a = cslr_objective(data, reduced, pruned, 1.0)
    b = cslr_objective(data, reduced, state, 1.0)
    assert a == pytest.approx(b, rel=1e-14)


# ---------------------------------------------------------------------------
# derivatives


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("reduction", ["mean", "sum", "scaled"])
@pytest.mark.parametrize("seed", range(4))
def test_gradient_matches_finite_differences(seed, sigma, reduction):
    data, model, state = _random_problem(seed)

    def f(w):
        return cslr_objective(data, LinearModel.from_vector(w), state, sigma, reduction)

    g = cslr_gradient(data, model, state, sigma, reduction)
    assert _rel_err(g, _fd_gradient(f, model.vector)) < 1e-5


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("seed", range(4))
def test_hessian_matches_finite_differences(seed, sigma):
    data, model, state = _random_problem(seed, d=4)
    H = cslr_hessian(data, model, state, sigma)
    h = 1e-5
    fd = np.empty_like(H)
    for i in range(H.shape[0]):
        e = np.zeros(H.shape[0])
        e[i] = h
        gp = cslr_gradient(data, LinearModel.from_vector(model.vector + e), state, sigma)
        gm = cslr_gradient(data, LinearModel.from_vector(model.vector - e), state, sigma)
        fd[:, i] = (gp - gm) / (2 * h)
    assert _rel_err(H, fd) < 1e-4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0))
def test_hessian_symmetric(seed, sigma):
    data, model, state = _random_problem(seed)
    H = cslr_hessian(data, model, state, sigma)
    assert np.array_equal(H, H.T)


def test_hessian_penalty_shift():
    data, model, _ = _random_problem(7, d=4)
    ten = RelevanceState.initial(5)
    ten.alphas[:] = 10.0
    diff = cslr_hessian(data, model, ten, 1.0) - cslr_hessian(data, model, _zero_penalty(5), 1.0)
    assert np.array_equal(diff, -10.0 * np.eye(5))


# ---------------------------------------------------------------------------
# half-quadratic pieces


def test_auxiliaries_values():
    v = hq_update_auxiliaries(np.array([0.0, 1.0]), 1.0).auxiliaries
    assert v[0] == -1.0
    assert v[1] == pytest.approx(-float(mpmath.exp(-0.5)), abs=1e-12)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=50), st.floats(0.1, 10.0))
def test_auxiliaries_bounds(errors, sigma):
    v = hq_update_auxiliaries(np.array(errors), sigma).auxiliaries
    assert np.all(v < 0) and np.all(v >= -1)


def test_inner_solve_increases_surrogate():
    data, _, state = _random_problem(11, n=40, d=5)
    trace = []
    aux = HqState(-np.random.default_rng(0).uniform(0.2, 1.0, 40))
    hq_inner_solve(data, state, aux, 0.8, trace=trace)
    assert len(trace) > 1
    assert np.all(np.diff(trace) >= 0)


def test_inner_solve_huge_penalty_shrinks_to_zero():
    data, _, _ = _random_problem(12)
    state = RelevanceState.initial(6)
    state.alphas[:] = 1e10
    w = hq_inner_solve(data, state, HqState(-np.ones(20)), 1.0).vector
    assert np.max(np.abs(w)) < 1e-8


def test_inner_solve_rejects_nonnegative_auxiliaries():
    data, _, state = _random_problem(13)
    with pytest.raises(ValueError):
        hq_inner_solve(data, state, HqState(np.zeros(20)), 1.0)


@pytest.mark.parametrize("sigma", [0.3, 1.0, 3.0])
@pytest.mark.parametrize("reduction", ["mean", "sum", "scaled"])
def test_hq_energy_monotone(sigma, reduction):
    data, _ = make_linear_toy(80, 6, np.random.default_rng(1), noise=0.1)
    state = RelevanceState.initial(7)
    post = omega_step_cslr(data, state, None, CslrConfig(bandwidth=sigma, reduction=reduction))
    trace = np.asarray(post.hq_trace)
    assert trace.size >= 2
    assert np.all(np.diff(trace) >= -1e-10 * (1 + np.abs(trace[1:])))


@pytest.mark.parametrize("reduction", ["mean", "sum", "scaled"])
def test_omega_step_stationary(reduction):
    data, _ = make_linear_toy(80, 6, np.random.default_rng(2), noise=0.1)
    state = RelevanceState.initial(7)
    post = omega_step_cslr(data, state, None, CslrConfig(bandwidth=1.0, reduction=reduction))
    g = cslr_gradient(data, LinearModel.from_vector(post.mean), state, 1.0, reduction)
    assert np.max(np.abs(g)) < 1e-3
    assert np.all(post.variances > 0)


def test_omega_step_respects_pruned():
    data, _ = make_linear_toy(60, 5, np.random.default_rng(3))
    state = RelevanceState.initial(6)
    state.pruned[3] = True
    post = omega_step_cslr(data, state, None, CslrConfig())
    assert post.mean[3] == 0.0 and post.variances[3] == 0.0


def test_large_bandwidth_matches_slr_direction():
    data = _clean_toy(0)
    state = RelevanceState.initial(4)
    state.alphas[:] = 1e-12
    c = omega_step_cslr(data, state, None, CslrConfig(bandwidth=1e3))
    s = omega_step_slr(data, state, None)
    assert _cosine(c.mean, s.mean) > 0.99


@pytest.mark.parametrize("seed", range(5))
def test_large_bandwidth_matches_mle(seed):
    data = _clean_toy(seed)
    state = RelevanceState.initial(4)
    state.alphas[:] = 1e-12
    post = omega_step_cslr(data, state, None, CslrConfig(bandwidth=1e3))
    mle = train_mle(data)
    cslr = LinearModel.from_vector(post.mean)
    assert np.array_equal(predict_label(cslr, data.attributes), predict_label(mle, data.attributes))
    assert _cosine(post.mean, mle.vector) > 0.99


# ---------------------------------------------------------------------------
# full training


def test_config_validation():
    with pytest.raises(ValueError):
        CslrConfig(bandwidth=0.0)
    with pytest.raises(ValueError):
        CslrConfig(reduction="max")
    assert CslrConfig().reduction == "scaled"


def test_train_records_bandwidth_and_trace():
    data, _ = make_linear_toy(100, 6, np.random.default_rng(4), noise=0.1)
    model, report = train_cslr(data, CslrConfig(bandwidth=0.9))
    assert model.bandwidth == 0.9
    assert model.algorithm == "cslr"
    assert report.hq_trace
    assert report.termination_reason in {"Converged", "IterationCap"}
    assert np.all(model.weights[~model.active_mask[1:]] == 0.0)


def test_train_pruning_is_permanent():
    data, _ = make_linear_toy(120, 8, np.random.default_rng(5), noise=0.1)
    _, report = train_cslr(data, CslrConfig(bandwidth=1.0))
    counts = report.n_active()
    assert all(b <= a for a, b in zip(counts, counts[1:]))


@pytest.mark.parametrize("seed", range(5))
def test_quadratic_regime_agrees_with_slr(seed):
    data, _ = make_linear_toy(300, 10, np.random.default_rng(seed), relevant=2)
    slr, _ = train_slr(data, ArdConfig())
    cslr, _ = train_cslr(data, CslrConfig(bandwidth=2.0))
    a = set(np.flatnonzero(slr.active_mask[1:]))
    b = set(np.flatnonzero(cslr.active_mask[1:]))
    assert len(a & b) / len(a | b) >= 0.5
