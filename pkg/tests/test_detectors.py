import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowcount.datagen import DEFAULT_TRANSITION, GeneratorConfig, generate
from lowcount.detectors import (
    DETECTOR_IDS,
    Autoencoder,
    AutoencoderSpec,
    BocSpec,
    IsoForestSpec,
    IsolationForest,
    MissingGeneratorError,
    UnknownDetectorError,
    WindowSpec,
    autoencoder_score,
    boc_score,
    ecod_score,
    forward_filter,
    isolation_forest_score,
    knn_distance,
    matrix_profile,
    run_detector,
    zero_run_length_score,
)
from lowcount.detectors.iforest import IsolationTree, average_path_length
from lowcount.series import CountSeries

counts = st.lists(st.integers(0, 6), min_size=8, max_size=60)


def brute_matrix_profile(values, m, labels=None):
    """All-pairs left profile with an exclusion zone of ``m``."""
    x = np.asarray(values, dtype=float)
    n = x.size

    def z(s):
        win = x[s : s + m]
        if win.max() == win.min():
            return np.zeros(m)
        return (win - win.mean()) / win.std()

    out = np.zeros(n)
    for i in range(2 * m - 1, n):
        best = 2 * math.sqrt(m)
        for j in range(m - 1, i - m + 1):
            if labels is not None and np.any(labels[j - m + 1 : j + 1]):
                continue
            best = min(best, float(np.linalg.norm(z(i - m + 1) - z(j - m + 1))))
        out[i] = best
    return out


def brute_knn(values, m, k):
    x = np.asarray(values, dtype=float)
    out = np.zeros(x.size)
    for i in range(2 * m - 1, x.size):
        d = sorted(np.linalg.norm(x[i - m + 1 : i + 1] - x[j - m + 1 : j + 1]) for j in range(m - 1, i - m + 1))
        out[i] = np.mean(d[:k])
    return out


# -- matrix profile ---------------------------------------------------------


def test_matrix_profile_periodic_is_zero():
    s = CountSeries(np.tile([0, 1, 5, 9, 4, 2, 1, 0, 0, 3], 10))
    out = matrix_profile(s, WindowSpec(10))
    assert out.valid_from == 19
    np.testing.assert_allclose(out.evaluated, 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("history_filter", ["none", "oracle-labels"])
def test_matrix_profile_matches_brute_force(seed, history_filter):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(60, 200)), int(rng.integers(2, 9))
    values = rng.poisson(2.0, n)
    labels = rng.random(n) < 0.05
    s = CountSeries(values, labels=labels)
    got = matrix_profile(s, WindowSpec(m), history_filter).scores
    want = brute_matrix_profile(values, m, labels if history_filter == "oracle-labels" else None)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)


def test_matrix_profile_constant_windows_match():
    s = CountSeries([0, 0, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(matrix_profile(s, WindowSpec(3)).evaluated, 0.0)


def test_matrix_profile_sentinel_without_history():
    labels = np.zeros(12, dtype=bool)
    labels[:6] = True
    s = CountSeries(np.arange(12) % 4, labels=labels)
    out = matrix_profile(s, WindowSpec(3))
    # history windows overlap labels until index 8 ends a clean one
    assert out.scores[5:8].tolist() == [2 * math.sqrt(3)] * 3


def test_matrix_profile_short_series():
    with pytest.raises(ValueError):
        matrix_profile(CountSeries(np.ones(7)), WindowSpec(4))


@given(counts, st.integers(2, 4))
@settings(max_examples=50, deadline=None)
def test_matrix_profile_bounds(values, m):
    if len(values) < 2 * m:
        return
    out = matrix_profile(CountSeries(values), WindowSpec(m), "none").scores
    assert np.all(out >= 0)
    assert np.all(out <= 2 * math.sqrt(m) + 1e-9)


# -- k-NN -------------------------------------------------------------------


def test_knn_constant_series():
    out = knn_distance(CountSeries(np.full(50, 3)), WindowSpec(5))
    assert not out.scores.any()


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("k", [1, 3, 5])
def test_knn_matches_brute_force(seed, k):
    rng = np.random.default_rng(seed)
    values = rng.poisson(3.0, 80)
    got = knn_distance(CountSeries(values), WindowSpec(4), k).scores
    np.testing.assert_allclose(got, brute_knn(values, 4, k), rtol=0, atol=1e-9)


@given(counts, st.integers(2, 4), st.integers(1, 6))
@settings(max_examples=50, deadline=None)
def test_knn_non_negative(values, m, k):
    if len(values) < 2 * m:
        return
    assert np.all(knn_distance(CountSeries(values), WindowSpec(m), k).scores >= 0)


def test_knn_and_profile_flag_inserted_flat_segment():
    rng = np.random.default_rng(0)
    t = np.arange(300)
    values = 20 + np.round(10 * np.sin(2 * np.pi * t / 10)).astype(int) + rng.integers(1, 4, 300)
    assert values.min() > 0
    values[200:212] = 0
    s = CountSeries(values)
    mp = matrix_profile(s, WindowSpec(10), "none").scores
    kn = knn_distance(s, WindowSpec(10), k=1).scores
    for scores in (mp, kn):
        assert scores[200:215].max() > np.median(scores[19:])
    order_mp = np.argsort(mp[19:], kind="stable")
    order_kn = np.argsort(kn[19:], kind="stable")
    assert not np.array_equal(order_mp, order_kn)


# -- autoencoder ------------------------------------------------------------


def test_autoencoder_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    X = rng.normal(size=(8, 4))
    model = Autoencoder.init(4, 2, rng)
    model.b1[:] = rng.normal(size=2) * 0.1
    model.b2[:] = rng.normal(size=4) * 0.1
    _, grads = model.gradients(X)
    eps = 1e-5
    worst = 0.0
    for p, g in zip(model.params, grads):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + eps
            up = model.loss(X)
            p[idx] = old - eps
            down = model.loss(X)
            p[idx] = old
            numeric = (up - down) / (2 * eps)
            worst = max(worst, abs(g[idx] - numeric) / max(abs(g[idx]) + abs(numeric), 1e-8))
    assert worst < 1e-5


def test_autoencoder_loss_non_increasing():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 10))
    model = Autoencoder.init(10, 4, rng).fit(X, epochs=500, learning_rate=0.01)
    h = np.array(model.history)
    assert np.all(np.diff(h) <= 1e-9)
    assert h[-1] < h[1]


def test_autoencoder_identity_capable_case():
    rng = np.random.default_rng(3)
    w = 4
    basis = rng.normal(size=(w - 1, w))
    X = 0.3 * rng.normal(size=(200, w - 1)) @ basis
    X -= X.mean(axis=0)
    # Oracle: residual outside the best (w-1)-dimensional subspace.
    sv = np.linalg.svd(X, compute_uv=False)
    assert sv[-1] ** 2 / X.size < 1e-20
    model = Autoencoder.init(w, w - 1, rng).fit(X, epochs=3000, learning_rate=0.1)
    assert model.errors(X).mean() < 0.1 * X.var()


def test_autoencoder_score_shape_and_determinism():
    series, _ = generate(GeneratorConfig(amplitude=64.0, seed=2))
    spec = AutoencoderSpec(epochs=50, seed=7)
    a = autoencoder_score(series, WindowSpec(10), spec)
    b = autoencoder_score(series, WindowSpec(10), spec)
    assert a.valid_from == 9
    assert a.scores.tobytes() == b.scores.tobytes()
    assert np.all(a.scores >= 0)


def test_autoencoder_constant_training_uses_floor():
    out = autoencoder_score(CountSeries(np.full(400, 2)), WindowSpec(4), AutoencoderSpec(hidden=2, epochs=5))
    assert np.all(np.isfinite(out.scores))


def test_autoencoder_preconditions():
    with pytest.raises(ValueError):
        autoencoder_score(CountSeries(np.ones(400)), WindowSpec(4), AutoencoderSpec(hidden=4))
    with pytest.raises(ValueError):
        autoencoder_score(CountSeries(np.ones(100)), WindowSpec(10), AutoencoderSpec())


# -- ECOD -------------------------------------------------------------------


def test_ecod_examples():
    out = ecod_score(CountSeries(np.arange(1, 11))).scores
    # direct ECDF count: one value >= 10 out of ten
    assert out[-1] == pytest.approx(-math.log(1 / 10))
    assert out[0] == pytest.approx(math.log(10))
    assert not ecod_score(CountSeries(np.full(12, 5))).scores.any()


def test_ecod_median_is_minimum():
    rng = np.random.default_rng(0)
    values = rng.permutation(np.arange(0, 22, 2))  # 11 distinct values
    out = ecod_score(CountSeries(values)).scores
    assert np.argmin(out) == int(np.flatnonzero(values == np.median(values))[0])


def test_ecod_short_series():
    with pytest.raises(ValueError):
        ecod_score(CountSeries(np.arange(9)))


# -- isolation forest -------------------------------------------------------


def test_average_path_length_values():
    assert average_path_length(1) == 0.0
    assert average_path_length(2) == 1.0
    h = sum(1 / i for i in range(1, 256))
    assert average_path_length(256) == pytest.approx(2 * h - 2 * 255 / 256, rel=1e-3)


def test_iforest_isolates_far_outlier():
    X = np.zeros((256, 5))
    X[-1] = 100.0
    scores = IsolationForest(IsoForestSpec(n_trees=50, subsample=256, seed=0)).fit(X).score(X)
    assert scores[-1] > scores[:-1].max()


def test_iforest_two_points_single_tree():
    X = np.array([[0.0, 1.0], [3.0, 1.0]])
    tree = IsolationTree.grow(X, height_limit=1, rng=np.random.default_rng(0))
    np.testing.assert_array_equal(tree.path_length(X), [1.0, 1.0])
    scores = IsolationForest(IsoForestSpec(n_trees=1, subsample=2)).fit(X).score(X)
    assert scores[0] == scores[1]


def test_iforest_scores_in_unit_interval_and_deterministic():
    series, _ = generate(GeneratorConfig(amplitude=8.0, seed=1, length=600))
    spec = IsoForestSpec(n_trees=20, seed=3)
    a = isolation_forest_score(series, WindowSpec(10), spec)
    b = isolation_forest_score(series, WindowSpec(10), spec)
    ev = a.evaluated
    assert np.all(ev > 0) and np.all(ev <= 1)
    assert a.scores.tobytes() == b.scores.tobytes()


def test_iforest_needs_subsample():
    with pytest.raises(ValueError):
        IsolationForest(IsoForestSpec(subsample=256)).fit(np.zeros((100, 3)))


# -- zero run length --------------------------------------------------------


@pytest.mark.parametrize(
    "values, expected",
    [([0, 0, 3, 0], [1, 2, 0, 1]), ([1, 4, 2], [0, 0, 0]), ([0] * 5, [1, 2, 3, 4, 5])],
)
def test_zero_run_length_examples(values, expected):
    assert zero_run_length_score(CountSeries(values)).scores.tolist() == expected


@given(st.lists(st.integers(0, 2), min_size=1, max_size=100))
def test_zero_run_length_recurrence(values):
    out = zero_run_length_score(CountSeries(values)).scores
    for t in range(1, len(values)):
        if values[t] == 0:
            assert out[t] == out[t - 1] + 1
        else:
            assert out[t] == 0


# -- Bayes optimal classifier -----------------------------------------------


def brute_forward(values, rates, r, T, init):
    """Non-log forward recursion in 50-digit arithmetic."""
    mpmath.mp.dps = 50

    def pmf(x, lam):
        lam = mpmath.mpf(lam)
        if lam == 0:
            return mpmath.mpf(1) if x == 0 else mpmath.mpf(0)
        return lam**x * mpmath.exp(-lam) / mpmath.factorial(x)

    T = [[mpmath.mpf(v) for v in row] for row in T]
    prev = None
    out = []
    for t, x in enumerate(values):
        if prev is None:
            prior = [mpmath.mpf(init[0]), mpmath.mpf(init[1])]
        else:
            prior = [sum(prev[i] * T[i][j] for i in range(2)) for j in range(2)]
        joint = [prior[0] * pmf(int(x), rates[t]), prior[1] * pmf(int(x), (1 - r) * rates[t])]
        z = joint[0] + joint[1]
        prev = [mpmath.mpf(init[0]), mpmath.mpf(init[1])] if z == 0 else [j / z for j in joint]
        out.append(float(prev[1]))
    return np.array(out)


def test_boc_no_reduction_follows_chain_marginal():
    cfg = GeneratorConfig(amplitude=32.0, reduction_rate=0.0, length=400, seed=1)
    series, _ = generate(cfg)
    spec = BocSpec(np.full(400, 3.2), 0.0, DEFAULT_TRANSITION, (1.0, 0.0))
    out = boc_score(series, spec).scores
    # Oracle: prior chain marginal with no observations.
    T = np.array(DEFAULT_TRANSITION)
    p = np.array([1.0, 0.0])
    marginal = []
    for _ in range(400):
        marginal.append(p[1])
        p = p @ T
    np.testing.assert_allclose(out, marginal, rtol=0, atol=1e-12)
    assert out[-1] == pytest.approx(1 / 11, abs=1e-6)


def test_boc_full_reduction_positive_count_is_normal():
    cfg = GeneratorConfig(amplitude=64.0, reduction_rate=1.0, length=1000, seed=3)
    series, _ = generate(cfg)
    out = boc_score(series, BocSpec.from_generator(cfg)).scores
    assert not out[series.values > 0].any()


@pytest.mark.parametrize("amplitude, r", [(8.0, 0.7), (1.0, 1.0), (128.0, 0.3)])
def test_boc_matches_extended_precision_recursion(amplitude, r):
    cfg = GeneratorConfig(amplitude=amplitude, reduction_rate=r, length=50, seed=4, initial_state=1)
    series, _ = generate(cfg)
    spec = BocSpec.from_generator(cfg)
    want = brute_forward(series.values, spec.rates, r, cfg.transition, spec.initial_dist)
    np.testing.assert_allclose(boc_score(series, spec).scores, want, rtol=0, atol=1e-9)


def test_boc_impossible_observation_resets():
    spec = BocSpec(np.array([1.0, 0.0, 1.0]), 0.5, DEFAULT_TRANSITION, (0.3, 0.7))
    post = forward_filter(CountSeries([1, 2, 1]), spec)
    np.testing.assert_allclose(post[1], [0.3, 0.7])


@given(st.lists(st.integers(0, 8), min_size=1, max_size=40), st.floats(0, 1), st.floats(0, 5))
@settings(deadline=None)
def test_boc_posteriors_normalised(values, r, rate):
    spec = BocSpec(np.full(len(values), rate), r, DEFAULT_TRANSITION)
    post = forward_filter(CountSeries(values), spec)
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-9)
    assert np.all((post >= 0) & (post <= 1))


def test_boc_length_mismatch():
    with pytest.raises(ValueError):
        boc_score(CountSeries([1, 2]), BocSpec(np.ones(3), 0.5, DEFAULT_TRANSITION))


def test_boc_spec_validation():
    with pytest.raises(ValueError):
        BocSpec(np.array([-1.0]), 0.5, DEFAULT_TRANSITION)
    with pytest.raises(ValueError):
        BocSpec(np.ones(2), 0.5, DEFAULT_TRANSITION, (0.5, 0.6))


# -- registry ---------------------------------------------------------------


def test_every_detector_is_deterministic():
    cfg = GeneratorConfig(amplitude=16.0, seed=6, length=800)
    series, _ = generate(cfg)
    spec = {"auto-encoder": {"epochs": 20, "seed": 1}, "isolation-forest": {"n_trees": 10, "seed": 1}}
    for det in DETECTOR_IDS:
        a = run_detector(det, series, spec.get(det), generator=cfg)
        b = run_detector(det, series, spec.get(det), generator=cfg)
        assert a.scores.tobytes() == b.scores.tobytes(), det
        assert a.valid_from == b.valid_from


def test_unknown_detector_lists_ids():
    with pytest.raises(UnknownDetectorError) as err:
        run_detector("lstm", CountSeries(np.ones(50)))
    for det in DETECTOR_IDS:
        assert det in str(err.value)


def test_boc_needs_generator():
    with pytest.raises(MissingGeneratorError):
        run_detector("boc", CountSeries(np.ones(50)))
