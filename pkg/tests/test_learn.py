import datetime as dt
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dietmine.features import FeatureVector
from dietmine.labeling import DayLabel, LabeledDay, UserLabel
from dietmine.learn import (
    EvalReport,
    FoldResult,
    LearnError,
    LinearModel,
    Sample,
    balance,
    binary_metrics,
    build_sample,
    cross_validate,
    default_C,
    error_extremes,
    margin_profile,
    objective,
    optimal_bias,
    stratified_folds,
    subgradient,
    top_features,
    train,
    write_top_features,
)
from oracles import central_difference, hinge_objective

B, O, A = DayLabel.BELOW, DayLabel.ON_TARGET, DayLabel.ABOVE


def toy(seed=0, n=200, d=15):
    rng = np.random.default_rng(seed)
    X = rng.poisson(2, (n, d)).astype(float)
    w0 = rng.normal(size=d)
    s = X @ w0 + rng.normal(0, 2, n)
    y = np.where(s > np.median(s), 1.0, -1.0)
    return Sample([f"u{i:03d}" for i in range(n)], X, y)


def test_objective_matches_loop_oracle():
    s = toy(n=30, d=4)
    rng = np.random.default_rng(1)
    w, b = rng.normal(size=4), 0.3
    assert objective(w, b, s.X, s.y, 0.7) == pytest.approx(hinge_objective(w, b, s.X, s.y, 0.7), rel=1e-12)


def test_subgradient_vs_central_differences():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 6))
    y = np.where(rng.random(40) < 0.5, 1.0, -1.0)
    C = 0.8
    worst = 0.0
    for _ in range(100):
        theta = rng.normal(size=7)
        f = lambda t: objective(t[:6], t[6], X, y, C)
        gw, gb = subgradient(theta[:6], theta[6], X, y, C)
        g = np.append(gw, gb)
        fd = central_difference(f, theta, h=1e-5)
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
    assert worst < 1e-4


def test_optimal_bias_minimizes_hinge_sum():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        scores = rng.normal(size=n)
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        loss = lambda b: np.maximum(0, 1 - y * (scores + b)).sum()
        b = optimal_bias(scores, y)
        grid = np.linspace(-6, 6, 4001)
        assert loss(b) <= min(loss(g) for g in grid) + 1e-9


def test_training_reaches_qp_optimum():
    cp = pytest.importorskip("cvxpy")
    s = toy()
    model = train(s)
    w, b = cp.Variable(s.X.shape[1]), cp.Variable()
    hinge = cp.pos(1 - cp.multiply(s.y, s.X @ w + b))
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(w) + model.C * cp.sum(hinge)))
    prob.solve()
    assert model.final_objective == pytest.approx(objective(model.weights, model.bias, s.X, s.y, model.C))
    assert (model.final_objective - prob.value) / prob.value < 1e-3


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_objective_history_non_increasing(seed):
    model = train(toy(seed, n=80, d=8), max_epochs=300)
    h = np.array(model.objective_history)
    assert np.all(np.diff(h) <= 0)
    assert h[-1] <= h[0]


def test_scale_covariance():
    s = toy(2)
    base = train(s)
    for c in (0.25, 4.0):
        scaled = train(Sample(s.user_ids, s.X * c, s.y))
        assert scaled.C == pytest.approx(base.C / c**2)
        np.testing.assert_allclose(scaled.weights * c, base.weights, rtol=1e-9, atol=1e-12)
        np.testing.assert_array_equal(scaled.predict(s.X * c), base.predict(s.X))


def test_default_C():
    X = np.array([[1.0, 1.0], [2.0, 0.0]])
    assert default_C(X) == pytest.approx(1 / 3)
    assert default_C(np.zeros((3, 2))) == 1.0


def test_training_errors():
    s = toy(n=10, d=3)
    with pytest.raises(LearnError):
        train(s, C=0)
    with pytest.raises(LearnError):
        train(Sample(s.user_ids, s.X, s.y * 2))
    bad = s.X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(LearnError):
        train(Sample(s.user_ids, bad, s.y))


@given(st.lists(st.sampled_from([1.0, -1.0]), min_size=10, max_size=120), st.integers(2, 10), st.integers(0, 99))
def test_folds_partition_and_stratify(labels, k, seed):
    y = np.array(labels)
    folds = stratified_folds(y, k, seed)
    allidx = np.sort(np.concatenate(folds))
    assert np.array_equal(allidx, np.arange(len(y)))
    for cls in (1.0, -1.0):
        counts = [int(np.sum(y[f] == cls)) for f in folds]
        assert max(counts) - min(counts) <= 1
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_folds_deterministic_and_too_small():
    y = np.array([1.0, -1.0] * 20)
    assert all(np.array_equal(a, b) for a, b in zip(stratified_folds(y, 5, 3), stratified_folds(y, 5, 3)))
    with pytest.raises(LearnError):
        stratified_folds(y[:4], 5, 0)


def test_binary_metrics():
    yt = np.array([1, 1, -1, -1, 1.0])
    yp = np.array([1, -1, -1, 1, 1.0])
    acc, p, r = binary_metrics(yt, yp)
    assert (acc, p, r) == (0.6, 2 / 3, 2 / 3)
    acc, p, r = binary_metrics(np.array([-1.0, -1.0]), np.array([-1.0, -1.0]))
    assert (acc, p, r) == (1.0, None, None)


def test_eval_report_format():
    rep = EvalReport([FoldResult(1, 10, 0.7, 0.8, None), FoldResult(2, 10, 0.5, 0.6, 0.5)])
    assert rep.mean("accuracy") == pytest.approx(0.6)
    assert rep.std("accuracy") == pytest.approx(np.std([0.7, 0.5], ddof=1))
    assert rep.mean("recall") == 0.5
    buf = io.StringIO()
    rep.dump(buf)
    lines = buf.getvalue().splitlines()
    assert lines[1] == "1\t10\t70.0\t80.0\tNA"
    assert lines[-2].startswith("mean\t\t60.0")


def test_cross_validation_jobs_agree():
    s = toy(4, n=120, d=6)
    a = cross_validate(s, folds=5, seed=1, jobs=1)
    b = cross_validate(s, folds=5, seed=1, jobs=3)
    assert a == b and len(a.folds) == 5


def vector(uid, values):
    return FeatureVector(uid, "token", values)


def ulabel(uid, label, counts=(0, 0, 0)):
    return UserLabel(uid, label, dict(zip((B, O, A), counts)))


def test_build_sample_drops_on_target_and_unlabeled():
    vecs = [vector("a", {0: 2.0}), vector("b", {1: 1.0}), vector("c", {0: 1.0}), vector("d", {})]
    labels = {"a": ulabel("a", A), "b": ulabel("b", B), "c": ulabel("c", O)}
    s = build_sample(vecs, labels, 2)
    assert s.user_ids == ["a", "b"]
    np.testing.assert_array_equal(s.X, [[2.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(s.y, [1.0, -1.0])


def test_balance():
    y = np.array([1.0] * 5 + [-1.0] * 20)
    s = Sample([str(i) for i in range(25)], np.arange(25.0)[:, None], y)
    bal = balance(s, seed=9)
    assert int(np.sum(bal.y > 0)) == int(np.sum(bal.y < 0)) == 5
    assert set(bal.user_ids) >= {"0", "1", "2", "3", "4"}
    assert balance(s, seed=9).user_ids == bal.user_ids
    with pytest.raises(LearnError):
        balance(Sample(["a"], np.ones((1, 1)), np.array([1.0])), 0)


def test_model_round_trip():
    s = toy(5, n=60, d=4)
    model = train(s, feature_names=["oil", "rice", "tea", "added"], seed=3)
    buf = io.StringIO()
    model.dump(buf)
    assert buf.getvalue().startswith("dietmine-linear-model\t1\n")
    assert LinearModel.load(io.StringIO(buf.getvalue())).feature_names == sorted(model.feature_names)
    back = LinearModel.load(io.StringIO(buf.getvalue()), model.feature_names)
    np.testing.assert_array_equal(back.decision_function(s.X), model.decision_function(s.X))
    assert back.feature_names == model.feature_names
    buf2 = io.StringIO()
    back.dump(buf2)
    assert buf2.getvalue() == buf.getvalue()


def test_top_features_sign_and_ties():
    model = LinearModel(["a", "b", "c", "d", "e"], np.array([0.5, -0.2, 0.5, 0.0, -0.9]), 0.0, 1.0)
    pos, neg = top_features(model, k=3, examples={"a": "Apple pie"})
    assert [f.name for f in pos] == ["a", "c"]
    assert [f.name for f in neg] == ["e", "b"]
    assert pos[0].example == "Apple pie" and pos[1].example is None
    buf = io.StringIO()
    write_top_features(pos, neg, buf)
    assert buf.getvalue().splitlines()[1] == "1\ta\t0.5\tApple pie\te\t-0.9\t"


def labeled(uid, labels):
    start = dt.date(2015, 1, 5)
    return [LabeledDay(uid, start + dt.timedelta(days=i), 2000, 1000, lab) for i, lab in enumerate(labels)]


def test_margin_profile_and_extremes():
    X = np.array([[-3.0], [-1.0], [0.5], [2.0]])
    y = np.array([-1.0, 1.0, -1.0, 1.0])
    s = Sample(["w", "x", "y", "z"], X, y)
    model = LinearModel(["f"], np.array([2.0]), 0.0, 1.0)
    days = {
        "w": labeled("w", [B, B]),
        "x": labeled("x", [A, B, A]),
        "y": labeled("y", [B, A, B, O]),
        "z": labeled("z", [A]),
    }
    prof = margin_profile(model, s, days, groups=2)
    assert [s_[0] for s_ in prof.scores] == ["w", "x", "y", "z"]
    assert prof.scores[0][1] == pytest.approx(-3.0)  # distance = score / |w|
    g0, g1 = prof.groups
    assert g0.user_ids == ("w", "x") and g0.label == "0-50%"
    assert g0.below == pytest.approx((1.0 + 1 / 3) / 2)
    assert g1.mean_days == pytest.approx(2.5)
    labels = {
        "w": ulabel("w", B, (2, 0, 0)), "x": ulabel("x", A, (1, 0, 2)),
        "y": ulabel("y", B, (2, 1, 1)), "z": ulabel("z", A, (0, 0, 1)),
    }
    ext = error_extremes(model, s, labels)
    assert ext["farthest_false_positive"].user_id == "y"
    assert ext["farthest_false_negative"].user_id == "x"
    assert ext["most_above"].user_id == "z" and ext["most_below"].user_id == "w"
    assert ext["farthest_false_negative"].modal_fraction == pytest.approx(2 / 3)


def test_misclassified_users_have_weaker_labels():
    # users whose day mix is close to even are the ones the model gets wrong
    rng = np.random.default_rng(0)
    n = 400
    share = rng.uniform(0.0, 1.0, n)  # fraction of above days
    X = np.column_stack([share * 10 + rng.normal(0, 1.5, n), rng.normal(0, 1, n)])
    y = np.where(share > 0.5, 1.0, -1.0)
    s = Sample([str(i) for i in range(n)], X, y)
    model = train(s)
    wrong = model.predict(X) != y
    purity = np.maximum(share, 1 - share)
    assert wrong.any()
    assert purity[wrong].mean() < purity[~wrong].mean()
