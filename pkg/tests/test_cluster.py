import numpy as np
import pytest

from psc.cluster import (
    Partition,
    PscConfig,
    _argmin_labels,
    _repair,
    assign,
    cluster_press,
    influence_matrix,
    objective,
    random_partition,
    refit,
    run_psc,
)
from psc.errors import AssignmentError, ClusteringError, ValidationError
from psc.metrics import accuracy
from psc.pca import fit_pca, reconstruction_error
from psc.press import press_closed_form
from psc.synth import ScenarioSpec, generate


@pytest.fixture(scope="module")
def scenario_a():
    return generate(ScenarioSpec("a", seed=1))


@pytest.fixture(scope="module")
def scenario_c():
    return generate(ScenarioSpec("c", seed=2))


def true_models(ds):
    return [fit_pca(ds.data[ds.labels == k], r) for k, r in enumerate(ds.spec.ranks, start=1)]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"k": 0},
        {"k": 2, "ranks": 0},
        {"k": 2, "ranks": (1, 1, 1)},
        {"k": 2, "restarts": 0},
        {"k": 2, "gammas": 1.0, "nonzeros": 3},
        {"k": 2, "gammas": -1.0},
        {"k": 2, "seed": -1},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        PscConfig(**kwargs)


def test_config_broadcasts_scalars():
    cfg = PscConfig(k=3, ranks=2, gammas=0.5)
    assert cfg.ranks == (2, 2, 2) and cfg.gammas == (0.5, 0.5, 0.5)
    np.testing.assert_array_equal(cfg.min_sizes(), [4, 4, 4])


def test_partition_invariants():
    part = Partition(np.array([1, 2, 2, 3]), 3)
    np.testing.assert_array_equal(part.sizes, [1, 2, 1])
    assert part.sizes.sum() == 4
    np.testing.assert_array_equal(part.members(1), [1, 2])
    with pytest.raises(ValidationError):
        Partition(np.array([0, 1]), 2)


def test_assign_noiseless_lines(scenario_a):
    part = assign(scenario_a.data, true_models(scenario_a))
    assert accuracy(scenario_a.labels, part.labels) == 1.0


def test_assign_single_model(scenario_a):
    part = assign(scenario_a.data, [fit_pca(scenario_a.data, 1)])
    assert np.all(part.labels == 1)


def test_assign_scenario_b_true_models():
    ds = generate(ScenarioSpec("b", seed=4))
    part = assign(ds.data, true_models(ds))
    assert accuracy(ds.labels, part.labels) >= 0.95


def test_argmin_tie_and_failure():
    mags = np.array([[1.0, 1.0], [2.0, 1.0], [np.inf, 3.0]])
    np.testing.assert_array_equal(_argmin_labels(mags), [0, 1, 1])
    with pytest.raises(AssignmentError) as info:
        _argmin_labels(np.array([[1.0, 2.0], [np.inf, np.inf]]))
    assert info.value.point == 1


def test_refit_true_planes(scenario_c):
    cfg = PscConfig(k=2, ranks=2)
    models = refit(scenario_c.data, Partition(scenario_c.labels, 2), cfg)
    for k, m in enumerate(models, start=1):
        assert reconstruction_error(scenario_c.data[scenario_c.labels == k], m) < 1e-10


def test_refit_single_cluster_matches_global_pca(rng):
    X = rng.standard_normal((30, 4))
    part = Partition(np.ones(30, dtype=int), 1)
    (m,) = refit(X, part, PscConfig(k=1, ranks=2))
    assert cluster_press(X, part, [m])[0] == pytest.approx(press_closed_form(X, fit_pca(X, 2)).press, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_refit_never_increases_reconstruction(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 5))
    cfg = PscConfig(k=2, ranks=2)
    part = random_partition(40, cfg, rng)
    stale = [fit_pca(rng.standard_normal((10, 5)), 2) for _ in range(2)]
    fresh = refit(X, part, cfg)

    def total(models):
        return sum(reconstruction_error(X[part.members(c)], m) * part.sizes[c] for c, m in enumerate(models))

    assert total(fresh) <= total(stale) + 1e-12


def test_refit_undersized_cluster(rng):
    X = rng.standard_normal((10, 3))
    with pytest.raises(ClusteringError):
        refit(X, Partition(np.array([1] * 8 + [2] * 2), 2), PscConfig(k=2, ranks=1))


def _median_support_overlap(coord_range, seeds):
    overlaps = []
    for seed in seeds:
        ds = generate(ScenarioSpec("sparse_c", seed=seed, coord_range=coord_range))
        cfg = PscConfig(k=2, ranks=2, nonzeros=10)
        models = refit(ds.data, Partition(ds.labels, 2), cfg)
        # components of equal variance come out in either order, so compare per-cluster unions
        for m, true in zip(models, ds.supports):
            selected = set(np.concatenate(m.support()).tolist())
            wanted = set(np.concatenate(true).tolist())
            overlaps.append(10 * len(selected & wanted) / len(wanted))
    return np.median(overlaps)


@pytest.mark.xfail(strict=True, reason="signal of unit-range coordinates sits below the noise floor of variance 0.5")
def test_sparse_refit_support_overlap():
    assert _median_support_overlap(None, range(20)) >= 8


def test_sparse_refit_support_overlap_with_stronger_signal():
    assert _median_support_overlap(8.0, range(20)) >= 8


def test_objective_zero_on_truth(scenario_a):
    part = Partition(scenario_a.labels, 2)
    assert objective(scenario_a.data, part, true_models(scenario_a)) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_assignment_does_not_increase_objective(seed):
    ds = generate(ScenarioSpec("d", seed=seed))
    cfg = PscConfig(k=3, ranks=(1, 2, 3))
    part = random_partition(ds.data.shape[0], cfg, np.random.default_rng(seed))
    models = refit(ds.data, part, cfg)
    before = objective(ds.data, part, models)
    after = objective(ds.data, assign(ds.data, models), models)
    assert after <= before


def test_trace_matches_independent_replay(scenario_c):
    cfg = PscConfig(k=2, ranks=2, restarts=1, seed=5)
    res = run_psc(scenario_c.data, cfg)
    assert res.repairs == 0
    X = scenario_c.data
    part = random_partition(X.shape[0], cfg, np.random.default_rng(5))
    models = refit(X, part, cfg)
    trace = [objective(X, part, models)]
    for _ in range(cfg.max_iter):
        new = assign(X, models)
        if np.array_equal(new.labels, part.labels):
            break
        part = new
        models = refit(X, part, cfg)
        trace.append(objective(X, part, models))
        if len(trace) == len(res.objective_trace):
            break
    np.testing.assert_allclose(res.objective_trace, trace, rtol=1e-12, atol=1e-300)
    assert res.objective == pytest.approx(objective(X, res.partition, res.models), rel=1e-12)


def test_run_k_one(rng):
    X = rng.standard_normal((20, 3))
    res = run_psc(X, PscConfig(k=1, ranks=2))
    assert res.iterations == 1 and res.converged
    assert np.all(res.labels == 1)
    np.testing.assert_allclose(np.abs(res.models[0].loadings), np.abs(fit_pca(X, 2).loadings))


def test_run_deterministic(scenario_c):
    cfg = PscConfig(k=2, ranks=2, restarts=3, seed=11)
    a = run_psc(scenario_c.data, cfg)
    b = run_psc(scenario_c.data, cfg)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.objective_trace == b.objective_trace
    assert a.restart_index == b.restart_index


def test_run_permutation_equivariant():
    ds = generate(ScenarioSpec("d", seed=6))
    cfg = PscConfig(k=3, ranks=2, restarts=1, seed=0, max_iter=30)
    init = random_partition(ds.data.shape[0], cfg, np.random.default_rng(0))
    perm = np.array([3, 1, 2])
    a = run_psc(ds.data, cfg, init)
    b = run_psc(ds.data, cfg, Partition(perm[init.index], 3))
    np.testing.assert_array_equal(perm[a.partition.index], b.labels)
    np.testing.assert_allclose(a.objective_trace, b.objective_trace, rtol=1e-10)


def test_run_accuracy_scenario_c(scenario_c):
    res = run_psc(scenario_c.data, PscConfig(k=2, ranks=2, restarts=5, seed=0))
    assert accuracy(scenario_c.labels, res.labels) >= 0.98


def test_run_traces_and_termination():
    ds = generate(ScenarioSpec("b", seed=3))
    res = run_psc(ds.data, PscConfig(k=2, ranks=(1, 2), restarts=3, seed=3, max_iter=50))
    assert res.iterations <= 50
    assert len(res.press_trace) == len(res.objective_trace)
    for a, b in zip(res.assignment_trace, res.objective_trace):
        assert a <= b


def test_run_rejects_too_few_points(rng):
    with pytest.raises(ValidationError):
        run_psc(rng.standard_normal((5, 3)), PscConfig(k=2, ranks=1))


def test_run_rejects_mismatched_initial(scenario_a):
    with pytest.raises(ValidationError):
        run_psc(scenario_a.data, PscConfig(k=2), Partition(np.ones(5, dtype=int), 2))


def test_random_partition_sizes():
    cfg = PscConfig(k=3, ranks=(1, 2, 3))
    part = random_partition(30, cfg, np.random.default_rng(0))
    assert np.all(part.sizes >= cfg.min_sizes())
    again = random_partition(30, cfg, np.random.default_rng(0))
    np.testing.assert_array_equal(part.labels, again.labels)


def test_random_partition_impossible():
    with pytest.raises(ClusteringError):
        random_partition(7, PscConfig(k=2, ranks=2), np.random.default_rng(0))


def test_repair_refills_small_cluster():
    n, k = 40, 2
    cfg = PscConfig(k=k, ranks=1)
    index = np.zeros(n, dtype=int)
    index[0] = 1
    mags = np.column_stack([np.arange(n, dtype=float), np.full(n, 5.0)])
    fixed = _repair(index, mags, cfg)
    sizes = np.bincount(fixed, minlength=k)
    # quota ceil(40 / 20) = 2 versus deficit 2: two points, the most influential, move
    assert sizes.tolist() == [37, 3]
    assert set(np.flatnonzero(fixed == 1).tolist()) == {0, 39, 38}


def test_repair_impossible():
    cfg = PscConfig(k=2, ranks=1)
    index = np.zeros(4, dtype=int)
    assert _repair(index, np.ones((4, 2)), cfg) is None


def test_influence_matrix_non_finite_to_inf(scenario_a):
    models = true_models(scenario_a)
    mags = influence_matrix(scenario_a.data, models)
    assert mags.shape == (200, 2) and np.all(mags >= 0)
