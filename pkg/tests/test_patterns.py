import numpy as np
import pytest
from scipy import stats

from mlspike.metrics import vrd
from mlspike.network import raster
from mlspike.patterns import (
    MAX_REJECTIONS, XOR_TIMES, InfeasibleTargetsError, PatternSet, check_targets, fixed_target_set,
    gen_class_targets, gen_mapping_set, gen_poisson_input, gen_poisson_pattern, gen_synthetic_dataset,
    gen_xor_set, jitter, jitter_raster, max_single_spike_classes,
)


def _count_distribution(rate=6.0, T=500, tau_r=10.0, gap_cap=400, max_count=40):
    """Exact spike-count law of the refractory process by forward recursion."""
    base = rate / 1000.0
    gaps = np.arange(1, gap_cap + 1)
    p_spike = base * (1 - np.exp(-gaps / tau_r))
    p_spike[-1] = base  # last slot stands for "no spike yet" as well
    mass = np.zeros((gap_cap, max_count + 1))
    mass[-1, 0] = 1.0
    for _ in range(T):
        fire = mass * p_spike[:, None]
        stay = mass - fire
        nxt = np.zeros_like(mass)
        nxt[1:] += stay[:-1]
        nxt[-1] += stay[-1]
        nxt[0, 1:] += fire.sum(axis=0)[:-1]
        mass = nxt
    return mass.sum(axis=0)


def test_poisson_rate_zero_is_empty():
    assert gen_poisson_input(0.0, rng=np.random.default_rng(0)).size == 0
    with pytest.raises(ValueError):
        gen_poisson_input(-1.0)


def test_poisson_counts_follow_refractory_law():
    trains = gen_poisson_pattern(10_000, rng=np.random.default_rng(1))
    counts = np.array([t.size for t in trains])
    assert 2.2 <= counts.mean() <= 3.0
    law = _count_distribution()
    edges = 9  # pool counts >= 9 into one bin
    expected = np.append(law[:edges], law[edges:].sum()) * counts.size
    observed = np.append(np.bincount(counts, minlength=edges)[:edges], (counts >= edges).sum())
    chi2 = ((observed - expected) ** 2 / expected).sum()
    assert chi2 < stats.chi2.ppf(0.99, df=edges)


def test_poisson_refractory_suppression():
    # adjacent-step pairs are suppressed by 1 - exp(-0.1) relative to independence
    trains = gen_poisson_pattern(4000, rate=100.0, T=500.0, rng=np.random.default_rng(2))
    singles = sum(t.size for t in trains)
    pairs = sum(np.count_nonzero(np.diff(t) == 1.0) for t in trains)
    p = 0.1
    # conditional probability of a spike one step after a spike
    assert pairs / singles == pytest.approx(p * (1 - np.exp(-0.1)), rel=0.15)


def test_poisson_grid_aligned_and_sorted():
    for t in gen_poisson_pattern(50, rate=30.0, rng=np.random.default_rng(3), dt=0.5):
        assert np.all(np.diff(t) > 0)
        np.testing.assert_array_equal(t, np.round(t * 2) / 2)
        assert t.size == 0 or (t.min() >= 0 and t.max() < 500)


def test_jitter_identity_and_copy():
    pattern = gen_poisson_pattern(20, rng=np.random.default_rng(0))
    before = [t.copy() for t in pattern]
    same = jitter(pattern, 0.0, np.random.default_rng(1))
    for a, b in zip(same, pattern):
        np.testing.assert_array_equal(a, b)
    jitter(pattern, 10.0, np.random.default_rng(1))
    for a, b in zip(before, pattern):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        jitter(pattern, -1.0, np.random.default_rng(1))


def test_jitter_spread():
    # one spike per train keeps the identity of each displacement
    pattern = [np.array([250.0])] * 100_000
    moved = np.concatenate(jitter(pattern, 10.0, np.random.default_rng(4)))
    assert np.std(moved - 250.0) == pytest.approx(10.0, rel=0.02)


def test_jitter_boundaries():
    pattern = [np.array([1.0]), np.array([498.0])]
    rng = np.random.default_rng(5)
    for _ in range(50):
        out = jitter(pattern, 200.0, rng)
        assert out[0][0] >= 0.0 and out[1][0] <= 499.0
    dropped = [jitter(pattern, 200.0, rng, drop=True) for _ in range(50)]
    assert any(o[0].size == 0 for o in dropped)
    assert all(t.size == 0 or (t.min() >= 0 and t.max() < 500) for o in dropped for t in o)


def test_jitter_sorted_per_train():
    pattern = gen_poisson_pattern(30, rate=40.0, rng=np.random.default_rng(6))
    for t in jitter(pattern, 15.0, np.random.default_rng(7)):
        assert np.all(np.diff(t) >= 0)


def test_jitter_raster_matches_jitter():
    pattern = gen_poisson_pattern(30, rng=np.random.default_rng(8))
    for drop in (False, True):
        a = jitter_raster(pattern, 12.0, np.random.default_rng(9), drop=drop)
        b = raster(jitter(pattern, 12.0, np.random.default_rng(9), drop=drop), 1.0, 500)
        np.testing.assert_array_equal(a, b)


def test_class_targets_constraints():
    rng = np.random.default_rng(10)
    for n_s in (1, 3, 5):
        targets = gen_class_targets(10, 2, n_s, rng=rng)
        assert len(targets) == 10 and all(len(c) == 2 for c in targets)
        assert check_targets(targets, n_s)
        assert min(t.min() for c in targets for t in c) >= 40.0


def test_two_classes_are_separated():
    rng = np.random.default_rng(11)
    for _ in range(200):
        (a,), (b,) = gen_class_targets(2, 1, 1, rng=rng)
        assert abs(a[0] - b[0]) > 10 * np.log(2)
        assert vrd(a, b) > 0.5


def test_single_class_is_unconstrained_by_separation():
    (train,), = gen_class_targets(1, 1, 4, rng=np.random.default_rng(12))
    assert train.size == 4 and np.min(np.diff(train)) >= 10.0


def test_single_spike_class_bound():
    assert max_single_spike_classes() == 66
    # the bound is attainable: every 7th grid slot from 40 ms
    packed = [[np.array([40.0 + 7 * k])] for k in range(66)]
    assert check_targets(packed, 1)
    with pytest.raises(InfeasibleTargetsError):
        gen_class_targets(67, 1, 1, rng=np.random.default_rng(0))


def test_infeasible_targets():
    with pytest.raises(InfeasibleTargetsError):
        gen_class_targets(2, 1, 46, rng=np.random.default_rng(0), max_rejections=200)
    with pytest.raises(ValueError):
        gen_class_targets(0, 1, 1)
    assert MAX_REJECTIONS == 1_000_000


def test_check_targets_rejects_violations():
    assert not check_targets([[np.array([30.0])]], 1)
    assert not check_targets([[np.array([100.0, 105.0])]], 2)
    assert not check_targets([[np.array([100.0])], [np.array([103.0])]], 1)
    assert check_targets([[np.array([100.0])], [np.array([120.0])]], 1)


def test_mapping_set():
    ps = gen_mapping_set(20, 10, n_o=2, n_s=2, rng=np.random.default_rng(13))
    assert ps.p == 20 and ps.c == 10 and ps.n_o == 2
    assert np.bincount(ps.labels).tolist() == [2] * 10
    assert ps.rasters().shape == (20, 100, 500)
    assert len(ps.targets_for(3)) == 2


def test_xor_set():
    ps = gen_xor_set(np.random.default_rng(14))
    assert ps.p == 4 and ps.c == 2
    assert [int(l) for l in ps.labels] == [0, 1, 1, 0]
    assert XOR_TIMES[1] == 167.0 and XOR_TIMES[0] == 334.0
    np.testing.assert_array_equal(ps.class_targets[1][0], [167.0])
    np.testing.assert_array_equal(ps.class_targets[0][0], [334.0])
    # {0,1} and {1,0} reuse the same bit codes in swapped groups
    p01, p10 = ps.inputs[1], ps.inputs[2]
    for i in range(50):
        np.testing.assert_array_equal(p01[i], p10[50 + i])
        np.testing.assert_array_equal(p01[50 + i], p10[i])
    for i in range(50):
        np.testing.assert_array_equal(ps.inputs[0][i], ps.inputs[0][50 + i])


def test_synthetic_dataset_counts():
    train, test = gen_synthetic_dataset(5.0, n_s=3, rng=np.random.default_rng(15))
    assert train.p == 150 and test.p == 250 and train.c == 10
    assert np.bincount(train.labels).tolist() == [15] * 10
    assert all(t.size == 3 for c in train.class_targets for t in c)
    assert train.class_targets is test.class_targets


def test_synthetic_dataset_noise_free_duplicates():
    train, test = gen_synthetic_dataset(0.0, rng=np.random.default_rng(16), n_train=3, n_test=2)
    for k in range(10):
        group = [p for p, l in zip(train.inputs + test.inputs, list(train.labels) + list(test.labels)) if l == k]
        for other in group[1:]:
            for a, b in zip(group[0], other):
                np.testing.assert_array_equal(a, b)


def test_synthetic_dataset_spread_grows_with_sigma():
    def spread(sigma):
        train, _ = gen_synthetic_dataset(sigma, rng=np.random.default_rng(17), n_train=4, n_test=1)
        same = [p for p, l in zip(train.inputs, train.labels) if l == 0]
        return np.mean([vrd(a, b) for i in range(4) for j in range(i) for a, b in zip(same[i], same[j])])

    d = [spread(s) for s in (2.0, 10.0, 20.0)]
    assert d[0] < d[1] < d[2]


def test_roundtrip_and_determinism(tmp_path):
    a = gen_mapping_set(6, 3, n_s=2, rng=np.random.default_rng(18))
    b = gen_mapping_set(6, 3, n_s=2, rng=np.random.default_rng(18))
    a.save(tmp_path / "p.json")
    back = PatternSet.load(tmp_path / "p.json")
    for other in (b, back):
        np.testing.assert_array_equal(other.labels, a.labels)
        for x, y in zip(other.inputs, a.inputs):
            for s, t in zip(x, y):
                np.testing.assert_array_equal(s, t)
        for x, y in zip(other.class_targets, a.class_targets):
            for s, t in zip(x, y):
                np.testing.assert_array_equal(s, t)


def test_fixed_target_set():
    ps = fixed_target_set([[83.0, 166.0]], rng=np.random.default_rng(19))
    assert ps.p == 1 and ps.n_s == 2
    np.testing.assert_array_equal(ps.targets_for(0)[0], [83.0, 166.0])
