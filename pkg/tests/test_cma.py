import numpy as np
import pytest

from qdbench import CmaEs, UsageError


def sphere(x):
    return float(np.sum(np.asarray(x) ** 2))


def minimize_sphere(seed, d=10, lam=20, budget=10_000, target=1e-10):
    """Plain-objective loop: rank ascending, mu = lam // 2 parents."""
    rng = np.random.default_rng(seed)
    es = CmaEs(d=d, sigma0=0.3, lam=lam, rng=rng)
    es.reset(np.full(d, 0.5))
    best = np.inf
    evals = 0
    while evals < budget and best >= target:
        X = es.ask(lam)
        f = np.array([sphere(x) for x in X])
        evals += lam
        best = min(best, float(f.min()))
        es.tell(X[np.argsort(f)][: lam // 2])
    return best, evals


class TestAsk:
    def test_identity_covariance_is_isotropic(self):
        rng = np.random.default_rng(0)
        es = CmaEs(d=4, sigma0=0.1, lam=20, rng=rng)
        es.reset(np.full(4, 0.5))
        X = es.ask(50_000)
        assert np.abs(X.mean(axis=0) - 0.5).max() < 0.005
        assert np.abs(X.std(axis=0) - 0.1).max() < 0.005
        corr = np.corrcoef(X.T)
        assert np.abs(corr - np.eye(4)).max() < 0.02

    def test_tiny_sigma_collapses_to_mean(self):
        rng = np.random.default_rng(1)
        es = CmaEs(d=3, sigma0=1e-12, lam=10, rng=rng)
        es.reset(np.array([0.2, 0.5, 0.8]))
        X = es.ask(100)
        assert np.abs(X - np.array([0.2, 0.5, 0.8])).max() < 1e-9

    def test_sample_covariance_matches_state(self):
        rng = np.random.default_rng(2)
        es = CmaEs(d=4, sigma0=0.1, lam=20, rng=rng)
        es.reset(np.full(4, 0.5))
        A = np.random.default_rng(3).standard_normal((4, 4))
        C = A @ A.T + 0.5 * np.eye(4)
        es.C = (C + C.T) / 2 / np.abs(C).max()
        es._eigen_stale = True
        X = es.ask(100_000)  # unconstrained: mean interior, no clipping
        S = np.cov(X.T)
        target = es.sigma**2 * es.C
        err = np.linalg.norm(S - target) / np.linalg.norm(target)
        assert err < 0.05

    def test_bounds_clip(self):
        rng = np.random.default_rng(4)
        es = CmaEs(d=2, sigma0=5.0, lam=10, rng=rng)
        es.reset(np.full(2, 0.5))
        X = es.ask(1000, lower=0.0, upper=1.0)
        assert X.min() >= 0.0 and X.max() <= 1.0


class TestTell:
    def test_covariance_stays_spd(self):
        rng = np.random.default_rng(5)
        es = CmaEs(d=6, sigma0=0.3, lam=12, rng=rng)
        es.reset(np.full(6, 0.5))
        for _ in range(200):
            X = es.ask(12)
            f = np.array([sphere(x - 0.3) for x in X])
            es.tell(X[np.argsort(f)][:6])
            eigvals = np.linalg.eigvalsh(es.C)
            assert eigvals.min() > 0
            assert np.abs(es.C - es.C.T).max() < 1e-9

    def test_single_parent_is_valid(self):
        rng = np.random.default_rng(6)
        es = CmaEs(d=3, sigma0=0.2, lam=10, rng=rng)
        X = es.ask(10)
        es.tell(X[:1])
        assert np.isfinite(es.mean).all()

    def test_rejects_bad_dimension(self):
        rng = np.random.default_rng(7)
        es = CmaEs(d=3, sigma0=0.2, lam=10, rng=rng)
        with pytest.raises(UsageError):
            es.tell(np.zeros((2, 5)))

    def test_rejects_too_many_parents(self):
        rng = np.random.default_rng(8)
        es = CmaEs(d=3, sigma0=0.2, lam=4, rng=rng)
        with pytest.raises(UsageError):
            es.tell(np.zeros((5, 3)))


class TestReset:
    def test_reset_is_complete(self):
        rng = np.random.default_rng(9)
        es = CmaEs(d=4, sigma0=0.25, lam=8, rng=rng)
        for _ in range(30):
            X = es.ask(8)
            es.tell(X[:4])
        mean = np.array([0.1, 0.2, 0.3, 0.4])
        es.reset(mean)
        assert (es.mean == mean).all()
        assert es.sigma == 0.25
        assert (es.C == np.eye(4)).all()
        assert (es.p_sigma == 0).all() and (es.p_c == 0).all()

    def test_needs_restart_on_degenerate_state(self):
        rng = np.random.default_rng(10)
        es = CmaEs(d=3, sigma0=0.2, lam=8, rng=rng)
        assert not es.needs_restart()
        es.sigma = 1e-13
        assert es.needs_restart()
        es.reset(np.full(3, 0.5))
        es.mean[0] = np.nan
        assert es.needs_restart()
        es.reset(np.full(3, 0.5))
        es.C = np.diag([1.0, 1.0, 1e-15])
        es._eigen_stale = True
        assert es.needs_restart()


class TestConvergence:
    def test_sphere_single_seed(self):
        best, evals = minimize_sphere(seed=0)
        assert best < 1e-10
        assert evals <= 10_000
