"""Covariance matrix adaptation evolution strategy core.

A (mu/mu_w, lambda) strategy with rank-one and rank-mu covariance updates,
cumulative step-size adaptation and non-negative recombination weights. The
ranking of candidates is the caller's job: ``tell`` receives the selected
parents already sorted best-first, which lets the improvement emitter rank by
archive outcomes while a plain optimization loop ranks by raw objective.

Selection constants (weights, c_sigma, d_sigma, c_c, c_1, c_mu) follow the
standard tutorial defaults. Because the parent count can change from one
generation to the next (the improvement emitter's filter rule), they are
recomputed inside each ``tell`` from the current (lambda, mu) pair.
"""
from __future__ import annotations

import numpy as np

from .errors import UsageError

# Restart guards: step size floor and covariance condition ceiling.
SIGMA_FLOOR = 1e-12
CONDITION_LIMIT = 1e14


class CmaEs:
    """Sampling distribution state plus the ask/tell update cycle.

    ``lam`` is the notional population size used in the selection constants;
    it normally equals the per-ask batch size. ``ask``/``tell`` must alternate,
    with ``reset`` allowed at any point between generations.
    """

    def __init__(self, d: int, sigma0: float, lam: int, rng: np.random.Generator):
        if sigma0 <= 0:
            raise UsageError(f"sigma0 must be positive, got {sigma0}")
        if lam < 2:
            raise UsageError(f"population size must be >= 2, got {lam}")
        self.d = d
        self.sigma0 = float(sigma0)
        self.lam = int(lam)
        self.rng = rng
        self.chi_n = d**0.5 * (1 - 1 / (4 * d) + 1 / (21 * d**2))
        self.reset(np.full(d, 0.5))

    def reset(self, mean: np.ndarray) -> None:
        """Restart the distribution at ``mean``: sigma0, identity C, zero paths."""
        mean = np.asarray(mean, dtype=float)
        if mean.shape != (self.d,):
            raise UsageError(f"mean has shape {mean.shape}, expected ({self.d},)")
        self.mean = mean.copy()
        self.sigma = self.sigma0
        self.C = np.eye(self.d)
        self.p_sigma = np.zeros(self.d)
        self.p_c = np.zeros(self.d)
        self.generation = 0
        self._eigen_stale = True
        self._refresh_eigen()

    def _refresh_eigen(self) -> None:
        if not self._eigen_stale:
            return
        eigvals, eigvecs = np.linalg.eigh(self.C)
        self._eigvals = eigvals
        self._eigvecs = eigvecs
        self._eigen_stale = False

    @property
    def eigenvalues(self) -> np.ndarray:
        self._refresh_eigen()
        return self._eigvals

    def condition_number(self) -> float:
        self._refresh_eigen()
        smallest = float(self._eigvals[0])
        if smallest <= 0:
            return np.inf
        return float(self._eigvals[-1]) / smallest

    def ask(self, n: int, lower=None, upper=None) -> np.ndarray:
        """Sample n candidates from N(mean, sigma^2 C), optionally box-clipped."""
        self._refresh_eigen()
        z = self.rng.standard_normal((n, self.d))
        scale = np.sqrt(np.maximum(self._eigvals, 0.0))
        x = self.mean + self.sigma * (z * scale) @ self._eigvecs.T
        if lower is not None or upper is not None:
            x = np.clip(x, lower, upper)
        return x

    def tell(self, parents: np.ndarray) -> None:
        """Advance one generation using the selected parents, best first.

        ``parents`` is a (mu, d) array of evaluated candidate genotypes from the
        matching ask, already ranked. mu may be any count in [1, lam].
        """
        parents = np.atleast_2d(np.asarray(parents, dtype=float))
        mu = parents.shape[0]
        if parents.shape[1] != self.d:
            raise UsageError(f"parents have dimension {parents.shape[1]}, expected {self.d}")
        if mu < 1 or mu > self.lam:
            raise UsageError(f"parent count {mu} outside [1, {self.lam}]")
        d, lam = self.d, self.lam

        raw = np.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
        raw = np.maximum(raw, 0.0)  # parents beyond (lam+1)/2 get zero weight
        weights = raw / raw.sum()
        mu_eff = 1.0 / np.sum(weights**2)

        c_sigma = (mu_eff + 2) / (d + mu_eff + 5)
        d_sigma = 1 + 2 * max(0.0, np.sqrt((mu_eff - 1) / (d + 1)) - 1) + c_sigma
        c_c = (4 + mu_eff / d) / (d + 4 + 2 * mu_eff / d)
        c_1 = 2 / ((d + 1.3) ** 2 + mu_eff)
        c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((d + 2) ** 2 + mu_eff))

        self._refresh_eigen()
        inv_sqrt = (self._eigvecs / np.sqrt(self._eigvals)) @ self._eigvecs.T

        old_mean = self.mean
        self.mean = weights @ parents
        y = (self.mean - old_mean) / self.sigma

        self.p_sigma = (1 - c_sigma) * self.p_sigma + np.sqrt(
            c_sigma * (2 - c_sigma) * mu_eff
        ) * (inv_sqrt @ y)
        self.generation += 1
        ps_norm_sq = float(self.p_sigma @ self.p_sigma)
        # Discount for the paths' zero initialization when deciding h_sigma.
        correction = 1 - (1 - c_sigma) ** (2 * self.generation)
        h_sigma = ps_norm_sq / d / correction < 2 + 4 / (d + 1)
        self.p_c = (1 - c_c) * self.p_c + h_sigma * np.sqrt(
            c_c * (2 - c_c) * mu_eff
        ) * y

        dy = (parents - old_mean) / self.sigma
        c_1a = c_1 * (1 - (1 - h_sigma) * c_c * (2 - c_c))
        rank_mu = (weights[:, None] * dy).T @ dy
        self.C = (
            (1 - c_1a - c_mu) * self.C
            + c_1 * np.outer(self.p_c, self.p_c)
            + c_mu * rank_mu
        )
        self.C = (self.C + self.C.T) / 2

        # Capped exponent keeps a single pathological generation from blowing
        # the step size up by more than a factor of e.
        arg = (c_sigma / d_sigma) * (np.sqrt(ps_norm_sq) / self.chi_n - 1)
        self.sigma *= float(np.exp(min(1.0, arg)))
        self._eigen_stale = True

    def needs_restart(self) -> bool:
        """True when the state is degenerate and should be reset."""
        finite = (
            np.isfinite(self.mean).all()
            and np.isfinite(self.sigma)
            and np.isfinite(self.C).all()
            and np.isfinite(self.p_sigma).all()
            and np.isfinite(self.p_c).all()
        )
        if not finite:
            return True
        if self.sigma < SIGMA_FLOOR:
            return True
        return self.condition_number() > CONDITION_LIMIT
