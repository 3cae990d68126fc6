"""Bounded hyperparameter search spaces and the unit-cube mapping.

Optimizers work on genotypes: vectors in [0, 1]^d. A ``SearchSpace`` converts
them to configurations on the original parameter scales (linear or log ranges,
with integers rounded half away from zero and clamped) and back.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

Configuration = dict[str, float]

CONTINUOUS = "continuous"
INTEGER = "integer"


@dataclass(frozen=True)
class ParamDef:
    """One bounded parameter: continuous or integer, optionally on a log scale."""

    name: str
    kind: str
    lower: float
    upper: float
    log_scale: bool = False

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, INTEGER):
            raise UsageError(f"unknown parameter kind {self.kind!r} for {self.name!r}")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise UsageError(f"bounds of {self.name!r} must be finite")
        if not self.lower < self.upper:
            raise UsageError(
                f"lower bound must be below upper bound for {self.name!r} "
                f"({self.lower} >= {self.upper})"
            )
        if self.log_scale and self.lower <= 0:
            raise UsageError(f"log-scaled parameter {self.name!r} needs lower > 0")
        if self.kind == INTEGER and self.upper - self.lower < 1:
            raise UsageError(f"integer parameter {self.name!r} spans less than one unit")


class SearchSpace:
    """Ordered collection of ``ParamDef`` with unit-cube (de)normalization.

    Immutable after construction; all operations are pure functions of the
    arguments, so instances may be shared freely across threads.
    """

    def __init__(self, params: list[ParamDef] | tuple[ParamDef, ...]):
        params = tuple(params)
        if not params:
            raise UsageError("a search space needs at least one parameter")
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise UsageError(f"duplicate parameter names in {names}")
        self.params = params
        self.names = tuple(names)
        self.d = len(params)
        # Cached per-dimension vectors for the vectorized code paths.
        self._lo = np.array([p.lower for p in params], dtype=float)
        self._hi = np.array([p.upper for p in params], dtype=float)
        self._log = np.array([p.log_scale for p in params], dtype=bool)
        self._int = np.array([p.kind == INTEGER for p in params], dtype=bool)
        self._ln_lo = np.where(self._log, np.log(np.where(self._log, self._lo, 1.0)), 0.0)
        self._ln_hi = np.where(self._log, np.log(np.where(self._log, self._hi, 1.0)), 0.0)

    def __repr__(self):
        return f"SearchSpace({list(self.names)})"

    def __eq__(self, other):
        return isinstance(other, SearchSpace) and self.params == other.params

    def __hash__(self):
        return hash(self.params)

    def _check_dim(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.d,):
            raise UsageError(f"genotype has shape {g.shape}, expected ({self.d},)")
        return g

    def denormalize_array(self, genotypes: np.ndarray) -> np.ndarray:
        """Map an (n, d) array of unit-cube rows to original-scale values.

        Log-scaled dimensions interpolate in log space; integer dimensions are
        rounded half away from zero after the re-transformation, then clamped.
        """
        g = np.asarray(genotypes, dtype=float)
        squeeze = g.ndim == 1
        g = np.atleast_2d(g)
        if g.shape[1] != self.d:
            raise UsageError(f"genotypes have {g.shape[1]} columns, expected {self.d}")
        if not np.isfinite(g).all():
            raise UsageError("genotype contains non-finite components")
        if (g < 0).any() or (g > 1).any():
            raise UsageError("genotype components must lie in [0, 1]")
        lin = self._lo + g * (self._hi - self._lo)
        if self._log.any():
            loggy = np.exp(self._ln_lo + g * (self._ln_hi - self._ln_lo))
            values = np.where(self._log, loggy, lin)
        else:
            values = lin
        if self._int.any():
            rounded = np.where(values >= 0, np.floor(values + 0.5), np.ceil(values - 0.5))
            rounded = np.clip(rounded, self._lo, self._hi)
            values = np.where(self._int, rounded, values)
        return values[0] if squeeze else values

    def denormalize(self, g: np.ndarray) -> Configuration:
        """Map one genotype to a name -> value configuration dict."""
        values = self.denormalize_array(self._check_dim(g))
        return self.to_configuration(values)

    def to_configuration(self, values: np.ndarray) -> Configuration:
        """Wrap a row of original-scale values (as from ``denormalize_array``)."""
        return dict(zip(self.names, (float(v) for v in values)))

    def normalize(self, config: Configuration) -> np.ndarray:
        """Invert the continuous part of ``denormalize``.

        For continuous parameters this is the exact inverse map; integer values
        land at the lattice point's pre-image, so a further denormalize
        reproduces them.
        """
        values = np.empty(self.d, dtype=float)
        for i, p in enumerate(self.params):
            if p.name not in config:
                raise UsageError(f"configuration is missing parameter {p.name!r}")
            values[i] = config[p.name]
        if not np.isfinite(values).all():
            raise UsageError("configuration contains non-finite values")
        if (values < self._lo).any() or (values > self._hi).any():
            bad = [
                p.name
                for p, v in zip(self.params, values)
                if v < p.lower or v > p.upper
            ]
            raise UsageError(f"values out of bounds for {bad}")
        lin = (values - self._lo) / (self._hi - self._lo)
        if self._log.any():
            loggy = (np.log(np.where(self._log, values, 1.0)) - self._ln_lo) / np.where(
                self._log, self._ln_hi - self._ln_lo, 1.0
            )
            return np.where(self._log, loggy, lin)
        return lin

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        """Draw one genotype with i.i.d. U(0, 1) components."""
        return rng.random(self.d)

    def to_json(self) -> str:
        return json.dumps(
            {
                "params": [
                    {
                        "name": p.name,
                        "kind": p.kind,
                        "lower": p.lower,
                        "upper": p.upper,
                        "log": p.log_scale,
                    }
                    for p in self.params
                ]
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SearchSpace":
        try:
            data = json.loads(text)
            params = [
                ParamDef(
                    name=entry["name"],
                    kind=entry["kind"],
                    lower=float(entry["lower"]),
                    upper=float(entry["upper"]),
                    log_scale=bool(entry.get("log", False)),
                )
                for entry in data["params"]
            ]
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise UsageError(f"malformed search-space JSON: {exc}") from exc
        return cls(params)


def clip_unit(g: np.ndarray) -> np.ndarray:
    """Clamp a real vector componentwise into [0, 1].

    Non-finite components are rejected: they indicate an emitter bug and silent
    repair would mask it.
    """
    g = np.asarray(g, dtype=float)
    if not np.isfinite(g).all():
        raise UsageError("cannot clip non-finite genotype components")
    return np.clip(g, 0.0, 1.0)


def identity_space(d: int, prefix: str = "x") -> SearchSpace:
    """A d-dimensional [0, 1] space where configurations equal genotypes."""
    return SearchSpace(
        [ParamDef(f"{prefix}{i}", CONTINUOUS, 0.0, 1.0) for i in range(d)]
    )


def ranger_space() -> SearchSpace:
    """Random-forest search space: four numeric parameters, no log scaling."""
    return SearchSpace(
        [
            ParamDef("num.trees", INTEGER, 1, 2000),
            ParamDef("mtry.ratio", CONTINUOUS, 0.0, 1.0),
            ParamDef("min.node.size", INTEGER, 1, 100),
            ParamDef("sample.fraction", CONTINUOUS, 0.1, 1.0),
        ]
    )


def xgboost_space() -> SearchSpace:
    """Gradient-boosting search space: ten numeric parameters, six log-scaled."""
    return SearchSpace(
        [
            ParamDef("alpha", CONTINUOUS, 1e-4, 1000.0, log_scale=True),
            ParamDef("lambda", CONTINUOUS, 1e-4, 1000.0, log_scale=True),
            ParamDef("nrounds", INTEGER, 3, 2000, log_scale=True),
            ParamDef("subsample", CONTINUOUS, 0.1, 1.0),
            ParamDef("colsample_bylevel", CONTINUOUS, 0.01, 1.0),
            ParamDef("colsample_bytree", CONTINUOUS, 0.01, 1.0),
            ParamDef("eta", CONTINUOUS, 1e-4, 1.0, log_scale=True),
            ParamDef("gamma", CONTINUOUS, 1e-4, 7.0, log_scale=True),
            ParamDef("max_depth", INTEGER, 1, 15),
            ParamDef("min_child_weight", CONTINUOUS, math.e, 150.0, log_scale=True),
        ]
    )
