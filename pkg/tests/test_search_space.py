import json
import math

import numpy as np
import pytest

from qdbench import ParamDef, SearchSpace, UsageError, clip_unit, ranger_space, xgboost_space
from qdbench.search_space import CONTINUOUS, INTEGER


def param(name="p", kind=CONTINUOUS, lower=0.0, upper=1.0, log=False):
    return ParamDef(name, kind, lower, upper, log_scale=log)


class TestDenormalize:
    def test_integer_boundaries(self):
        space = SearchSpace([param("num.trees", INTEGER, 1, 2000)])
        assert space.denormalize(np.array([0.0]))["num.trees"] == 1
        assert space.denormalize(np.array([1.0]))["num.trees"] == 2000

    def test_log_midpoint_is_geometric_mean(self):
        # exp((ln 1e-4 + ln 1000) / 2) = sqrt(1e-4 * 1000) = sqrt(0.1)
        space = SearchSpace([param("alpha", lower=1e-4, upper=1000.0, log=True)])
        value = space.denormalize(np.array([0.5]))["alpha"]
        assert value == pytest.approx(0.31622776601683794, abs=1e-12)

    def test_identity_range(self):
        space = SearchSpace([param("mtry.ratio", lower=0.0, upper=1.0)])
        assert space.denormalize(np.array([0.25]))["mtry.ratio"] == 0.25

    def test_dimension_mismatch(self):
        space = ranger_space()
        with pytest.raises(UsageError):
            space.denormalize(np.zeros(3))

    def test_rejects_out_of_cube(self):
        space = ranger_space()
        with pytest.raises(UsageError):
            space.denormalize(np.array([0.5, 0.5, 0.5, 1.2]))

    def test_rounds_half_away_from_zero(self):
        # g chosen so the linear map lands exactly on x.5
        space = SearchSpace([param("n", INTEGER, 0, 10)])
        g = np.array([0.25])  # 2.5
        assert space.denormalize(g)["n"] == 3

    def test_integer_log_rounds_after_retransform(self):
        space = SearchSpace([param("nrounds", INTEGER, 3, 2000, log=True)])
        g = 0.5
        raw = math.exp((math.log(3) + math.log(2000)) / 2)
        expected = math.floor(raw + 0.5)
        assert space.denormalize(np.array([g]))["nrounds"] == expected


class TestNormalize:
    def test_boundary(self):
        space = SearchSpace([param("num.trees", INTEGER, 1, 2000)])
        assert space.normalize({"num.trees": 2000})[0] == 1.0

    def test_log_inverse(self):
        space = SearchSpace([param("alpha", lower=1e-4, upper=1000.0, log=True)])
        assert space.normalize({"alpha": 0.31622776601683794})[0] == pytest.approx(0.5, abs=1e-12)

    def test_linear_midpoint(self):
        space = SearchSpace([param("sample.fraction", lower=0.1, upper=1.0)])
        assert space.normalize({"sample.fraction": 0.55})[0] == pytest.approx(0.5, abs=1e-12)

    def test_out_of_bounds(self):
        space = ranger_space()
        config = space.denormalize(np.full(4, 0.5))
        config["num.trees"] = 5000
        with pytest.raises(UsageError):
            space.normalize(config)

    def test_missing_param(self):
        space = ranger_space()
        config = space.denormalize(np.full(4, 0.5))
        del config["mtry.ratio"]
        with pytest.raises(UsageError):
            space.normalize(config)


class TestSampleUniform:
    def test_shape_and_bounds(self):
        space = ranger_space()
        g = space.sample_uniform(np.random.default_rng(0))
        assert g.shape == (4,)
        assert ((g >= 0) & (g <= 1)).all()

    def test_same_seed_same_sample(self):
        space = ranger_space()
        a = space.sample_uniform(np.random.default_rng(42))
        b = space.sample_uniform(np.random.default_rng(42))
        assert (a == b).all()

    def test_mean_converges_to_half(self):
        space = ranger_space()
        rng = np.random.default_rng(7)
        samples = np.stack([space.sample_uniform(rng) for _ in range(100_000)])
        assert np.abs(samples.mean(axis=0) - 0.5).max() < 0.01


class TestClipUnit:
    def test_clamps(self):
        out = clip_unit(np.array([-0.2, 0.5, 1.3]))
        assert (out == np.array([0.0, 0.5, 1.0])).all()

    def test_identity_on_valid(self):
        g = np.array([0.0, 0.3, 1.0])
        assert (clip_unit(g) == g).all()

    def test_rejects_nan(self):
        with pytest.raises(UsageError):
            clip_unit(np.array([np.nan, np.nan]))

    def test_rejects_inf(self):
        with pytest.raises(UsageError):
            clip_unit(np.array([0.5, np.inf]))


class TestInvariants:
    def test_param_validation(self):
        with pytest.raises(UsageError):
            param(lower=1.0, upper=1.0)
        with pytest.raises(UsageError):
            param(lower=-1.0, upper=2.0, log=True)
        with pytest.raises(UsageError):
            ParamDef("n", INTEGER, 5, 5.5)
        with pytest.raises(UsageError):
            ParamDef("n", "categorical", 0, 1)

    def test_duplicate_names_rejected(self):
        with pytest.raises(UsageError):
            SearchSpace([param("a"), param("a")])

    def test_continuous_round_trip(self):
        space = xgboost_space()
        rng = np.random.default_rng(11)
        cont = np.array([p.kind == CONTINUOUS for p in space.params])
        for _ in range(200):
            g = rng.random(space.d)
            back = space.normalize(space.denormalize(g))
            assert np.abs(back[cont] - g[cont]).max() < 1e-12

    def test_integer_lattice_idempotent(self):
        space = xgboost_space()
        rng = np.random.default_rng(12)
        for _ in range(200):
            g = rng.random(space.d)
            once = space.denormalize(g)
            twice = space.denormalize(space.normalize(once))
            for p in space.params:
                if p.kind == INTEGER:
                    assert twice[p.name] == once[p.name]
                else:
                    assert twice[p.name] == pytest.approx(once[p.name], rel=1e-12)

    def test_componentwise_monotone(self):
        space = xgboost_space()
        rng = np.random.default_rng(13)
        for _ in range(200):
            g = rng.random(space.d)
            h = np.clip(g + rng.random(space.d) * 0.2, 0, 1)
            lo = space.denormalize_array(g)
            hi = space.denormalize_array(h)
            assert (hi >= lo).all()

    def test_log_midpoint_property(self):
        space = xgboost_space()
        mid = space.denormalize_array(np.full(space.d, 0.5))
        for i, p in enumerate(space.params):
            if p.log_scale and p.kind == CONTINUOUS:
                geo = math.sqrt(p.lower * p.upper)
                assert abs(mid[i] - geo) < 1e-9 * geo

    def test_integer_outputs_whole_and_in_range(self):
        space = ranger_space()
        rng = np.random.default_rng(14)
        for _ in range(500):
            config = space.denormalize(rng.random(space.d))
            for p in space.params:
                v = config[p.name]
                assert p.lower <= v <= p.upper
                if p.kind == INTEGER:
                    assert v == int(v)


class TestBuiltinSpaces:
    def test_ranger_bounds(self):
        space = ranger_space()
        defs = {p.name: p for p in space.params}
        assert defs["num.trees"].kind == INTEGER
        assert (defs["num.trees"].lower, defs["num.trees"].upper) == (1, 2000)
        assert (defs["mtry.ratio"].lower, defs["mtry.ratio"].upper) == (0.0, 1.0)
        assert defs["min.node.size"].kind == INTEGER
        assert (defs["min.node.size"].lower, defs["min.node.size"].upper) == (1, 100)
        assert (defs["sample.fraction"].lower, defs["sample.fraction"].upper) == (0.1, 1.0)
        assert not any(p.log_scale for p in space.params)

    def test_xgboost_bounds(self):
        space = xgboost_space()
        defs = {p.name: p for p in space.params}
        assert (defs["alpha"].lower, defs["alpha"].upper, defs["alpha"].log_scale) == (1e-4, 1000.0, True)
        assert (defs["lambda"].lower, defs["lambda"].upper, defs["lambda"].log_scale) == (1e-4, 1000.0, True)
        assert defs["nrounds"].kind == INTEGER and defs["nrounds"].log_scale
        assert (defs["nrounds"].lower, defs["nrounds"].upper) == (3, 2000)
        assert (defs["subsample"].lower, defs["subsample"].upper) == (0.1, 1.0)
        assert (defs["colsample_bylevel"].lower, defs["colsample_bylevel"].upper) == (0.01, 1.0)
        assert (defs["colsample_bytree"].lower, defs["colsample_bytree"].upper) == (0.01, 1.0)
        assert (defs["eta"].lower, defs["eta"].upper, defs["eta"].log_scale) == (1e-4, 1.0, True)
        assert (defs["gamma"].lower, defs["gamma"].upper, defs["gamma"].log_scale) == (1e-4, 7.0, True)
        assert defs["max_depth"].kind == INTEGER and not defs["max_depth"].log_scale
        assert (defs["max_depth"].lower, defs["max_depth"].upper) == (1, 15)
        assert defs["min_child_weight"].lower == math.e
        assert (defs["min_child_weight"].upper, defs["min_child_weight"].log_scale) == (150.0, True)

    def test_json_round_trip(self):
        for space in (ranger_space(), xgboost_space()):
            text = space.to_json()
            again = SearchSpace.from_json(text)
            assert again == space
            # schema shape: params array with the five documented keys
            data = json.loads(text)
            assert set(data) == {"params"}
            for entry in data["params"]:
                assert set(entry) == {"name", "kind", "lower", "upper", "log"}

    def test_from_json_rejects_garbage(self):
        with pytest.raises(UsageError):
            SearchSpace.from_json("{\"nope\": 1}")
        with pytest.raises(UsageError):
            SearchSpace.from_json("not json")
