import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l2c import counterfactual as cf
from l2c.tabular import NON_DECREASING, NON_INCREASING, DatasetSchema, FeatureSpec

from gradcheck import check, tiny_problem

EPS = math.exp(-10)


def feat(mono, n=4):
    return FeatureSpec("f", "categorical", monotonic=mono, levels=tuple("abcdefgh"[:n]))


def test_unary_mask_example(frozen):
    out = cf.apply_unary_mask([0.25] * 4, feat(NON_DECREASING), 1)
    assert np.allclose(out, frozen["unary_mask_uniform4_level2"], rtol=1e-9)
    assert out[0] == pytest.approx(1.51e-5, rel=3e-3)


def test_unary_mask_edges_leave_p_unchanged():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.allclose(cf.apply_unary_mask(p, feat(NON_DECREASING), 0), p)
    assert np.allclose(cf.apply_unary_mask(p, feat(NON_INCREASING), 3), p)


def test_binary_mask(frozen):
    p = np.array([0.4, 0.3, 0.2, 0.1])
    child = feat("none")
    assert np.array_equal(cf.apply_binary_mask(p, child, 1, False), p)
    out = cf.apply_binary_mask(p, child, 1, True)
    assert np.allclose(out, frozen["binary_mask_child_level2"], rtol=1e-9)
    assert out[0] < 1e-3


def test_mask_as_log_shift_matches_probability_form(rng):
    logits = rng.normal(size=(1, 4))
    p = np.exp(logits) / np.exp(logits).sum()
    shifted = logits + np.where(np.arange(4) < 2, np.log(EPS), 0.0)
    q = np.exp(shifted) / np.exp(shifted).sum()
    assert np.allclose(q[0], cf.apply_unary_mask(p[0], feat(NON_DECREASING), 2), rtol=1e-12)


def test_restricted_mass_formula(rng):
    # masked mass is eps*R / (eps*R + A); the e^-10 constant alone does not
    # bound it when almost all mass sits on restricted levels
    for _ in range(200):
        p = rng.dirichlet(np.ones(5))
        l = int(rng.integers(0, 5))
        R, A = p[:l].sum(), p[l:].sum()
        out = cf.apply_unary_mask(p, feat(NON_DECREASING, 5), l)
        assert out[:l].sum() == pytest.approx(EPS * R / (EPS * R + A), rel=1e-9, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5), st.integers(0, 4))
def test_restricted_mass_small_when_allowed_mass_is_not_tiny(w, l):
    p = np.asarray(w) + 1e-9
    p = p / p.sum()
    if p[l:].sum() < 0.05:
        return
    out = cf.apply_unary_mask(p, feat(NON_DECREASING, 5), l)
    assert out[:l].sum() <= 1e-3
    assert out.sum() == pytest.approx(1.0)


def test_selection_costs(synth_schema):
    costs = {"x1": 1.0, "x2": 0.5}
    schema = DatasetSchema(tuple(replace(f, mutation_cost=costs.get(f.name, 0.0)) for f in synth_schema.features))
    m = cf.L2cModel(schema, cf.L2cConfig(seed=1))
    free = cf.L2cModel(synth_schema, cf.L2cConfig(seed=1))
    z = np.zeros((1, schema.one_hot_dim))
    z[0, [o for o in schema.offsets[:-1]]] = 1
    pi, pi_free = m.selection_distribution(z)[0], free.selection_distribution(z)[0]
    assert pi[0] == 0.0 and pi[1] == pytest.approx(0.5 * pi_free[1])
    for name in ("sel1.weight", "sel1.bias"):
        free.params[name].value[...] = 0
    assert np.allclose(free.selection_distribution(z), 0.5)


def test_zero_generator_gives_uniform(synth_schema):
    m = cf.L2cModel(synth_schema)
    for name in ("gen2.weight", "gen2.bias"):
        m.params[name].value[...] = 0
    z = np.zeros((2, synth_schema.one_hot_dim))
    for p in m.perturbation_distribution(z):
        assert np.allclose(p, 1.0 / p.shape[1])
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_compose_rules(synth_schema, rng):
    s = synth_schema
    m = cf.L2cModel(s)
    z = np.zeros(s.one_hot_dim)
    z[s.offsets[:-1]] = 1
    zt = np.concatenate([np.eye(s.features[i].n_levels)[-1] for i in m.mutable])
    K = len(m.mutable)
    assert np.array_equal(cf.compose_counterfactual(z, zt, np.zeros(K), s), z)
    full = cf.compose_counterfactual(z, zt, np.ones(K), s)
    assert np.array_equal(full[m.mut_cols], zt)
    half = cf.compose_counterfactual(z, zt, np.full(K, 0.5), s)
    for i in range(len(s)):
        assert half[s.block(i)].sum() == pytest.approx(1.0)
    immutable = [i for i in range(len(s)) if i not in m.mutable]
    for i in immutable:
        assert np.array_equal(full[s.block(i)], z[s.block(i)])


def test_one_hot_decode(frozen):
    schema = DatasetSchema.from_config({"features": [
        {"name": "v", "kind": "continuous", "range": [0, 100], "edges": [0, 25, 50, 75, 100]},
        {"name": "k", "kind": "categorical", "levels": ["a", "b"]},
    ]})
    z = np.array([0, 1, 0, 0, 0, 1.0])
    assert cf.one_hot_decode(z, [0, 1], {"v": 42.7, "k": "a"}, schema)["v"] == 42.7
    assert cf.one_hot_decode(z, [1, 1], {"v": 42.7, "k": "a"}, schema)["v"] == frozen["midpoint_0_100_c4_level2"]
    assert cf.one_hot_decode(z, [0.5, 1], {"v": 10.0, "k": "a"}, schema)["v"] == pytest.approx(frozen["relaxed_decode_half"])


def test_config_validation(synth_schema, synth):
    with pytest.raises(ValueError):
        cf.L2cConfig(tau=0)
    with pytest.raises(ValueError):
        cf.L2cConfig(alpha=-1)
    with pytest.raises(ValueError):
        cf.L2cConfig(epsilon=1.5)
    with pytest.raises(ValueError, match="bucket edges"):
        cf.L2cModel(synth[0].schema)


def test_network_widths(synth_schema):
    m = cf.L2cModel(synth_schema)
    assert m.params["gen2.weight"].shape[0] == sum(synth_schema.features[i].n_levels for i in m.mutable)
    assert m.params["sel1.weight"].shape[0] == len(m.mutable)


@pytest.mark.parametrize("seed", range(6))
def test_composed_loss_gradient(seed):
    loss_fn, params = tiny_problem(seed)
    assert check(loss_fn, params) < 1e-3


def test_training_reduces_loss(trained_l2c):
    _, hist = trained_l2c
    assert len(hist.loss) == 200
    assert hist.loss[-1] < hist.loss[0]


def test_generation_properties(synth, synth_clf, trained_l2c):
    model, _ = trained_l2c
    test = synth[2]
    gen = cf.Generator(model, synth_clf)
    immutable = [i for i in range(len(model.schema)) if i not in model.mutable]
    for r in range(10):
        row = test.frame.iloc[r].to_dict()
        cs = gen.generate(row, num_samples=100, seed=r, input_id=r)
        assert len(cs) == 100
        assert np.array_equal(cs.valid, cs.predicted == cs.target)
        assert (cs.levels[:, immutable] == cs.origin_levels[immutable]).all()
        assert (cs.draw_levels[:, immutable] == cs.origin_levels[immutable]).all()
        # gate closed: continuous value returned exactly
        for k, i in enumerate(model.mutable):
            f = model.schema.features[i]
            if f.is_continuous:
                closed = ~cs.selected[:, k]
                assert (cs.rows[f.name].to_numpy()[closed] == row[f.name]).all()
        frame = cs.to_frame()
        assert list(frame.columns) == model.schema.names + ["predicted_label", "valid", "input_id"]


def test_generation_is_deterministic(synth, synth_clf, trained_l2c):
    model, _ = trained_l2c
    row = synth[2].frame.iloc[3].to_dict()
    a = cf.generate(model, synth_clf, row, 50, seed=9)
    b = cf.generate(model, synth_clf, row, 50, seed=9)
    assert a.to_dict() == b.to_dict()


def test_no_valid_sample_gives_empty_coverage(synth, synth_clf, synth_schema):
    # a model whose only mutable feature cannot affect the classifier
    feats = tuple(replace(f, mutable=f.name == "color") for f in synth_schema.features)
    schema = DatasetSchema(feats, synth_schema.target_name)
    model = cf.L2cModel(schema, cf.L2cConfig(seed=0))
    test = synth[2].frame
    far = int(np.argmax(np.abs(test["x1"] + test["x2"] - 1)))
    cs = cf.generate(model, synth_clf, test.iloc[far].to_dict(), 20, seed=0, max_draws=64)
    assert not cs.valid.any() and not cs.coverage
    assert len(cs) == 20 and cs.n_draws == 64


def test_sparsity_filter_only_accepts_sparse_samples(synth, synth_clf, trained_l2c):
    model, _ = trained_l2c
    row = synth[2].frame.iloc[1].to_dict()
    cs = cf.generate(model, synth_clf, row, 20, min_sparsity_filter=80.0, seed=1)
    acc = cs.levels[cs.valid]
    assert ((acc == cs.origin_levels).mean(axis=1) >= 0.8).all()


def test_checkpoint_roundtrip(synth, synth_clf, trained_l2c, tmp_path):
    model, _ = trained_l2c
    model.save(tmp_path / "m.json")
    back = cf.L2cModel.load(tmp_path / "m.json")
    row = synth[2].frame.iloc[0].to_dict()
    assert cf.generate(back, synth_clf, row, 30, seed=2).to_dict() == cf.generate(model, synth_clf, row, 30, seed=2).to_dict()
    d = model.to_dict()
    d["schema_hash"] = "0" * 16
    with pytest.raises(ValueError, match="hash"):
        cf.L2cModel.from_dict(d)


def test_unary_soundness_under_hard_sampling(synth, synth_clf, synth_schema):
    # untrained generator: masking alone has to keep age from decreasing
    model = cf.L2cModel(synth_schema, cf.L2cConfig(seed=3, selector=False))
    gen = cf.Generator(model, synth_clf)
    age = synth_schema.index("age")
    bad = total = 0
    for r in range(20):
        cs = gen.generate(synth[2].frame.iloc[r].to_dict(), 50, seed=r, max_draws=256)
        bad += int((cs.draw_levels[:, age] < cs.origin_levels[age]).sum())
        total += cs.n_draws
    assert bad / total <= 1e-3


def test_selector_off_changes_every_mutable_gate(synth, synth_clf, synth_schema):
    model = cf.L2cModel(synth_schema, cf.L2cConfig(seed=0, selector=False))
    cs = cf.generate(model, synth_clf, synth[2].frame.iloc[0].to_dict(), 10, seed=0, max_draws=32)
    assert cs.selected.all()
    immutable_share = 100 * (len(synth_schema) - len(model.mutable)) / len(synth_schema)
    assert ((cs.levels == cs.origin_levels).mean(axis=1) * 100 >= immutable_share).all()


def test_classifier_schema_mismatch(synth_clf, synth_schema):
    other = DatasetSchema(synth_schema.features[:-1])
    with pytest.raises(ValueError):
        cf._Wiring(cf.L2cModel(other), synth_clf)


def test_sparsity_weight_shrinks_selection(synth, synth_clf, synth_schema, trained_l2c):
    _, hist = trained_l2c
    _, free = cf.train(cf.L2cModel(synth_schema, cf.L2cConfig(seed=0, alpha=0.0)), synth[0], synth_clf)
    assert np.mean(free.l1[-10:]) > np.mean(hist.l1[-10:])
