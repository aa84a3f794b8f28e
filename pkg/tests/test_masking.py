import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spartan.masking import (
    LayerSpec,
    ParamLayout,
    PruningGroupSpec,
    UnitMap,
    block_beta,
    collapse_grad,
    expand_mask,
    flop_cost,
    unit_values,
)


def block_units(shape=(2, 4), B=2, **kw):
    layout = ParamLayout([("w", shape)])
    return layout, PruningGroupSpec(layout="blocks", block_size=B, **kw).build(layout)


def test_per_entry_magnitude():
    units = UnitMap.per_entry(2)
    np.testing.assert_array_equal(unit_values(np.array([3.0, -1.0]), units), [3.0, 1.0])


def test_cost_weighted_valuation():
    units = UnitMap.per_entry(2, [2.0, 1.0], valuation_exponent=1.0)
    np.testing.assert_array_equal(unit_values(np.array([3.0, -1.0]), units), [6.0, 1.0])


def test_sqrt_valuation():
    units = UnitMap.per_entry(2, [4.0, 1.0], valuation_exponent=0.5)
    np.testing.assert_array_equal(unit_values(np.array([3.0, -1.0]), units), [6.0, 1.0])


def test_block_values():
    layout, units = block_units()
    theta = layout.pack({"w": np.array([[1, -1, 2, 2], [1, 1, 2, -2]])})
    np.testing.assert_array_equal(unit_values(theta, units), [4.0, 8.0])
    np.testing.assert_array_equal(units.costs, [4.0, 4.0])


def test_block_expand():
    layout, units = block_units()
    entry = expand_mask(np.array([1.0, 0.0]), units)
    np.testing.assert_array_equal(layout.unpack(entry)["w"], [[1, 1, 0, 0], [1, 1, 0, 0]])


def test_collapse_expand_identity():
    _, units = block_units((4, 6), 2)
    x = np.arange(units.n_units, dtype=float)
    np.testing.assert_array_equal(collapse_grad(units.expand(x), units), 4 * x)


def test_every_entry_in_one_unit():
    _, units = block_units((6, 9), 3)
    assert np.all(units.entries_per_unit == 9)
    assert np.all(units.unit_of >= 0)


def test_excluded_and_bias_get_mask_one():
    layout = ParamLayout([("fc1.weight", (2, 2)), ("fc1.bias", (2,)), ("head", (1, 2))])
    units = PruningGroupSpec(excluded_tensors={"head"}).build(layout)
    assert units.n_units == 4
    entry = units.expand_mask(np.zeros(4))
    parts = layout.unpack(entry)
    np.testing.assert_array_equal(parts["fc1.weight"], 0)
    np.testing.assert_array_equal(parts["fc1.bias"], 1)
    np.testing.assert_array_equal(parts["head"], 1)


def test_prune_biases_flag():
    layout = ParamLayout([("fc.weight", (2, 2)), ("fc.bias", (2,))])
    assert PruningGroupSpec(prune_biases=True).build(layout).n_units == 6


def test_entry_cost_per_tensor():
    layout = ParamLayout([("a", (2, 2)), ("b", (2, 2))])
    units = PruningGroupSpec(entry_cost={"a": 4.0}, layout="blocks", block_size=2).build(layout)
    np.testing.assert_array_equal(units.costs, [16.0, 4.0])
    assert units.tensor_of_unit == ["a", "b"]


def test_unit_cost_override():
    layout = ParamLayout([("w", (2, 2))])
    units = PruningGroupSpec(unit_cost=[1, 2, 3, 4]).build(layout)
    np.testing.assert_array_equal(units.costs, [1, 2, 3, 4])


@pytest.mark.parametrize(
    "spec, shape",
    [
        (dict(layout="blocks", block_size=3), (4, 6)),
        (dict(layout="blocks", block_size=2), (4,)),
        (dict(unit_cost=[1, 2, 3]), (2, 2)),
        (dict(entry_cost={"missing": 1.0}), (2, 2)),
    ],
)
def test_bad_layouts_rejected(spec, shape):
    with pytest.raises(ValueError):
        PruningGroupSpec(**spec).build(ParamLayout([("w", shape)]))


def test_spec_validation():
    with pytest.raises(ValueError):
        PruningGroupSpec(layout="rows")
    with pytest.raises(ValueError):
        PruningGroupSpec(valuation_exponent=1.5)
    with pytest.raises(ValueError):
        PruningGroupSpec(entry_cost={"w": 0.0})


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        UnitMap.per_entry(3).unit_values(np.ones(4))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(0, 10_000))
def test_adjoint_property(br, bc, B, seed):
    rng = np.random.default_rng(seed)
    layout = ParamLayout([("w", (br * B, bc * B)), ("v", (B, 2 * B)), ("w.bias", (3,))])
    units = PruningGroupSpec(layout="blocks", block_size=B).build(layout)
    x = rng.standard_normal(units.n_units)
    y = rng.standard_normal(layout.size)
    lhs, rhs = units.expand(x) @ y, x @ units.collapse(y)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_valuation_homogeneous_and_sign_invariant(seed, lam):
    rng = np.random.default_rng(seed)
    _, units = block_units((4, 4), 2, valuation_exponent=0.5)
    theta = rng.standard_normal(16)
    flips = rng.choice([-1.0, 1.0], 16)
    base = units.unit_values(theta)
    np.testing.assert_allclose(units.unit_values(lam * theta), lam * base, rtol=1e-12)
    np.testing.assert_array_equal(units.unit_values(flips * theta), base)


def test_flop_dense_layer():
    assert flop_cost([LayerSpec("fc", 10, 5)]).total == 100


def test_flop_half_masked():
    mask = np.array([1, 0] * 25)
    assert flop_cost([LayerSpec("fc", 10, 5)], {"fc": mask}).total == 50


def test_flop_two_layers():
    layers = [LayerSpec("fc1", 10, 5), LayerSpec("fc2", 5, 3)]
    report = flop_cost(layers, {"fc1": np.array([1, 0] * 25), "fc2": np.ones(15)})
    assert report.per_layer == {"fc1": 50.0, "fc2": 30.0}
    assert report.total == 80


def test_block_beta():
    assert block_beta(20.0, 16) == 320.0
    assert block_beta(20.0, 32) == 640.0
