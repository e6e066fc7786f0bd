import numpy as np
import pytest

from streakcnn.errors import ConfigError
from streakcnn.nn import Network
from streakcnn.zoo import (LayerSpec, ModelConfig, build_paper_model, build_variant,
                           count_parameters, parameter_shapes, shape_chain)


def test_reference_parameter_count():
    assert count_parameters(build_paper_model()) == 2_452_993


def test_empty_config_has_no_parameters():
    assert count_parameters(ModelConfig("empty", ())) == 0


def test_per_layer_counts():
    shapes = [s for s in parameter_shapes(build_paper_model()) if s is not None]
    counts = [int(np.prod(w)) + b[0] for w, b in shapes]
    assert counts[0] == (3 * 3 * 1 + 1) * 32 == 320
    assert counts[1] == (3 * 3 * 32 + 1) * 64 == 18_496
    assert counts[3] == 4608 * 512 + 512


def test_dense_width_is_unique_solution():
    conv_total = 320 + 18_496 + (3 * 3 * 64 + 1) * 128
    residual = 2_452_993 - conv_total
    assert residual == 2_360_321
    solutions = [n for n in range(1, 5000) if 4608 * n + n + n + 1 == residual]
    assert solutions == [512]
    assert build_paper_model().layers[-4] == LayerSpec("dense", size=512)


def test_reference_shape_chain():
    spatial = [s[1] for s in shape_chain(build_paper_model()) if len(s) == 3]
    assert spatial == [64, 62, 62, 31, 29, 29, 14, 12, 12, 6, 6]
    assert (4608,) in shape_chain(build_paper_model())


def test_variant_two_flatten():
    assert (12544,) in shape_chain(build_variant(2))


def test_variant_four_final_extent():
    chain = shape_chain(build_variant(4))
    last_spatial = [s for s in chain if len(s) == 3][-1]
    assert last_spatial == (256, 2, 2)
    assert (1024,) in chain


def test_unsupported_depth():
    with pytest.raises(ConfigError):
        build_variant(5)


@pytest.mark.parametrize("depth", [2, 3, 4])
def test_forward_is_probability(depth):
    net = Network.initialized(build_variant(depth), seed=depth)
    p = net.predict(np.random.default_rng(depth).random((2, 64, 64)))
    assert p.shape == (2,)
    assert np.all((p > 0) & (p < 1))


def test_text_round_trip():
    cfg = build_paper_model()
    again = ModelConfig.from_text(cfg.name, cfg.layers_text())
    assert again == cfg
    assert again.layers_text() == cfg.layers_text()


def test_bad_layer_token():
    with pytest.raises(ConfigError):
        ModelConfig.from_text("x", "conv:abc")
    with pytest.raises(ConfigError):
        LayerSpec("dropout", p=1.0)
