import numpy as np
import pytest

from irkit.pdngen import GenConfig, LayerSpec, generate


def small_config(seed, *, layers=2, chip=40.0, sinks=10, pad_rule="grid", **kw):
    """A compact anchored grid for solver/distillation comparisons."""
    specs = []
    pitches = [4.0, 8.0, 16.0, 24.0]
    sheets = [0.05, 0.03, 0.02, 0.015]
    for i in range(layers):
        axis = "h" if i % 2 == 0 else "v"
        specs.append(LayerSpec(i + 1, axis, pitches[i], sheets[i]))
    defaults = dict(
        chip_width=chip,
        chip_height=chip,
        layers=tuple(specs),
        pad_rule=pad_rule,
        pad_count=4,
        sink_count=sinks,
        seed=seed,
    )
    if layers == 1:
        defaults["node_pitch"] = 5.0
        defaults["pad_rule"] = "stripe_ends"
    defaults.update(kw)
    return GenConfig(**defaults)


def small_graph(seed, **kw):
    return generate(small_config(seed, **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
