import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import inverse_map_regressor  # noqa: E402

from pallor.nn import init_network, save_weights  # noqa: E402
from pallor.screening import save_regressor  # noqa: E402
from pallor.segmentation import default_segmenter_spec  # noqa: E402
from pallor.synthdata import SynthConfig, generate_dataset  # noqa: E402


@pytest.fixture(scope="session")
def linear_regressor_file(tmp_path_factory):
    """Weights file for the exactly-known inverse-map regressor."""
    path = tmp_path_factory.mktemp("weights") / "regressor.pnn"
    model = save_regressor(inverse_map_regressor(), path)
    return path, model


@pytest.fixture(scope="session")
def small_segmenter_file(tmp_path_factory):
    """An (untrained) segmenter weights file for serving-path tests."""
    path = tmp_path_factory.mktemp("weights") / "segmenter.pnn"
    net = init_network(default_segmenter_spec(size=32, base_ch=2, seed=7))
    save_weights(net, path)
    return path


@pytest.fixture(scope="session")
def clean_dataset_dir(tmp_path_factory):
    """Ten noise-free, gain-free samples written to disk."""
    out = tmp_path_factory.mktemp("dataset")
    config = SynthConfig(
        n_samples=10, noise_sigma=0.0, gain_range=(1.0, 1.0), seed=404
    )
    generate_dataset(config, out)
    return out
