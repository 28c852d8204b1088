import numpy as np
import pytest

from pfbi.discriminator import DiscriminatorTrainer, PriorSpec, TrainConfig, save_net
from pfbi.latent_io import write_latents
from pfbi.synthdata import SynthSpec, generate


@pytest.fixture(scope="session")
def arc_spec():
    return SynthSpec(kind='arc', n_points=1000, noise_sigma=0.05, seed=0)


@pytest.fixture(scope="session")
def arc_data(arc_spec):
    return generate(arc_spec)


@pytest.fixture(scope="session")
def arc_net(arc_data):
    """Default-configuration discriminator trained on the 270 degree arc."""
    return DiscriminatorTrainer(TrainConfig()).train(arc_data, PriorSpec(2))


@pytest.fixture(scope="session")
def arc_files(tmp_path_factory, arc_data, arc_net):
    d = tmp_path_factory.mktemp("arc")
    data_file, net_file = str(d / "arc.csv"), str(d / "arc.net")
    write_latents(data_file, arc_data)
    save_net(arc_net, net_file)
    return data_file, net_file


@pytest.fixture
def rng():
    return np.random.default_rng(42)
