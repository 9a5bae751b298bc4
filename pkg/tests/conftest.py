import numpy as np
import pytest

import salgrad
from salgrad.nn import desk_scale_net


@pytest.fixture(scope="session")
def train_samples():
    return salgrad.generate_dataset(800, size=64, seed=0)


@pytest.fixture(scope="session")
def held_samples():
    return salgrad.generate_dataset(60, size=64, seed=99)


@pytest.fixture(scope="session")
def trained_net(train_samples):
    """Desk-scale classifier trained to (near) perfect training accuracy."""
    images = np.array([s.image for s in train_samples])
    labels = np.array([s.label for s in train_samples])
    net = desk_scale_net(64, num_classes=4, seed=0)
    net.class_names = dict(enumerate(salgrad.SHAPE_CLASSES))
    net.train(images, labels, epochs=20, learning_rate=0.05, seed=0)
    assert net.accuracy(images, labels) >= 0.95
    return net


@pytest.fixture(scope="session")
def small_net():
    """Lightly trained 32x32 net, cheap enough for per-test use."""
    samples = salgrad.generate_dataset(40, size=32, seed=7)
    images = np.array([s.image for s in samples])
    labels = np.array([s.label for s in samples])
    net = desk_scale_net(32, num_classes=4, seed=7)
    net.train(images, labels, epochs=8, learning_rate=0.05, seed=7)
    return net


@pytest.fixture(scope="session")
def model_path(trained_net, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "net.ckpt"
    trained_net.save(path)
    return path
