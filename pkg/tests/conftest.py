import pytest

from helpers import fixture_feed, spec_default

from lobexec import SyntheticFeedParams, generate_synthetic


@pytest.fixture
def spec():
    return spec_default()


@pytest.fixture
def hand_feed(spec):
    """The seven-snapshot hand-computed fixture (see helpers)."""
    return fixture_feed(spec)


@pytest.fixture
def synth_feed(spec):
    return generate_synthetic(
        SyntheticFeedParams(seed=7, n_snapshots=5000), spec
    )
