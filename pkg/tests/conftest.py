import pytest

from ssm_kinetics.collocation import assemble
from ssm_kinetics.experiments import SEGMENT_PRESETS, build_segment
from ssm_kinetics.mechanism import abc_mechanism

PRESET_NAMES = ("ss1-3pt", "ss1", "ss2")


@pytest.fixture(scope="session")
def mech():
    return abc_mechanism()


@pytest.fixture(scope="session")
def preset_system(mech):
    """Assembled constraint system for a built-in segment with 4-decimal data."""

    def build(name):
        spec = SEGMENT_PRESETS[name]
        segment = build_segment(spec)
        return assemble(segment, mech, spec.mode)

    return build
