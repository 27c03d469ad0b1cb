import numpy as np
import pytest

from eegintent.errors import UnknownChannel
from eegintent.montage import Region, channel_position, default_montage


@pytest.fixture(scope="module")
def montage():
    return default_montage()


def test_has_64_unique_channels(montage):
    assert len(montage) == 64
    assert len(set(montage.channel_names)) == 64


def test_vertex_at_origin(montage):
    x, y, region = channel_position(montage, "Cz")
    assert (x, y) == (0.0, 0.0)
    assert region is Region.FRONTAL_CENTRAL


def test_t7_on_left_rim(montage):
    x, y, region = channel_position(montage, "T7")
    assert (x, y) == (-0.9, 0.0)
    assert region is Region.TEMPORAL


def test_unknown_channel(montage):
    with pytest.raises(UnknownChannel):
        channel_position(montage, "XX")


def test_coordinates_inside_unit_box(montage):
    for name in montage.channel_names:
        x, y, _ = channel_position(montage, name)
        assert -1.0 <= x <= 1.0 and -1.0 <= y <= 1.0


def test_required_region_members(montage):
    frontal = set(montage.names_in_region(Region.FRONTAL_CENTRAL))
    temporal = set(montage.names_in_region(Region.TEMPORAL))
    assert {"Fz", "FCz", "FC1", "FC2", "Cz", "C1", "C2"} <= frontal
    assert {"T7", "T8", "FT7", "FT8", "TP7", "TP8"} <= temporal
    assert not frontal & temporal


def test_left_right_symmetry(montage):
    pairs = [("F3", "F4"), ("C3", "C4"), ("P7", "P8"), ("FT9", "FT10")]
    for left, right in pairs:
        xl, yl, _ = channel_position(montage, left)
        xr, yr, _ = channel_position(montage, right)
        assert xl == pytest.approx(-xr)
        assert yl == pytest.approx(yr)
