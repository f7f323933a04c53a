import pytest

from mmadoa import ait, wavefield
from mmadoa.ula import VirtualUlaConfig


@pytest.fixture(scope="session")
def ref_ds():
    """Reference calibration dataset on the default 5-degree grid."""
    return wavefield.reference_dataset()


@pytest.fixture(scope="session")
def wm13(ref_ds):
    return wavefield.fit(ref_ds, 13)


@pytest.fixture(scope="session")
def ait_paper(ref_ds):
    """Sector-mapping model with the reference parameter set."""
    ula = VirtualUlaConfig(element_count=4, spacing=0.25, axis="z")
    return ait.fit(ref_ds, ula, ait.partition_fov(30.0, 15.0))
