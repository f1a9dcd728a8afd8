import pytest

from sevensphere.coloring import color_distributed
from sevensphere.goldberg import build_goldberg, family_spec
from sevensphere.stitch import apply_stitches


@pytest.fixture(scope="session")
def gp43():
    return build_goldberg(family_spec(1))


@pytest.fixture(scope="session")
def coloring43(gp43):
    return color_distributed(gp43)


@pytest.fixture(scope="session")
def deformed43(gp43, coloring43):
    return apply_stitches(gp43, coloring43)


@pytest.fixture(scope="session")
def tiling43():
    from sevensphere.optimize import build_tiling

    return build_tiling(1, 4.0)[0]
