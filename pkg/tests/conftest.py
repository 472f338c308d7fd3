import numpy as np
import pytest

from tpopf.data import SUITE, load_suite
from tpopf.network import Bus, Line, Load, NetworkModel, OperatingLimits, PvUnit


@pytest.fixture(scope="session")
def suite():
    return {name: load_suite(name) for name in SUITE}


@pytest.fixture(scope="session")
def feeder4():
    return load_suite("feeder_4bus")


@pytest.fixture(scope="session")
def feeder15():
    return load_suite("feeder_15bus")


def radial_net(
    lengths=(0.2,),
    load_kw=(2.0, 1.0, 0.5),
    horizon=1,
    pv=None,
    limits=None,
    r=0.206,
    x=0.08,
    r0=0.824,
    x0=0.32,
    max_i_ka=0.27,
):
    """Chain 0-1-...-n of identical cables, the same load at every non-slack bus."""
    n = len(lengths) + 1
    buses = tuple(Bus(i, "slack" if i == 0 else "pq", 0.4) for i in range(n))
    lines = tuple(Line(i, i + 1, L, r, x, r0, x0, max_i_ka) for i, L in enumerate(lengths))
    q = tuple(0.3 * p for p in load_kw)
    loads = tuple(Load.constant(i, load_kw, q, horizon) for i in range(1, n)) if any(load_kw) else ()
    pvs = () if pv is None else (pv,)
    return NetworkModel(buses, lines, (), loads, pvs, limits or OperatingLimits(), 1.0, horizon)


@pytest.fixture
def make_radial():
    return radial_net


def pv_unit(bus, p_max_kw, profile, connection="abc"):
    return PvUnit(bus, p_max_kw, tuple(profile), connection)


@pytest.fixture
def make_pv():
    return pv_unit


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
