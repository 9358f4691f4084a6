import pytest

from mlo_edca.scenario import DSSS_PHY, AcEdcaConfig, LinkScenario


def make_ac(aifsn=2, cw_min=32, cw_max=1024, txop=0.0, retry=7, n=1, payload_bytes=1000,
            dmax=100.0, eps=1e-2, name=""):
    return AcEdcaConfig(cw_min, cw_max, aifsn, float(txop), retry, n, 8.0 * payload_bytes,
                        dmax, eps, name)


def baseline_link(aifsn2=8, txop2=4080.0):
    """Two ACs, four stations each, CW 32/1024, R=7, 1000-byte payloads."""
    ac1 = make_ac(aifsn=8, txop=4080, n=4)
    ac2 = make_ac(aifsn=aifsn2, txop=txop2, n=4)
    return LinkScenario(DSSS_PHY, (ac1, ac2))


@pytest.fixture
def phy():
    return DSSS_PHY
