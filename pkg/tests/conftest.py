import os

import pytest

from bbsched.topology import from_edge_list

DATA = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def t16k3():
    with open(os.path.join(DATA, "16k3.edges")) as fh:
        return from_edge_list(fh.read(), label="16k3")
