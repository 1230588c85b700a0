import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sepsplit import get_map, interpolate, simplify  # noqa: E402
from sepsplit.formal_sep import FormalSeparatrixData, assemble, build_formal_separatrix  # noqa: E402


@pytest.fixture(scope="session")
def mcmillan():
    return get_map("builtin:mcmillan")


@pytest.fixture(scope="session")
def henon():
    return get_map("builtin:henon")


@pytest.fixture(scope="session")
def mcmillan_ham_raw(mcmillan):
    """Raw interpolating Hamiltonian through order 20 (shared by many tests)."""
    return interpolate(mcmillan, 15)


@pytest.fixture(scope="session")
def mcmillan_ham_mech(mcmillan_ham_raw):
    return simplify(mcmillan_ham_raw, 15)


@pytest.fixture(scope="session")
def mcmillan_state(mcmillan_ham_mech):
    return FormalSeparatrixData(mcmillan_ham_mech.potential()).solve_through(8)


@pytest.fixture(scope="session")
def mcmillan_formal(mcmillan):
    """Mechanical and original-frame formal separatrix to order 6."""
    return build_formal_separatrix(mcmillan, 6)


@pytest.fixture(scope="session")
def mcmillan_sep8(mcmillan_state):
    return assemble(mcmillan_state, 8)
