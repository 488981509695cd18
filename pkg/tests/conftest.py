import numpy as np
import pytest

from kunary import figure1_spec, validate_spec


def single_species(lam=1.0, mu=1.0, k=2):
    return validate_spec(np.array([[0.0, lam], [mu, 0.0]]), [k])


def chain_spec():
    """0 -> 2 S1 -> S2 -> 0, all rates one."""
    kappa = np.zeros((3, 3))
    kappa[0, 1] = kappa[1, 2] = kappa[2, 0] = 1.0
    return validate_spec(kappa, [2, 1])


def random_irreducible(rng, n=None, kmax=4, lo=1e-3, hi=1e3):
    """Random spec: a Hamiltonian cycle through 0 plus extra edges, log-uniform rates."""
    n = int(rng.integers(1, 7)) if n is None else n
    kappa = np.zeros((n + 1, n + 1))
    perm = [0, *rng.permutation(np.arange(1, n + 1)).tolist()]
    for a, b in zip(perm, perm[1:] + [0]):
        kappa[a, b] = 1.0
    kappa += (rng.random((n + 1, n + 1)) < 0.3)
    np.fill_diagonal(kappa, 0.0)
    rates = np.exp(rng.uniform(np.log(lo), np.log(hi), size=kappa.shape))
    k = rng.integers(1, kmax + 1, size=n)
    return validate_spec(np.where(kappa > 0, rates, 0.0), k.tolist())


@pytest.fixture
def fig1():
    return figure1_spec()


@pytest.fixture
def chain():
    return chain_spec()


# one PASS/FAIL line per acceptance criterion, printed after the run
_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    def record(name: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE[name] = (bool(ok), detail)
        print(f"{name}: {'PASS' if ok else 'FAIL'} {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
