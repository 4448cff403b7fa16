import numpy as np
import pytest

from csrcspmv import CsrcRectMatrix, csr_to_csrc, from_dense


def dense_matvec(d, x):
    """Two-loop dense product in plain Python floats."""
    rows = np.asarray(d).tolist()
    xs = np.asarray(x).tolist()
    out = []
    for row in rows:
        acc = 0.0
        for a, b in zip(row, xs):
            acc += a * b
        out.append(acc)
    return np.array(out)


def rel_err(y, ref):
    scale = np.max(np.abs(ref))
    diff = np.max(np.abs(np.asarray(y) - np.asarray(ref)))
    return diff / scale if scale > 0 else diff


def random_structsym_dense(n, density, seed, value_symmetric=False):
    """Dense array with a symmetric nonzero pattern and nonzero diagonal."""
    rng = np.random.default_rng(seed)
    mask = np.tril(rng.random((n, n)) < density, k=-1)
    low = np.where(mask, rng.uniform(-1, 1, (n, n)), 0.0)
    low[mask & (low == 0)] = 0.5
    if value_symmetric:
        up = low.T
    else:
        up = np.where(mask.T, rng.uniform(-1, 1, (n, n)), 0.0)
        up[mask.T & (up == 0)] = 0.25
    return low + up + np.diag(rng.uniform(1.0, 2.0, n))


def tridiagonal_dense(n, seed=0):
    rng = np.random.default_rng(seed)
    return (np.diag(rng.uniform(2, 3, n)) + np.diag(rng.uniform(-1, -0.1, n - 1), -1)
            + np.diag(rng.uniform(-1, -0.1, n - 1), 1))


def arrow_dense(n, seed=0):
    rng = np.random.default_rng(seed)
    d = np.diag(rng.uniform(1, 2, n))
    d[-1, :-1] = rng.uniform(-1, 1, n - 1)
    d[:-1, -1] = rng.uniform(-1, 1, n - 1)
    return d


def full_dense(n, seed=0):
    return np.random.default_rng(seed).uniform(0.5, 1.5, (n, n))


def family(n_random=100):
    """(name, dense) pairs: seeded random structurally symmetric matrices
    (n <= 300, densities 1%..30%) plus tridiagonal, arrow and dense shapes."""
    out = []
    rng = np.random.default_rng(12345)
    densities = np.linspace(0.01, 0.30, n_random)
    for s in range(n_random):
        n = int(rng.integers(10, 301))
        out.append((f"rand{s}_n{n}", random_structsym_dense(n, densities[s], 1000 + s,
                                                            value_symmetric=(s % 3 == 0))))
    out.append(("tridiag60", tridiagonal_dense(60)))
    out.append(("arrow40", arrow_dense(40)))
    out.append(("dense30", full_dense(30)))
    sym = full_dense(25, 3)
    out.append(("dense_sym25", np.tril(sym) + np.tril(sym, -1).T))
    return out


def csrc_of(d, elide=True):
    return csr_to_csrc(from_dense(d), elide_symmetric=elide)


def rect_of(d_square, n_extra, seed):
    """A CsrcRectMatrix with the given square part and a random tail, plus its dense form."""
    rng = np.random.default_rng(seed)
    n = d_square.shape[0]
    tail = np.where(rng.random((n, n_extra)) < 0.3, rng.uniform(-1, 1, (n, n_extra)), 0.0)
    full = np.hstack([d_square, tail])
    return CsrcRectMatrix(csrc_of(d_square), from_dense(tail)), full


@pytest.fixture(scope="session")
def matrix_family():
    return family()


def write_sets(a):
    """Brute-force write set of every row from the expanded pattern:
    the row itself plus each stored column left of the diagonal."""
    csr = a.to_csr()
    out = []
    for i in range(a.n):
        cols = csr.col_idx[csr.row_ptr[i]:csr.row_ptr[i + 1]].tolist()
        out.append({i} | {j for j in cols if j < i})
    return out


# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {status}  {detail}")
