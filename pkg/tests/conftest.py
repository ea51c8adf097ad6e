import numpy as np
import pytest


def fd_grads(f, arrays, h=1e-3):
    """Central finite differences of a scalar f64 reference function.

    `f` must be a pure-numpy implementation of the mathematical definition,
    independent of the library's forward/backward code. Inputs are copied
    to f64 so the oracle's accuracy is limited only by h.
    """
    arrays64 = [np.array(a, dtype=np.float64) for a in arrays]
    grads = []
    for a in arrays64:
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f(*arrays64)
            flat[i] = orig - h
            fm = f(*arrays64)
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def rel_err(analytic, reference):
    analytic = np.asarray(analytic, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    denom = np.linalg.norm(reference)
    return np.linalg.norm(analytic - reference) / (denom + 1e-12)


@pytest.fixture
def np_rng():
    return np.random.default_rng(1234)
