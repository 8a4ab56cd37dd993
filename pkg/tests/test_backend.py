import numpy as np
import pytest

from twoweight import _pykernels as pure

ck = pytest.importorskip("twoweight._ckernels")


# the fallback is bitwise identical so reports do not depend on the backend


def test_dyadic_index():
    rel = np.random.default_rng(0).random((50, 3)) * 4 - 1
    for level in (-1, 0, 3, 10):
        np.testing.assert_array_equal(ck.dyadic_index(rel, level), pure.dyadic_index(rel, level))


@pytest.mark.parametrize("kind", ["tangent", "cutoff", "none"])
def test_profile(kind):
    r = np.concatenate([np.linspace(0.01, 6, 200), [0.0, 0.5, 2.0, 4.0]])
    np.testing.assert_array_equal(ck.profile(r, 1.5, 0.5, 2.0, kind), pure.profile(r, 1.5, 0.5, 2.0, kind))


@pytest.mark.parametrize("kind", ["tangent", "cutoff"])
def test_riesz_matrix(kind):
    rng = np.random.default_rng(1)
    Y, X = rng.random((9, 2)), rng.random((7, 2))
    X[0] = Y[0]
    for comp in (0, 1):
        np.testing.assert_array_equal(ck.riesz_matrix(Y, X, comp, 1.3, 0.05, 1.0, kind),
                                      pure.riesz_matrix(Y, X, comp, 1.3, 0.05, 1.0, kind))


def test_untruncated_diagonal_rejected():
    Y = np.zeros((1, 1))
    for impl in (ck, pure):
        with pytest.raises(ZeroDivisionError):
            impl.riesz_matrix(Y, Y, 0, 1.0, 0.0, np.inf, "none")


def test_poisson_boxes():
    rng = np.random.default_rng(2)
    k, q, n = 40, 12, 2
    rel = rng.random((k, n))
    img = rel + 0.01 * rng.normal(size=(k, n))
    w = rng.lognormal(size=k)
    centers = rng.random((q, n))
    sides = 2.0 ** -rng.integers(0, 5, q).astype(float)
    inlo = np.full((q, n), -np.inf)
    inhi = np.full((q, n), np.inf)
    exlo = centers - sides[:, None] / 2
    exhi = centers + sides[:, None] / 2
    args = (img, rel, w, centers, sides, 1.0, 2.7, inlo, inhi, exlo, exhi)
    np.testing.assert_array_equal(ck.poisson_boxes(*args), pure.poisson_boxes(*args))
