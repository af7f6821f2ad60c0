import itertools

import numpy as np
import pytest

from crffw import CrfInstance, DenseMatrix, EdgeList, GaussianKernel, potts_matrix


def potts_pair(w=1.0):
    """2-node, 2-label instance with u1=(0,1), u2=(1,0) and a Potts edge."""
    unary = np.array([[0.0, 1.0], [1.0, 0.0]])
    backend = EdgeList(2, 2, np.array([[0, 1]]), potts_matrix(2, w)[None])
    return CrfInstance(unary, backend)


def zero_instance(n=3, d=2):
    return CrfInstance(np.zeros((n, d)), EdgeList(n, d, np.zeros((0, 2), int),
                                                  np.zeros((0, d, d))))


def random_dense_backend(rng, n, d):
    m = rng.standard_normal((n * d, n * d))
    m = 0.5 * (m + m.T)
    for i in range(n):
        m[i * d:(i + 1) * d, i * d:(i + 1) * d] = 0.0
    return DenseMatrix(m, d)


def random_edge_backend(rng, n, d, p=0.6):
    edges, thetas = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.uniform() < p:
                edges.append((i, j))
                thetas.append(rng.standard_normal((d, d)))
    thetas = np.array(thetas) if thetas else np.zeros((0, d, d))
    return EdgeList(n, d, np.array(edges, int).reshape(-1, 2), thetas)


def random_gaussian_backend(rng, n, d):
    return GaussianKernel(rng.uniform(0, 10, (n, 2)), rng.uniform(0, 255, (n, 3)),
                          potts_matrix(d), alpha=8.0, beta=40.0, gamma=4.0)


def random_instance(rng, n=None, d=None, kind=None):
    n = n or int(rng.integers(2, 7))
    d = d or int(rng.integers(2, 4))
    kind = kind or rng.choice(["edges", "dense", "gaussian"])
    maker = {"edges": random_edge_backend, "dense": random_dense_backend,
             "gaussian": random_gaussian_backend}[kind]
    return CrfInstance(rng.standard_normal((n, d)) * 2.0, maker(rng, n, d))


def random_feasible(rng, n, d):
    e = rng.exponential(size=(n, d))
    return e / e.sum(axis=1, keepdims=True)


def all_labelings(n, d):
    return (np.array(lab) for lab in itertools.product(range(d), repeat=n))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
