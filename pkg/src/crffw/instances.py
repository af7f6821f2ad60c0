"""Synthetic instance generation and serialization.

Two on-disk formats are supported:

* a native JSON schema (version 1), lossless for all three pairwise
  backends, documented in the README;
* the UAI MARKOV text format, restricted to unary and pairwise factors
  with a uniform label cardinality.  Factor tables phi are converted to
  potentials via theta = -log(max(phi, 1e-300)); multiple factors over
  the same scope are multiplied (potentials added) before conversion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InstanceFormatError, UnsupportedFeatureError
from .model import CrfInstance, DenseMatrix, EdgeList, GaussianKernel

_PHI_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# generators

@dataclass(frozen=True)
class RandomDense:
    """Fully-connected instance with Gaussian-kernel pairwise potentials.

    Positions are uniform in [0, image_size]^2, colors uniform in
    [0, 255]^3, unaries i.i.d. normal scaled by `unary_scale`.
    """

    n: int
    d: int
    seed: int
    image_size: float = 32.0
    w1: float = 1.0
    w2: float = 1.0
    alpha: float = 80.0
    beta: float = 13.0
    gamma: float = 3.0
    compat: str = "potts"  # "potts" or "random"
    potts_w: float = 1.0
    unary_scale: float = 1.0


@dataclass(frozen=True)
class RandomGrid:
    """4-connected grid with Potts edge potentials."""

    rows: int
    cols: int
    d: int
    seed: int
    potts_w: float = 1.0
    unary_scale: float = 1.0


@dataclass(frozen=True)
class RandomEdgeList:
    """Erdos-Renyi graph with i.i.d. normal d x d edge blocks."""

    n: int
    d: int
    seed: int
    edge_prob: float = 0.3
    unary_scale: float = 1.0
    pairwise_scale: float = 1.0


GeneratorSpec = RandomDense | RandomGrid | RandomEdgeList


def potts_matrix(d, w=1.0):
    """Compatibility w * 1[s != t]."""
    return w * (1.0 - np.eye(d))


def generate(spec):
    """Deterministically build an instance from a generator spec."""
    if isinstance(spec, RandomDense):
        return _generate_dense(spec)
    if isinstance(spec, RandomGrid):
        return _generate_grid(spec)
    if isinstance(spec, RandomEdgeList):
        return _generate_edges(spec)
    raise TypeError(f"unknown generator spec: {spec!r}")


def _generate_dense(spec):
    if spec.n < 1 or spec.d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.default_rng(spec.seed)
    positions = rng.uniform(0.0, spec.image_size, size=(spec.n, 2))
    colors = rng.uniform(0.0, 255.0, size=(spec.n, 3))
    if spec.compat == "potts":
        compat = potts_matrix(spec.d, spec.potts_w)
    elif spec.compat == "random":
        a = rng.standard_normal((spec.d, spec.d))
        compat = 0.5 * (a + a.T) * spec.potts_w
    else:
        raise ValueError(f"unknown compatibility kind: {spec.compat!r}")
    unary = rng.standard_normal((spec.n, spec.d)) * spec.unary_scale
    backend = GaussianKernel(positions, colors, compat, w1=spec.w1, w2=spec.w2,
                             alpha=spec.alpha, beta=spec.beta, gamma=spec.gamma)
    return CrfInstance(unary, backend)


def _generate_grid(spec):
    if spec.rows < 1 or spec.cols < 1 or spec.d < 1:
        raise ValueError("grid dimensions must be positive")
    rng = np.random.default_rng(spec.seed)
    n = spec.rows * spec.cols
    unary = rng.standard_normal((n, spec.d)) * spec.unary_scale
    potts = potts_matrix(spec.d, spec.potts_w)
    edges = []
    for r in range(spec.rows):
        for c in range(spec.cols):
            i = r * spec.cols + c
            if c + 1 < spec.cols:
                edges.append((i, i + 1))
            if r + 1 < spec.rows:
                edges.append((i, i + spec.cols))
    edges = sorted(edges)
    thetas = np.repeat(potts[None, :, :], len(edges), axis=0)
    return CrfInstance(unary, EdgeList(n, spec.d, np.array(edges, dtype=int).reshape(-1, 2), thetas))


def _generate_edges(spec):
    if spec.n < 1 or spec.d < 1:
        raise ValueError("n and d must be positive")
    if not 0.0 <= spec.edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(spec.seed)
    unary = rng.standard_normal((spec.n, spec.d)) * spec.unary_scale
    edges = []
    thetas = []
    for i in range(spec.n):
        for j in range(i + 1, spec.n):
            if rng.uniform() < spec.edge_prob:
                edges.append((i, j))
                thetas.append(rng.standard_normal((spec.d, spec.d)) * spec.pairwise_scale)
    thetas = np.array(thetas) if thetas else np.zeros((0, spec.d, spec.d))
    return CrfInstance(unary, EdgeList(spec.n, spec.d,
                                       np.array(edges, dtype=int).reshape(-1, 2), thetas))


# ---------------------------------------------------------------------------
# native JSON schema

def _require(obj, key, where):
    if key not in obj:
        raise InstanceFormatError(f"missing field '{key}' in {where}")
    return obj[key]


def write_json(instance, path):
    """Serialize an instance; numbers keep full double precision."""
    n, d = instance.n_nodes, instance.n_labels
    doc = {"version": 1, "n": n, "d": d,
           "unary": instance.unary.tolist(),
           "pairwise": _backend_to_json(instance.pairwise)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _backend_to_json(backend):
    if isinstance(backend, DenseMatrix):
        return {"type": "dense", "matrix": backend.matrix.tolist()}
    if isinstance(backend, EdgeList):
        return {"type": "edges",
                "edges": [{"i": int(i), "j": int(j), "theta": backend.thetas[e].tolist()}
                          for e, (i, j) in enumerate(backend.edges)]}
    if isinstance(backend, GaussianKernel):
        return {"type": "gaussian",
                "positions": backend.positions.tolist(),
                "colors": backend.colors.tolist(),
                "compat": backend.compat.tolist(),
                "w1": backend.w1, "w2": backend.w2,
                "alpha": backend.alpha, "beta": backend.beta,
                "gamma": backend.gamma}
    raise TypeError(f"cannot serialize backend {backend!r}")


def read_json(path):
    """Parse an instance file; raises InstanceFormatError with the
    offending field named."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise InstanceFormatError("top-level value must be an object")
    version = _require(doc, "version", "instance file")
    if version != 1:
        raise InstanceFormatError(f"unsupported instance format version {version!r}")
    n = _require(doc, "n", "instance file")
    d = _require(doc, "d", "instance file")
    unary = np.asarray(_require(doc, "unary", "instance file"), dtype=float)
    if unary.shape != (n, d):
        raise InstanceFormatError(f"field 'unary' must be {n} x {d}, got {unary.shape}")
    pw = _require(doc, "pairwise", "instance file")
    kind = _require(pw, "type", "field 'pairwise'")
    try:
        if kind == "dense":
            # diagonal entries are tolerated on input (convexified energies)
            backend = DenseMatrix(np.asarray(_require(pw, "matrix", "pairwise"), dtype=float),
                                  d, allow_diagonal_blocks=True)
        elif kind == "edges":
            entries = _require(pw, "edges", "pairwise")
            edges = [( _require(e, "i", "edge entry"), _require(e, "j", "edge entry"))
                     for e in entries]
            thetas = [np.asarray(_require(e, "theta", "edge entry"), dtype=float)
                      for e in entries]
            thetas = np.array(thetas) if thetas else np.zeros((0, d, d))
            backend = EdgeList(n, d, np.array(edges, dtype=int).reshape(-1, 2), thetas)
        elif kind == "gaussian":
            backend = GaussianKernel(
                np.asarray(_require(pw, "positions", "pairwise"), dtype=float),
                np.asarray(_require(pw, "colors", "pairwise"), dtype=float),
                np.asarray(_require(pw, "compat", "pairwise"), dtype=float),
                w1=_require(pw, "w1", "pairwise"), w2=_require(pw, "w2", "pairwise"),
                alpha=_require(pw, "alpha", "pairwise"),
                beta=_require(pw, "beta", "pairwise"),
                gamma=_require(pw, "gamma", "pairwise"))
        else:
            raise InstanceFormatError(f"unknown pairwise type {kind!r}")
        return CrfInstance(unary, backend)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc


# ---------------------------------------------------------------------------
# UAI MARKOV subset

def _tokens(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            yield from line.split()


def read_uai(path):
    """Read a pairwise UAI MARKOV network as a CRF instance.

    The factor tables are probabilities; potentials are their negated
    logs, so minimizing the energy maximizes the factor product.
    """
    toks = _tokens(path)

    def next_tok(what):
        try:
            return next(toks)
        except StopIteration:
            raise InstanceFormatError(f"unexpected end of file while reading {what}") from None

    def next_int(what):
        tok = next_tok(what)
        try:
            return int(tok)
        except ValueError:
            raise InstanceFormatError(f"expected integer for {what}, got {tok!r}") from None

    def next_float(what):
        tok = next_tok(what)
        try:
            return float(tok)
        except ValueError:
            raise InstanceFormatError(f"expected number for {what}, got {tok!r}") from None

    network_type = next_tok("network type")
    if network_type.upper() != "MARKOV":
        raise UnsupportedFeatureError(f"unsupported network type {network_type!r}")
    n = next_int("variable count")
    cards = [next_int(f"cardinality of variable {i}") for i in range(n)]
    if n == 0:
        raise InstanceFormatError("network has no variables")
    d = cards[0]
    if any(c != d for c in cards):
        raise UnsupportedFeatureError("non-uniform label cardinalities are not supported")
    n_factors = next_int("factor count")
    scopes = []
    for f in range(n_factors):
        size = next_int(f"scope size of factor {f}")
        if size not in (1, 2):
            raise UnsupportedFeatureError(
                f"factor {f} has arity {size}; only unary and pairwise factors are supported")
        scope = [next_int(f"scope of factor {f}") for _ in range(size)]
        if any(not 0 <= v < n for v in scope):
            raise InstanceFormatError(f"factor {f} references an unknown variable")
        if size == 2 and scope[0] == scope[1]:
            raise InstanceFormatError(f"factor {f} repeats a variable in its scope")
        scopes.append(scope)

    unary = np.zeros((n, d))
    pair_theta = {}
    for f, scope in enumerate(scopes):
        n_entries = next_int(f"table size of factor {f}")
        expected = d ** len(scope)
        if n_entries != expected:
            raise InstanceFormatError(
                f"factor {f} table has {n_entries} entries, expected {expected}")
        table = np.array([next_float(f"table entry of factor {f}")
                          for _ in range(n_entries)])
        theta = -np.log(np.maximum(table, _PHI_FLOOR))
        if len(scope) == 1:
            unary[scope[0]] += theta
        else:
            a, b = scope
            block = theta.reshape(d, d)  # the last scope variable varies fastest
            if a < b:
                key = (a, b)
            else:
                key, block = (b, a), block.T
            pair_theta[key] = pair_theta.get(key, 0.0) + block

    edges = sorted(pair_theta)
    thetas = (np.array([pair_theta[e] for e in edges]) if edges
              else np.zeros((0, d, d)))
    backend = EdgeList(n, d, np.array(edges, dtype=int).reshape(-1, 2), thetas)
    return CrfInstance(unary, backend)
