"""Gaussian field families on finite index sets.

A model stores a *base* representation (dense covariance, diagonal,
factor ``A`` with ``Sigma = A A^T``, or sparse precision ``P`` with
``Sigma = P^{-1}``) together with a scalar field multiplier ``scale``, so the
implied covariance is always ``scale**2 * base``. Normalization only touches
``scale``; the expensive base data and its caches are shared between rescaled
copies.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import (
    CapacityError,
    DegenerateModelError,
    InvalidArgumentError,
    ParseError,
    ValidationError,
)

KINDS = ("dense", "diagonal", "factor", "precision")

SIGN_FIELD_CAP = 2**20
ASYMMETRY_TOL = 1e-6


@dataclass(frozen=True)
class IndexSet:
    size: int
    labels: tuple | None = None

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise InvalidArgumentError(f"index set size must be >= 1, got {self.size}")
        if self.labels is not None:
            if len(self.labels) != self.size:
                raise InvalidArgumentError(
                    f"{len(self.labels)} labels for an index set of size {self.size}"
                )
            if len(set(self.labels)) != self.size:
                raise InvalidArgumentError("index labels must be distinct")

    def index_of(self, label) -> int:
        if self.labels is None:
            raise InvalidArgumentError("index set carries no labels")
        try:
            return self.labels.index(tuple(label))
        except ValueError:
            raise InvalidArgumentError(f"unknown label {label!r}") from None


@dataclass(frozen=True)
class FieldSample:
    values: np.ndarray
    seed: int
    model_id: str
    stream_index: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("sample values must be finite")

    @property
    def size(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class FieldModel:
    """Centered Gaussian field with covariance ``scale**2 * base``.

    ``effective_n`` and ``lam`` are the normalization metadata: after
    :func:`normalize_to_spec` the largest variance equals ``effective_n`` and
    ``effective_n = log(size) / log(lam)``.
    """

    index_set: IndexSet
    kind: str
    data: object
    effective_n: float
    lam: float
    name: str
    base_variances: np.ndarray = field(repr=False)
    scale: float = 1.0
    norm_factor: float = 1.0
    degenerate: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown representation {self.kind!r}")
        if not self.lam > 1:
            raise InvalidArgumentError(f"lambda must exceed 1, got {self.lam}")

    @property
    def size(self) -> int:
        return self.index_set.size

    @property
    def model_id(self) -> str:
        return f"{self.name}*{self.scale:.17g}"

    @property
    def variances(self) -> np.ndarray:
        return self.scale**2 * self.base_variances

    @property
    def sigma_max_sq(self) -> float:
        return float(self.scale**2 * self.base_variances.max())

    def scaled(self, c: float) -> FieldModel:
        """Same field multiplied by ``c``; shares base data and caches."""
        if c < 0:
            raise InvalidArgumentError("field multiplier must be nonnegative")
        return replace(self, scale=self.scale * c, degenerate=self.degenerate or c == 0)

    def _check_index(self, v) -> int:
        if isinstance(v, (tuple, list)):
            v = self.index_set.index_of(v)
        v = int(v)
        if not 0 <= v < self.size:
            raise InvalidArgumentError(f"index {v} out of range for size {self.size}")
        return v

    # --- base-level linear algebra -------------------------------------

    def precision_factor(self):
        """Upper banded Cholesky factor ``U`` of the precision, ``P = U^T U``.

        Returns ``(ab, bandwidth)`` in LAPACK upper band storage.
        """
        if self.kind != "precision":
            raise InvalidArgumentError("model has no precision representation")
        if "chol_band" not in self._cache:
            P = sp.csr_matrix(self.data)
            bw = _bandwidth(P)
            ab = _upper_band(P, bw)
            try:
                U = scipy.linalg.cholesky_banded(ab, lower=False)
            except np.linalg.LinAlgError as exc:
                raise ValidationError(f"precision matrix is not positive definite: {exc}")
            self._cache["chol_band"] = (U, bw)
        return self._cache["chol_band"]

    def _base_column(self, v: int) -> np.ndarray:
        cols = self._cache.setdefault("columns", {})
        col = cols.get(v)
        if col is not None:
            return col
        if self.kind == "dense":
            col = np.asarray(self.data[:, v], dtype=float)
        elif self.kind == "diagonal":
            col = np.zeros(self.size)
            col[v] = self.data[v]
        elif self.kind == "factor":
            col = self.data @ self.data[v]
        else:
            U, _ = self.precision_factor()
            e = np.zeros(self.size)
            e[v] = 1.0
            col = scipy.linalg.cho_solve_banded((U, False), e)
            cols[v] = col
        return col

    def column(self, v) -> np.ndarray:
        """Covariance column ``Sigma[:, v]``."""
        v = self._check_index(v)
        return self.scale**2 * self._base_column(v)

    def covariance_block(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=int)
        cols = [self._check_index(c) for c in cols]
        if self.kind == "factor":
            A = self.data
            return self.scale**2 * (A[rows] @ A[cols].T)
        out = np.empty((len(rows), len(cols)))
        for j, c in enumerate(cols):
            out[:, j] = self._base_column(c)[rows]
        return self.scale**2 * out

    def dense_covariance(self) -> np.ndarray:
        """Full covariance matrix; intended for small models and tests."""
        if self.kind == "dense":
            base = np.asarray(self.data, dtype=float)
        elif self.kind == "diagonal":
            base = np.diag(self.data)
        elif self.kind == "factor":
            base = self.data @ self.data.T
        else:
            U, _ = self.precision_factor()
            base = scipy.linalg.cho_solve_banded((U, False), np.eye(self.size))
        return self.scale**2 * base


def covariance_entry(model: FieldModel, u, v) -> float:
    u = model._check_index(u)
    v = model._check_index(v)
    if model.kind == "factor":
        return float(model.scale**2 * (model.data[u] @ model.data[v]))
    return float(model.scale**2 * model._base_column(v)[u])


def _bandwidth(P: sp.csr_matrix) -> int:
    coo = P.tocoo()
    return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0


def _upper_band(P: sp.csr_matrix, bw: int) -> np.ndarray:
    n = P.shape[0]
    ab = np.zeros((bw + 1, n))
    coo = sp.triu(P).tocoo()
    ab[bw + coo.row - coo.col, coo.col] = coo.data
    return ab


def _model(index_set, kind, data, base_var, name, lam=math.e, effective_n=None):
    size = index_set.size
    if effective_n is None:
        effective_n = math.log(size) / math.log(lam)
    return FieldModel(
        index_set=index_set,
        kind=kind,
        data=data,
        effective_n=effective_n,
        lam=lam,
        name=name,
        base_variances=np.asarray(base_var, dtype=float),
        degenerate=size == 1,
    )


def build_iid(size: int, variance: float) -> FieldModel:
    if int(size) != size or size < 1:
        raise InvalidArgumentError(f"size must be a positive integer, got {size}")
    if not variance > 0:
        raise InvalidArgumentError(f"variance must be positive, got {variance}")
    d = np.full(int(size), float(variance))
    return _model(IndexSet(int(size)), "diagonal", d, d, f"iid({size})")


def build_sign_field(n: int, cap: int = SIGN_FIELD_CAP) -> FieldModel:
    """Field ``eta_v = <v, Z>`` over ``v`` in ``{-1, 1}^n``."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n}")
    if 2**n > cap:
        raise CapacityError(f"sign field with 2**{n} points exceeds the size cap {cap}")
    labels = tuple(itertools.product((-1, 1), repeat=n))
    A = np.array(labels, dtype=float)
    return _model(
        IndexSet(len(labels), labels), "factor", A, np.full(len(labels), float(n)),
        f"sign({n})", lam=2.0, effective_n=float(n),
    )


def dgff_laplacian(side: int) -> sp.csr_matrix:
    """Graph Laplacian of the ``side x side`` box with Dirichlet boundary.

    Rows are the interior vertices in row-major order; every interior vertex has
    degree 4 (boundary neighbours are absorbing).
    """
    m = side - 2
    T = sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])
    I = sp.identity(m)
    return sp.csr_matrix(sp.kron(T, I) + sp.kron(I, T))


def _dgff_green_diagonal(m: int) -> np.ndarray:
    # Eigenbasis of the 1-D Dirichlet Laplacian diagonalizes the box Laplacian.
    x = np.arange(1, m + 1)
    theta = np.pi * np.outer(x, x) / (m + 1)
    phi_sq = (2.0 / (m + 1)) * np.sin(theta) ** 2
    mu = 2.0 - 2.0 * np.cos(np.pi * x / (m + 1))
    W = 1.0 / (mu[:, None] + mu[None, :])
    return (phi_sq @ W @ phi_sq.T).ravel()


def build_dgff(side: int) -> FieldModel:
    if int(side) != side or side < 3:
        raise InvalidArgumentError(f"side must be >= 3, got {side}")
    side = int(side)
    m = side - 2
    labels = tuple((i, j) for i in range(1, m + 1) for j in range(1, m + 1))
    model = _model(
        IndexSet(m * m, labels), "precision", dgff_laplacian(side),
        _dgff_green_diagonal(m), f"dgff({side})",
    )
    return normalize_to_spec(model)


def normalize_to_spec(model: FieldModel) -> FieldModel:
    """Rescale so the largest variance equals ``model.effective_n``."""
    s2 = model.sigma_max_sq
    if s2 <= 0:
        raise DegenerateModelError(f"{model.name}: maximum variance is zero")
    if math.isclose(s2, model.effective_n, rel_tol=1e-12):
        factor = 1.0
    else:
        factor = math.sqrt(model.effective_n / s2)
    return replace(
        model,
        scale=model.scale * factor,
        norm_factor=factor,
        degenerate=model.size == 1 or factor == 0.0,
    )


def load_covariance(path) -> FieldModel:
    """Read a ``dense <m>`` or ``factor <m> <k>`` text file."""
    path = Path(path)
    text = path.read_bytes().decode("utf-8")
    rows = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = (lineno, line.split())
            continue
        rows.append((lineno, line.split()))
    if header is None:
        raise ParseError("missing header line", line=1)

    hline, tok = header
    if tok[0] == "dense" and len(tok) == 2:
        kind, m, k = "dense", _parse_int(tok[1], hline), None
        width = m
    elif tok[0] == "factor" and len(tok) == 3:
        kind, m, k = "factor", _parse_int(tok[1], hline), _parse_int(tok[2], hline)
        width = k
    else:
        raise ParseError(f"bad header {' '.join(tok)!r}", line=hline)
    if m < 1 or width < 1:
        raise ParseError("dimensions must be positive", line=hline)

    if len(rows) > m:
        raise ParseError(f"expected {m} rows, found more", line=rows[m][0])
    mat = np.empty((m, width))
    for r, (lineno, vals) in enumerate(rows):
        if len(vals) != width:
            raise ParseError(f"expected {width} values, found {len(vals)}", line=lineno)
        try:
            mat[r] = [float(x) for x in vals]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    if len(rows) < m:
        last = rows[-1][0] + 1 if rows else hline + 1
        raise ParseError(f"expected {m} rows, found {len(rows)}", line=last)
    if not np.all(np.isfinite(mat)):
        raise ParseError("non-finite entry")

    name = f"file({path.name})"
    if kind == "factor":
        return _model(IndexSet(m), "factor", mat, np.einsum("ij,ij->i", mat, mat), name)

    asym = np.max(np.abs(mat - mat.T))
    if asym > ASYMMETRY_TOL * max(1.0, np.max(np.abs(mat))):
        raise ValidationError(f"covariance asymmetric by {asym:.3g}")
    if asym > 0:
        warnings.warn(f"{path}: repairing asymmetry of {asym:.3g} by averaging", stacklevel=2)
        mat = 0.5 * (mat + mat.T)
    return _model(IndexSet(m), "dense", mat, np.diag(mat).copy(), name)


def save_covariance(model: FieldModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if model.kind == "factor":
            A = model.scale * model.data
            fh.write(f"factor {A.shape[0]} {A.shape[1]}\n")
        else:
            A = model.dense_covariance()
            fh.write(f"dense {A.shape[0]}\n")
        for row in A:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def _parse_int(tok: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", line=line) from None
