"""ARX_d(p, q) models: parameter packing, regressors, P_k stream, and the
causality and strong-controllability tests.

The model is

    X_{n+1} = A_1 X_n + ... + A_p X_{n-p+1} + U_n + B_1 U_{n-1} + ... + B_q U_{n-q} + eps_{n+1}

with noise covariance ``Gamma``.  Its stacked parameter is the
``delta x d`` matrix ``theta`` whose transpose is ``(A_1, ..., A_p, B_1, ..., B_q)``.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .errors import NotPositiveDefiniteError, RejectedInputError


@dataclass(frozen=True, eq=False)
class ArxModel:
    d: int
    p: int
    q: int
    A: tuple
    B: tuple
    Gamma: np.ndarray
    _pk: "PkStream" = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d, p, q = int(self.d), int(self.p), int(self.q)
        if d < 1 or p < 0 or q < 0:
            raise RejectedInputError(f"invalid orders d={d}, p={p}, q={q}")
        if p + q < 1:
            raise RejectedInputError("p + q must be at least 1")
        A = tuple(_block(a, d, f"A[{i}]") for i, a in enumerate(self.A))
        B = tuple(_block(b, d, f"B[{j}]") for j, b in enumerate(self.B))
        if len(A) != p or len(B) != q:
            raise RejectedInputError(f"expected {p} A blocks and {q} B blocks, got {len(A)} and {len(B)}")
        gamma = _block(self.Gamma, d, "Gamma")
        try:
            linalg.cholesky(gamma)
        except NotPositiveDefiniteError as exc:
            raise RejectedInputError(f"Gamma must be positive definite: {exc}") from exc
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Gamma", gamma)
        object.__setattr__(self, "_pk", PkStream(A, B, d))

    @property
    def delta(self) -> int:
        return self.d * (self.p + self.q)

    @classmethod
    def from_dict(cls, doc: dict) -> "ArxModel":
        try:
            d, p, q = int(doc["d"]), int(doc["p"]), int(doc["q"])
            A = [np.asarray(a, dtype=float).reshape(d, d) for a in doc.get("A", [])]
            B = [np.asarray(b, dtype=float).reshape(d, d) for b in doc.get("B", [])]
            gamma = doc.get("Gamma")
            gamma = np.eye(d) if gamma is None else np.asarray(gamma, dtype=float).reshape(d, d)
        except (KeyError, TypeError, ValueError) as exc:
            raise RejectedInputError(f"malformed model document: {exc}") from exc
        return cls(d, p, q, tuple(A), tuple(B), gamma)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "p": self.p,
            "q": self.q,
            "A": [a.tolist() for a in self.A],
            "B": [b.tolist() for b in self.B],
            "Gamma": self.Gamma.tolist(),
        }

    def pk(self, k: int) -> np.ndarray:
        return self._pk[k]


def _block(a, d, name):
    m = linalg.as_matrix(a, name)
    if m.shape != (d, d):
        raise RejectedInputError(f"{name} must be {d}x{d}, got {m.shape}")
    m.setflags(write=False)
    return m


def load_model(path) -> ArxModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise RejectedInputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise RejectedInputError(f"{path}: model document must be a JSON object")
    return ArxModel.from_dict(doc)


class PkStream:
    """Lazily extended coefficients of ``P(z) = B(z)^{-1} (A(z) - I)``.

    Coefficient matching of ``B(z) P(z) = A(z) - I`` gives
    ``P_k = -A_k - sum_{j=1}^{min(q, k-1)} B_j P_{k-j}``.  Extension is
    guarded by a lock so a shared model can be queried from several threads.
    """

    def __init__(self, A, B, d):
        self._A = A
        self._B = B
        self._d = d
        self._coeffs = [np.zeros((d, d))]  # P_0 = 0 keeps indices aligned
        self._lock = threading.Lock()

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def __getitem__(self, k: int) -> np.ndarray:
        if k < 0:
            raise IndexError(k)
        if k >= len(self._coeffs):
            self.extend(k)
        return self._coeffs[k]

    def extend(self, k: int) -> None:
        with self._lock:
            while len(self._coeffs) <= k:
                m = len(self._coeffs)
                pk = -self._A[m - 1] if m <= len(self._A) else np.zeros((self._d, self._d))
                for j in range(1, min(len(self._B), m - 1) + 1):
                    pk = pk - self._B[j - 1] @ self._coeffs[m - j]
                pk.setflags(write=False)
                self._coeffs.append(pk)

    def upto(self, k: int) -> list:
        """``[P_0, P_1, ..., P_k]`` (``P_0`` is the zero matrix)."""
        self[k]
        return self._coeffs[: k + 1]


def pk_coefficient(model: ArxModel, k: int) -> np.ndarray:
    if k < 1:
        raise RejectedInputError(f"k must be >= 1, got {k}")
    return model.pk(k)


def companion(model: ArxModel) -> np.ndarray:
    """Block companion of ``B``: first block row ``(-B_1, ..., -B_q)``, identities below."""
    d, q = model.d, model.q
    c = np.zeros((d * q, d * q))
    for j, b in enumerate(model.B):
        c[:d, j * d:(j + 1) * d] = -b
    if q > 1:
        c[d:, :-d] = np.eye(d * (q - 1))
    return c


def check_causality(model: ArxModel, tol: float = 1e-10):
    """Return ``(causal, rho)``; ``rho`` is the spectral radius of the B companion.

    The companion eigenvalues are the reciprocals of the zeros of det B(z),
    so ``rho < 1 - tol`` means every zero lies strictly outside the unit disk.
    """
    if not 0.0 < tol <= 1e-2:
        raise RejectedInputError(f"tol must lie in (0, 1e-2], got {tol}")
    if model.q == 0:
        return True, 0.0
    rho = linalg.spectral_radius(companion(model), tol)
    return rho < 1.0 - tol, rho


def build_pi(model: ArxModel) -> np.ndarray:
    """The ``dq x dq`` matrix with block ``(i, j)`` equal to ``P_{p+j-i}`` (zero for index <= 0).

    This single rule reproduces both displayed layouts (``p >= q`` and ``p <= q``).
    """
    d, p, q = model.d, model.p, model.q
    if q == 0:
        raise RejectedInputError("Pi is undefined for q = 0")
    pks = model._pk.upto(p + q - 1)
    pi = np.zeros((d * q, d * q))
    for i in range(q):
        for j in range(q):
            k = p + j - i
            if k >= 1:
                pi[i * d:(i + 1) * d, j * d:(j + 1) * d] = pks[k]
    return pi


def check_strong_controllability(model: ArxModel, tol: float = 1e-10):
    """Return ``(strongly_controllable, causal, det_pi)``.

    ``Pi`` counts as invertible when ``|det Pi| > 1e-10 * ||Pi||_F^(dq)``,
    which is invariant under rescaling the model.  For ``q = 0`` the model is
    controllable by convention and ``det_pi`` is reported as 1.
    """
    causal, _ = check_causality(model, tol)
    if model.q == 0:
        return True, True, 1.0
    pi = build_pi(model)
    det_pi = linalg.det(pi)
    guard = 1e-10 * linalg.frobenius(pi) ** pi.shape[0]
    invertible = abs(det_pi) > guard and det_pi != 0.0
    return bool(causal and invertible), bool(causal), det_pi


def pack_theta(model: ArxModel) -> np.ndarray:
    """``delta x d`` matrix whose row block ``i`` is ``A_i^T`` (then ``B_j^T``)."""
    blocks = [a.T for a in model.A] + [b.T for b in model.B]
    return np.vstack(blocks)


def unpack_theta(theta, d: int, p: int, q: int):
    """Inverse of :func:`pack_theta`: returns ``(A_blocks, B_blocks)``."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (d * (p + q), d):
        raise RejectedInputError(f"theta must be {(d * (p + q), d)}, got {theta.shape}")
    blocks = [theta[i * d:(i + 1) * d].T.copy() for i in range(p + q)]
    return blocks[:p], blocks[p:]


def regressor(X, U, n: int, p: int, q: int) -> np.ndarray:
    """``Phi_n = (X_n, ..., X_{n-p+1}, U_{n-1}, ..., U_{n-q})`` with zeros before time 0."""
    d = X.shape[1]
    phi = np.zeros(d * (p + q))
    for i in range(p):
        if n - i >= 0:
            phi[i * d:(i + 1) * d] = X[n - i]
    for j in range(1, q + 1):
        if n - j >= 0:
            phi[(p + j - 1) * d:(p + j) * d] = U[n - j]
    return phi


def regressor_matrix(X, U, p: int, q: int) -> np.ndarray:
    """All regressors ``Phi_0 .. Phi_{len(X)-1}`` as rows."""
    X = np.asarray(X, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    n_rows, d = X.shape
    phi = np.zeros((n_rows, d * (p + q)))
    for i in range(p):
        phi[i:, i * d:(i + 1) * d] = X[: n_rows - i]
    for j in range(1, q + 1):
        phi[j:, (p + j - 1) * d:(p + j) * d] = U[: n_rows - j]
    return phi


def random_causal_model(rng, d, p, q, rho=0.8, gamma=None, scale=1.0) -> ArxModel:
    """Random model whose B companion has spectral radius exactly ``rho``.

    B is drawn with standard normal entries and then replaced by
    ``B_j * c**j``; this maps the zeros of det B(z) to ``zeros / c`` and so
    rescales the companion spectrum by ``c``.
    """
    A = tuple(scale * rng.standard_normal((d, d)) for _ in range(p))
    B = [rng.standard_normal((d, d)) for _ in range(q)]
    if gamma is None:
        m = rng.standard_normal((d, d))
        gamma = m @ m.T + d * np.eye(d)
    if q:
        probe = ArxModel(d, p, q, A, tuple(B), np.eye(d))
        r0 = linalg.spectral_radius(companion(probe), 1e-12)
        c = rho / r0 if r0 > 0 else 1.0
        B = [b * c ** (j + 1) for j, b in enumerate(B)]
    return ArxModel(d, p, q, A, tuple(B), gamma)


def demo_model() -> ArxModel:
    """The two-dimensional ARX(1, 1) benchmark used throughout the tests."""
    return ArxModel(
        2, 1, 1,
        (np.diag([2.0, 1.0]),),
        (np.diag([0.75, -0.5]),),
        np.eye(2),
    )
