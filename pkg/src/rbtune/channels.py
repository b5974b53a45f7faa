"""Density operators and superoperators in the column-stacking convention.

A channel on a d-dimensional system is stored as a d^2 x d^2 matrix ``S`` with
``vec(Lambda[rho]) = S @ vec(rho)``, where ``vec`` stacks columns. Composition
is then a matrix product and the average gate fidelity is a trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STRUCT_TOL = 1e-10
TP_TOL = 1e-9


def vec(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(vector).reshape((d, d), order="F")


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A valid quantum state: Hermitian, unit trace, positive semidefinite."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density operator must be square, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, atol=STRUCT_TOL):
            raise ValueError("density operator is not Hermitian")
        if abs(np.trace(m) - 1) > STRUCT_TOL:
            raise ValueError(f"density operator trace is {np.trace(m).real:.3g}, not 1")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -STRUCT_TOL:
            raise ValueError("density operator is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, psi) -> DensityOperator:
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, d: int = 2) -> DensityOperator:
        return cls(np.eye(d) / d)


@dataclass(frozen=True, eq=False)
class MeasurementEffect:
    """A POVM effect E with 0 <= E <= 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"effect must be square, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, atol=STRUCT_TOL):
            raise ValueError("effect is not Hermitian")
        eig = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if eig.min() < -STRUCT_TOL or eig.max() > 1 + STRUCT_TOL:
            raise ValueError("effect eigenvalues must lie in [0, 1]")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, rho) -> float:
        rho_m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
        return float(np.real(np.trace(self.matrix @ rho_m)))


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Linear map on d x d operators, stored as a column-stacked d^2 x d^2 matrix.

    Trace preservation is enforced at construction; complete positivity is
    checked on demand through :meth:`choi` because composing CPTP maps keeps it.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"superoperator must be square, got shape {m.shape}")
        d = int(round(np.sqrt(m.shape[0])))
        if d * d != m.shape[0]:
            raise ValueError(f"superoperator size {m.shape[0]} is not a perfect square")
        if not np.allclose(vec(np.eye(d)) @ m, vec(np.eye(d)), atol=TP_TOL):
            raise ValueError("superoperator is not trace preserving")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def __call__(self, rho):
        """Apply the channel; returns a DensityOperator for state inputs."""
        if isinstance(rho, DensityOperator):
            _check_dims(self.d, rho.d)
            return DensityOperator(unvec(self.matrix @ vec(rho.matrix), self.d))
        rho = np.asarray(rho)
        _check_dims(self.d, rho.shape[0])
        return unvec(self.matrix @ vec(rho), self.d)

    def choi(self) -> np.ndarray:
        d = self.d
        J = np.zeros((d * d, d * d), dtype=complex)
        for i in range(d):
            for j in range(d):
                E = np.zeros((d, d))
                E[i, j] = 1.0
                J += np.kron(E, unvec(self.matrix @ vec(E), d))
        return J

    def is_completely_positive(self, tol: float = TP_TOL) -> bool:
        J = self.choi()
        return bool(np.linalg.eigvalsh((J + J.conj().T) / 2).min() >= -tol)


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise ValueError(f"dimension mismatch: {a} != {b}")


def identity_channel(d: int = 2) -> Superoperator:
    return Superoperator(np.eye(d * d))


def unitary_channel(U) -> Superoperator:
    """Return the channel rho -> U rho U^dagger.

    Raises
    ------
    ValueError
        If ``U`` is not unitary to 1e-10.
    """
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"unitary must be square, got shape {U.shape}")
    if not np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=STRUCT_TOL):
        raise ValueError("matrix is not unitary")
    return Superoperator(np.kron(U.conj(), U))


def depolarizing_channel(strength: float, d: int = 2) -> Superoperator:
    """rho -> (1 - strength) rho + strength Tr(rho) 1/d."""
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"depolarizing strength must be in [0, 1], got {strength}")
    v = vec(np.eye(d))
    return Superoperator((1.0 - strength) * np.eye(d * d) + (strength / d) * np.outer(v, v))


def compose(a: Superoperator, b: Superoperator) -> Superoperator:
    """Channel that applies ``b`` first and then ``a``."""
    _check_dims(a.d, b.d)
    return Superoperator(a.matrix @ b.matrix)


def average_channel(channels) -> Superoperator:
    channels = list(channels)
    if not channels:
        raise ValueError("cannot average an empty set of channels")
    for c in channels[1:]:
        _check_dims(channels[0].d, c.d)
    return Superoperator(sum(c.matrix for c in channels) / len(channels))


def trace_distance(rho, sigma) -> float:
    """Trace norm of the difference, without the conventional factor 1/2 (range [0, 2])."""
    r = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    s = sigma.matrix if isinstance(sigma, DensityOperator) else np.asarray(sigma)
    _check_dims(r.shape[0], s.shape[0])
    return float(np.linalg.svd(r - s, compute_uv=False).sum())


def process_fidelity(channel: Superoperator) -> float:
    return float(np.real(np.trace(channel.matrix))) / channel.d**2


def agf(channel: Superoperator) -> float:
    """Average gate fidelity of ``channel`` with respect to the identity.

    Uses ``AGF = (d F_pro + 1) / (d + 1)`` with ``F_pro = Tr(S) / d^2``, which
    equals the Haar average of <psi|Lambda(|psi><psi|)|psi>.
    """
    d = channel.d
    return (d * process_fidelity(channel) + 1.0) / (d + 1.0)


def haar_random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return psi / np.linalg.norm(psi)


def haar_random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def channel_trace_distance_sup(
    a: Superoperator, b: Superoperator, samples: int, rng_seed=None
) -> float:
    """Lower estimate of sup_rho ||a[rho] - b[rho]||_Tr over Haar-random pure states."""
    _check_dims(a.d, b.d)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    diff = a.matrix - b.matrix
    best = 0.0
    for _ in range(samples):
        psi = haar_random_state(a.d, rng)
        out = unvec(diff @ vec(np.outer(psi, psi.conj())), a.d)
        best = max(best, float(np.linalg.svd(out, compute_uv=False).sum()))
    return best
