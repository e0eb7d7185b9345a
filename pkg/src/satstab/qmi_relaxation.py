"""Matrix-ellipsoidal uncertainty sets and the one-scalar LMI relaxation.

An uncertainty set is the family of matrices A (shape n2 x n3) satisfying a
quadratic matrix inequality

    N1 + N2 A + A^T N2^T + A^T N3 A  <=  0,     N3 > 0.

Robust positivity of the block matrix [[M1, M2 A], [*, M3]] over the whole
set is equivalent to positivity of a single assembled matrix in one extra
scalar eta > 0. This module implements the set geometry, samplers that act
as an independent oracle for that equivalence, the assembled relaxation, and
the embedding that maps it onto the classical scalar S-lemma form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySet, ShapeError, SingularBlock
from .linalg import TRANSPOSE, BlockSpec, as_matrix, assemble, read_matrices, sym_eig, sym_part, write_matrices

__all__ = [
    "EquivalenceReport",
    "QuadraticSet",
    "RelaxationInstance",
    "SigmaGeometry",
    "check_equivalence",
    "consistency_set",
    "eta_search",
    "find_violation",
    "in_sigma",
    "mcal",
    "random_feasible_instance",
    "random_infeasible_instance",
    "random_quadratic_set",
    "read_instance",
    "relaxed_lmi",
    "sample_sigma",
    "sigma_center_radius",
    "slemma_embedding",
    "write_instance",
]


@dataclass
class QuadraticSet:
    """Coefficients (N1, N2, N3) of the defining quadratic inequality, N3 > 0."""

    N1: np.ndarray
    N2: np.ndarray
    N3: np.ndarray

    def __post_init__(self):
        self.N1 = sym_part(self.N1)
        self.N3 = sym_part(self.N3)
        self.N2 = as_matrix(self.N2, rows=self.N1.shape[0], cols=self.N3.shape[0])
        if np.linalg.eigvalsh(self.N3)[0] <= 0:
            raise ValueError("N3 must be positive definite")

    @property
    def n3(self) -> int:
        return self.N1.shape[0]

    @property
    def n2(self) -> int:
        return self.N3.shape[0]


@dataclass
class RelaxationInstance:
    """Block data (M1, M2, M3) with M1 > 0, plus the uncertainty set."""

    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    N: QuadraticSet

    def __post_init__(self):
        self.M1 = sym_part(self.M1)
        self.M3 = sym_part(self.M3)
        self.M2 = as_matrix(self.M2, rows=self.M1.shape[0], cols=self.N.n2)
        if self.M3.shape[0] != self.N.n3:
            raise ShapeError(
                f"M3 has dim {self.M3.shape[0]} but the uncertainty set expects {self.N.n3}")

    @property
    def n1(self) -> int:
        return self.M1.shape[0]

    @property
    def n2(self) -> int:
        return self.N.n2

    @property
    def n3(self) -> int:
        return self.N.n3


@dataclass
class SigmaGeometry:
    """Center-radius form: A in the set iff (A-center)^T N3 (A-center) <= Q."""

    center: np.ndarray
    Q: np.ndarray
    empty: bool


def sigma_center_radius(N: QuadraticSet) -> SigmaGeometry:
    """Complete the square of the defining inequality.

    center = -N3^-1 N2^T and Q = N2 N3^-1 N2^T - N1; the set is empty iff Q
    has a negative eigenvalue.
    """
    try:
        X = np.linalg.solve(N.N3, N.N2.T)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock(f"N3 is singular: {exc}") from exc
    center = -X
    Q = sym_part(N.N2 @ X - N.N1)
    w = np.linalg.eigvalsh(Q)
    empty = bool(w[0] < -1e-12 * max(1.0, abs(w[-1])))
    return SigmaGeometry(center=center, Q=Q, empty=empty)


def in_sigma(A, N: QuadraticSet, tol: float = 1e-9) -> bool:
    """Membership test: largest eigenvalue of the defining form is <= tol."""
    A = as_matrix(A, rows=N.n2, cols=N.n3)
    form = N.N1 + N.N2 @ A + A.T @ N.N2.T + A.T @ N.N3 @ A
    return bool(np.linalg.eigvalsh(sym_part(form))[-1] <= tol)


def _sqrt_psd(M: np.ndarray, clip: float = 0.0) -> tuple[np.ndarray, int]:
    """PSD square root through the eigendecomposition; returns (root, rank)."""
    w, V = sym_eig(M)
    tol = 1e-12 * max(1.0, abs(w[-1]))
    w = np.where(w > tol, w, clip)
    rank = int(np.sum(w > 0))
    return V @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ V.T, rank


def sample_sigma(N: QuadraticSet, count: int, mode: str = "interior",
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Samples of the uncertainty set, stacked as (count, n2, n3).

    Interior mode scales a random contraction strictly below one; boundary
    mode pins the top singular value at exactly one, with its right singular
    direction inside the range of the radius factor so the quadratic form
    peaks at zero. Raises :class:`EmptySet` on an empty set.
    """
    if mode not in ("interior", "boundary"):
        raise ValueError(f"unknown mode {mode!r}")
    geo = sigma_center_radius(N)
    if geo.empty:
        raise EmptySet("the uncertainty set is empty")
    rng = rng or np.random.default_rng(0)
    n2, n3 = N.n2, N.n3
    root_q, rank_q = _sqrt_psd(geo.Q)
    w3, V3 = sym_eig(N.N3)
    n3_inv_half = V3 @ np.diag(1.0 / np.sqrt(w3)) @ V3.T
    if rank_q == 0:
        return np.repeat(geo.center[None, :, :], count, axis=0)
    out = np.empty((count, n2, n3))
    kmin = min(n2, n3)
    for k in range(count):
        if mode == "interior":
            R = rng.normal(size=(n2, n3))
            top = np.linalg.svd(R, compute_uv=False)[0]
            delta = (rng.uniform() / top) * R
        else:
            U, _ = np.linalg.qr(rng.normal(size=(n2, n2)))
            # first right-singular direction inside range(Q^1/2)
            v1 = root_q @ rng.normal(size=n3)
            v1 /= np.linalg.norm(v1)
            basis = np.column_stack([v1, rng.normal(size=(n3, n3 - 1))]) if n3 > 1 else v1[:, None]
            V, _ = np.linalg.qr(basis)
            sigma = np.zeros((n2, n3))
            svals = np.concatenate([[1.0], rng.uniform(size=kmin - 1)])
            sigma[np.arange(kmin), np.arange(kmin)] = svals
            delta = U @ sigma @ V.T
        out[k] = geo.center + n3_inv_half @ delta @ root_q
    return out


def mcal(inst: RelaxationInstance, A) -> np.ndarray:
    """The robust block matrix [[M1, M2 A], [*, M3]] at one uncertainty sample."""
    A = as_matrix(A, rows=inst.n2, cols=inst.n3)
    top = inst.M2 @ A
    return assemble(BlockSpec([inst.n1, inst.n3], [inst.n1, inst.n3],
                              [[inst.M1, top], [TRANSPOSE, inst.M3]]))


def relaxed_lmi(inst: RelaxationInstance, eta: float) -> np.ndarray:
    """Assembled (n1+n3+n2)-dim matrix whose positivity certifies robustness."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    N = inst.N
    return assemble(BlockSpec(
        row_sizes=[inst.n1, inst.n3, inst.n2],
        col_sizes=[inst.n1, inst.n3, inst.n2],
        blocks=[
            [inst.M1, None, inst.M2],
            [None, inst.M3 + eta * N.N1, eta * N.N2],
            [TRANSPOSE, TRANSPOSE, eta * N.N3],
        ],
    ))


def slemma_embedding(inst: RelaxationInstance) -> tuple[np.ndarray, np.ndarray]:
    """Padded (Ms, Ns) pair such that Ms - eta*Ns equals the relaxed matrix."""
    n1, n2, n3 = inst.n1, inst.n2, inst.n3
    Ms = assemble(BlockSpec(
        [n1, n3, n2], [n1, n3, n2],
        [[inst.M1, None, inst.M2], [None, inst.M3, None], [TRANSPOSE, None, np.zeros((n2, n2))]],
    ))
    Ns = -assemble(BlockSpec(
        [n1, n3, n2], [n1, n3, n2],
        [[np.zeros((n1, n1)), None, None], [None, inst.N.N1, inst.N.N2], [None, TRANSPOSE, inst.N.N3]],
    ))
    return Ms, Ns


def eta_search(inst: RelaxationInstance, log_lo: float = -9.0, log_hi: float = 6.0,
               evals: int = 200, margin: float = 1e-7) -> tuple[float | None, float, float]:
    """Golden-section maximization of the smallest eigenvalue over log10(eta).

    Returns (eta_star or None, best smallest eigenvalue, eta at the best
    evaluation); eta_star is set iff the best eigenvalue exceeds the margin.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0

    def f(t: float) -> float:
        return float(np.linalg.eigvalsh(relaxed_lmi(inst, 10.0 ** t))[0])

    a, b = log_lo, log_hi
    best_t, best_v = a, f(a)
    for t in (b, 0.5 * (a + b)):
        v = f(t)
        if v > best_v:
            best_t, best_v = t, v
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    used = 5
    while used < evals and (b - a) > 1e-12:
        if fc > best_v:
            best_t, best_v = c, fc
        if fd > best_v:
            best_t, best_v = d, fd
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        used += 1
    eta_best = 10.0 ** best_t
    return (eta_best if best_v > margin else None), best_v, eta_best


def find_violation(inst: RelaxationInstance, samples: int = 1000,
                   rng: np.random.Generator | None = None) -> tuple[np.ndarray, float]:
    """Worst uncertainty sample by smallest eigenvalue of the block matrix.

    The candidate pool is the set center plus interior and boundary samples;
    a returned eigenvalue <= 0 is a concrete robustness violation.
    """
    rng = rng or np.random.default_rng(0)
    geo = sigma_center_radius(inst.N)
    if geo.empty:
        raise EmptySet("the uncertainty set is empty")
    half = samples // 2
    pool = [geo.center[None, :, :]]
    if half:
        pool.append(sample_sigma(inst.N, half, "interior", rng))
    if samples - half:
        pool.append(sample_sigma(inst.N, samples - half, "boundary", rng))
    cands = np.concatenate(pool, axis=0)
    tops = inst.M2 @ cands  # (k, n1, n3)
    k = cands.shape[0]
    d = inst.n1 + inst.n3
    blocks = np.empty((k, d, d))
    blocks[:, :inst.n1, :inst.n1] = inst.M1
    blocks[:, inst.n1:, inst.n1:] = inst.M3
    blocks[:, :inst.n1, inst.n1:] = tops
    blocks[:, inst.n1:, :inst.n1] = np.transpose(tops, (0, 2, 1))
    eigs = np.linalg.eigvalsh(blocks)[:, 0]
    worst = int(np.argmin(eigs))
    return cands[worst], float(eigs[worst])


@dataclass
class EquivalenceReport:
    ii_feasible: bool
    eta_star: float | None
    best_lambda_min: float
    i_violations: list[np.ndarray]


def check_equivalence(inst: RelaxationInstance, samples: int = 1000,
                      rng: np.random.Generator | None = None,
                      margin: float = 1e-7) -> EquivalenceReport:
    """eta-search feasibility versus sampled robustness violations.

    Soundness (a feasible eta implies no sampled violation) is exact; the
    converse direction is probed statistically by the sampler.
    """
    rng = rng or np.random.default_rng(0)
    eta_star, best_v, _ = eta_search(inst, margin=margin)
    violations: list[np.ndarray] = []
    A, lam_min = find_violation(inst, samples, rng)
    if lam_min <= 0.0:
        violations.append(A)
    return EquivalenceReport(ii_feasible=eta_star is not None, eta_star=eta_star,
                             best_lambda_min=best_v, i_violations=violations)


def consistency_set(Xplus, X, U, lam: float, delta_omega) -> QuadraticSet:
    """Uncertainty set of all stacked [A B]^T consistent with recorded data
    under the sample-matrix noise bound p * lam * delta_omega."""
    Xplus = as_matrix(Xplus)
    X = as_matrix(X, rows=Xplus.shape[0], cols=Xplus.shape[1])
    U = as_matrix(U, cols=Xplus.shape[1])
    delta_omega = sym_part(delta_omega)
    p = X.shape[1]
    theta = np.vstack([X, U])
    return QuadraticSet(
        N1=Xplus @ Xplus.T - p * lam * delta_omega,
        N2=-Xplus @ theta.T,
        N3=theta @ theta.T,
    )


# ---------------------------------------------------------------------------
# random fixture generators (deterministic given the rng)
# ---------------------------------------------------------------------------

def random_quadratic_set(rng: np.random.Generator, n2: int, n3: int) -> QuadraticSet:
    """A nonempty uncertainty set with positive definite radius matrix."""
    R = rng.normal(size=(n2, n2))
    N3 = R @ R.T + 0.3 * np.eye(n2)
    N2 = rng.normal(size=(n3, n2))
    C = rng.normal(size=(n3, n3))
    Q = C @ C.T + 0.1 * np.eye(n3)
    N1 = N2 @ np.linalg.solve(N3, N2.T) - Q
    return QuadraticSet(N1=N1, N2=N2, N3=N3)


def random_feasible_instance(rng: np.random.Generator, n1: int, n2: int, n3: int,
                             eta0: float = 1.0) -> RelaxationInstance:
    """Instance whose relaxation is positive definite at eta0 by construction."""
    N = random_quadratic_set(rng, n2, n3)
    M2 = rng.normal(size=(n1, n2))
    base = M2 @ np.linalg.solve(eta0 * N.N3, M2.T)
    R = rng.normal(size=(n1, n1))
    M1 = sym_part(base) + R @ R.T + np.eye(n1)
    S1 = sym_part(M1 - base)
    C = -M2 @ np.linalg.solve(N.N3, N.N2.T)
    t = 1.5 * float(np.linalg.eigvalsh(sym_part(C.T @ np.linalg.solve(S1, C)))[-1]) + 0.1
    M3 = eta0 * sym_part(N.N2 @ np.linalg.solve(N.N3, N.N2.T) - N.N1) + t * np.eye(n3)
    return RelaxationInstance(M1=M1, M2=M2, M3=M3, N=N)


def random_infeasible_instance(rng: np.random.Generator, n1: int, n2: int, n3: int,
                               at: str = "center") -> RelaxationInstance:
    """Instance violated at a known member of the set (robustness fails)."""
    N = random_quadratic_set(rng, n2, n3)
    if at == "center":
        A0 = sigma_center_radius(N).center
    else:
        A0 = sample_sigma(N, 1, "boundary", rng)[0]
    R = rng.normal(size=(n1, n1))
    M1 = R @ R.T + np.eye(n1)
    M2 = rng.normal(size=(n1, n2))
    top = M2 @ A0
    schur = sym_part(top.T @ np.linalg.solve(M1, top))
    scale = 1.0 + float(np.trace(schur)) / n3
    C = rng.normal(size=(n3, n3))
    M3 = schur - 0.3 * scale * np.eye(n3) - 0.1 * sym_part(C @ C.T)
    return RelaxationInstance(M1=M1, M2=M2, M3=M3, N=N)


def write_instance(inst: RelaxationInstance) -> str:
    """Fixture text: six matrices in the shared matrix text format."""
    return write_matrices([inst.M1, inst.M2, inst.M3, inst.N.N1, inst.N.N2, inst.N.N3])


def read_instance(text: str) -> RelaxationInstance:
    M1, M2, M3, N1, N2, N3 = read_matrices(text, count=6)
    return RelaxationInstance(M1=M1, M2=M2, M3=M3, N=QuadraticSet(N1=N1, N2=N2, N3=N3))
