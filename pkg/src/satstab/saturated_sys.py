"""Plant, saturation nonlinearity, sector sets, ellipsoids, and simulation.

All values are immutable in spirit: functions never mutate their arguments,
so everything here is safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoiseBoundViolation, ShapeError, SingularBlock
from .linalg import as_matrix, is_pd, sym_eig, sym_part

__all__ = [
    "Controller",
    "Ellipsoid",
    "NoiseModel",
    "Plant",
    "ball_points",
    "closed_loop_spectral_radius",
    "deadzone",
    "ellipsoid_boundary_points",
    "ellipsoid_in_S",
    "first_settle_index",
    "in_S_of_G",
    "sample_in_ellipsoid",
    "sample_S_of_G",
    "sample_shell",
    "sat",
    "sector_holds",
    "simulate",
    "sphere_points",
    "step",
]


@dataclass
class Plant:
    """Discrete-time linear plant x+ = A x + B sat(u) + w with input levels u_bar."""

    A: np.ndarray
    B: np.ndarray
    u_bar: np.ndarray

    def __post_init__(self):
        self.A = as_matrix(self.A)
        if self.A.shape[0] != self.A.shape[1]:
            raise ShapeError(f"A must be square, got {self.A.shape}")
        self.B = as_matrix(self.B, rows=self.A.shape[0])
        self.u_bar = np.atleast_1d(np.asarray(self.u_bar, dtype=float))
        if self.u_bar.shape != (self.B.shape[1],):
            raise ShapeError(f"u_bar must have length {self.B.shape[1]}, got {self.u_bar.shape}")
        if not np.all(self.u_bar > 0):
            raise ValueError("saturation levels must be positive")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]


@dataclass
class NoiseModel:
    """Per-step energy bound ||w||^2 <= lam, and sample-matrix bound via delta_omega."""

    lam: float
    delta_omega: np.ndarray

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        self.delta_omega = sym_part(self.delta_omega)
        if self.lam > 0 and not is_pd(self.delta_omega):
            raise ValueError("delta_omega must be positive definite")


@dataclass
class Ellipsoid:
    """Sublevel set {x : x^T M x <= 1/alpha} of a positive definite quadratic."""

    M: np.ndarray
    alpha: float

    def __post_init__(self):
        self.M = sym_part(self.M)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not is_pd(self.M):
            raise ValueError("shape matrix must be positive definite")

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    @property
    def level(self) -> float:
        return 1.0 / self.alpha

    def quad(self, x: np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(x @ self.M @ x)
        return np.einsum("ki,ij,kj->k", x, self.M, x)

    def contains(self, x: np.ndarray, tol: float = 0.0):
        return self.quad(x) <= self.level + tol

    def area(self) -> float:
        """Area pi * alpha^-1 * det(M)^-1/2 (two-dimensional sets only)."""
        if self.dim != 2:
            raise ShapeError("area is defined for 2-D ellipsoids")
        return float(np.pi / (self.alpha * np.sqrt(np.linalg.det(self.M))))

    def semi_axes(self) -> np.ndarray:
        """Semi-axis lengths alpha^-1/2 * eig(M)^-1/2, descending."""
        w, _ = sym_eig(self.M)
        return 1.0 / np.sqrt(self.alpha * w)


@dataclass
class Controller:
    """State feedback u = K x with the sector auxiliary matrix G."""

    K: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        self.K = as_matrix(self.K)
        self.G = as_matrix(self.G, *self.K.shape)


def _check_input_shape(u, u_bar) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    u_bar = np.atleast_1d(np.asarray(u_bar, dtype=float))
    if u.shape[-1] != u_bar.shape[0]:
        raise ShapeError(f"input has {u.shape[-1]} components, levels have {u_bar.shape[0]}")
    return u, u_bar


def sat(u, u_bar) -> np.ndarray:
    """Component-wise clamp of u to [-u_bar, u_bar]."""
    u, u_bar = _check_input_shape(u, u_bar)
    return np.clip(u, -u_bar, u_bar)


def deadzone(u, u_bar) -> np.ndarray:
    """sat(u) - u; zero exactly where no component saturates."""
    u, u_bar = _check_input_shape(u, u_bar)
    return np.clip(u, -u_bar, u_bar) - u


def in_S_of_G(x, G, u_bar) -> bool:
    """True iff |G_(i) x| <= u_bar_i for every row i (closed inequalities)."""
    G = as_matrix(G)
    x = np.asarray(x, dtype=float)
    if x.shape != (G.shape[1],):
        raise ShapeError(f"state has shape {x.shape}, expected ({G.shape[1]},)")
    u_bar = np.atleast_1d(np.asarray(u_bar, dtype=float))
    if u_bar.shape != (G.shape[0],):
        raise ShapeError(f"levels have shape {u_bar.shape}, expected ({G.shape[0]},)")
    return bool(np.all(np.abs(G @ x) <= u_bar))


def sector_holds(x, ctrl: Controller, t_diag, u_bar) -> tuple[float, bool]:
    """Value and sign check of the dead-zone sector form phi^T T (sat(u) + G x).

    The form is guaranteed nonpositive whenever x lies in the region where
    every |G_(i) x| <= u_bar_i; outside it the check may fail.
    """
    x = np.asarray(x, dtype=float)
    t_diag = np.atleast_1d(np.asarray(t_diag, dtype=float))
    if np.any(t_diag <= 0):
        raise ValueError("sector multiplier must be positive diagonal")
    u = ctrl.K @ x
    phi = deadzone(u, u_bar)
    su = sat(u, u_bar)
    gx = ctrl.G @ x
    lhs = float(phi @ (t_diag * (su + gx)))
    scale = 1.0 + float(np.linalg.norm(phi) * np.max(t_diag) * (np.linalg.norm(su) + np.linalg.norm(gx)))
    return lhs, lhs <= 1e-12 * scale


def ellipsoid_in_S(W, Z, u_bar, margin: float = 0.0) -> bool:
    """True iff u_bar_i^2 - Z_(i) W^-1 Z_(i)^T > margin for every row.

    With G = Z W^-1 this certifies that the unit-level ellipsoid of W^-1 sits
    inside the region where the sector bound is valid. The test is strict
    because it mirrors a strict matrix inequality.
    """
    W = sym_part(W)
    Z = as_matrix(Z, cols=W.shape[0])
    u_bar = np.atleast_1d(np.asarray(u_bar, dtype=float))
    if u_bar.shape != (Z.shape[0],):
        raise ShapeError(f"levels have shape {u_bar.shape}, expected ({Z.shape[0]},)")
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock(f"W is numerically singular: {exc}") from exc
    # Z W^-1 Z^T row by row through the Cholesky factor
    V = np.linalg.solve(L, Z.T)
    gains = np.sum(V * V, axis=0)
    return bool(np.all(u_bar**2 - gains > margin))


def ellipsoid_boundary_points(E: Ellipsoid, count: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Points on {x^T M x = 1/alpha}; angle-ordered in 2-D, random directions otherwise."""
    if count < 1:
        raise ValueError("count must be positive")
    n = E.dim
    if n == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        rng = rng or np.random.default_rng(0)
        dirs = rng.normal(size=(count, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    w, V = sym_eig(E.M)
    half_inv = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    pts = dirs @ half_inv.T
    # renormalize so the quadratic hits the level exactly despite rounding
    q = np.einsum("ki,ij,kj->k", pts, E.M, pts)
    return pts / np.sqrt(E.alpha * q)[:, None]


def step(plant: Plant, K, x, w) -> np.ndarray:
    """One closed-loop step A x + B sat(K x) + w."""
    K = as_matrix(K, plant.n_u, plant.n_x)
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != (plant.n_x,) or w.shape != (plant.n_x,):
        raise ShapeError(f"state and noise must have shape ({plant.n_x},)")
    return plant.A @ x + plant.B @ sat(K @ x, plant.u_bar) + w


def simulate(plant: Plant, K, x0, noise, steps: int,
             noise_model: NoiseModel | None = None) -> np.ndarray:
    """Trajectory of length steps+1 from x0; noise is (steps, n_x) or None.

    When a noise model is supplied every sample must satisfy ||w||^2 <= lam,
    otherwise :class:`NoiseBoundViolation` is raised.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (plant.n_x,):
        raise ShapeError(f"x0 must have shape ({plant.n_x},)")
    if noise is None:
        noise = np.zeros((steps, plant.n_x))
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (steps, plant.n_x):
        raise ShapeError(f"noise must have shape ({steps}, {plant.n_x}), got {noise.shape}")
    if noise_model is not None:
        energy = np.sum(noise**2, axis=1)
        bound = noise_model.lam * (1.0 + 1e-12) + 1e-300
        if np.any(energy > bound):
            k = int(np.argmax(energy))
            raise NoiseBoundViolation(
                f"noise sample {k} has energy {energy[k]:.6g} > lam={noise_model.lam:.6g}")
    K = as_matrix(K, plant.n_u, plant.n_x)
    traj = np.empty((steps + 1, plant.n_x))
    traj[0] = x0
    x = x0
    for k in range(steps):
        x = plant.A @ x + plant.B @ sat(K @ x, plant.u_bar) + noise[k]
        traj[k + 1] = x
    return traj


def closed_loop_spectral_radius(plant: Plant, K) -> float:
    K = as_matrix(K, plant.n_u, plant.n_x)
    return float(np.max(np.abs(np.linalg.eigvals(plant.A + plant.B @ K))))


def first_settle_index(values, level: float, tol: float = 0.0) -> int | None:
    """First index k with values[j] <= level + tol for all j >= k, else None."""
    v = np.asarray(values, dtype=float)
    above = np.nonzero(v > level + tol)[0]
    if len(above) == 0:
        return 0
    k = int(above[-1]) + 1
    return k if k < len(v) else None


# ---------------------------------------------------------------------------
# samplers used by the certification batteries
# ---------------------------------------------------------------------------

def sphere_points(rng: np.random.Generator, n: int, count: int, radius: float) -> np.ndarray:
    """count points uniformly on the sphere of given radius in R^n."""
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return radius * d


def ball_points(rng: np.random.Generator, n: int, count: int, radius: float) -> np.ndarray:
    """count points uniformly in the ball of given radius in R^n."""
    d = sphere_points(rng, n, count, 1.0)
    r = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    return r * d


def sample_in_ellipsoid(E: Ellipsoid, count: int, rng: np.random.Generator) -> np.ndarray:
    """Volume-uniform samples of {x^T M x <= 1/alpha}."""
    w, V = sym_eig(E.M)
    half_inv = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    return ball_points(rng, E.dim, count, 1.0) @ half_inv.T / np.sqrt(E.alpha)


def sample_shell(E: Ellipsoid, count: int, rng: np.random.Generator, inner: float) -> np.ndarray:
    """Samples with alpha * x^T M x uniform in [inner, 1] (ellipsoidal shell)."""
    if not 0.0 <= inner <= 1.0:
        raise ValueError("inner must lie in [0, 1]")
    w, V = sym_eig(E.M)
    half_inv = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    dirs = rng.normal(size=(count, E.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = np.sqrt(rng.uniform(inner, 1.0, size=(count, 1)))
    return (r * dirs) @ half_inv.T / np.sqrt(E.alpha)


def sample_S_of_G(G, u_bar, count: int, rng: np.random.Generator, radius: float = 10.0) -> np.ndarray:
    """Samples of the closed region {|G_(i) x| <= u_bar_i}: raw gaussians are
    shrunk onto or inside the region, half of them strictly inside."""
    G = as_matrix(G)
    u_bar = np.atleast_1d(np.asarray(u_bar, dtype=float))
    pts = radius * rng.normal(size=(count, G.shape[1]))
    rows = np.abs(pts @ G.T)  # (count, n_u)
    with np.errstate(divide="ignore"):
        fac = np.min(np.where(rows > 0, u_bar / rows, np.inf), axis=1)
    fac = np.minimum(fac, 1.0)
    interior = rng.uniform(size=count) < 0.5
    fac = np.where(interior, fac * rng.uniform(size=count), fac)
    return pts * fac[:, None]
