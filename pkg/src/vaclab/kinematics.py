"""Flow-map algebra on tensor grids: Jacobian, inverse deformation, and the
discrete verification of the Piola and differentiation identities.

Fourth-order centered differences in the interior with third-order
one-sided closures at the box boundary; identity residuals are therefore
measured on an interior window (fixed physical margin) where the pure
centered stencils apply and Richardson ratios follow the interior order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DeformationDegenerateError(RuntimeError):
    """Deformation gradient lost invertibility at a grid node."""

    def __init__(self, node_index, det_value):
        self.node_index = tuple(int(k) for k in node_index)
        self.det_value = float(det_value)
        super().__init__(
            f"non-invertible deformation at node {self.node_index}: det = {det_value:.3e}"
        )


@dataclass(frozen=True)
class BoxGrid:
    """Uniform tensor-product grid on a cube in R^n."""

    n: int
    axes: tuple[np.ndarray, ...]
    spacing: float

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.size for ax in self.axes)

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes, indexing="ij"))

    def radius(self) -> np.ndarray:
        grids = self.meshgrid()
        return np.sqrt(sum(g ** 2 for g in grids))

    def interior_mask(self, margin: float = 0.15) -> np.ndarray:
        """Nodes at least ``margin`` * width away from every box face."""
        mask = np.ones(self.shape, dtype=bool)
        for ax_idx, ax in enumerate(self.axes):
            width = ax[-1] - ax[0]
            keep = (ax >= ax[0] + margin * width) & (ax <= ax[-1] - margin * width)
            shape = [1] * self.n
            shape[ax_idx] = ax.size
            mask &= keep.reshape(shape)
        return mask


def box_grid(n: int, half_width: float, num_points: int) -> BoxGrid:
    axis = np.linspace(-half_width, half_width, num_points)
    return BoxGrid(n=n, axes=tuple(axis.copy() for _ in range(n)),
                   spacing=float(axis[1] - axis[0]))


def d1_matrix(m: int, h: float) -> np.ndarray:
    """First-derivative matrix: 4th-order centered interior, 3rd-order
    one-sided rows at the two boundary pairs."""
    if m < 6:
        raise ValueError("need at least 6 points per axis")
    d = np.zeros((m, m))
    for i in range(2, m - 2):
        d[i, i - 2:i + 3] = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
    d[0, 0:4] = np.array([-11.0, 18.0, -9.0, 2.0]) / (6.0 * h)
    d[1, 0:4] = np.array([-2.0, -3.0, 6.0, -1.0]) / (6.0 * h)
    d[m - 1, m - 4:m] = -np.array([2.0, -9.0, 18.0, -11.0]) / (6.0 * h)
    d[m - 2, m - 4:m] = -np.array([-1.0, 6.0, -3.0, -2.0]) / (6.0 * h)
    return d


def apply_d(grid: BoxGrid, field: np.ndarray, axis: int,
            _cache: dict = {}) -> np.ndarray:
    """Apply the 1D derivative matrix along ``axis`` of a scalar field."""
    key = (grid.shape[axis], grid.spacing)
    if key not in _cache:
        _cache[key] = d1_matrix(*key)
    d = _cache[key]
    out = np.tensordot(d, field, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def gradient_tensor(grid: BoxGrid, omega: np.ndarray) -> np.ndarray:
    """G[..., i, j] = d omega_i / d y_j for a vector field (*shape, n)."""
    n = grid.n
    g = np.empty(omega.shape + (n,))
    for i in range(n):
        for j in range(n):
            g[..., i, j] = apply_d(grid, omega[..., i], j)
    return g


@dataclass
class DeformationField:
    """Nodal deformation data for eta(y) = y + omega(y)."""

    grid: BoxGrid
    omega: np.ndarray
    grad_omega: np.ndarray
    jacobian: np.ndarray        # J = det(I + d omega)
    inverse_matrix: np.ndarray  # A with [grad_eta f]_i = A^k_i d_k f


def build_deformation(grid: BoxGrid, omega: np.ndarray) -> DeformationField:
    """Differentiate omega and form J and A = (d eta / d y)^(-1) nodewise."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != grid.shape + (grid.n,):
        raise ValueError("omega samples must have shape grid.shape + (n,)")
    grad = gradient_tensor(grid, omega)
    m = grad + np.eye(grid.n)
    jac = np.linalg.det(m)
    if np.any(jac <= 0.0) or not np.all(np.isfinite(jac)):
        bad = np.unravel_index(int(np.argmin(jac)), jac.shape)
        raise DeformationDegenerateError(bad, jac[bad])
    # A^k_i = (M^{-1})_{ki} with M_{ij} = d_j eta_i, so the raw inverse has
    # exactly the wanted index layout: inverse_matrix[..., k, i].
    a = np.linalg.inv(m)
    return DeformationField(grid=grid, omega=omega, grad_omega=grad,
                            jacobian=jac, inverse_matrix=a)


def grad_eta(field: DeformationField, scalar: np.ndarray) -> np.ndarray:
    a = field.inverse_matrix
    parts = [apply_d(field.grid, scalar, k) for k in range(field.grid.n)]
    return np.einsum("k...,...ki->...i", np.array(parts), a)


def div_eta(field: DeformationField, vector: np.ndarray) -> np.ndarray:
    n = field.grid.n
    a = field.inverse_matrix
    out = np.zeros(field.grid.shape)
    for i in range(n):
        for k in range(n):
            out += a[..., k, i] * apply_d(field.grid, vector[..., i], k)
    return out


def curl_eta(field: DeformationField, vector: np.ndarray) -> np.ndarray:
    n = field.grid.n
    a = field.inverse_matrix
    d = [[apply_d(field.grid, vector[..., c], k) for k in range(n)] for c in range(n)]
    if n == 2:
        out = np.zeros(field.grid.shape)
        for k in range(2):
            out += a[..., k, 0] * d[1][k] - a[..., k, 1] * d[0][k]
        return out
    out = np.zeros(field.grid.shape + (3,))
    eps = _permutation_symbol()
    for i in range(3):
        for j in range(3):
            for k in range(3):
                if eps[i, j, k]:
                    for r in range(3):
                        out[..., i] += eps[i, j, k] * a[..., r, j] * d[k][r]
    return out


def _permutation_symbol() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[i, k, j] = -1.0
    return eps


@dataclass(frozen=True)
class IdentityReport:
    """Interior sup-norms of the discrete kinematic identity residuals."""

    piola: float
    jacobian_derivative: float
    inverse_derivative: float
    margin: float


def check_identities(field: DeformationField, margin: float = 0.15) -> IdentityReport:
    """Residuals of the Piola identity and the differentiation formulae
    d_j J = J A^s_r d_j d_s omega^r and
    d_j A^k_i = -A^k_r A^s_i d_j d_s omega^r."""
    grid, n = field.grid, field.grid.n
    a, jac = field.inverse_matrix, field.jacobian
    mask = grid.interior_mask(margin)

    piola = 0.0
    for i in range(n):
        resid = np.zeros(grid.shape)
        for k in range(n):
            resid += apply_d(grid, jac * a[..., k, i], k)
        piola = max(piola, float(np.max(np.abs(resid[mask]))))

    # second derivatives of omega: dd[r][j, s] = d_j d_s omega^r
    dd = [[[apply_d(grid, field.grad_omega[..., r, s], j) for s in range(n)]
           for j in range(n)] for r in range(n)]

    jac_resid = 0.0
    for j in range(n):
        lhs = apply_d(grid, jac, j)
        rhs = np.zeros(grid.shape)
        for r in range(n):
            for s in range(n):
                rhs += jac * a[..., s, r] * dd[r][j][s]
        jac_resid = max(jac_resid, float(np.max(np.abs((lhs - rhs)[mask]))))

    inv_resid = 0.0
    for j in range(n):
        for k in range(n):
            for i in range(n):
                lhs = apply_d(grid, a[..., k, i], j)
                rhs = np.zeros(grid.shape)
                for r in range(n):
                    for s in range(n):
                        rhs -= a[..., k, r] * a[..., s, i] * dd[r][j][s]
                inv_resid = max(inv_resid, float(np.max(np.abs((lhs - rhs)[mask]))))

    return IdentityReport(piola=piola, jacobian_derivative=jac_resid,
                          inverse_derivative=inv_resid, margin=margin)


def adjugate_residual(field: DeformationField) -> float:
    """Round-off check: J * A must equal the adjugate of I + d omega."""
    n = field.grid.n
    m = field.grad_omega + np.eye(n)
    ja = field.jacobian[..., None, None] * field.inverse_matrix
    if n == 2:
        adj = np.empty_like(m)
        adj[..., 0, 0] = m[..., 1, 1]
        adj[..., 1, 1] = m[..., 0, 0]
        adj[..., 0, 1] = -m[..., 0, 1]
        adj[..., 1, 0] = -m[..., 1, 0]
    else:
        adj = np.empty_like(m)
        for i in range(3):
            for j in range(3):
                i1, i2 = [a for a in range(3) if a != j]
                j1, j2 = [a for a in range(3) if a != i]
                adj[..., i, j] = (-1.0) ** (i + j) * (
                    m[..., i1, j1] * m[..., i2, j2] - m[..., i1, j2] * m[..., i2, j1]
                )
    return float(np.max(np.abs(ja - adj)))


def jacobian_expansion_residuals(field: DeformationField,
                                 margin: float = 0.0) -> dict[str, float]:
    """Sup residuals of J against its div/curl expansion, truncated at
    linear, quadratic, and (for n = 3) cubic order."""
    grid, n = field.grid, field.grid.n
    g = field.grad_omega
    mask = grid.interior_mask(margin) if margin > 0 else np.ones(grid.shape, bool)
    div = np.trace(g, axis1=-2, axis2=-1)
    grad_sq = np.sum(g ** 2, axis=(-2, -1))
    if n == 2:
        curl_sq = (g[..., 1, 0] - g[..., 0, 1]) ** 2
    else:
        curl_sq = ((g[..., 2, 1] - g[..., 1, 2]) ** 2
                   + (g[..., 0, 2] - g[..., 2, 0]) ** 2
                   + (g[..., 1, 0] - g[..., 0, 1]) ** 2)
    quad = 0.5 * (div ** 2 + curl_sq - grad_sq)
    expansion = 1.0 + div + quad
    out = {
        "linear": float(np.max(np.abs((field.jacobian - 1.0 - div))[mask])),
        "quadratic": float(np.max(np.abs(field.jacobian - expansion)[mask])),
    }
    if n == 3:
        cubic = np.linalg.det(g)
        out["cubic"] = float(np.max(np.abs(field.jacobian - expansion - cubic)[mask]))
    return out


def radial_vector_field(grid: BoxGrid, w_of_r) -> np.ndarray:
    """Sample omega = w(r) y/|y| on the grid (w(0)/r limit taken as w'(0))."""
    grids = grid.meshgrid()
    r = grid.radius()
    safe = np.where(r > 0, r, 1.0)
    ratio = np.where(r > 0, w_of_r(safe) / safe, _derivative_at_zero(w_of_r))
    return np.stack([ratio * g for g in grids], axis=-1)


def _derivative_at_zero(w_of_r, h: float = 1e-6) -> float:
    return (w_of_r(h) - w_of_r(-h)) / (2.0 * h)


def random_smooth_field(grid: BoxGrid, rng: np.random.Generator,
                        grad_amplitude: float, waves: int = 2) -> np.ndarray:
    """Smooth trigonometric vector field scaled to max |d omega| target."""
    grids = grid.meshgrid()
    width = grid.axes[0][-1] - grid.axes[0][0]
    omega = np.zeros(grid.shape + (grid.n,))
    for i in range(grid.n):
        acc = np.zeros(grid.shape)
        for _ in range(waves):
            k = rng.integers(1, 3, size=grid.n)
            phase = rng.uniform(0, 2 * np.pi, size=grid.n)
            amp = rng.uniform(0.5, 1.0)
            term = np.ones(grid.shape) * amp
            for ax in range(grid.n):
                term = term * np.sin(2 * np.pi * k[ax] * grids[ax] / width + phase[ax])
            acc += term
        omega[..., i] = acc
    scale = np.max(np.abs(gradient_tensor(grid, omega)))
    return omega * (grad_amplitude / scale)
