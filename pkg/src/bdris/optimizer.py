"""Conjugate gradient ascent for the scattering matrix.

One run: start from a random blockwise symmetric unitary point, repeatedly

  1. reset the search direction to the Riemannian gradient if it stopped
     being an ascent direction,
  2. pick a step by backtracking Armijo search on the penalized surrogate
     objective (auxiliaries frozen during the search),
  3. refresh the per-user auxiliaries at the new point,
  4. recompute the Riemannian gradient and update the direction with a
     nonnegative Polak-Ribiere coefficient,

until the true sum-rate changes by less than the tolerance, then project
each block onto the symmetric unitary set (symmetrize, SVD, take U V^H).

Direction handling note: the update is written in ascent form (initial
direction equals the gradient, update Xi <- r + beta * Xi, reset to r when
<r, Xi> <= 0). The Polak-Ribiere denominator defaults to <r, r>, which stays
well defined right after resets; the <r, Xi> variant is available through
``CgaSettings.beta_denominator`` for fidelity experiments. Old directions are
carried to the new tangent space by identity transport plus reprojection.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelSet
from .config import SystemConfig
from .fp import LN2, FpState, _surrogate_terms
from .gradient import channel_stacks, gradient_stack
from .manifold import (TangentVector, project_stack, random_feasible,
                       retract_batch, unitarity_residuals)
from .system import (Architecture, Beamformer, ScatteringMatrix)


@dataclass(frozen=True)
class CgaSettings:
    """Solver hyperparameters for one optimization run.

    ``noise_power`` is carried here as well because the line search has to
    evaluate the surrogate objective. ``beta_denominator`` selects the
    Polak-Ribiere normalization: "gradient" uses <r, r> (default),
    "direction" uses <r, Xi>.
    """

    max_iters: int = 8000
    tolerance: float = 1e-8
    armijo_max_steps: int = 200
    armijo_coeff: float = 2e-11
    step_init: float = 1.0
    step_contract: float = 0.75
    nu: float = 1.0
    noise_power: float = 1.0
    beta_denominator: str = "gradient"

    def __post_init__(self):
        if self.beta_denominator not in ("gradient", "direction"):
            raise ValueError("beta_denominator must be 'gradient' or 'direction'")

    @classmethod
    def from_config(cls, config: SystemConfig, **overrides) -> "CgaSettings":
        kwargs = dict(
            max_iters=config.max_iters,
            tolerance=config.epsilon,
            armijo_max_steps=config.armijo_max_steps,
            armijo_coeff=config.armijo_coeff,
            step_init=config.step_init,
            step_contract=config.step_contract,
            nu=config.nu,
            noise_power=config.noise_power,
        )
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    true_rate: float         # eta, bits/s/Hz
    surrogate: float         # eta_breve, penalized surrogate value
    step: float              # accepted Armijo step alpha
    grad_norm: float         # Riemannian gradient norm
    beta: float              # direction-update coefficient
    unitarity_residual: float


@dataclass(frozen=True)
class TraceFinal:
    projected_rate: float
    pre_projection_rate: float
    projection_rate_delta: float
    symmetry_residual: float
    unitarity_residual: float
    iters_used: int
    converged: bool


@dataclass
class OptimizerTrace:
    records: list[IterationRecord] = field(default_factory=list)
    final: TraceFinal | None = None
    architecture: str | None = None
    trial: int | None = None
    seed: int | None = None


def write_trace_csv(trace: OptimizerTrace, path: str | Path) -> None:
    """One line per iteration: iter, eta, eta_breve, alpha, grad_norm, beta."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "eta", "eta_breve", "alpha", "grad_norm", "beta"])
        for rec in trace.records:
            writer.writerow([rec.iter, repr(rec.true_rate), repr(rec.surrogate),
                             repr(rec.step), repr(rec.grad_norm), repr(rec.beta)])


def _re_vdot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


def _penalty_stack(theta_stack: np.ndarray) -> float:
    diff = theta_stack - theta_stack.transpose(0, 2, 1)
    return float(np.sum(np.abs(diff) ** 2))


class _Workspace:
    """Precomputed channel factors and batched objective/gradient kernels."""

    def __init__(self, channels: ChannelSet, beam: Beamformer,
                 settings: CgaSettings, group_size: int):
        self.a, self.b = channel_stacks(channels, beam.v, group_size)
        self.noise = settings.noise_power
        self.nu = settings.nu

    def signal(self, theta_stack: np.ndarray) -> np.ndarray:
        return (self.a @ theta_stack @ self.b).sum(axis=0)

    def stats(self, c: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """Optimal auxiliaries and true sum-rate from the signal matrix."""
        powers = np.abs(c) ** 2
        total = powers.sum(axis=1) + self.noise
        diag = np.diagonal(c)
        diag_power = np.abs(diag) ** 2
        tau = diag_power / (total - diag_power)
        y = diag / total
        rate = float(np.log2(1.0 + tau).sum())
        return tau, y, rate

    def rate(self, c: np.ndarray) -> float:
        return self.stats(c)[2]

    def objective(self, theta_stack: np.ndarray, c: np.ndarray,
                  tau: np.ndarray, y: np.ndarray) -> float:
        value = float(_surrogate_terms(c, tau, y, self.noise).sum())
        return value - self.nu * _penalty_stack(theta_stack)

    def objective_batch(self, theta_batch: np.ndarray, tau: np.ndarray,
                        y: np.ndarray) -> np.ndarray:
        """Frozen-auxiliary objective of many candidate points at once.

        ``theta_batch`` has shape (M, G, R_G, R_G); returns (M,) values that
        agree with ``objective`` up to summation order.
        """
        c = (self.a[None] @ theta_batch @ self.b[None]).sum(axis=1)
        diag = np.diagonal(c, axis1=1, axis2=2)
        total = (np.abs(c) ** 2).sum(axis=2) + self.noise
        quad = 2.0 * np.real(np.conj(y)[None] * diag) - (np.abs(y) ** 2)[None] * total
        const = float((np.log2(1.0 + tau) - tau / LN2).sum())
        values = const + (((1.0 + tau) / LN2)[None] * quad).sum(axis=1)
        if self.nu:
            diff = theta_batch - theta_batch.transpose(0, 1, 3, 2)
            values = values - self.nu * np.sum(np.abs(diff) ** 2, axis=(1, 2, 3))
        return values

    def gradient(self, theta_stack: np.ndarray, c: np.ndarray,
                 tau: np.ndarray, y: np.ndarray) -> np.ndarray:
        return gradient_stack(theta_stack, self.a, self.b, c, tau, y, self.nu)


_ARMIJO_CHUNK = 16


def _armijo_stack(ws: _Workspace, theta_stack: np.ndarray, xi_stack: np.ndarray,
                  tau: np.ndarray, y: np.ndarray, f_current: float,
                  directional_derivative: float, settings: CgaSettings
                  ) -> tuple[float, np.ndarray | None, float]:
    """Backtracking search on the frozen-auxiliary objective.

    Tries alpha = step_init * step_contract^m for m = 0 .. L-1 and accepts
    the smallest m with

        f(retract(theta, xi, alpha)) >= f(theta) + coeff * alpha * <grad, xi>.

    Candidate steps are evaluated in vectorized chunks but acceptance is
    still the first qualifying m. A rank-deficient retraction counts as a
    failed trial (forced contraction). Returns (0.0, None, f_current) when
    no trial is accepted or the directional derivative is not positive.
    """
    if directional_derivative <= 0 or not np.any(xi_stack):
        return 0.0, None, f_current
    total = settings.armijo_max_steps
    for start in range(0, total, _ARMIJO_CHUNK):
        count = min(_ARMIJO_CHUNK, total - start)
        alphas = settings.step_init * settings.step_contract ** np.arange(
            start, start + count, dtype=float)
        candidates, ok = retract_batch(theta_stack, xi_stack, alphas)
        values = ws.objective_batch(candidates, tau, y)
        accepted = ok & (values >= f_current
                         + settings.armijo_coeff * alphas * directional_derivative)
        hits = np.flatnonzero(accepted)
        if hits.size:
            first = int(hits[0])
            return float(alphas[first]), candidates[first], float(values[first])
    return 0.0, None, f_current


def armijo_search(theta: ScatteringMatrix, direction: TangentVector,
                  fp: FpState, channels: ChannelSet, beam: Beamformer,
                  settings: CgaSettings,
                  *, directional_derivative: float | None = None
                  ) -> tuple[float, ScatteringMatrix, float]:
    """One backtracking line search from ``theta`` along ``direction``.

    The directional derivative <grad, direction> is computed from the
    Riemannian gradient at theta unless supplied. Returns the accepted step,
    the retracted point, and its objective value; a stall returns
    (0.0, theta, current objective).
    """
    ws = _Workspace(channels, beam, settings, theta.group_size)
    theta_stack = theta.block_stack()
    xi_stack = np.stack(direction.blocks)
    c = ws.signal(theta_stack)
    f_current = ws.objective(theta_stack, c, fp.tau, fp.y)
    if directional_derivative is None:
        riem = project_stack(ws.gradient(theta_stack, c, fp.tau, fp.y),
                             theta_stack)
        directional_derivative = _re_vdot(riem, xi_stack)
    alpha, candidate, f_new = _armijo_stack(
        ws, theta_stack, xi_stack, fp.tau, fp.y, f_current,
        directional_derivative, settings)
    if candidate is None:
        return 0.0, theta, f_current
    theta_new = ScatteringMatrix.from_block_stack(
        candidate, architecture=theta.architecture)
    return alpha, theta_new, f_new


def cga_optimize(channels: ChannelSet, beam: Beamformer, config: SystemConfig,
                 seed: int, settings: CgaSettings | None = None
                 ) -> tuple[ScatteringMatrix, OptimizerTrace]:
    """Full conjugate-gradient ascent run; see the module docstring.

    Returns the projected (blockwise symmetric unitary) scattering matrix and
    the per-iteration trace. The convergence test compares consecutive true
    sum-rates; line searches accept on the penalized surrogate. Iterations
    whose line search stalls leave the iterate unchanged and do not trigger
    the convergence test: one stall retries with the refreshed direction, a
    second consecutive stall resets the direction to the gradient, and a
    third terminates the run with ``converged=False``.
    """
    if settings is None:
        settings = CgaSettings.from_config(config)
    theta0 = random_feasible(config, seed)
    ws = _Workspace(channels, beam, settings, config.group_size)

    theta_stack = theta0.block_stack()
    c = ws.signal(theta_stack)
    tau, y, eta = ws.stats(c)
    f_current = ws.objective(theta_stack, c, tau, y)
    riem = project_stack(ws.gradient(theta_stack, c, tau, y), theta_stack)
    xi = riem.copy()

    records = [IterationRecord(
        iter=0, true_rate=eta, surrogate=f_current, step=0.0,
        grad_norm=float(np.sqrt(max(_re_vdot(riem, riem), 0.0))), beta=0.0,
        unitarity_residual=float(unitarity_residuals(theta_stack).max()))]

    converged = False
    stalls = 0
    iters_used = 0
    for i in range(1, settings.max_iters + 1):
        iters_used = i
        directional = _re_vdot(riem, xi)
        if directional <= 0:
            xi = riem.copy()
            directional = _re_vdot(riem, riem)

        alpha, candidate, _ = _armijo_stack(
            ws, theta_stack, xi, tau, y, f_current, directional, settings)

        if candidate is None:
            stalls += 1
            records.append(IterationRecord(
                iter=i, true_rate=eta, surrogate=f_current, step=0.0,
                grad_norm=float(np.sqrt(max(_re_vdot(riem, riem), 0.0))),
                beta=0.0,
                unitarity_residual=float(unitarity_residuals(theta_stack).max())))
            if stalls >= 3:
                break
            if stalls == 2:
                xi = riem.copy()
            continue
        stalls = 0

        if settings.beta_denominator == "direction":
            denominator = directional
        else:
            denominator = _re_vdot(riem, riem)

        theta_stack = candidate
        c = ws.signal(theta_stack)
        tau, y, eta_new = ws.stats(c)
        f_current = ws.objective(theta_stack, c, tau, y)
        riem_new = project_stack(ws.gradient(theta_stack, c, tau, y),
                                 theta_stack)

        if denominator > 1e-300:
            beta = max(0.0, _re_vdot(riem_new, riem_new - riem) / denominator)
        else:
            beta = 0.0
        xi = riem_new + beta * project_stack(xi, theta_stack)

        records.append(IterationRecord(
            iter=i, true_rate=eta_new, surrogate=f_current, step=alpha,
            grad_norm=float(np.sqrt(max(_re_vdot(riem_new, riem_new), 0.0))),
            beta=beta,
            unitarity_residual=float(unitarity_residuals(theta_stack).max())))

        rate_change = abs(eta_new - eta)
        eta = eta_new
        riem = riem_new
        if rate_change < settings.tolerance:
            converged = True
            break

    pre_projection = ScatteringMatrix.from_block_stack(
        theta_stack, architecture=theta0.architecture)
    theta_opt = project_symmetric_unitary(pre_projection)
    opt_stack = theta_opt.block_stack()
    eta_post = ws.rate(ws.signal(opt_stack))
    sym = opt_stack - opt_stack.transpose(0, 2, 1)
    final = TraceFinal(
        projected_rate=eta_post,
        pre_projection_rate=eta,
        projection_rate_delta=abs(eta_post - eta),
        symmetry_residual=float(np.sqrt(np.sum(np.abs(sym) ** 2,
                                               axis=(1, 2))).max()),
        unitarity_residual=float(unitarity_residuals(opt_stack).max()),
        iters_used=iters_used,
        converged=converged)
    trace = OptimizerTrace(records=records, final=final, seed=seed)
    return theta_opt, trace


def _group_eigenvalues(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Index groups of near-equal entries in an ascending array."""
    groups = []
    start = 0
    for j in range(1, len(values) + 1):
        if j == len(values) or values[j] - values[j - 1] > tol:
            groups.append(np.arange(start, j))
            start = j
    return groups


def _joint_diagonalize(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Orthogonal basis diagonalizing two commuting real symmetric matrices."""
    w, o = np.linalg.eigh(x)
    scale = max(abs(w[0]), abs(w[-1]), 1.0)
    for idx in _group_eigenvalues(w, 1e-8 * scale):
        if len(idx) > 1:
            sub = o[:, idx]
            _, rot = np.linalg.eigh(sub.T @ y @ sub)
            o[:, idx] = sub @ rot
    return o


def _takagi_symmetric_unitary(sym: np.ndarray) -> np.ndarray:
    """Symmetric unitary factor of a complex symmetric matrix.

    Robust replacement for the SVD projection when singular values are
    degenerate (including exactly singular blocks): diagonalize sym @ sym^H,
    factor the restriction of sym to each eigenvalue group as a symmetric
    unitary times the singular value, and reassemble with unit moduli.
    """
    lam, q = np.linalg.eigh(sym @ sym.conj().T)
    lam = np.clip(lam, 0.0, None)
    scale = max(float(lam[-1]), 1e-30)
    u = np.empty_like(q)
    for idx in _group_eigenvalues(lam, 1e-8 * scale):
        qs = q[:, idx]
        sigma = float(np.sqrt(np.mean(lam[idx])))
        if sigma <= 1e-10 * np.sqrt(scale):
            factor = np.eye(len(idx), dtype=complex)
        else:
            m = qs.conj().T @ sym @ qs.conj()
            n = m / sigma  # unitary and symmetric on this group
            o = _joint_diagonalize(n.real, n.imag)
            phases = np.angle(np.diagonal(o.T @ n @ o))
            factor = o * np.exp(0.5j * phases)[None, :]
        u[:, idx] = qs @ factor
    return u @ u.T


def project_symmetric_unitary(theta: ScatteringMatrix) -> ScatteringMatrix:
    """Project every block onto the symmetric unitary set.

    Per block: symmetrize, take the SVD U S V^H of the symmetrized block, and
    return U V^H. For a nonsingular symmetric input U V^H is the unique polar
    factor and is itself symmetric; when singular values are degenerate a
    generic SVD may break the pairing, in which case a Takagi-style
    factorization that guarantees a symmetric unitary output is used instead.
    """
    stack = theta.block_stack()
    sym = 0.5 * (stack + stack.transpose(0, 2, 1))
    u, _, vh = np.linalg.svd(sym)
    out = u @ vh
    for g in range(out.shape[0]):
        residual = float(np.linalg.norm(out[g] - out[g].T))
        if residual > 1e-6:
            out[g] = _takagi_symmetric_unitary(sym[g])
    return ScatteringMatrix.from_block_stack(out,
                                             architecture=theta.architecture)


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-block constraint residuals and the overall verdict."""

    unitarity_residuals: np.ndarray   # ||T_g T_g^H - I||_F per block
    symmetry_residuals: np.ndarray    # ||T_g - T_g^T||_F per block
    max_unitarity: float
    max_symmetry: float
    unitary_ok: bool
    symmetric_ok: bool
    diag_modulus_error: float | None  # single-connected only
    off_diagonal_max: float | None    # single-connected only
    passed: bool


def validate_feasibility(theta: ScatteringMatrix, tol_unitary: float = 1e-8,
                         tol_symmetry: float = 1e-6) -> FeasibilityReport:
    """Check blockwise unitarity and symmetry against tolerances.

    For single-connected matrices additionally checks unit modulus of the
    diagonal and that off-diagonal entries are zero.
    """
    stack = theta.block_stack()
    unit = unitarity_residuals(stack)
    diff = stack - stack.transpose(0, 2, 1)
    sym = np.sqrt(np.sum(np.abs(diff) ** 2, axis=(1, 2)))
    unitary_ok = bool(unit.max() <= tol_unitary)
    symmetric_ok = bool(sym.max() <= tol_symmetry)
    passed = unitary_ok and symmetric_ok
    diag_err = None
    off_max = None
    if theta.architecture is Architecture.SINGLE_CONNECTED:
        diag = np.diagonal(theta.theta)
        diag_err = float(np.max(np.abs(np.abs(diag) - 1.0)))
        off = theta.theta - np.diag(diag)
        off_max = float(np.max(np.abs(off))) if off.size else 0.0
        passed = passed and diag_err <= tol_unitary and off_max == 0.0
    return FeasibilityReport(
        unitarity_residuals=unit,
        symmetry_residuals=sym,
        max_unitarity=float(unit.max()),
        max_symmetry=float(sym.max()),
        unitary_ok=unitary_ok,
        symmetric_ok=symmetric_ok,
        diag_modulus_error=diag_err,
        off_diagonal_max=off_max,
        passed=passed)
