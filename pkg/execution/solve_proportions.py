#!/usr/bin/env python3
"""
Proportion Solver
=================
Quadratic programs that turn class/target embeddings into class proportions.

Usage:
    from solve_proportions import QuantProblem, solve_hard, solve_soft

    problem = QuantProblem.from_arrays(G, q, tnorm2)
    est = solve_soft(problem)
    # est.alpha, est.noise_mass, est.objective

Objective (all modes):
    f(alpha) = alpha' G alpha - 2 q' alpha + tnorm2
             = || sum_i alpha_i phi_i - phi_target ||^2

    hard:  alpha >= 0, sum(alpha) = 1
    soft:  alpha >= 0, sum(alpha) <= 1   (zero-embedding dummy class)

Solver: accelerated projected gradient, fixed step 1/L with L the Lipschitz
constant of grad f, monotone restart, simplex projection by sort and
threshold. Deterministic from the uniform start.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from decompose_symmetric import SymMatrix, condition_number, sym_eigenvalues
from dfm_errors import IdentifiabilityError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
BBSE_MAX_CONDITION = 1e12
DESCENT_SLACK = 1e-12


@dataclass(frozen=True)
class QuantProblem:
    """
    One quantification QP instance.

    gram: Gram matrix of the class embeddings
    linear: inner products of class embeddings with the target embedding
    target_norm2: squared norm of the target embedding

    The optional fields carry what certificates need when the problem was
    built without explicit embeddings (exact kernel path).
    """

    gram: SymMatrix
    linear: np.ndarray
    target_norm2: float
    counts: Optional[np.ndarray] = None
    n_target: Optional[int] = None
    bound: Optional[float] = None

    def __post_init__(self):
        linear = np.array(self.linear, dtype=np.float64).reshape(-1)
        if linear.shape[0] != self.gram.order:
            raise ParameterError(
                f"linear term has {linear.shape[0]} entries for {self.gram.order} classes"
            )
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "target_norm2", float(self.target_norm2))

    @classmethod
    def from_arrays(cls, gram, linear, target_norm2: float = 0.0, **meta) -> "QuantProblem":
        return cls(gram=SymMatrix.from_dense(gram), linear=linear,
                   target_norm2=target_norm2, **meta)

    @property
    def n_classes(self) -> int:
        return self.gram.order

    def objective(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=np.float64)
        return float(alpha @ self.gram.dense @ alpha - 2.0 * self.linear @ alpha
                     + self.target_norm2)

    def with_dummy_class(self) -> "QuantProblem":
        """Problem with a leading zero-embedding class."""
        return QuantProblem(
            gram=self.gram.augmented(),
            linear=np.concatenate([[0.0], self.linear]),
            target_norm2=self.target_norm2,
        )

    def permuted(self, perm) -> "QuantProblem":
        perm = np.asarray(perm)
        return QuantProblem(gram=self.gram.permuted(perm), linear=self.linear[perm],
                            target_norm2=self.target_norm2)


@dataclass
class ProportionEstimate:
    """
    Solver output.

    In soft mode the mass missing from alpha is the estimated weight of the
    unknown (noise) component.
    """

    alpha: np.ndarray
    mode: str
    objective: float
    iterations: int
    kkt_residual: float
    converged: bool = True
    objective_trace: Optional[list] = field(default=None, repr=False)

    @property
    def noise_mass(self) -> float:
        return float(1.0 - np.sum(self.alpha)) if self.mode == "soft" else 0.0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "mode": self.mode,
            "noise_mass": self.noise_mass,
            "objective": self.objective,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "converged": self.converged,
        }


# ============================================
# Simplex projection
# ============================================

def project_simplex(v, radius: float = 1.0) -> np.ndarray:
    """
    Euclidean projection onto {x >= 0, sum(x) = radius} (sort and threshold).
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    ind = np.arange(1, v.shape[0] + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


# ============================================
# Solvers
# ============================================

def _gradient_mapping(gram, linear, x, step) -> float:
    grad = 2.0 * (gram @ x - linear)
    return float(np.linalg.norm(x - project_simplex(x - step * grad)) / step)


def solve_hard(problem: QuantProblem, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER, trace: bool = False) -> ProportionEstimate:
    """
    Minimise f over the probability simplex.

    The KKT residual is the norm of the gradient mapping
    (x - P(x - g/L)) * L, zero exactly at the minimisers, and is compared
    with tol * max(1, L, |q|_inf). A plain projected step that cannot
    improve on x also counts as converged (roundoff floor).
    Running out of iterations returns the best iterate with converged=False.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    c = problem.n_classes

    if c == 1:
        alpha = np.ones(1)
        return ProportionEstimate(alpha=alpha, mode="hard",
                                  objective=problem.objective(alpha),
                                  iterations=0, kkt_residual=0.0,
                                  objective_trace=[problem.objective(alpha)] if trace else None)

    gram = problem.gram.dense
    linear = problem.linear
    top = float(sym_eigenvalues(problem.gram)[-1])
    lipschitz = 2.0 * top
    if lipschitz <= 1e-300:
        lipschitz = 2.0 * max(float(np.max(np.abs(linear))), 1.0)
    step = 1.0 / lipschitz
    threshold = tol * max(1.0, lipschitz, float(np.max(np.abs(linear))))

    def f(a):
        return float(a @ gram @ a - 2.0 * linear @ a)

    x = np.full(c, 1.0 / c)
    fx = f(x)
    y = x.copy()
    t = 1.0
    history = [fx + problem.target_norm2] if trace else None
    kkt = _gradient_mapping(gram, linear, x, step)
    iterations = 0
    stalled = False

    while kkt > threshold and not stalled and iterations < max_iter:
        iterations += 1
        grad_y = 2.0 * (gram @ y - linear)
        x_new = project_simplex(y - step * grad_y)
        f_new = f(x_new)

        if f_new > fx + DESCENT_SLACK * max(1.0, abs(fx)):
            # momentum overshot: restart from x with a plain projected step
            t = 1.0
            grad_x = 2.0 * (gram @ x - linear)
            x_new = project_simplex(x - step * grad_x)
            f_new = f(x_new)
            if f_new > fx or np.array_equal(x_new, x):
                x_new, f_new = x, fx
                stalled = True

        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, fx, t = x_new, f_new, t_new
        if trace:
            history.append(fx + problem.target_norm2)
        kkt = _gradient_mapping(gram, linear, x, step)

    converged = kkt <= threshold or stalled
    if not converged:
        logger.warning("Simplex QP stopped after %d iterations (KKT residual %.3g > %.3g)",
                       iterations, kkt, threshold)
    elif stalled and kkt > threshold:
        logger.debug("Simplex QP reached its roundoff floor after %d iterations "
                     "(KKT residual %.3g)", iterations, kkt)
    else:
        logger.debug("Simplex QP converged in %d iterations", iterations)

    return ProportionEstimate(
        alpha=x,
        mode="hard",
        objective=fx + problem.target_norm2,
        iterations=iterations,
        kkt_residual=kkt,
        converged=converged,
        objective_trace=history,
    )


def solve_soft(problem: QuantProblem, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER, trace: bool = False) -> ProportionEstimate:
    """
    Minimise f over {alpha >= 0, sum(alpha) <= 1}.

    Solved as the hard problem with an extra zero-embedding class in front;
    that coordinate is dropped from the result.
    """
    est = solve_hard(problem.with_dummy_class(), tol=tol, max_iter=max_iter, trace=trace)
    return ProportionEstimate(
        alpha=est.alpha[1:].copy(),
        mode="soft",
        objective=est.objective,
        iterations=est.iterations,
        kkt_residual=est.kkt_residual,
        converged=est.converged,
        objective_trace=est.objective_trace,
    )


def solve(problem: QuantProblem, mode: str, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER) -> ProportionEstimate:
    if mode == "hard":
        return solve_hard(problem, tol, max_iter)
    if mode == "soft":
        return solve_soft(problem, tol, max_iter)
    raise ParameterError(f"mode must be 'hard' or 'soft', got {mode!r}")


def solve_bbse_unconstrained(source) -> np.ndarray:
    """
    Unconstrained confusion-matrix solve M^{-1} Y.

    `source` is either class embeddings from the one-hot backend (the
    confusion matrix M has the class means as columns, Y is the target mean)
    or a QuantProblem built from them, in which case the normal equations
    (M'M) alpha = M'Y are solved. Entries may be negative.

    Raises:
        IdentifiabilityError: M singular or condition number above 1e12
    """
    if hasattr(source, "phi"):
        confusion = np.asarray(source.phi, dtype=np.float64).T
        target = np.asarray(source.phi_target, dtype=np.float64)
        gram = SymMatrix.from_dense(confusion.T @ confusion)
    else:
        confusion = None
        gram = source.gram
        target = None

    lam_min = float(sym_eigenvalues(gram)[0])
    if confusion is not None:
        cond = float(np.linalg.cond(confusion))
    else:
        # cond(M)^2 = cond(M'M)
        cond = float(np.sqrt(condition_number(gram)))
    if not np.isfinite(cond) or cond > BBSE_MAX_CONDITION:
        raise IdentifiabilityError(
            f"confusion matrix is singular or ill-conditioned (lambda_min = {lam_min:.3g})",
            lambda_min=lam_min,
        )

    if confusion is not None and confusion.shape[0] == confusion.shape[1]:
        return np.linalg.solve(confusion, target)
    if confusion is not None:
        return np.linalg.lstsq(confusion, target, rcond=None)[0]
    return np.linalg.solve(gram.dense, source.linear)


# ============================================
# CLI Interface
# ============================================

def main():
    """Solve a small problem given on the command line."""
    import argparse

    parser = argparse.ArgumentParser(description="Solve a simplex-constrained DFM problem")
    parser.add_argument("--gram", nargs="+", required=True, help='Rows, e.g. "1,0" "0,1"')
    parser.add_argument("--linear", required=True, help='e.g. "0.7,0.3"')
    parser.add_argument("--target-norm2", type=float, default=0.0)
    parser.add_argument("--mode", choices=["hard", "soft"], default="hard")
    args = parser.parse_args()

    problem = QuantProblem.from_arrays(
        [[float(x) for x in row.split(",")] for row in args.gram],
        [float(x) for x in args.linear.split(",")],
        args.target_norm2,
    )
    est = solve(problem, args.mode)
    for key, value in est.to_dict().items():
        print(f"  {key}: {value}")


if __name__ == "__main__":
    main()
