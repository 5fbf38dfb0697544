"""Convergence constants for quantized federated SGD with partial participation.

Maps a target optimality gap to the number of communication rounds required
under the strongly-convex convergence bound, and exposes the bound itself so
simulated runs can be checked against it. The aggregate error constant D folds
together minibatch gradient variance, weight- and update-quantization error,
local drift, and device-sampling variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError

__all__ = [
    "ConvergenceConstants",
    "error_constant",
    "rounds_for_accuracy",
    "loss_gap_bound",
    "learning_rate",
]


@dataclass
class ConvergenceConstants:
    """Problem and schedule constants entering the convergence bound.

    eps_skew is the quantizer skewness bound (range^2/norm^2, in [0, 1]);
    W_bound bounds the sup-norm of any weight vector (1.0 under clipping);
    eps_target is the target optimality gap the round count is solved for.
    """

    L: float = 1.0            # smoothness
    mu: float = 0.89          # strong convexity
    sigma_k: np.ndarray = field(default_factory=lambda: np.ones(16))  # per-device grad std
    G: float = 0.02           # bound on E||stochastic gradient||
    W_bound: float = 1.0
    eps_skew: float = 1.0
    d: int = 280_000          # model dimension
    beta: float | None = None  # step-size numerator, default 2/mu
    gamma: float = 1.0        # step-size offset
    I: int = 5                # local SGD steps per round
    K: int = 16               # device population
    K_bar: int = 10           # devices sampled per round
    eps_target: float = 0.01

    def __post_init__(self):
        self.sigma_k = np.atleast_1d(np.asarray(self.sigma_k, dtype=float))
        if self.beta is None:
            self.beta = 2.0 / self.mu
        if not (0 < self.mu <= self.L):
            raise InvalidConfigError(f"need 0 < mu <= L, got mu={self.mu} L={self.L}")
        if not self.beta * self.mu > 1.0:
            raise InvalidConfigError(
                f"step-size numerator too small: beta*mu = {self.beta * self.mu} <= 1"
            )
        if not (0.0 <= self.eps_skew <= 1.0):
            raise InvalidConfigError(f"eps_skew must be in [0, 1], got {self.eps_skew}")
        if not (1 <= self.K_bar <= self.K):
            raise InvalidConfigError(f"need 1 <= K_bar <= K, got {self.K_bar}, {self.K}")
        if self.sigma_k.size != self.K:
            raise InvalidConfigError(
                f"sigma_k has {self.sigma_k.size} entries for K={self.K} devices"
            )
        if self.I < 1 or self.d < 1:
            raise InvalidConfigError("I and d must be positive")
        if self.gamma <= 0 or self.eps_target <= 0 or self.G < 0 or self.W_bound < 0:
            raise InvalidConfigError("gamma, eps_target must be > 0; G, W_bound >= 0")


def error_constant(c: ConvergenceConstants, c_prec: int) -> float:
    """Aggregate per-round error constant D at upload precision ``c_prec``.

    Sum of: minibatch variance sum(sigma_k^2)/K^2; weight-quantization error
    d*eps*W^2*(1-mu)/(4 b^2); local drift 4(I-1)^2 G^2; update-quantization
    error 4 d eps I^2 G^2 / (K_bar 4 b^2); sampling variance
    4(K-K_bar) I^2 G^2 / (K_bar (K-1)); with b = 2^c_prec - 1.
    """
    if c_prec < 1:
        raise ValueError(f"c_prec must be >= 1, got {c_prec}")
    b = float((1 << int(c_prec)) - 1)
    b2_4 = 4.0 * b * b
    de = c.d * c.eps_skew
    variance = float(np.sum(c.sigma_k**2)) / c.K**2
    weight_quant = de * c.W_bound**2 * (1.0 - c.mu) / b2_4
    drift = 4.0 * (c.I - 1) ** 2 * c.G**2
    update_quant = 4.0 * de * c.I**2 * c.G**2 / (c.K_bar * b2_4)
    if c.K == 1:
        sampling = 0.0  # only reachable with K_bar = K = 1: no sampling variance
    else:
        sampling = 4.0 * (c.K - c.K_bar) * c.I**2 * c.G**2 / (c.K_bar * (c.K - 1))
    return variance + weight_quant + drift + update_quant + sampling


def rounds_for_accuracy(c: ConvergenceConstants, c_prec: int) -> float:
    """Rounds T needed for the bound to reach eps_target (real-valued, may be <= 0)."""
    D = error_constant(c, c_prec)
    return c.L * c.beta**2 * D / (
        2.0 * c.I * c.eps_target * (c.beta * c.mu - 1.0)
    ) - c.gamma / c.I


def loss_gap_bound(c: ConvergenceConstants, c_prec: int, t: float) -> float:
    """Bound on E[F(w_t)] - F* after ``t`` rounds of I local steps each."""
    if t < 0:
        raise ValueError(f"round index must be >= 0, got {t}")
    D = error_constant(c, c_prec)
    return c.L * c.beta**2 * D / (2.0 * (c.gamma + t * c.I) * (c.beta * c.mu - 1.0))


def learning_rate(c: ConvergenceConstants, t: float) -> float:
    """Decaying step size beta/(t + gamma) at decay index ``t``."""
    if t < 0:
        raise ValueError(f"decay index must be >= 0, got {t}")
    return c.beta / (t + c.gamma)
