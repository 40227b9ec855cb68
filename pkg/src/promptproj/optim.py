"""Full-batch Adam with best-loss early stopping.

Shared by every trainer in the package. The update rule is the standard
bias-corrected Adam; beta1=0.9, beta2=0.999, eps=1e-8 are the reference
defaults. Improvement is strict (loss < best), and a hard cap of 100 000
iterations guards against pathological non-convergence.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DivergenceError, NumericalError

MAX_ITERATIONS = 100_000

ParamBlock = dict[str, np.ndarray]


@dataclass(frozen=True)
class AdamState:
    step: int
    first_moment: ParamBlock
    second_moment: ParamBlock
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: ParamBlock, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    zeros = {k: np.zeros_like(v) for k, v in params.items()}
    return AdamState(
        step=0,
        first_moment=zeros,
        second_moment={k: np.zeros_like(v) for k, v in params.items()},
        lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(state: AdamState, params: ParamBlock,
              grads: ParamBlock) -> tuple[AdamState, ParamBlock]:
    """One bias-corrected Adam update; returns fresh state and parameters."""
    if set(params) != set(grads):
        raise ValueError(f"parameter/gradient keys differ: {set(params)} vs {set(grads)}")
    t = state.step + 1
    new_m, new_v, new_params = {}, {}, {}
    for key, theta in params.items():
        g = grads[key]
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape "
                             f"{theta.shape} for {key!r}")
        if not np.all(np.isfinite(g)):
            idx = tuple(int(i) for i in np.argwhere(~np.isfinite(g))[0])
            raise NumericalError(f"non-finite gradient entry {key}{list(idx)}")
        m = state.beta1 * state.first_moment[key] + (1 - state.beta1) * g
        v = state.beta2 * state.second_moment[key] + (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        new_m[key] = m
        new_v[key] = v
        new_params[key] = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, step=t, first_moment=new_m, second_moment=new_v), new_params


@dataclass(frozen=True)
class EarlyStopMonitor:
    patience: int
    best_loss: float = float("inf")
    iterations_since_improvement: int = 0


def check_early_stop(monitor: EarlyStopMonitor,
                     loss: float) -> tuple[EarlyStopMonitor, bool]:
    """Strict improvement resets the counter; stop fires at patience."""
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss}")
    if loss < monitor.best_loss:
        monitor = replace(monitor, best_loss=loss, iterations_since_improvement=0)
    else:
        monitor = replace(
            monitor,
            iterations_since_improvement=monitor.iterations_since_improvement + 1,
        )
    return monitor, monitor.iterations_since_improvement >= monitor.patience


@dataclass(frozen=True)
class MinimizeResult:
    params: ParamBlock
    best_loss: float
    iterations: int
    trace: tuple[tuple[int, float], ...]


def minimize(
    params: ParamBlock,
    loss_and_grad: Callable[[ParamBlock], tuple[float, ParamBlock]],
    lr: float,
    patience: int,
    max_iterations: int = MAX_ITERATIONS,
    postprocess: Callable[[ParamBlock], ParamBlock] | None = None,
) -> MinimizeResult:
    """Run Adam until the loss stops improving for ``patience`` iterations.

    Returns the best-loss parameters seen. The trace records every
    iteration; when the best point predates the last iteration, a final
    entry with the restored best loss is appended so the trace always ends
    at the loss of the returned parameters.
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    state = init_adam(params, lr=lr)
    monitor = EarlyStopMonitor(patience=patience)
    trace: list[tuple[int, float]] = []

    loss, grads = loss_and_grad(params)
    loss = float(loss)
    trace.append((0, loss))
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss} at initialization", trace=trace)
    best_loss = loss
    best = {k: v.copy() for k, v in params.items()}
    monitor, stop = check_early_stop(monitor, loss)

    iterations = 0
    while not stop and iterations < max_iterations:
        state, params = adam_step(state, params, grads)
        if postprocess is not None:
            params = postprocess(params)
        iterations += 1
        loss, grads = loss_and_grad(params)
        loss = float(loss)
        trace.append((iterations, loss))
        if not np.isfinite(loss):
            raise DivergenceError(
                f"non-finite loss {loss} at iteration {iterations}", trace=trace
            )
        if loss < best_loss:
            best_loss = loss
            best = {k: v.copy() for k, v in params.items()}
        monitor, stop = check_early_stop(monitor, loss)

    if trace[-1][1] != best_loss:
        trace.append((iterations, best_loss))
    return MinimizeResult(
        params=best,
        best_loss=best_loss,
        iterations=iterations,
        trace=tuple(trace),
    )
