"""Independent finite-difference checking of analytic gradients.

The checker never looks inside the tape: the analytic gradient comes from one
recorded backward pass, the numeric one from central differences of plain
forward evaluations, so the two routes share no code beyond the op forwards
themselves.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from aurel.autodiff import DiffArray, Tape
from aurel.errors import ContractError
from aurel.rng import Rng


def check_gradient(
    f: Callable[[DiffArray], DiffArray],
    x: DiffArray,
    step: float = 1e-5,
    sample: int | None = None,
    rng: Rng | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Perturbs each coordinate of ``x`` by ``±step`` and compares
    (f(x+h) - f(x-h)) / (2 step) against the recorded gradient, with the
    relative error denominator floored at max(|analytic|, |numeric|, 1e-8).

    ``sample`` restricts the finite differences to that many randomly chosen
    coordinates (drawn with ``rng``), which is how large parameter vectors
    stay checkable in bounded time; the analytic side is always complete.
    """
    if step <= 0:
        raise ContractError("step must be positive")
    probe = DiffArray(x.data.copy(), requires_grad=True)
    with Tape() as tape:
        out = f(probe)
    if not isinstance(out, DiffArray) or out.data.size != 1:
        raise ContractError("check_gradient requires a scalar-valued function")
    tape.backward(out)
    analytic = (
        probe.grad.reshape(-1) if probe.grad is not None else np.zeros(probe.size)
    )

    flat = x.data.reshape(-1).copy()
    n = flat.size
    if sample is None or sample >= n:
        coords = np.arange(n)
    else:
        r = rng if rng is not None else Rng(0)
        coords = np.unique(r.integers(sample, upper=n))

    def eval_at(values: np.ndarray) -> float:
        y = f(DiffArray(values.reshape(x.shape)))
        return float(np.asarray(y.data).reshape(()))

    worst = 0.0
    for i in coords:
        saved = flat[i]
        flat[i] = saved + step
        up = eval_at(flat)
        flat[i] = saved - step
        down = eval_at(flat)
        flat[i] = saved
        numeric = (up - down) / (2.0 * step)
        denom = max(abs(analytic[i]), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
