"""Finite-difference verification of analytic gradients.

The oracle is a plain central difference on a freshly rebuilt forward pass,
entirely independent of the backward rules it checks. Run graphs in double
precision here; single precision cannot resolve 1e-4 relative error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor, backward


@dataclass
class GradCheckFailure:
    op: str
    param: str
    index: tuple[int, ...]
    analytic: float
    numeric: float
    rel_error: float

    def __str__(self) -> str:
        return (f"{self.op}: param {self.param}{list(self.index)} analytic={self.analytic:.6e} "
                f"numeric={self.numeric:.6e} rel_error={self.rel_error:.3e}")


@dataclass
class GradCheckReport:
    op: str
    checked: int = 0
    max_rel_error: float = 0.0
    failures: list[GradCheckFailure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        head = f"[{status}] {self.op}: {self.checked} entries, max rel error {self.max_rel_error:.3e}"
        return "\n".join([head] + [f"  {f}" for f in self.failures[:10]])


def check_gradients(
    build_loss: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    eps: float = 1e-5,
    tol: float = 1e-4,
    op: str = "graph",
) -> GradCheckReport:
    """Compare backward()'s gradients with central differences, per entry.

    `build_loss` must rebuild the scalar loss from the current parameter
    values on every call. Parameters should be float64.
    """
    for p in params.values():
        p.grad = None
    loss = build_loss()
    backward(loss)
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for name, p in params.items()}

    report = GradCheckReport(op=op)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(build_loss().data)
            flat[i] = orig - eps
            lo = float(build_loss().data)
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[i])
            scale = max(abs(a), abs(numeric), 1.0)
            rel = abs(a - numeric) / scale
            report.checked += 1
            report.max_rel_error = max(report.max_rel_error, rel)
            if rel > tol:
                idx = np.unravel_index(i, p.data.shape)
                report.failures.append(GradCheckFailure(
                    op=op, param=name, index=tuple(int(v) for v in idx),
                    analytic=a, numeric=numeric, rel_error=rel))
    for p in params.values():
        p.grad = None
    return report
