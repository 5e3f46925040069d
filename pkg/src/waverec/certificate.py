"""Optimality certificates: named residuals of the optimality conditions
together with the primal and dual objective values.
"""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Certificate:
    residuals: dict = field(default_factory=dict)
    primal: float = float("nan")
    dual: float = float("nan")
    tol: float = 1e-8

    @property
    def gap(self):
        return self.dual - self.primal

    @property
    def max_residual(self):
        return max((abs(v) for v in self.residuals.values()), default=0.0)

    @property
    def passed(self):
        return self.max_residual < self.tol and abs(self.gap) < self.tol

    def as_dict(self):
        return {
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "primal": float(self.primal),
            "dual": float(self.dual),
            "gap": float(self.gap),
            "tol": float(self.tol),
            "passed": bool(self.passed),
        }
