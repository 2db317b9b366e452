"""Compactly supported polynomial kernels on [-1, 1] with vanishing moments."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import KernelError

__all__ = [
    "KernelSpec",
    "STANDARD_KERNELS",
    "make_standard_kernel",
    "make_higher_order_kernel",
    "eval_kernel",
    "kernel_moment",
    "check_kernel",
    "MOMENT_TOL",
]

MOMENT_TOL = 1e-10
MAX_ORDER = 10


@dataclass(frozen=True)
class KernelSpec:
    """Kernel ``G(u) = sum_i c_i v^i`` for ``|u| < 1`` and 0 elsewhere.

    ``v = |u|`` when ``abs_argument`` is set (triangular kernel), else ``v = u``.
    ``order`` is the highest index ``j`` with a vanishing moment ``int u^j G``.
    """

    coefficients: tuple
    order: int
    name: str = ""
    abs_argument: bool = False

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        if not c or not np.all(np.isfinite(c)):
            raise KernelError("kernel coefficients must be a non-empty finite vector")
        if int(self.order) != self.order or self.order < 1:
            raise KernelError(f"kernel order must be an integer >= 1, got {self.order!r}")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "order", int(self.order))

    def __call__(self, u):
        return eval_kernel(self, u)

    @property
    def sup_norm(self) -> float:
        u = np.linspace(-1.0, 1.0, 2001)
        return float(np.max(np.abs(_poly(self, u))))

    def to_json(self) -> dict:
        if self.name in STANDARD_KERNELS:
            return {"name": self.name, "order": self.order}
        out = {"coefficients": list(self.coefficients), "order": self.order}
        if self.abs_argument:
            out["abs_argument"] = True
        if self.name:
            out["label"] = self.name
        return out

    @classmethod
    def from_json(cls, obj, validate: bool = True) -> "KernelSpec":
        """Build from ``{name}``, ``{higher_order: k}`` or ``{coefficients, order}``."""
        if not isinstance(obj, dict):
            raise KernelError("kernel must be a JSON object")
        if "name" in obj:
            return make_standard_kernel(obj["name"])
        if "higher_order" in obj:
            return make_higher_order_kernel(int(obj["higher_order"]))
        if "coefficients" in obj:
            K = cls(tuple(obj["coefficients"]), obj.get("order", 1), obj.get("label", ""),
                    bool(obj.get("abs_argument", False)))
            if validate:
                report = check_kernel(K)
                if not report["passed"]:
                    failed = [c["condition"] for c in report["conditions"] if not c["passed"]]
                    raise KernelError(f"kernel fails condition(s) {', '.join(failed)}")
            return K
        raise KernelError("kernel needs one of 'name', 'higher_order' or 'coefficients'")


STANDARD_KERNELS = {
    "epanechnikov": ((0.75, 0.0, -0.75), False),
    "quartic": ((15 / 16, 0.0, -30 / 16, 0.0, 15 / 16), False),
    "triangular": ((1.0, -1.0), True),
    "uniform": ((0.5,), False),
}


def make_standard_kernel(name: str) -> KernelSpec:
    try:
        coefs, absarg = STANDARD_KERNELS[name]
    except KeyError:
        raise KernelError(
            f"unknown kernel {name!r}; expected one of {sorted(STANDARD_KERNELS)}"
        ) from None
    # symmetric kernels: every odd moment vanishes, so order 1 is always met
    return KernelSpec(coefs, 1, name, absarg)


def _solve_exact(A, b):
    """Gauss-Jordan elimination over the rationals."""
    n = len(A)
    M = [list(row) + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise KernelError("singular moment system")
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [v / p for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def make_higher_order_kernel(k: int) -> KernelSpec:
    """Polynomial kernel of minimal degree with moments ``1..k`` vanishing.

    Solves ``int u^j G(u) du = delta_{j0}`` for ``j = 0..k`` in the monomial
    basis ``1, u, .., u^k`` using the exact moments ``int u^m du = 2/(m+1)``
    (even ``m``) in rational arithmetic. By parity the odd coefficients are
    zero, so ``k = 2r`` and ``k = 2r + 1`` give the same polynomial.
    """
    if int(k) != k or k < 1:
        raise KernelError(f"kernel order must be an integer >= 1, got {k!r}")
    k = int(k)
    if k > MAX_ORDER:
        raise KernelError(f"order {k} exceeds the conditioning limit {MAX_ORDER}")

    def mono(m):
        return Fraction(2, m + 1) if m % 2 == 0 else Fraction(0)

    A = [[mono(i + j) for i in range(k + 1)] for j in range(k + 1)]
    b = [Fraction(1)] + [Fraction(0)] * k
    coefs = _solve_exact(A, b)
    while len(coefs) > 1 and coefs[-1] == 0:
        coefs.pop()
    order = k if k % 2 == 1 else k + 1
    return KernelSpec(tuple(float(c) for c in coefs), order, f"higher_order_k{k}")


def _poly(K: KernelSpec, u):
    v = np.abs(u) if K.abs_argument else u
    out = np.zeros_like(v, dtype=np.float64)
    for c in reversed(K.coefficients):
        out = out * v + c
    return out


def eval_kernel(K: KernelSpec, u):
    """``G(u)``; exactly zero for ``|u| >= 1``."""
    u_arr = np.asarray(u, dtype=np.float64)
    out = np.where(np.abs(u_arr) < 1.0, _poly(K, u_arr), 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_moment(K: KernelSpec, j: int) -> float:
    """``int_{-1}^{1} u^j G(u) du`` by exact term-wise polynomial integration."""
    if int(j) != j or j < 0:
        raise KernelError(f"moment index must be a non-negative integer, got {j!r}")
    j = int(j)
    total = Fraction(0)
    for i, c in enumerate(K.coefficients):
        m = i + j
        if K.abs_argument:
            # int_{-1}^1 u^j |u|^i du
            term = Fraction(2, m + 1) if j % 2 == 0 else Fraction(0)
        else:
            term = Fraction(2, m + 1) if m % 2 == 0 else Fraction(0)
        total += Fraction(c) * term
    return float(total)


def check_kernel(K: KernelSpec, max_moment: int | None = None, tol: float = MOMENT_TOL) -> dict:
    """Moment table and pass/fail for unit mass, vanishing moments and boundedness."""
    top = max(K.order, 6) if max_moment is None else max_moment
    moments = [(j, kernel_moment(K, j)) for j in range(top + 1)]
    m0 = moments[0][1]
    conds = [
        {"condition": "(i) unit mass", "passed": abs(m0 - 1.0) <= tol, "value": m0},
    ]
    for j in range(1, K.order + 1):
        mj = kernel_moment(K, j)
        label = "(ii) first moment" if j == 1 else f"C5 moment {j}"
        conds.append({"condition": label, "passed": abs(mj) <= tol, "value": mj})
    outside = eval_kernel(K, np.array([-1.0, 1.0, -1.5, 1.5, -10.0, 10.0]))
    conds.append({"condition": "(iii) compact support", "passed": bool(np.all(outside == 0.0)),
                  "value": float(np.max(np.abs(outside)))})
    sup = K.sup_norm
    conds.append({"condition": "bounded", "passed": bool(np.isfinite(sup)), "value": sup})
    return {
        "moments": moments,
        "conditions": conds,
        "passed": all(c["passed"] for c in conds),
    }
