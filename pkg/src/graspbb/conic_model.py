"""Mixed-integer conic program container.

Variables are continuous (optionally bounded) or binary.  Constraints are
sparse linear rows (== or <=), squared-form second-order cones
||A x + b||^2 <= c with constant right side, and SOS1/SOS2 groups in the
logarithmic (Gray-code) formulation, which is what keeps the binary count
at ceil(log2) of the group size.
"""

from __future__ import annotations

import copy as _copy
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ConicProgram", "LinearConstraint", "SocConstraint", "SosGroup"]


@dataclass
class LinearConstraint:
    indices: np.ndarray
    coefficients: np.ndarray
    rhs: float
    sense: str  # "==" or "<="


@dataclass
class SocConstraint:
    """||A x + b||^2 <= bound, rows given sparsely."""

    row_indices: list[np.ndarray]
    row_coefficients: list[np.ndarray]
    offsets: np.ndarray  # b
    bound: float  # c (squared radius)


@dataclass
class SosGroup:
    kind: int  # 1 or 2
    members: np.ndarray  # ordered variable ids
    binaries: np.ndarray  # variable ids of the selector bits
    codes: np.ndarray  # per selectable item (cell for SOS2, member for SOS1)


@dataclass
class ConicProgram:
    var_names: list[str] = field(default_factory=list)
    lower: list[float | None] = field(default_factory=list)
    upper: list[float | None] = field(default_factory=list)
    is_binary: list[bool] = field(default_factory=list)
    linear: list[LinearConstraint] = field(default_factory=list)
    socs: list[SocConstraint] = field(default_factory=list)
    sos_groups: list[SosGroup] = field(default_factory=list)

    # ----- variables -----

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    def add_var(self, name: str, lower=None, upper=None) -> int:
        if lower is not None and upper is not None and lower > upper:
            raise ValueError(f"variable {name}: lower {lower} > upper {upper}")
        self.var_names.append(name)
        self.lower.append(lower)
        self.upper.append(upper)
        self.is_binary.append(False)
        return len(self.var_names) - 1

    def add_vars(self, prefix: str, count: int, lower=None, upper=None) -> list[int]:
        return [self.add_var(f"{prefix}[{k}]", lower, upper) for k in range(count)]

    def add_binary(self, name: str) -> int:
        i = self.add_var(name, 0.0, 1.0)
        self.is_binary[i] = True
        return i

    def count_binaries(self) -> int:
        return int(sum(self.is_binary))

    def binary_indices(self) -> list[int]:
        return [i for i, b in enumerate(self.is_binary) if b]

    def tighten_lower(self, idx: int, bound: float):
        cur = self.lower[idx]
        self.lower[idx] = bound if cur is None else max(cur, bound)

    # ----- constraints -----

    def _check_indices(self, indices):
        idx = np.asarray(indices, dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
            raise ValueError("constraint references undeclared variables")
        return idx

    def add_linear(self, indices, coefficients, rhs: float, sense: str = "==") -> int:
        idx = self._check_indices(indices)
        coef = np.asarray(coefficients, dtype=float)
        if idx.shape != coef.shape:
            raise ValueError(
                f"index/coefficient shape mismatch: {idx.shape} vs {coef.shape}"
            )
        if sense not in ("==", "<="):
            raise ValueError(f"sense must be '==' or '<=', got {sense!r}")
        self.linear.append(LinearConstraint(idx, coef, float(rhs), sense))
        return len(self.linear) - 1

    def add_soc(self, row_indices, row_coefficients, offsets, bound: float) -> int:
        """||A x + b||^2 <= bound (bound is the squared radius, a constant)."""
        if len(row_indices) != len(row_coefficients):
            raise ValueError("row index/coefficient list length mismatch")
        offs = np.asarray(offsets, dtype=float)
        if offs.shape != (len(row_indices),):
            raise ValueError(
                f"offsets must have one entry per row: {offs.shape} vs {len(row_indices)}"
            )
        rows_i, rows_c = [], []
        for ri, rc in zip(row_indices, row_coefficients):
            ri = self._check_indices(ri)
            rc = np.asarray(rc, dtype=float)
            if ri.shape != rc.shape:
                raise ValueError("SOC row index/coefficient shape mismatch")
            rows_i.append(ri)
            rows_c.append(rc)
        self.socs.append(SocConstraint(rows_i, rows_c, offs, float(bound)))
        return len(self.socs) - 1

    # ----- SOS groups (logarithmic models) -----

    def add_sos2_log(self, lambda_indices) -> int:
        """Gray-code log SOS2 over ordered lambdas: sum = 1, >= 0, and any
        integer-feasible point supports at most two adjacent entries.

        Adds ceil(log2(n - 1)) binaries for n members.
        """
        members = self._check_indices(lambda_indices)
        n = len(members)
        if n < 2:
            raise ValueError("SOS2 group needs at least 2 members")
        cells = n - 1
        bits = max(0, math.ceil(math.log2(cells)))
        gray = np.array([(c ^ (c >> 1)) for c in range(cells)], dtype=int)
        gid = len(self.sos_groups)
        ys = [self.add_binary(f"sos2_{gid}_y[{b}]") for b in range(bits)]
        for m in members:
            self.tighten_lower(int(m), 0.0)
        self.add_linear(members, np.ones(n), 1.0, "==")
        for b in range(bits):
            up, down = [], []
            for v in range(n):
                incident = [c for c in (v - 1, v) if 0 <= c < cells]
                vals = {(int(gray[c]) >> b) & 1 for c in incident}
                if vals == {1}:
                    up.append(members[v])
                elif vals == {0}:
                    down.append(members[v])
            if up:
                self.add_linear(
                    np.append(up, ys[b]), np.append(np.ones(len(up)), -1.0), 0.0, "<="
                )
            if down:
                self.add_linear(
                    np.append(down, ys[b]), np.append(np.ones(len(down)), 1.0), 1.0, "<="
                )
        self.sos_groups.append(SosGroup(2, members, np.array(ys, dtype=int), gray))
        return gid

    def add_sos1_log(self, gamma_indices) -> int:
        """Binary-coded log SOS1: sum = 1, >= 0, at most one member nonzero.

        Adds ceil(log2(n)) binaries for n members.
        """
        members = self._check_indices(gamma_indices)
        n = len(members)
        if n < 1:
            raise ValueError("SOS1 group needs at least 1 member")
        bits = max(0, math.ceil(math.log2(n)))
        codes = np.arange(n, dtype=int)
        gid = len(self.sos_groups)
        ys = [self.add_binary(f"sos1_{gid}_y[{b}]") for b in range(bits)]
        for m in members:
            self.tighten_lower(int(m), 0.0)
        self.add_linear(members, np.ones(n), 1.0, "==")
        for b in range(bits):
            up = [members[k] for k in range(n) if (k >> b) & 1]
            down = [members[k] for k in range(n) if not (k >> b) & 1]
            if up:
                self.add_linear(
                    np.append(up, ys[b]), np.append(np.ones(len(up)), -1.0), 0.0, "<="
                )
            if down:
                self.add_linear(
                    np.append(down, ys[b]), np.append(np.ones(len(down)), 1.0), 1.0, "<="
                )
        self.sos_groups.append(SosGroup(1, members, np.array(ys, dtype=int), codes))
        return gid

    # ----- utilities -----

    def copy(self) -> "ConicProgram":
        return _copy.deepcopy(self)

    def residuals(self, x: np.ndarray):
        """Worst violation of bounds, linear rows, and cones at point x."""
        worst = 0.0
        for i in range(self.num_vars):
            if self.lower[i] is not None:
                worst = max(worst, self.lower[i] - x[i])
            if self.upper[i] is not None:
                worst = max(worst, x[i] - self.upper[i])
        for lc in self.linear:
            val = float(lc.coefficients @ x[lc.indices])
            worst = max(worst, abs(val - lc.rhs) if lc.sense == "==" else val - lc.rhs)
        for soc in self.socs:
            v = soc.offsets.copy()
            for r, (ri, rc) in enumerate(zip(soc.row_indices, soc.row_coefficients)):
                v[r] += float(rc @ x[ri])
            worst = max(worst, float(v @ v) - soc.bound)
        return worst

    def export_text(self) -> str:
        """Human-readable listing for debugging and test fixtures."""
        out = [f"variables: {self.num_vars} ({self.count_binaries()} binary)"]
        for i, name in enumerate(self.var_names):
            kind = "bin" if self.is_binary[i] else "cont"
            out.append(f"  x{i} {name} [{self.lower[i]}, {self.upper[i]}] {kind}")
        out.append(f"linear constraints: {len(self.linear)}")
        for k, lc in enumerate(self.linear):
            terms = " + ".join(
                f"{c:+g}*x{i}" for i, c in zip(lc.indices, lc.coefficients)
            )
            out.append(f"  L{k}: {terms} {lc.sense} {lc.rhs:g}")
        out.append(f"soc constraints: {len(self.socs)}")
        for k, soc in enumerate(self.socs):
            rows = []
            for ri, rc, b in zip(soc.row_indices, soc.row_coefficients, soc.offsets):
                terms = " + ".join(f"{c:+g}*x{i}" for i, c in zip(ri, rc))
                rows.append(f"({terms} {b:+g})")
            out.append(f"  Q{k}: ||{', '.join(rows)}||^2 <= {soc.bound:g}")
        out.append(f"sos groups: {len(self.sos_groups)}")
        for k, g in enumerate(self.sos_groups):
            out.append(
                f"  S{k}: type{g.kind} members={g.members.tolist()} bits={g.binaries.tolist()}"
            )
        return "\n".join(out)
