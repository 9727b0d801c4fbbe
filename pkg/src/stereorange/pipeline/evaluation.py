"""Distance-error tables: actual vs measured range."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_DOWN, ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path

from ..errors import FormatError, NonPositiveActual

_MODES = {"truncate": ROUND_DOWN, "half-up": ROUND_HALF_UP}


@dataclass(frozen=True)
class ErrorRow:
    actual: Decimal
    measured: Decimal
    difference: Decimal
    error_pct: Fraction
    error_pct_rounded: Decimal


@dataclass(frozen=True)
class ErrorReport:
    rows: tuple[ErrorRow, ...]
    mean_rounded: Decimal
    mean_unrounded: Fraction
    rounding: str

    def format(self) -> str:
        lines = ["actual_cm\tmeasured_cm\tdifference_cm\terror_pct"]
        for r in self.rows:
            lines.append(f"{r.actual}\t{r.measured}\t{r.difference}\t{r.error_pct_rounded}")
        lines.append(f"# mean error % over per-row {self.rounding} values: {self.mean_rounded}")
        lines.append(f"# mean error % over unrounded values: {float(self.mean_unrounded):.4f}")
        return "\n".join(lines)


def _dec(v) -> Decimal:
    return v if isinstance(v, Decimal) else Decimal(str(v))


def evaluate_error_table(rows, rounding: str = "truncate") -> ErrorReport:
    """Per-row relative error in percent plus two means.

    Per-row values are cut to two decimals (``truncate``, the default, or
    ``half-up``) and ``mean_rounded`` averages those cut values, rounded
    half-up to three decimals. ``mean_unrounded`` is the exact mean.
    Arithmetic is exact (decimal / rational), so no float noise enters.
    """
    if rounding not in _MODES:
        raise ValueError(f"rounding must be one of {sorted(_MODES)}")
    out = []
    for actual, measured in rows:
        a, m = _dec(actual), _dec(measured)
        if a <= 0:
            raise NonPositiveActual(f"actual distance {a} is not positive")
        diff = abs(m - a)
        err = Fraction(diff) * 100 / Fraction(a)
        exact = Decimal(err.numerator) / Decimal(err.denominator)
        out.append(ErrorRow(a, m, diff, err, exact.quantize(Decimal("0.01"), rounding=_MODES[rounding])))
    if not out:
        raise ValueError("empty table")
    n = len(out)
    mean_r = (sum(r.error_pct_rounded for r in out) / n).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP)
    mean_u = sum(r.error_pct for r in out) / n
    return ErrorReport(tuple(out), mean_r, mean_u, rounding)


def read_error_table(path) -> list[tuple[Decimal, Decimal]]:
    """Two numbers per line (actual, measured); '#' starts a comment."""
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) < 2:
            raise FormatError("expected 'actual measured'", line=lineno)
        try:
            rows.append((Decimal(parts[0]), Decimal(parts[1])))
        except ArithmeticError:
            raise FormatError(f"not a number: {line!r}", line=lineno) from None
    return rows
