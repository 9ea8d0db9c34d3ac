"""Gaussian L^p constants K(p), C(p) and alpha(p), plus an independently tabulated copy."""

import math
from functools import lru_cache
from typing import Dict, Iterable, List

from pydantic import BaseModel, Field
from scipy import special

from lab.exceptions import InvalidArgumentError

AGREEMENT_RTOL = 1e-12


def k_constant(p: float) -> float:
    """K(p) = 2^{1/2} pi^{-1/(2p)} Gamma((p+1)/2)^{1/p}, so that ||l_a||_p = K(p) h^{1/2} |a|."""
    if not p >= 1:
        raise InvalidArgumentError(f"K(p) requires p >= 1, got {p}")
    return math.sqrt(2.0) * math.pi ** (-1.0 / (2.0 * p)) * math.exp(math.lgamma((p + 1.0) / 2.0) / p)


def alpha_exponent(p: float) -> float:
    """alpha(p) = 2 for p <= 2, p otherwise."""
    if not p >= 1:
        raise InvalidArgumentError(f"alpha(p) requires p >= 1, got {p}")
    return 2.0 if p <= 2 else float(p)


def c_constant(p: float, trace: float) -> float:
    """C(p) = 1 for p <= 2, K(p) Tr(A)^{1/2 - 1/p} otherwise."""
    if not p >= 1:
        raise InvalidArgumentError(f"C(p) requires p >= 1, got {p}")
    if trace < 0:
        raise InvalidArgumentError("trace must be nonnegative")
    if p <= 2:
        return 1.0
    return k_constant(p) * trace ** (0.5 - 1.0 / p)


@lru_cache(maxsize=256)
def tabulated_k(p: float) -> float:
    """K(p) regenerated from the absolute moment E|v|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)."""
    if not p >= 1:
        raise InvalidArgumentError(f"K(p) requires p >= 1, got {p}")
    moment = 2.0 ** (p / 2.0) * special.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)
    return float(moment ** (1.0 / p))


def tabulated_alpha(p: float) -> float:
    return float(max(2.0, p))


def tabulated_c(p: float, trace: float) -> float:
    if p > 2:
        return tabulated_k(p) * trace ** ((p - 2.0) / (2.0 * p))
    return 1.0


def agree(inline: float, tabulated: float, rtol: float = AGREEMENT_RTOL) -> bool:
    """Relative agreement of two computations of the same bound."""
    if inline == tabulated:
        return True
    scale = max(abs(inline), abs(tabulated))
    return abs(inline - tabulated) <= rtol * scale


class ConstantRow(BaseModel):
    """One line of the constants table."""

    p: float = Field(..., ge=1.0, description="Integrability exponent")
    k: float = Field(..., description="K(p)")
    alpha: float = Field(..., description="alpha(p)")
    c: float = Field(..., description="C(p) for the given trace")
    trace: float = Field(..., ge=0.0, description="Tr(A) used for C(p)")
    agrees: bool = Field(..., description="Inline and tabulated values agree to 1e-12")


class ConstantsTable(BaseModel):
    """Table of constants regenerated at load time."""

    rows: List[ConstantRow] = Field(default_factory=list)

    @classmethod
    def build(cls, ps: Iterable[float], trace: float = 1.0) -> "ConstantsTable":
        rows = []
        for p in ps:
            k_tab, c_tab, a_tab = tabulated_k(p), tabulated_c(p, trace), tabulated_alpha(p)
            ok = (
                agree(k_constant(p), k_tab)
                and agree(c_constant(p, trace), c_tab)
                and alpha_exponent(p) == a_tab
            )
            rows.append(ConstantRow(p=p, k=k_tab, alpha=a_tab, c=c_tab, trace=trace, agrees=ok))
        return cls(rows=rows)

    def as_dict(self) -> Dict[float, ConstantRow]:
        return {row.p: row for row in self.rows}
