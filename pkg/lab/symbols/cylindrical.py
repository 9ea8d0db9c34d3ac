"""Cylindrical symbols F(x) = g(<a_1,x>, ..., <a_k,x>)."""

from typing import Optional

import numpy as np

from lab.core.geometry import q_form
from lab.exceptions import InvalidArgumentError
from lab.models.hilbert import FloatArray
from lab.symbols.base import Symbol, SymbolClaim
from lab.symbols.profiles import DirectionalProfile, LaplacianProfile, Profile


class CylindricalSymbol(Symbol):
    """Profile composed with finitely many linear functionals; derivatives by the chain rule."""

    def __init__(
        self,
        profile: Profile,
        directions: FloatArray,
        claim: Optional[SymbolClaim] = None,
        label: str = "",
        dim: Optional[int] = None,
    ):
        directions = np.asarray(directions, dtype=float)
        if directions.ndim == 1:
            directions = directions.reshape(1, -1)
        if directions.shape[0] == 0 and dim is not None:
            directions = directions.reshape(0, dim)
        if directions.shape[0] != profile.arity:
            raise InvalidArgumentError(
                f"profile takes {profile.arity} arguments but {directions.shape[0]} directions were given"
            )
        if not np.all(np.isfinite(directions)):
            raise InvalidArgumentError("directions must be finite")
        super().__init__(directions.shape[1] if dim is None else dim, claim, label)
        if directions.shape[1] != self.dim:
            raise InvalidArgumentError("direction length differs from symbol dimension")
        directions = directions.copy()
        directions.setflags(write=False)
        self.profile = profile
        self.directions = directions
        self.is_complex = profile.is_complex
        self.max_order = profile.max_order

    @property
    def arity(self) -> int:
        return self.profile.arity

    @property
    def gram(self) -> FloatArray:
        """Gram matrix <a_r, a_s>."""
        return self.directions @ self.directions.T

    def coordinates(self, points: np.ndarray) -> FloatArray:
        """Profile arguments z = A x for each row."""
        return self._points(points) @ self.directions.T

    def evaluate(self, points):
        return self.profile.value(self.coordinates(points))

    def derivative_rows(self, points, directions):
        z = self.coordinates(points)
        ws = [np.asarray(u, dtype=float) @ self.directions.T for u in directions]
        return self.profile.directional(z, ws)

    def directional_symbol(self, direction):
        u = np.asarray(direction, dtype=float).reshape(self.dim)
        claim = None
        if self.claim.has_qa:
            operator = self.claim.qa_operator
            claim = SymbolClaim(qa_norm=self.claim.qa_norm * np.sqrt(q_form(operator, u)), qa_operator=operator)
        return CylindricalSymbol(
            DirectionalProfile(self.profile, self.directions @ u),
            self.directions,
            claim=claim,
            label=f"d({self.label})",
            dim=self.dim,
        )

    def laplacian_symbol(self):
        claim = None
        if self.claim.has_qa:
            operator = self.claim.qa_operator
            claim = SymbolClaim(qa_norm=operator.trace * self.claim.qa_norm, qa_operator=operator)
        return CylindricalSymbol(
            LaplacianProfile(self.profile, self.gram),
            self.directions,
            claim=claim,
            label=f"lap({self.label})",
            dim=self.dim,
        )

    def compose_linear(self, matrix):
        mat = np.asarray(matrix, dtype=float)
        if mat.shape != (self.dim, self.dim):
            raise InvalidArgumentError("linear map dimension differs from symbol dimension")
        return CylindricalSymbol(
            self.profile, self.directions @ mat, claim=None, label=f"{self.label}@M", dim=self.dim
        )
