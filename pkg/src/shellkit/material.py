"""Constitutive record of the shell."""

import math
from dataclasses import asdict, dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class ShellMaterial:
    """Thickness, Lame constants, Cosserat couple modulus and curvature weights.

    ``mu_c = math.inf`` marks the constrained (infinite couple modulus) model.
    """

    h: float = 0.1
    mu: float = 1.0
    lam: float = 1.0
    mu_c: float = 1.0
    L_c: float = 1.0
    b1: float = 1.0
    b2: float = 1.0
    b3: float = 1.0

    def __post_init__(self):
        for name in ("h", "mu", "lam", "mu_c", "L_c", "b1", "b2", "b3"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or math.isnan(value):
                raise ValidationError(name, "must be a real number")
        for name in ("h", "mu", "L_c", "b1", "b2", "b3"):
            if not getattr(self, name) > 0 or math.isinf(getattr(self, name)):
                raise ValidationError(name, "must be positive and finite")
        if not 2 * self.lam + self.mu > 0 or math.isinf(self.lam):
            raise ValidationError("lam", "need 2*lam + mu > 0")
        if self.mu_c < 0:
            raise ValidationError("mu_c", "must be nonnegative")

    @property
    def constrained(self):
        return math.isinf(self.mu_c)

    @property
    def trace_coeff(self):
        """lambda mu / (lambda + 2 mu)."""
        return self.lam * self.mu / (self.lam + 2 * self.mu)

    @property
    def poisson_factor(self):
        """lambda / (lambda + 2 mu)."""
        return self.lam / (self.lam + 2 * self.mu)

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return ShellMaterial(**data)

    def to_dict(self):
        data = asdict(self)
        if math.isinf(self.mu_c):
            data["mu_c"] = "inf"
        return data

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ValidationError("material", "expected an object")
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValidationError(f"material.{sorted(extra)[0]}", "unknown field")
        values = dict(data)
        if isinstance(values.get("mu_c"), str):
            if values["mu_c"].lower() not in ("inf", "infinity"):
                raise ValidationError("mu_c", "string value must be 'inf'")
            values["mu_c"] = math.inf
        return cls(**values)
