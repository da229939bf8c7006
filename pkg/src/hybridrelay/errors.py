"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Shapes or dimensions do not fit together."""


class DegenerateInputError(ValueError):
    """Input is well-formed but degenerate (zero vector, empty set, ...)."""


class DomainError(ValueError):
    """A scalar argument lies outside its admissible range."""


class ConstraintViolation(ValueError):
    def __init__(self, relay: int, value: float, bound: float):
        super().__init__(f"relay {relay}: power {value:.6g} exceeds harvested budget {bound:.6g}")
        self.relay = relay
        self.value = value
        self.bound = bound


class SolverError(RuntimeError):
    def __init__(self, msg: str, trace=None):
        super().__init__(msg)
        self.trace = list(trace or [])


class ConfigError(ValueError):
    """Bad or missing experiment configuration."""
