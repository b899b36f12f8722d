"""Defines common errors used by the package."""


class ConfigError(ValueError):
    def __init__(self, message: str, key_path: str | None = None) -> None:
        super().__init__(message if key_path is None else f"{key_path}: {message}")

        self.key_path = key_path


class ModelSchemaError(ConfigError): ...


class ModelValidationError(ValueError): ...


class HypothesisUnmetError(ValueError): ...


class LaplaceOverflowError(OverflowError): ...


class CapExceededError(RuntimeError):
    def __init__(self, generation: int, requested: int, cap: int) -> None:
        super().__init__(
            f"Generation {generation} would hold {requested} particles, above the cap of {cap}; lower n_generations"
        )

        self.generation = generation
        self.requested = requested
        self.cap = cap


class UnclassifiedCaseError(ValueError):
    def __init__(self, t1: float, t2: float, t_minus: float, t_plus: float) -> None:
        super().__init__(
            "Critical points match none of the three large-deviation cases: "
            f"t_1={t1!r}, t_2={t2!r}, t_-={t_minus!r}, t_+={t_plus!r}"
        )

        self.t1 = t1
        self.t2 = t2
        self.t_minus = t_minus
        self.t_plus = t_plus
