"""Exception types shared across the engine."""


class KgDedupError(Exception):
    """Base class for all engine errors."""


class ParseError(KgDedupError):
    """Malformed N-Triples input. Carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class SpecError(KgDedupError):
    """Domain specification could not be built or is violated."""


class ConfigError(KgDedupError):
    """Invalid pre-filter / comparison / decision configuration."""


class PlanError(KgDedupError):
    """Invalid standardization plan (unknown path, function, or params)."""


class StoreError(KgDedupError):
    """Label store or state persistence failure."""


class StrategyError(KgDedupError):
    """Search strategy cannot be built or executed."""


class SpaceTooLarge(KgDedupError):
    """Brute-force solution space exceeds the enumeration bound."""
