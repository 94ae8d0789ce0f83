"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside an operation's domain (wrong branch, |y| >= 1, ...)."""


class OnStableManifold(Exception):
    """Signal raised by the return map at y = 0: the orbit falls into the
    equilibrium and never returns to the cross-section."""


class UnderflowFloor(DomainError):
    """|y| below the configured floating-point floor in strict mode."""


class SeedOutsideSection(ValueError):
    """Asymptotic seed lands outside the cross-section."""


class MuTooLarge(ValueError):
    """Loop-splitting parameter too large for the requested ladder depth."""


class NoConvergence(RuntimeError):
    """Newton iteration failed to reach tolerance."""


class UnsupportedConfiguration(ValueError):
    """Period-3 configurations other than the implemented one."""


class NotCoprime(ValueError):
    """gcd(p, q) != 1 in the integer family construction."""


class RangeViolation(ValueError):
    """Decimal truncation left the admissible parameter range."""


class UnreachableTarget(RuntimeError):
    """No coefficients inside the admissible box attain the (u, v) target."""


class NoLadderPoint(RuntimeError):
    """No spiral parameter on the countable ladder satisfies the offset
    equation within tolerance; the relative-position parameter needs
    adjustment."""


class NoCrossing(RuntimeError):
    """Forward iteration found no transverse section crossing in budget."""


class ChainBroken(RuntimeError):
    """A horseshoe chain link failed the image-overlap check."""

    def __init__(self, link, message=""):
        self.link = link
        super().__init__(message or f"chain link {link} failed")


class IllConditioned(RuntimeError):
    """Regression grid too narrow to identify the exponent."""


class ValidationFailed(ValueError):
    """Certificate assembly found violated invariants (all listed)."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigError(ValueError):
    """Run configuration failed validation; names the field and bound."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
