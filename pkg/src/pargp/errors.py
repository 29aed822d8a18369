"""Exception and warning types."""


class PargpError(Exception):
    """Base class for numerical failures (CLI exit code 3)."""


class NotPositiveDefinite(PargpError):
    """Cholesky factorisation of a covariance matrix failed."""


class RankDeficient(PargpError):
    """GLS normal matrix is numerically singular."""


class AllSubsetsEmpty(PargpError):
    """No subset carries validation data."""


class TooLargeForExactML(PargpError):
    """Dense likelihood requested beyond the size guard."""


class EmptySubset(UserWarning):
    """A partition leaf holds no validation observations; it is skipped downstream."""
