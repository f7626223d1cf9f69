"""Exception types raised across farmakit."""


class FarmakitError(Exception):
    """Base class for library errors."""


class BasisMismatchError(FarmakitError, ValueError):
    """Two objects that must share a basis do not."""


class RankDeficientError(FarmakitError, ValueError):
    """A least-squares design or normal-equation system is singular."""


class NotCausalError(FarmakitError, ValueError):
    """The model has no contraction certificate, so no causal solution is guaranteed."""


class NonStationaryError(FarmakitError, ValueError):
    """A fitted or supplied vector model has companion spectral radius >= 1."""
