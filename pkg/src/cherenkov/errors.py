"""Exception types raised across the package.

Each carries an ``exit_code`` so the CLI can map failures onto its
public exit-code contract without a lookup table of its own.
"""


class CherenkovError(Exception):
    exit_code = 1


class ConfigError(CherenkovError):
    exit_code = 2


class SingularMaterial(CherenkovError):
    """The material sits on the Cherenkov resonance 1 - n^2 beta^2 = 0."""

    exit_code = 3


class NoContrast(CherenkovError):
    """A slab with n = 1 cannot guide."""

    exit_code = 4


class NoMode(CherenkovError):
    """Requested branch is below cutoff (or absent) at this wavenumber."""

    exit_code = 4


class PhaseMatchError(CherenkovError):
    exit_code = 5


class DerivativeUnstable(CherenkovError):
    pass


class GridTooCoarse(CherenkovError):
    pass


class NotPerturbative(CherenkovError):
    """Coupled modes overlap too strongly for first-order theory."""


class DegenerateCoupling(CherenkovError):
    pass


class NonDiagonalizable(CherenkovError):
    pass


class DegenerateGram(CherenkovError):
    pass


class IncompleteBasis(CherenkovError):
    pass


class TruncationLeak(CherenkovError):
    pass


class TailOverflow(CherenkovError):
    """Probability reached the Fock truncation edge; raise ``n_max``."""


class NotPerturbativeWarning(UserWarning):
    """Warning-grade form of :class:`NotPerturbative`."""
