"""Error types shared across the package.

Plain ``ValueError`` is raised for invalid arguments, ``OSError`` for file
problems. The two classes below cover the remaining failure modes.
"""


class NumericalError(RuntimeError):
    """A computation could not reach its accuracy contract.

    Carries a short diagnostic message (for example the offending condition
    number or the iteration budget that was exhausted).
    """


class UnsupportedInputError(ValueError):
    """Input is structurally valid but outside the supported class.

    Examples: a defective (non-diagonalizable) drift matrix passed to the
    spectral summaries, or a matrix without the antisymmetric-perturbation
    form expected by the divergence formula.
    """
