class NumericalError(RuntimeError):
    """A computation ran but could not meet its accuracy or convergence contract."""
