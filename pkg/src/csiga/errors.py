"""Exceptions raised by the detectors and the manifold helpers."""


class IndefiniteStateError(ArithmeticError):
    """A precision that must be positive (or a natural parameter that must be
    negative definite) is not.

    ``n`` is the auxiliary/user index involved and ``t`` the iteration, when
    known.
    """

    def __init__(self, message, n=None, t=None):
        self.n = n
        self.t = t
        where = []
        if t is not None:
            where.append(f"iteration {t}")
        if n is not None:
            where.append(f"index {n}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
