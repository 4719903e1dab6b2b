"""Exception hierarchy shared by all graphflock modules."""


class GraphflockError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(GraphflockError):
    """An argument is malformed or outside its documented range."""


class DomainError(GraphflockError):
    """The input is well-formed but semantically invalid for the operation
    (e.g. a Laplacian requested for a graph with an isolated vertex)."""


class NumericError(GraphflockError):
    """A numerical procedure failed: solver blow-up, quadrature breakdown,
    or a post-solve invariant violated beyond tolerance."""


class GenerationError(GraphflockError):
    """A randomized construction exhausted its retry budget."""
