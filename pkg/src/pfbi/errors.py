"""
Exception hierarchy for pfbi.

Library code raises these; the CLI is the only place that catches them and
turns them into exit codes (1 usage, 2 data, 3 numerical).
"""


class PfbiError(Exception):
    exit_code = 1


class InvalidParameter(PfbiError, ValueError):
    exit_code = 1


class DimensionMismatch(PfbiError, ValueError):
    exit_code = 2


class DimensionError(DimensionMismatch):
    """Operation needs a specific latent dimension (e.g. d = 2 for lattice export)."""


class ParseError(PfbiError):
    exit_code = 2


class EmptyDataset(PfbiError):
    exit_code = 2


class InsufficientSamples(PfbiError):
    exit_code = 2


class FactorizationFailure(PfbiError):
    exit_code = 3


class NonFiniteLoss(PfbiError):
    exit_code = 3


class DegenerateWeights(PfbiError):
    exit_code = 3
