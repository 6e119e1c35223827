"""Exception types shared across the package.

The CLI maps these onto its exit-code taxonomy (0 ok, 2 usage,
3 verification, 4 capacity).
"""


class PDForestError(Exception):
    """Base class for all package errors."""


class ParseError(PDForestError):
    """Malformed model dump; message carries the JSON node path."""


class SchemaError(PDForestError):
    """Structurally valid JSON that violates the dump schema."""


class IngestionError(PDForestError):
    """Bad tabular input (ragged rows, non-numeric or non-finite cells)."""


class InputError(PDForestError):
    """A runtime input does not satisfy an operation's precondition."""


class CapacityError(PDForestError):
    """A leaf path has more merged conditions than the mask width allows."""

    def __init__(self, message, tree_index=None, node_id=None):
        super().__init__(message)
        self.tree_index = tree_index
        self.node_id = node_id


class DegenerateModelError(PDForestError):
    """Node covers unusable for path-dependent weighting (zero parent cover)."""


class NumericError(PDForestError):
    """A metric produced a non-finite value; message carries cube provenance."""


class VerificationError(PDForestError):
    """A --verify cross-check against the brute-force oracle failed."""
