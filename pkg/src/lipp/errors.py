"""Exception types shared across the package."""


class LippError(Exception):
    """Base class for index errors."""


class KeyAlreadyExists(LippError, KeyError):
    """Insert of a key that is already present; the index is unchanged."""


class KeyNotFound(LippError, KeyError):
    """Delete/update of a key that is not present."""


class KernelDomainError(LippError, ValueError):
    """Key lies outside the kernel function's valid domain."""


class KeyCollisionError(LippError, ValueError):
    """Two distinct keys collapse to the same kernel value in float64.

    The model layer works on G(key) as a double; keys that become
    indistinguishable there cannot be separated by any monotone model.
    """


class DatasetFormatError(LippError, ValueError):
    """Dataset file is malformed (bad magic, truncation, bad key type, duplicates)."""
