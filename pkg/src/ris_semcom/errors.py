"""Exception types shared across the package.

The CLI maps these onto process exit codes, so raising the right class is
part of each module's contract: configuration problems (bad keys, shape or
vocabulary mismatches) are `ConfigError`, diverging or non-finite numerics
are `NumericalError`, and plain OSError covers missing or unwritable files.
"""


class ConfigError(ValueError):
    """A configuration value, key, or cross-file consistency check failed."""


class NumericalError(RuntimeError):
    """Training or evaluation produced non-finite numbers."""
