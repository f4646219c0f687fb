"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
InvariantError -> 4.
"""


class HapsimError(Exception):
    """Base class for all hapsim errors."""


class ConfigError(HapsimError):
    """Invalid scenario, topology, or command-line configuration."""


class DataError(HapsimError):
    """Malformed or inconsistent input data (weather CSVs, result files)."""


class InvariantError(HapsimError):
    """An internal simulation invariant was violated; indicates a bug."""
