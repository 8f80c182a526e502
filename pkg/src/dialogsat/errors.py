"""Shared exception types. Data problems exit the CLI with 1, config problems with 2."""


class DataError(ValueError):
    """Malformed or contract-violating input data (corpus files, labels, alignments)."""


class ConfigError(ValueError):
    """Invalid configuration: bad hyperparameters, fractions, lexicons, CLI settings."""


class SchemaMismatchError(DataError):
    """Feature vectors do not match the schema a model was trained with."""
