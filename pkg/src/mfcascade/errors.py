"""Error taxonomy shared across the package.

ValueError covers bad arguments to library operations; ConfigError marks
invalid run configurations (CLI exit code 1); ComparisonError marks a
tolerance failure in a comparison run (CLI exit code 2).
"""


class ConfigError(ValueError):
    pass


class ComparisonError(RuntimeError):
    pass
