"""
Error types shared by every relaxkit module
"""

from typing import Optional, Tuple


class RelaxkitError(Exception):
    """Base class for all relaxkit failures"""


class InputError(RelaxkitError, ValueError):
    """Malformed or incomplete user input"""


class DomainError(RelaxkitError, ValueError):
    """Argument outside the mathematical domain of a model"""


class ConfigError(InputError):
    """Configuration document problem, addressed by field path or line"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DataFileError(InputError):
    """Problem in a CSV data file, addressed by file and line"""

    def __init__(self, message: str, path: Optional[str] = None, row: Optional[int] = None):
        self.path = path
        self.row = row
        location = path or "<data>"
        if row is not None:
            location = f"{location}, row {row}"
        super().__init__(f"{location}: {message}")


class SingularFitError(RelaxkitError, ArithmeticError):
    """Normal equations of a linear fit cannot be solved"""


class BracketError(RelaxkitError, ValueError):
    """Target rate lies outside the range reachable inside a diffusion bracket"""

    def __init__(self, message: str, achievable: Tuple[float, float]):
        self.achievable = achievable
        super().__init__(f"{message} (achievable range {achievable[0]:.6g} .. {achievable[1]:.6g} 1/s)")
