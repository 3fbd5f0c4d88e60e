"""Exception taxonomy shared across the package.

Three failure classes are distinguished because the command-line driver maps
them to different exit codes: configuration problems (exit 2), violated
runtime contracts such as mass loss or negative densities (exit 1), and
stability preconditions that reject a run before any marching starts
(also exit 2, since they are fixable by re-gridding).
"""


class ConfigError(ValueError):
    """Invalid configuration: bad keys, broken invariants, missing files."""


class StabilityError(ValueError):
    """A scheme stability precondition (time-step bound, dissipation level) fails."""


class ContractError(RuntimeError):
    """A runtime invariant was violated: mass drift, negativity, non-finite values."""
