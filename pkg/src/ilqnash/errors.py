"""Exception types shared across the library."""


class GameDefinitionError(ValueError):
    """A game, cost, strategy, or scenario is structurally invalid.

    Raised for dimension mismatches, inconsistent horizons, bad
    configuration values, and similar definition-time problems.
    """


class ScenarioConfigError(GameDefinitionError):
    """A scenario configuration file is missing, malformed, or invalid."""


class NumericalError(RuntimeError):
    """Base class for runtime numerical failures during a solve."""


class DivergedRolloutError(NumericalError):
    """A forward rollout produced a non-finite state.

    Attributes:
        step: index of the first timestep at which the state went non-finite.
    """

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"rollout diverged at timestep {step}")


class CostDerivativeError(NumericalError):
    """A cost derivative is non-finite or undefined at the operating point.

    Attributes:
        player: 1-based index of the player whose cost failed.
        step: timestep index of the operating point (``None`` for terminal).
        term: name of the offending cost term.
    """

    def __init__(self, player: int, step, term: str, message: str | None = None):
        self.player = player
        self.step = step
        self.term = term
        where = "terminal state" if step is None else f"timestep {step}"
        super().__init__(
            message
            or f"non-finite derivative of cost term '{term}' for player {player} at {where}"
        )


class SingularStageError(NumericalError):
    """The stacked stage system of the LQ game solve is singular.

    Attributes:
        stage: timestep index at which the factorization failed.
    """

    def __init__(self, stage: int, message: str | None = None):
        self.stage = stage
        super().__init__(message or f"singular stacked control system at stage {stage}")


class DocumentFormatError(ValueError):
    """A trajectory document is malformed or violates its schema."""
