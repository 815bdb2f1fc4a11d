"""Exception hierarchy shared by all collapsesim modules."""


class CollapseSimError(Exception):
    """Base class for every error raised by this package."""


# --- path-collection layer ---

class AllAmplitudesZero(CollapseSimError):
    """Every row amplitude of a collection is zero; Born weights undefined."""


class StaleCollection(CollapseSimError):
    """Operation on a collection that is no longer live in its registry."""


class ShapeMismatch(CollapseSimError):
    """Row tuples do not match the member list of a joint collection."""


class MemberAlreadyEntangled(CollapseSimError):
    """A particle offered to join_entangled already sits in a joint collection."""


class UnknownComponentKind(CollapseSimError):
    """Requested state-component kind is absent from the path states."""


# --- kinematics / amplitude layer ---

class OffShell(CollapseSimError):
    """Four-momentum does not satisfy E^2 - |p|^2 = m^2 for the given mass."""


class PropagatorPole(CollapseSimError):
    """A photon propagator denominator vanished; kinematics must be perturbed."""


class BelowThreshold(CollapseSimError):
    """No exit channel is kinematically (or dynamically) open."""


# --- interaction engine ---

class EmptySupport(CollapseSimError):
    """No participant carries positional amplitude where one is required."""


class NoOpenExitStates(CollapseSimError):
    """Conservation or zero amplitudes exclude the whole exit grid."""


class ForceMismatch(CollapseSimError):
    """Interacting particles do not share the required force tag."""


# --- measurement pipeline ---

class DetectorMiss(CollapseSimError):
    """Final particle state falls outside every detector bin."""


# --- statistics harness ---

class UnknownScenario(CollapseSimError):
    """Scenario name not present in the trial-runner registry."""


class InsufficientCounts(CollapseSimError):
    """Histogram too small for a valid Pearson chi-square test."""


# --- scenario files ---

class ParseError(CollapseSimError):
    """Lexical/structural error in a scenario file, tagged with a position."""

    def __init__(self, line: int, column: int, message: str):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"line {line}, column {column}: {message}")


class ValidationError(CollapseSimError):
    """A parsed scenario violates a named semantic constraint."""

    def __init__(self, constraint: str, message: str):
        self.constraint = constraint
        super().__init__(f"{constraint}: {message}")
