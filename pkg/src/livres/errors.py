"""Exception hierarchy shared across the package.

``InputError`` subclasses cover bad files or bad arguments (CLI exit code 2),
``InvariantError`` covers internal consistency violations (CLI exit code 3).
"""


class LivresError(Exception):
    pass


class InputError(LivresError):
    """Malformed or unsupported user input."""


class InvariantError(LivresError):
    """An internal invariant did not hold; indicates a bug upstream."""


# volume / NRRD
class MalformedHeaderError(InputError):
    pass


class UnsupportedFeatureError(InputError):
    pass


class SizeMismatchError(InputError):
    pass


class InvalidLabelError(InputError):
    pass


# pruning
class InsufficientPersistentComponentsError(InputError):
    pass


class NoDegreeOneVertexError(InputError):
    pass


class RootDegreeError(InputError):
    pass


# hull / biomarkers
class DegenerateHullError(InputError):
    pass


class EmptyLesionError(InputError):
    pass


class EmptyHczError(InputError):
    pass


# classifier
class EmptyDatasetError(InputError):
    pass


class NonFiniteFeatureError(InputError):
    pass


class FeatureKeyMismatchError(InputError):
    pass


class SingleRecordError(InputError):
    pass
