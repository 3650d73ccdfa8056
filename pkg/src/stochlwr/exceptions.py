"""Exception hierarchy shared by all stochlwr modules."""


class StochLWRError(Exception):
    pass


class GridError(StochLWRError, ValueError):
    """Time grid is malformed or incompatible with the requested operation."""


class KindError(StochLWRError, ValueError):
    """Noise path has the wrong kind for the requested operation."""


class DomainError(StochLWRError, ValueError):
    """A closed-form solution was evaluated outside its validity region."""


class InversionError(StochLWRError, ValueError):
    """The characteristic flow is not invertible at the requested time."""


class ArgumentError(StochLWRError, ValueError):
    pass


class UnknownIdError(StochLWRError, KeyError):
    pass


class ExplosionError(StochLWRError, ArithmeticError):
    """Characteristic state became non-finite."""


class ConfigError(StochLWRError, ValueError):
    pass
