"""Exception hierarchy shared by every fairscope module."""


class FairscopeError(Exception):
    """Base class; the CLI maps these to exit code 2."""


class InvalidScoreError(FairscopeError, ValueError):
    pass


class TaxonomyMismatchError(FairscopeError, ValueError):
    pass


class ParseError(FairscopeError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicationError(FairscopeError, ValueError):
    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message)


class EmptyGroupError(FairscopeError, ValueError):
    pass


class UndefinedRateError(FairscopeError, ZeroDivisionError):
    pass


class IncompleteTableError(FairscopeError, KeyError):
    def __str__(self):
        # KeyError would repr() the message otherwise
        return str(self.args[0]) if self.args else ""


class InfeasibleSplitError(FairscopeError, ValueError):
    pass


class InfeasibleClusteringError(FairscopeError, ValueError):
    pass


class InfeasibleSelectionError(FairscopeError, ValueError):
    def __init__(self, message, segment=None):
        self.segment = segment
        super().__init__(message)


class CorruptedFixtureError(FairscopeError):
    pass
