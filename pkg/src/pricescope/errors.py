"""Exception hierarchy shared across the pipeline."""


class PriceScopeError(Exception):
    pass


# ingest
class ParseError(PriceScopeError):
    pass


class VersionError(ParseError):
    pass


class MalformedLog(PriceScopeError):
    pass


class NetworkError(PriceScopeError):
    pass


class TxNotFound(PriceScopeError):
    pass


class TracerUnsupported(PriceScopeError):
    pass


# graph search
class SearchBudgetExceeded(PriceScopeError):
    def __init__(self, visited: int, cap: int):
        super().__init__(f"swap search visited {visited} paths (cap {cap})")
        self.visited = visited
        self.cap = cap


class ScanTimeout(PriceScopeError):
    pass


# amm math
class ZeroReserve(PriceScopeError):
    pass


class InsufficientLiquidity(PriceScopeError):
    pass


class NoConvergence(PriceScopeError):
    pass


# inference
class TemplateError(PriceScopeError):
    pass


class NotTwoToken(PriceScopeError):
    pass


class NoSource(PriceScopeError):
    pass


class UnparseableResponse(PriceScopeError):
    pass


class RateLimited(NetworkError):
    pass


class Timeout(NetworkError):
    pass


class TimeoutWarning(UserWarning):
    """Scan stopped early; the report is partial."""
