"""Exception hierarchy.

Input problems (bad files, missing periods) derive from :class:`InputError`;
numerical findings that stop a computation derive from :class:`NumericalError`.
The CLI maps the two families to exit codes 1 and 2.
"""


class ComplexityError(Exception):
    """Base class for every error raised by econplex."""


class InputError(ComplexityError):
    pass


class NumericalError(ComplexityError):
    pass


class MalformedRow(InputError):
    def __init__(self, line: int, reason: str = "", source: str = ""):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"malformed row at {where}" + (f": {reason}" if reason else ""))


class NegativeValue(InputError):
    def __init__(self, line: int, source: str = ""):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"negative value at {where}")


class EmptyInput(InputError):
    pass


class NoDataForYear(InputError):
    def __init__(self, year: int):
        self.year = year
        super().__init__(f"no records for year {year}")


class MissingPeriod(InputError):
    def __init__(self, year: int, country: str = ""):
        self.year = year
        self.country = country
        super().__init__(f"no records for {country or 'country'} in {year}")


class MissingKind(InputError):
    pass


class ZeroMarginal(NumericalError):
    def __init__(self, axis: str, index: int, label: str = ""):
        self.axis = axis
        self.index = index
        self.label = label
        super().__init__(f"zero {axis} total at index {index} ({label})")


class EmptyAfterPrune(NumericalError):
    pass


class DegenerateSpectrum(NumericalError):
    pass


class ComplexEigenvalue(NumericalError):
    pass


class SingularUpdate(NumericalError):
    def __init__(self, iteration: int, products: list, diagnostics: dict | None = None):
        self.iteration = iteration
        self.products = products
        self.diagnostics = diagnostics or {}
        super().__init__(
            f"non-positive denominator at iteration {iteration} for products {products}"
        )


class InvariantViolation(NumericalError):
    """A runtime invariant of an iteration failed (named by ``prop``)."""

    def __init__(self, prop: str, detail: str):
        self.prop = prop
        super().__init__(f"{prop}: {detail}")


class RankDeficient(NumericalError):
    def __init__(self, columns: list[str], reason: str = "collinear columns"):
        self.columns = columns
        super().__init__(f"{reason}: {columns}")


class TooFewClusters(NumericalError):
    pass


class UnknownRegressor(ComplexityError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InsufficientOverlap(NumericalError):
    pass


class NoCommonYears(NumericalError):
    pass


class TooFewPoints(NumericalError):
    pass
