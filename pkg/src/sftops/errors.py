"""Exception types shared across the package."""


class SftopsError(Exception):
    """Base class for all package errors."""


class ZeroRowOrColumn(SftopsError):
    pass


class NotIrreducible(SftopsError):
    pass


class BracketUndefined(SftopsError):
    pass


class OrbitsNotDisjoint(SftopsError):
    pass


class SideMismatch(SftopsError):
    pass


class NotComposable(SftopsError):
    pass


class OutsideDomain(SftopsError):
    pass


class BasisCapExceeded(SftopsError):
    pass


class UntrustedBlocks(SftopsError):
    def __init__(self, blocks):
        self.blocks = sorted(blocks)
        super().__init__(f"untrusted blocks: {self.blocks}")


class QuasiNormViolation(SftopsError):
    pass


class InsufficientData(SftopsError):
    pass


class ContourHitsSpectrum(SftopsError):
    pass


class SingularResolvent(SftopsError):
    pass


class NotAProjection(SftopsError):
    pass


class NotCornerUnitary(SftopsError):
    pass


class InvalidScenario(SftopsError):
    pass
