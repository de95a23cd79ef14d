"""Exception hierarchy shared by all wlsr modules."""


class WLSRError(Exception):
    pass


# raster
class DecodeError(WLSRError):
    pass


# lightbank
class FactorOutOfRange(WLSRError, ValueError):
    pass


class BoxOutOfBounds(WLSRError, ValueError):
    pass


class EmptyPatch(WLSRError, ValueError):
    pass


class InsufficientCandidates(WLSRError):
    def __init__(self, found, needed, params=None):
        self.found = found
        self.needed = needed
        self.params = params
        msg = f"found {found} candidate light patches, need {needed}"
        if params is not None:
            msg += (f" (min_channel={params.min_channel}, "
                    f"max_chroma_spread={params.max_chroma_spread})")
        super().__init__(msg)


# prohibit
class AnnotationOutOfBounds(WLSRError, ValueError):
    pass


class DimensionMismatch(WLSRError, ValueError):
    pass


# placement
class EmptyFitList(WLSRError, ValueError):
    pass


class OutOfBounds(WLSRError, ValueError):
    pass


class EmptyBank(WLSRError, ValueError):
    pass


# annot
class AnnotationError(WLSRError, ValueError):
    pass


class XmlParseError(AnnotationError):
    pass


class MissingField(AnnotationError):
    pass


class InvalidBox(AnnotationError):
    pass


class UnknownClass(AnnotationError):
    pass


# pipeline
class MissingBank(WLSRError):
    pass


class UnpairedFiles(WLSRError):
    pass


class ManifestMissing(WLSRError):
    pass
