"""Exception and warning types raised across the package."""


class InvalidParameter(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class DisconnectedGraph(RuntimeError):
    """Observation graph splits into several components.

    ``components`` holds one sorted list of sensor indices per component.
    """

    def __init__(self, components):
        self.components = [sorted(int(i) for i in c) for c in components]
        sizes = ", ".join(str(len(c)) for c in self.components)
        preview = "; ".join(str(c[:8]) + ("..." if len(c) > 8 else "") for c in self.components)
        super().__init__(
            f"observation graph has {len(self.components)} components (sizes {sizes}): {preview}"
        )


class AllCandidatesFailed(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


class RankDeficientWarning(UserWarning):
    pass


class NegativeSpectrumWarning(UserWarning):
    pass


class UnreliableRowsWarning(UserWarning):
    pass
