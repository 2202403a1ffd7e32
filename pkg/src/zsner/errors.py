"""Exception types shared across the package."""


class ZsnerError(Exception):
    """Base class for all package errors."""


class LoadError(ZsnerError):
    """A file could not be read or a record is malformed."""


class IntegrityError(LoadError):
    """Data violates an invariant (e.g. gold mention not in sentence text)."""


class PackError(ZsnerError):
    """Template pack is missing an entry or contains a bad placeholder."""


class AssemblyError(ZsnerError):
    """A prompt cannot be assembled from the given plan and inputs."""


class ConfigError(ZsnerError):
    """Run configuration is invalid or incomplete."""


class BackendError(ZsnerError):
    """The completion backend failed after exhausting retries."""


class CacheMissError(BackendError):
    """Replay backend has no record for one or more request digests."""

    def __init__(self, digests: list[str]):
        self.digests = list(digests)
        preview = ", ".join(self.digests[:5])
        more = "" if len(self.digests) <= 5 else f" (+{len(self.digests) - 5} more)"
        super().__init__(f"replay cache miss for digests: {preview}{more}")


class ContractError(ZsnerError):
    """A remote service response does not match the annotation wire contract."""


class TransportError(ZsnerError):
    """A remote endpoint could not be reached."""


class ShapeError(ZsnerError):
    """Stored run data does not match the requested operation (ids, SC level)."""
