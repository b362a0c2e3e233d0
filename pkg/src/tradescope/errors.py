"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ValidationError -> 1, RasterIOError -> 2,
PipelineError -> 3, BackendError -> 4.
"""


class TradescopeError(Exception):
    """Base class for all package errors."""


class ValidationError(TradescopeError):
    """Bad user input: out-of-range flag, malformed config, invariant violation."""


class RasterIOError(TradescopeError):
    """Unreadable, unwritable, or unsupported image/manifest file."""


class PipelineError(TradescopeError):
    """A degradation/optics stage cannot proceed with the given parameters."""


class OpticsUnresolvableError(PipelineError):
    """Requested GRD is finer than the target grid can represent (cutoff beyond Nyquist)."""


class BackendError(TradescopeError):
    """Super-resolution backend failure."""


class UnknownBackendError(BackendError):
    pass


class DuplicateBackendError(BackendError):
    pass


class UnsupportedScaleError(BackendError):
    pass


class AdapterSpawnError(BackendError):
    """External adapter executable could not be started."""


class AdapterTimeoutError(BackendError):
    pass


class AdapterProtocolError(BackendError):
    """Nonzero exit, malformed status descriptor, or missing output."""


class AdapterDimsError(BackendError):
    """Adapter returned an image violating the dims-times-scale contract."""
