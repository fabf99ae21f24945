"""Exception hierarchy shared across the workbench."""

from __future__ import annotations


class GenonetError(Exception):
    """Base class for all workbench errors."""

    code = "internal"


# --- scenario model ---------------------------------------------------------

class UnknownUnit(GenonetError):
    code = "unknown-unit"

    def __init__(self, suffix: str, field: str = ""):
        self.suffix = suffix
        self.field = field
        super().__init__(f"unrecognized unit suffix {suffix!r}"
                         + (f" in field {field!r}" if field else ""))


class NegativeMagnitude(GenonetError):
    code = "negative-magnitude"

    def __init__(self, field: str, value: float):
        self.field = field
        self.value = value
        super().__init__(f"negative magnitude {value} for field {field!r}")


class SpecInvalid(GenonetError):
    """Raised when a merged scenario fails validation; carries the report."""

    code = "spec-invalid"

    def __init__(self, report):
        self.report = report
        rules = ", ".join(f"{v.field}:{v.rule}" for v in report.violations)
        super().__init__(f"scenario validation failed ({rules})")


# --- llm gateway ------------------------------------------------------------

class CassetteMiss(GenonetError):
    """Replay mode found no recorded response for a request digest.

    Signals a test-fixture gap; never falls through to the network.
    """

    code = "cassette-miss"

    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no cassette entry for request digest {digest}")


class TransportError(GenonetError):
    code = "transport-error"

    def __init__(self, message: str, retries: int = 0):
        self.retries = retries
        super().__init__(message)


class ContractViolation(GenonetError):
    """Model output failed schema validation even after the repair pass."""

    code = "contract-violation"

    def __init__(self, contract: str, detail: str):
        self.contract = contract
        self.detail = detail
        super().__init__(f"response violates contract {contract!r}: {detail}")


# --- intent extraction ------------------------------------------------------

class ExtractionEmpty(GenonetError):
    """Neither the model nor the rule pass produced any scenario field."""

    code = "extraction-empty"


# --- knowledge retrieval ----------------------------------------------------

class EmptyDocument(GenonetError):
    code = "empty-document"


class EmptyIndex(GenonetError):
    code = "empty-index"


# --- codegen ----------------------------------------------------------------

class UnsupportedCombination(GenonetError):
    """No template covers (helper_stack, traffic_profile, transport)."""

    code = "unsupported-combination"

    def __init__(self, requested: tuple, nearest: tuple):
        self.requested = requested
        self.nearest = nearest
        super().__init__(
            f"no template for {requested}; nearest supported combination is {nearest}")


class RefinementRejected(GenonetError):
    """Recorded (not raised) when a refined section regresses structure."""

    code = "refinement-rejected"

    def __init__(self, section: str):
        self.section = section
        super().__init__(f"refinement for section {section!r} rejected by lint")


# --- execution sandbox ------------------------------------------------------

class SandboxTimeout(GenonetError):
    """Process tree killed after exceeding the time limit."""

    code = "timeout"

    def __init__(self, timeout_s: float, partial_report=None):
        self.timeout_s = timeout_s
        self.partial_report = partial_report
        super().__init__(f"execution exceeded {timeout_s}s and was killed")


class BackendUnavailable(GenonetError):
    code = "backend-unavailable"

    def __init__(self, backend: str, reason: str):
        self.backend = backend
        super().__init__(f"backend {backend!r} unavailable: {reason}")


class FixtureMissing(GenonetError):
    code = "fixture-missing"

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no stub fixture registered for key {key!r}")


class BuildFailed(GenonetError):
    """Build phase exited nonzero; input to the debug loop, not terminal."""

    code = "build-failed"

    def __init__(self, report):
        self.report = report
        super().__init__(f"build failed with exit status {report.exit_status}")

    @property
    def stderr(self) -> str:
        return self.report.stderr


# --- result interpreter -----------------------------------------------------

class MalformedXml(GenonetError):
    code = "malformed-xml"

    def __init__(self, position: str):
        self.position = position
        super().__init__(f"malformed FlowMonitor XML at {position}")


class MissingClassifier(GenonetError):
    code = "missing-classifier"

    def __init__(self, flow_id: int):
        self.flow_id = flow_id
        super().__init__(f"flow {flow_id} has no classifier 5-tuple")


class UnitParseError(GenonetError):
    code = "unit-parse-error"

    def __init__(self, attribute: str, value: str):
        self.attribute = attribute
        self.value = value
        super().__init__(f"cannot parse time attribute {attribute}={value!r}")


# --- orchestrator / interface ----------------------------------------------

class TurnFailed(GenonetError):
    """Wraps any chain-step error; the session remains usable afterward."""

    code = "turn-failed"

    def __init__(self, message: str, cause: Exception | None = None):
        self.cause = cause
        super().__init__(message)


class SessionNotFound(GenonetError):
    code = "session-not-found"

    def __init__(self, session_id: str):
        self.session_id = session_id
        super().__init__(f"unknown session {session_id!r}")


class InvalidOverride(GenonetError):
    code = "invalid-override"

    def __init__(self, key: str, detail: str):
        self.key = key
        super().__init__(f"invalid session override {key!r}: {detail}")
