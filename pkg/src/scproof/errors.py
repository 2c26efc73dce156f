"""Exception types shared across the pipeline."""


class ScproofError(Exception):
    """Base class for every error raised by this package."""


# --- source ingestion ---------------------------------------------------


class CompilerNotFound(ScproofError):
    pass


class CompileFailed(ScproofError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("compilation failed: " + "; ".join(self.diagnostics[:3]))


class VersionMismatch(ScproofError):
    pass


class MalformedAst(ScproofError):
    def __init__(self, field_path):
        self.field_path = field_path
        super().__init__(f"malformed AST snapshot at {field_path}")


# --- template engine ----------------------------------------------------


class NoTemplateForKind(ScproofError):
    def __init__(self, kind):
        self.kind = kind
        super().__init__(f"no test template registered for {kind}")


class AnchorMissing(ScproofError):
    def __init__(self, slot):
        self.slot = slot
        super().__init__(f"template corrupt: anchor for slot {slot!r} not found")


class InvalidContractName(ScproofError):
    pass


class EmptyReply(ScproofError):
    pass


# --- llm client ---------------------------------------------------------


class AuthFailed(ScproofError):
    pass


class RateLimited(ScproofError):
    pass


class TransportError(ScproofError):
    pass


class MalformedResponse(ScproofError):
    pass


class RequestTimeout(ScproofError):
    pass


class UnparseableNormalization(ScproofError):
    pass


class NoStubForKey(ScproofError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"no stub reply for key {key}")


# --- execution backends -------------------------------------------------


class BackendNotFound(ScproofError):
    pass


class OutputUnparseable(ScproofError):
    pass


class JsonMalformed(ScproofError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"backend JSON report malformed at {path}")


class LayoutConflict(ScproofError):
    pass


# --- configuration ------------------------------------------------------


class ConfigInvalid(ScproofError):
    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"invalid configuration {key}: {reason}")
