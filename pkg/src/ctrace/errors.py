"""Exception hierarchy shared by the store, the engine and the service layer."""


class CtraceError(Exception):
    """Base class. ``code`` is the wire-level error code used by the HTTP API."""

    code = "bad_request"
    http_status = 400


class ValidationError(CtraceError, ValueError):
    pass


class ConflictingDuplicate(CtraceError):
    code = "conflicting_duplicate"
    http_status = 409


class DuplicateReport(CtraceError):
    code = "illegal_transition"
    http_status = 409


class IllegalTransition(CtraceError):
    code = "illegal_transition"
    http_status = 409


class UnknownPerson(CtraceError, KeyError):
    code = "unknown_person"
    http_status = 404

    def __str__(self):
        return Exception.__str__(self)


class NoPatients(CtraceError):
    code = "no_patients"
    http_status = 422


class EmptyWindow(CtraceError):
    code = "bad_request"
    http_status = 422


class NonFiniteState(CtraceError, ArithmeticError):
    code = "bad_request"
    http_status = 422
