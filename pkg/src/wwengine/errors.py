"""Exception hierarchy shared by every engine module.

Each error carries a stable machine-readable ``code`` and the HTTP status
the API layer maps it to.  The mapping is one-to-one; test_api checks the
whole table.
"""

from __future__ import annotations


class EngineError(Exception):
    code = "EngineError"
    http_status = 500

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "status": self.http_status}


class InvalidName(EngineError):
    code = "InvalidName"
    http_status = 400


class InvalidPath(EngineError):
    code = "InvalidPath"
    http_status = 400


class DuplicateProject(EngineError):
    code = "DuplicateProject"
    http_status = 409


class NoSuchProject(EngineError):
    code = "NoSuchProject"
    http_status = 404


class NoSuchSession(EngineError):
    code = "NoSuchSession"
    http_status = 404


class NoSuchJob(EngineError):
    code = "NoSuchJob"
    http_status = 404


class FileNotFound(EngineError):
    code = "FileNotFound"
    http_status = 404


class MakeFailed(EngineError):
    code = "MakeFailed"
    http_status = 502

    def __init__(self, message: str = "", result=None):
        super().__init__(message)
        self.result = result


class MakeUnavailable(EngineError):
    code = "MakeUnavailable"
    http_status = 503


class SessionBusy(EngineError):
    code = "SessionBusy"
    http_status = 409


class JobStillRunning(EngineError):
    code = "JobStillRunning"
    http_status = 409


class QueueFull(EngineError):
    code = "QueueFull"
    http_status = 429


class CycleDetected(EngineError):
    code = "CycleDetected"
    http_status = 409


class FetchFailed(EngineError):
    code = "FetchFailed"
    http_status = 502


class LimitExceeded(EngineError):
    code = "LimitExceeded"
    http_status = 413


class BadArchive(EngineError):
    code = "BadArchive"
    http_status = 400


class IoFailure(EngineError):
    code = "IoFailure"
    http_status = 500


class Unauthorized(EngineError):
    code = "Unauthorized"
    http_status = 401


ALL_ERRORS = [
    InvalidName, InvalidPath, DuplicateProject, NoSuchProject, NoSuchSession,
    NoSuchJob, FileNotFound, MakeFailed, MakeUnavailable, SessionBusy,
    JobStillRunning, QueueFull, CycleDetected, FetchFailed, LimitExceeded,
    BadArchive, IoFailure, Unauthorized,
]
