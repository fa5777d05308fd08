"""Exception types raised during ingestion, validation, and aggregation."""


class CrowdAggError(Exception):
    """Base class for all library-specific errors."""


class ValidationError(CrowdAggError, ValueError):
    """Input data violates a structural invariant."""


class MissingColumn(ValidationError):
    def __init__(self, column, path=None):
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"missing column {column!r}{where}")


class DuplicateResponse(ValidationError):
    def __init__(self, task, worker):
        self.task = task
        self.worker = worker
        super().__init__(f"duplicate response for task {task!r} by worker {worker!r}")


class EmptyFile(ValidationError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"no data rows in {path}")


class EmptyTable(ValidationError):
    def __init__(self, detail="table has no rows"):
        super().__init__(detail)


class ShapeMismatch(ValidationError):
    def __init__(self, task=None, shapes=None):
        self.task = task
        self.shapes = shapes
        detail = f"masks for task {task!r} disagree on shape" if task is not None else "shape mismatch"
        if shapes:
            detail += f": {shapes}"
        super().__init__(detail)


class UnreadableMask(ValidationError):
    def __init__(self, path, reason=""):
        self.path = path
        suffix = f": {reason}" if reason else ""
        super().__init__(f"cannot read mask file {path}{suffix}")


class UnknownDataset(CrowdAggError, LookupError):
    def __init__(self, name, known=()):
        self.name = name
        hint = f" (known: {', '.join(sorted(known))})" if known else ""
        super().__init__(f"unknown dataset {name!r}{hint}")


class MissingFiles(CrowdAggError):
    def __init__(self, name, paths):
        self.name = name
        self.paths = list(paths)
        super().__init__(f"dataset {name!r} is missing files: {', '.join(str(p) for p in self.paths)}")


class ChecksumMismatch(CrowdAggError):
    def __init__(self, path, expected, actual):
        super().__init__(f"checksum mismatch for {path}: expected {expected}, got {actual}")


class NotBinary(CrowdAggError):
    def __init__(self, label_count):
        self.label_count = label_count
        super().__init__(
            f"KOS can be applied to binary datasets only (got {label_count} labels)"
        )


class NoOverlap(CrowdAggError):
    def __init__(self, detail="worker co-annotation graph is disconnected"):
        super().__init__(detail)


class MissingPosteriors(CrowdAggError):
    def __init__(self):
        super().__init__("aggregation result carries no posteriors")


class NoCoincidences(CrowdAggError):
    def __init__(self):
        super().__init__("no task has two or more responses; alpha is undefined")


class MissingPrediction(CrowdAggError):
    def __init__(self, task):
        self.task = task
        super().__init__(f"no prediction for task {task!r}")


class FewerThanTwoItems(CrowdAggError):
    def __init__(self, count):
        self.count = count
        super().__init__(f"rank correlation needs at least 2 shared items, got {count}")
