"""Exception hierarchy. Every error carries a short machine code and the CLI
exit code (1 usage, 2 data, 3 model)."""


class TreescoreError(Exception):
    code = "error"
    exit_code = 2


class UsageError(TreescoreError):
    code = "usage"
    exit_code = 1


class DataError(TreescoreError):
    exit_code = 2


class IngestError(DataError):
    code = "ingest"


class JoinError(DataError):
    code = "join"


class EncodeError(DataError):
    code = "encode"


class SplitError(DataError):
    code = "split"


class FitError(DataError):
    code = "fit"


class EvaluationError(DataError):
    code = "evaluate"


class GridError(DataError):
    code = "grid"


class ModelFormatError(TreescoreError):
    code = "model"
    exit_code = 3
