class RdscError(Exception):
    pass


class ShapeError(RdscError):
    pass


class NonFiniteError(RdscError):
    pass


class CheckpointError(RdscError):
    pass


class BitstreamError(RdscError):
    pass


class DecodeError(BitstreamError):
    pass


class ModelMismatchError(BitstreamError):
    pass


class TransformError(RdscError):
    pass


class InvalidConfig(RdscError):
    pass


class DatasetError(RdscError):
    pass
