from .apply import apply, apply_tensor, invert, invert_tensor, transformed_dims
from .descriptor import IDENTITY, TRANSFORM_COUNT, TransformDescriptor, sample
from .study import StudyTransform, apply_study, invert_study, sample_study
