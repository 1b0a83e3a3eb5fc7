from .progress import Progress
