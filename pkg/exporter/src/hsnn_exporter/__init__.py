"""Hidden-state and embedding export from toy sequence encoders."""

__version__ = "0.1.0"

from .export import ExportSpec, export_states  # noqa: F401
from .models import CheckpointError, VocabularyMismatch, init_checkpoint, load_checkpoint  # noqa: F401
