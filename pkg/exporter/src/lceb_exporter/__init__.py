"""lceb_exporter: offline producer of frozen word representations.

Runs an embedding backend (a subword-hash static model, a deterministic
context-mixing reference model, or a pretrained transformer) over whitespace
token sequences and writes either an LCEB dump of per-layer, per-token
vectors keyed by sentence id, or a static text vector file for a fixed
vocabulary. The on-disk formats are shared with the probing harness that
consumes them; the two packages communicate through files only.
"""

from .backends import HashStaticBackend, TransformerBackend, WindowMixBackend
from .export import export, export_static, read_sequences, read_vocabulary
from .format import ExportError, sentence_id, write_lceb, write_static

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "HashStaticBackend",
    "TransformerBackend",
    "WindowMixBackend",
    "export",
    "export_static",
    "read_sequences",
    "read_vocabulary",
    "sentence_id",
    "write_lceb",
    "write_static",
    "__version__",
]
