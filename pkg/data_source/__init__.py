from .fcidump_utils import FCIDumpUtils
from .manifest_utils import Manifest, ManifestUtils
from .table_utils import TableUtils

__all__ = [
    "FCIDumpUtils",
    "Manifest",
    "ManifestUtils",
    "TableUtils",
]
