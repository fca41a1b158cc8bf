"""Word-level surprisal, alignment, and disfluency annotation for parallel corpora."""

__version__ = "0.1.0"

from wordbits.ids import ItemId, ItemIdError, parse_item_id

__all__ = ["ItemId", "ItemIdError", "parse_item_id", "__version__"]
