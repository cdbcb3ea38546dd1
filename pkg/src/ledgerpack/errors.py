"""Exception hierarchy shared by every ledgerpack module."""


class LedgerError(Exception):
    """Base class for all data-level errors raised by this package."""


class DecodeError(LedgerError):
    """Input bytes do not form a valid structure.

    Carries the byte offset where decoding failed and, when known, the
    name of the field being decoded.
    """

    def __init__(self, message, offset=None, field=None):
        self.offset = offset
        self.field = field
        parts = [message]
        if field is not None:
            parts.append(f"field={field}")
        if offset is not None:
            parts.append(f"offset={offset}")
        super().__init__(": ".join(parts) if len(parts) == 1 else f"{parts[0]} ({', '.join(parts[1:])})")


class TruncationError(DecodeError):
    """Input ended before the structure was complete."""


class FramingError(DecodeError):
    """A block-file frame boundary is wrong (bad magic, bad length)."""


class EncodeError(LedgerError):
    """An in-memory structure violates an invariant and cannot be serialized."""


class ChainError(LedgerError):
    """A block cannot be connected to the chain state."""


class UnknownInputError(ChainError):
    """An input spends an outpoint that is not in the UTXO set."""


class ContinuityError(ChainError):
    """A block's prev-hash does not match the current chain tip."""


class AnalyticsError(LedgerError):
    """Bad arguments to a measurement operation (empty interval, bad fraction)."""


class QuantileUnreachableError(LedgerError):
    """The requested quantile exceeds the fraction of UTXOs ever spent."""


class StrategyError(LedgerError):
    """Bad arguments to a storage-reduction operation."""


class StoreError(LedgerError):
    """An on-disk store is malformed, inconsistent, or unreadable."""


class GenerationError(LedgerError):
    """A synthetic-chain plan is invalid or unsatisfiable."""
