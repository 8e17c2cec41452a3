# utilities_module/errors.py
# Exception types shared by every package.


class BetsError(Exception):
    """Base class for all simulator errors."""


class ScenarioSchemaError(BetsError, ValueError):
    """A scenario document is missing a field or has a field of the wrong type."""


class InvariantError(BetsError, ValueError):
    """A domain invariant was violated. `rule` names it (e.g. "Remark 1")."""

    def __init__(self, rule: str, message: str):
        super().__init__(f"{rule}: {message}")
        self.rule = rule


class EmissionDomainError(BetsError, ValueError):
    """Speed outside the domain of the emission curve."""


class MissingTraceError(BetsError):
    """A vehicle has no speed trace covering the requested interval."""


class LedgerError(BetsError):
    """Base class for ledger failures."""


class ReplayError(LedgerError):
    """A transaction reused an (author, nonce) pair."""


class DigestMismatchError(LedgerError):
    """Stored digest does not match the digest recomputed from the payload."""


class EmptyQueueError(LedgerError):
    """seal_block was called with no pending digests."""


class ForkError(LedgerError):
    """Chains diverged. Fork resolution is not supported."""


class TradeError(BetsError, ValueError):
    """A trade proposal broke a protocol precondition."""


class TradeStateError(TradeError):
    """A trade operation was applied to an order in the wrong state."""


class StaleSampleError(BetsError, ValueError):
    """An emission sample arrived out of order."""


class SweepError(BetsError, ValueError):
    """Unknown sweep parameter or empty grid."""


class UnknownContractError(BetsError, KeyError):
    """An event kind maps to a contract missing from the gas table."""


class PlotError(BetsError, ValueError):
    """Plot input table is empty or malformed."""


class SimulationError(BetsError):
    """Wraps a module error raised inside the engine, tagged with tick and stage."""

    def __init__(self, message: str, tick: int, stage: str):
        super().__init__(f"[tick {tick}, stage {stage}] {message}")
        self.tick = tick
        self.stage = stage
