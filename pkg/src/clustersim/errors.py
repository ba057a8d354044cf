"""Exception types shared across the simulator."""


class ClusterSimError(Exception):
    """Base class for all clustersim errors."""


class ConfigError(ClusterSimError):
    """Bad topology or run configuration (duplicate ids, dangling refs, ...)."""


class ParseError(ClusterSimError):
    """A trace row could not be parsed into its declared field types."""

    def __init__(self, row, field, reason):
        self.row = row
        self.field = field
        self.reason = reason
        super().__init__(f"row {row}: field '{field}': {reason}")


class ValidationError(ClusterSimError):
    """A parsed value violates a record invariant."""


class TraceValidationError(ValidationError):
    """One or more trace rows were rejected; carries all diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__(
            "%d invalid trace row(s):\n%s"
            % (len(self.diagnostics), "\n".join(str(d) for d in self.diagnostics))
        )


class ParamError(ClusterSimError):
    """Invalid synthetic-workload parameters."""


class CostModelError(ClusterSimError):
    """Invalid migration cost model (e.g. nonpositive bandwidth)."""


class UnknownPartition(ClusterSimError):
    """A request names a partition the cluster does not have."""


class UnknownJob(ClusterSimError):
    """An operation names a job that holds no resources."""


class SlotConflict(ClusterSimError):
    """A placement tried to allocate an occupied GPU slot (policy bug)."""

    def __init__(self, slot, existing_job_id):
        self.slot = slot
        self.existing_job_id = existing_job_id
        super().__init__(f"slot {slot} already held by job {existing_job_id!r}")


class AccountingError(ClusterSimError):
    """Internal bookkeeping went inconsistent (engine bug signal)."""
