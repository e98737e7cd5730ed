"""Exact thinning simulation of finite-network Hawkes processes."""

from .simulate import (AuditReport, CoupledResult, audit_log, compensator, residuals,
                       residuals_total, simulate, simulate_counts, simulate_coupled)
from .spec import (DEFAULT_CAP, AuditRecords, CountSnapshots, EventLog, SystemSpec,
                   impulsion_spec)

__all__ = ["DEFAULT_CAP", "AuditRecords", "AuditReport", "CountSnapshots", "CoupledResult",
           "EventLog", "SystemSpec", "audit_log", "compensator", "impulsion_spec", "residuals",
           "residuals_total", "simulate", "simulate_counts", "simulate_coupled"]
