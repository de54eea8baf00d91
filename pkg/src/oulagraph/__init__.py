"""Early pass/fail prediction on OULAD registrations with tabular baselines and heterogeneous graph models."""

__version__ = "0.1.0"
