"""Single-use in-sandbox runner speaking the line-JSON wire protocol."""

from pyharness.runner import canonical_repr, handle_job, main, parse_call_args

__all__ = ["canonical_repr", "handle_job", "main", "parse_call_args"]
