"""Integration tests for Threat Intelligence Graph components."""
