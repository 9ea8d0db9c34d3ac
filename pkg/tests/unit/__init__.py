"""Unit tests for Threat Intelligence Graph components."""
