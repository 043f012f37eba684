"""Tests for config package."""
