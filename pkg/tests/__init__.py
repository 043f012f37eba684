"""Tests for metrichuman."""
