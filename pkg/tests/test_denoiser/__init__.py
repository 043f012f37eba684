"""Tests for the denoiser package."""
