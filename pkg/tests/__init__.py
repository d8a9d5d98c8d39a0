"""Tests for spacerank."""
