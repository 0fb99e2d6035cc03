"""Tests for utilities modules."""
