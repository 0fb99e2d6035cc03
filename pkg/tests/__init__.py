"""Test suite for the drug repositioning pipeline."""
