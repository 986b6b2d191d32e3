"""Test suite for staggered-dg."""
