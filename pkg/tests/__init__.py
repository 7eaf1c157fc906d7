"""Tests for the iregvi package."""
