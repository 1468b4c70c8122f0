"""Tests for pbih."""
