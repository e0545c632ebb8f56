"""Unit test package for pytessindex."""
