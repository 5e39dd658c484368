"""Test package for mrcap-bench."""
