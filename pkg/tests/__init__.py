"""Placeholder for __init__.py in tests."""
