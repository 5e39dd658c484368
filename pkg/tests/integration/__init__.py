"""Integration tests package."""