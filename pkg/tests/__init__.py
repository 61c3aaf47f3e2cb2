"""
Test suite for relaxkit
"""
