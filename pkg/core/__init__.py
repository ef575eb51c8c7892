"""Core application logic, configuration, and exceptions."""
