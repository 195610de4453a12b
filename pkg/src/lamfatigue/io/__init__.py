"""Configuration, mesh files, result emission and the command line."""
