"""Subcommands of the facilitation command line"""
