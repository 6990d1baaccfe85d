"""Closed 1-forms, fibrations over tori and Liouville tori of integrable systems."""

__version__ = "0.1.0"
