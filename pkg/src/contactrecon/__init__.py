"""Contact-constrained reconstruction of person-object motion and forces."""
__version__ = "0.1.0"
